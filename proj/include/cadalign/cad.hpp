#pragma once

#include <map>
#include <string>
#include <vector>

#include "cadalign/distance_field.hpp"
#include "cadalign/geometry.hpp"
#include "cadalign/mesh.hpp"
#include "cadalign/voxel_grid.hpp"

namespace cadalign {

inline constexpr int kCadGridDim = 32;
inline constexpr double kCadGridPadding = 0.15;  // model units

/// A CAD model with its distance field over the domain that heatmaps share.
struct CadModel {
  std::string id;
  std::string category;
  TriangleMesh mesh;  // model space
  VoxelGrid df;       // unsigned distance field, model space
  SymmetryTag sym;

  static CadModel build(std::string id, std::string category, TriangleMesh mesh,
                        SymmetryTag sym, double padding = kCadGridPadding) {
    CadModel m;
    m.id = std::move(id);
    m.category = std::move(category);
    m.df = mesh_to_df(mesh, Index3::Constant(kCadGridDim), padding);
    m.mesh = std::move(mesh);
    m.mesh.category = m.category;
    m.sym = sym;
    return m;
  }
};

using CadSet = std::map<std::string, CadModel>;

/// One annotated object: which CAD, its class, and its model-to-world pose.
struct GroundTruthEntry {
  std::string cad_id;
  std::string category;
  Transform pose;
  SymmetryTag sym;
};

}  // namespace cadalign
