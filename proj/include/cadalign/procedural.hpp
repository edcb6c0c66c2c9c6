#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cadalign/cad.hpp"
#include "cadalign/error.hpp"
#include "cadalign/geometry.hpp"
#include "cadalign/mesh.hpp"

namespace cadalign {

/// Procedural stand-ins for CAD models. Every generator fills the unit box
/// [-0.5, 0.5]^3 closely, with the base at y = -0.5 and +y up.
enum class Generator { Box, Cylinder, ChairLike, TableLike, LShelf };

inline constexpr Generator kAllGenerators[] = {Generator::Box, Generator::Cylinder,
                                               Generator::ChairLike, Generator::TableLike,
                                               Generator::LShelf};

inline const char* to_string(Generator g) {
  switch (g) {
    case Generator::Box: return "Box";
    case Generator::Cylinder: return "Cylinder";
    case Generator::ChairLike: return "ChairLike";
    case Generator::TableLike: return "TableLike";
    case Generator::LShelf: return "LShelf";
  }
  return "?";
}

inline Generator generator_from_string(const std::string& s) {
  for (Generator g : kAllGenerators)
    if (s == to_string(g)) return g;
  fail(ErrorKind::Validation, "unknown generator '" + s + "'");
}

inline std::string generator_category(Generator g) {
  switch (g) {
    case Generator::Box: return "cabinet";
    case Generator::Cylinder: return "trash bin";
    case Generator::ChairLike: return "chair";
    case Generator::TableLike: return "table";
    case Generator::LShelf: return "bookshelf";
  }
  return "other";
}

inline SymmetryTag generator_symmetry(Generator g) {
  switch (g) {
    case Generator::Box: return {SymmetryType::C4};
    case Generator::Cylinder: return {SymmetryType::Cinf};
    case Generator::TableLike: return {SymmetryType::C2};
    default: return {SymmetryType::None};
  }
}

/// Prism over a polygon in one coordinate plane. `profile` holds (u, v)
/// coordinates for axes (ua, va); the extrusion runs along the third axis.
/// The caps are fanned from profile[0], which must see every other vertex.
inline TriangleMesh make_prism(const std::vector<Eigen::Vector2d>& profile, int ua, int va,
                               double w0, double w1) {
  const int n = static_cast<int>(profile.size());
  require(n >= 3, "prism profile needs at least 3 vertices");
  const int wa = 3 - ua - va;
  TriangleMesh m;
  for (double w : {w0, w1})
    for (const auto& p : profile) {
      Vec3 v;
      v[ua] = p.x();
      v[va] = p.y();
      v[wa] = w;
      m.vertices.push_back(v);
    }
  for (int i = 1; i + 1 < n; ++i) {
    m.triangles.emplace_back(0, i + 1, i);
    m.triangles.emplace_back(n, n + i, n + i + 1);
  }
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    m.triangles.emplace_back(i, j, n + j);
    m.triangles.emplace_back(i, n + j, n + i);
  }
  return m;
}

/// Deterministic mesh for (generator, seed); the seed varies part sizes.
inline TriangleMesh generate_model(Generator g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  using V2 = Eigen::Vector2d;
  TriangleMesh m;
  switch (g) {
    case Generator::Box: {
      m = make_box(Vec3::Constant(-0.5), Vec3::Constant(0.5));
      break;
    }
    case Generator::Cylinder: {
      m = make_cylinder(Vec3(0, -0.5, 0), 0.5, 1.0, 24);
      break;
    }
    case Generator::ChairLike: {
      const double seat = u(-0.1, 0.0), th = u(0.2, 0.24), back = u(0.2, 0.24), leg = u(0.2, 0.22);
      // Seat and backrest share one side profile so no faces are buried.
      m = make_prism({V2(-0.5 + back, seat + th), V2(-0.5 + back, 0.5), V2(-0.5, 0.5),
                      V2(-0.5, seat), V2(0.5, seat), V2(0.5, seat + th)},
                     2, 1, -0.5, 0.5);
      for (double x : {-0.5, 0.5 - leg})
        for (double z : {-0.5, 0.5 - leg})
          m.append(make_box(Vec3(x, -0.5, z), Vec3(x + leg, seat, z + leg)));
      break;
    }
    case Generator::TableLike: {
      const double top = u(0.2, 0.24), leg = u(0.2, 0.22), depth = u(0.25, 0.35);
      m = make_box(Vec3(-0.5, 0.5 - top, -depth), Vec3(0.5, 0.5, depth));
      for (double x : {-0.5 + 0.02, 0.5 - 0.02 - leg})
        for (double z : {-depth + 0.02, depth - 0.02 - leg})
          m.append(make_box(Vec3(x, -0.5, z), Vec3(x + leg, 0.5 - top, z + leg)));
      break;
    }
    case Generator::LShelf: {
      const double xs = u(-0.2, 0.0), ys = u(-0.15, 0.05), depth = u(0.25, 0.35);
      m = make_prism({V2(xs, ys), V2(xs, 0.5), V2(-0.5, 0.5), V2(-0.5, -0.5), V2(0.5, -0.5),
                      V2(0.5, ys)},
                     0, 1, -depth, depth);
      break;
    }
  }
  m.category = generator_category(g);
  m.validate();
  return m;
}

inline CadModel build_cad(const std::string& id, Generator g, std::uint64_t seed) {
  return CadModel::build(id, generator_category(g), generate_model(g, seed),
                         generator_symmetry(g));
}

}  // namespace cadalign
