#pragma once

#include "cadalign/benchmark.hpp"
#include "cadalign/cad.hpp"
#include "cadalign/cmaes.hpp"
#include "cadalign/correspond.hpp"
#include "cadalign/distance_field.hpp"
#include "cadalign/error.hpp"
#include "cadalign/fusion.hpp"
#include "cadalign/geometry.hpp"
#include "cadalign/heatmap.hpp"
#include "cadalign/io.hpp"
#include "cadalign/keypoints.hpp"
#include "cadalign/lm.hpp"
#include "cadalign/mesh.hpp"
#include "cadalign/obb.hpp"
#include "cadalign/pipeline.hpp"
#include "cadalign/procedural.hpp"
#include "cadalign/ransac.hpp"
#include "cadalign/render.hpp"
#include "cadalign/scene.hpp"
#include "cadalign/types.hpp"
#include "cadalign/voxel_grid.hpp"
