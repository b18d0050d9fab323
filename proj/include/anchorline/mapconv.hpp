/*
 * Copyright 2026 The Anchorline Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "anchorline/geometry.hpp"

namespace anchorline {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  std::array<Vec3, 3> corners(std::size_t tri) const {
    const auto& t = triangles[tri];
    return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
  }
};

struct MeshLoadResult {
  TriangleMesh mesh;
  std::size_t dropped_degenerate = 0;
};

enum class MeshFormat { Obj, Ply };

// ASCII OBJ (v/f records; texture and normal indices ignored) or ASCII PLY.
// ParseError carries the 1-based line number; a face with more than three
// vertices raises NonTriangleFace. Zero-area triangles are dropped.
MeshLoadResult load_mesh(std::istream& in, MeshFormat format);
// Format chosen from the extension (.obj / .ply).
MeshLoadResult load_mesh(const std::filesystem::path& path);

void write_obj(std::ostream& out, const TriangleMesh& mesh);

// Voxel centers sit at origin + resolution * (i, j, k).
struct GridSpec {
  Vec3 origin = Vec3::Zero();
  double resolution = 0.05;
  std::array<int, 3> dims{1, 1, 1};

  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  Vec3 center(int i, int j, int k) const {
    return origin + resolution * Vec3(i, j, k);
  }
};

// Covers the mesh bounds plus `margin_voxels` on every side, with the origin
// snapped to a multiple of the resolution.
GridSpec grid_for_mesh(const TriangleMesh& mesh, double resolution,
                       int margin_voxels = 2);

// Exact closest distance from `p` to the triangle (a, b, c).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c);

// Minimum point-to-mesh distance at every voxel center (x fastest, then y,
// then z). Uses a bounding-volume hierarchy; the result is identical to a
// scan over all triangles. Runs on `workers` threads (0 = hardware count)
// with a result independent of the thread count. EmptyMesh if no triangles.
std::vector<double> unsigned_distance(const TriangleMesh& mesh,
                                      const GridSpec& spec,
                                      unsigned workers = 0);

struct SdfGrid {
  GridSpec spec;
  std::vector<double> values;  // negative inside

  double at(int i, int j, int k) const { return values[spec.index(i, j, k)]; }
};

// Labels voxels reachable from the grid boundary through voxels farther than
// resolution/2 from the surface (6-connected) as outside (+); the rest as
// inside (-). Magnitudes are left untouched.
SdfGrid sign_by_flood_fill(std::vector<double> distances, const GridSpec& spec);

// unsigned_distance followed by sign_by_flood_fill.
SdfGrid build_sdf(const TriangleMesh& mesh, const GridSpec& spec,
                  unsigned workers = 0);

enum class Cell : std::uint8_t { Free, Occupied, Unknown };

struct OccupancyGrid {
  Vec2 origin = Vec2::Zero();  // world XY of cell (0, 0) center
  double resolution = 0.05;
  int width = 0;
  int height = 0;
  std::vector<Cell> cells;  // row-major, y rows of x cells

  bool in_bounds(int ix, int iy) const {
    return ix >= 0 && iy >= 0 && ix < width && iy < height;
  }
  Cell at(int ix, int iy) const {
    return cells[static_cast<std::size_t>(iy) * width + ix];
  }
  Cell& at(int ix, int iy) { return cells[static_cast<std::size_t>(iy) * width + ix]; }
  // Nearest cell index; may be out of bounds.
  std::array<int, 2> world_to_cell(const Vec2& p) const;
  Vec2 cell_center(int ix, int iy) const;
  // Unknown outside the grid.
  Cell at_world(const Vec2& p) const;

  bool operator==(const OccupancyGrid&) const = default;
};

// {"origin":[x,y],"resolution":r,"width":w,"height":h,"cells":"..."} with
// '.' free, '#' occupied, '?' unknown.
std::string occupancy_to_json(const OccupancyGrid& grid);
OccupancyGrid occupancy_from_json(const std::string& text);
OccupancyGrid load_occupancy(const std::filesystem::path& path);
void save_occupancy(const std::filesystem::path& path, const OccupancyGrid& grid);

struct SliceConfig {
  double z_height = 0.5;
  double occupied_band = 0.05;
};

// Samples the SDF at z_height (linear between the neighbouring layers) at
// every XY voxel column. Occupied iff the sample <= occupied_band.
// SliceOutOfRange if z_height is outside the grid's Z extent.
OccupancyGrid extract_slice(const SdfGrid& sdf, const SliceConfig& cfg);

}  // namespace anchorline
