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

// Procedural test meshes.

#include <map>
#include <utility>

#include "anchorline/mapconv.hpp"

namespace anchorline::testing {

inline void append_box(TriangleMesh& mesh, const Vec3& lo, const Vec3& hi) {
  const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
  for (int k = 0; k < 8; ++k) {
    mesh.vertices.emplace_back(k & 1 ? hi.x() : lo.x(), k & 2 ? hi.y() : lo.y(),
                               k & 4 ? hi.z() : lo.z());
  }
  static constexpr std::uint32_t kFaces[12][3] = {
      {0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6},   // z-, z+
      {0, 1, 4}, {1, 5, 4}, {2, 6, 3}, {3, 6, 7},   // y-, y+
      {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};  // x-, x+
  for (const auto& f : kFaces) mesh.triangles.push_back({base + f[0], base + f[1], base + f[2]});
}

inline TriangleMesh box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  append_box(m, lo, hi);
  return m;
}

inline TriangleMesh unit_cube() { return box(Vec3::Constant(-0.5), Vec3::Constant(0.5)); }

// Icosahedron subdivided `levels` times and projected onto the sphere:
// 20 * 4^levels triangles (320 for two levels).
inline TriangleMesh icosphere(double radius, int levels) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh m;
  for (const auto& v : {Vec3(-1, t, 0), Vec3(1, t, 0), Vec3(-1, -t, 0), Vec3(1, -t, 0),
                        Vec3(0, -1, t), Vec3(0, 1, t), Vec3(0, -1, -t), Vec3(0, 1, -t),
                        Vec3(t, 0, -1), Vec3(t, 0, 1), Vec3(-t, 0, -1), Vec3(-t, 0, 1)}) {
    m.vertices.push_back(v.normalized());
  }
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < levels; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      const auto id = static_cast<std::uint32_t>(m.vertices.size() - 1);
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    for (const auto& f : m.triangles) {
      const auto a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    m.triangles = std::move(next);
  }
  for (auto& v : m.vertices) v *= radius;
  return m;
}

// A size x size room with 3 m walls of the given thickness standing on a
// floor slab, shifted by `offset` in X and Y. The wall boxes do not overlap.
inline TriangleMesh walled_room(double size = 10.0, double thickness = 0.2,
                                double offset = 0.0) {
  TriangleMesh m;
  const double h = 3.0;
  const Vec3 o(offset, offset, 0.0);
  append_box(m, o + Vec3(0, 0, -0.1), o + Vec3(size, size, 0));
  append_box(m, o + Vec3(0, 0, 0), o + Vec3(size, thickness, h));
  append_box(m, o + Vec3(0, size - thickness, 0), o + Vec3(size, size, h));
  append_box(m, o + Vec3(0, thickness, 0), o + Vec3(thickness, size - thickness, h));
  append_box(m, o + Vec3(size - thickness, thickness, 0), o + Vec3(size, size - thickness, h));
  return m;
}

}  // namespace anchorline::testing
