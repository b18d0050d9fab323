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

#include <deque>
#include <random>
#include <vector>

#include "anchorline/mapconv.hpp"

namespace anchorline::testing {

// Plain breadth-first search over Free cells; -1 when unreachable.
inline int bfs_steps(const OccupancyGrid& g, int sx, int sy, int gx, int gy) {
  std::vector<int> dist(g.cells.size(), -1);
  std::deque<std::pair<int, int>> q;
  dist[sy * g.width + sx] = 0;
  q.emplace_back(sx, sy);
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    if (x == gx && y == gy) return dist[y * g.width + x];
    const int nb[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
    for (auto [a, b] : nb) {
      if (!g.in_bounds(a, b) || g.at(a, b) != Cell::Free || dist[b * g.width + a] >= 0) continue;
      dist[b * g.width + a] = dist[y * g.width + x] + 1;
      q.emplace_back(a, b);
    }
  }
  return -1;
}

inline OccupancyGrid random_grid(std::mt19937_64& rng, int w, int h, double obstacle_fraction,
                                 double resolution = 0.1) {
  OccupancyGrid g;
  g.origin = Vec2(-1.0, 2.0);
  g.resolution = resolution;
  g.width = w;
  g.height = h;
  std::bernoulli_distribution blocked(obstacle_fraction);
  for (int i = 0; i < w * h; ++i) g.cells.push_back(blocked(rng) ? Cell::Occupied : Cell::Free);
  return g;
}

inline OccupancyGrid empty_grid(int w, int h, double resolution = 1.0) {
  OccupancyGrid g;
  g.resolution = resolution;
  g.width = w;
  g.height = h;
  g.cells.assign(static_cast<std::size_t>(w) * h, Cell::Free);
  return g;
}

}  // namespace anchorline::testing
