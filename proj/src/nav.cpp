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
#include "anchorline/nav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <queue>
#include <tuple>

#include "anchorline/errors.hpp"

namespace anchorline {

double GridPath::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < world_points.size(); ++i) {
    total += (world_points[i] - world_points[i - 1]).norm();
  }
  return total;
}

const char* to_string(RobotStatus s) {
  switch (s) {
    case RobotStatus::Idle:
      return "Idle";
    case RobotStatus::Moving:
      return "Moving";
    case RobotStatus::Arrived:
      return "Arrived";
    case RobotStatus::Blocked:
      return "Blocked";
  }
  return "?";
}

GridPath plan(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal) {
  const auto [sx, sy] = grid.world_to_cell(start);
  const auto [gx, gy] = grid.world_to_cell(goal);
  if (!grid.in_bounds(sx, sy) || grid.at(sx, sy) != Cell::Free) {
    throw Error(Errc::StartOccupied, "start cell (" + std::to_string(sx) + ", " +
                                         std::to_string(sy) + ") is not free");
  }
  if (!grid.in_bounds(gx, gy) || grid.at(gx, gy) != Cell::Free) {
    throw Error(Errc::GoalOccupied, "goal cell (" + std::to_string(gx) + ", " +
                                        std::to_string(gy) + ") is not free");
  }

  const auto n = static_cast<std::size_t>(grid.width) * grid.height;
  auto idx = [&](int x, int y) { return static_cast<std::size_t>(y) * grid.width + x; };
  constexpr std::int64_t kUnseen = -1;
  std::vector<int> g(n, -1);
  std::vector<std::int64_t> parent(n, kUnseen);
  std::vector<std::uint8_t> closed(n, 0);

  using Entry = std::tuple<int, int, int>;  // f, ix, iy
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  auto h = [&](int x, int y) { return std::abs(x - gx) + std::abs(y - gy); };
  g[idx(sx, sy)] = 0;
  open.emplace(h(sx, sy), sx, sy);

  static constexpr int kSteps[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  bool found = false;
  while (!open.empty()) {
    const auto [f, x, y] = open.top();
    open.pop();
    const std::size_t cur = idx(x, y);
    if (closed[cur]) continue;
    closed[cur] = 1;
    if (x == gx && y == gy) {
      found = true;
      break;
    }
    for (const auto& s : kSteps) {
      const int nx = x + s[0], ny = y + s[1];
      if (!grid.in_bounds(nx, ny) || grid.at(nx, ny) != Cell::Free) continue;
      const std::size_t next = idx(nx, ny);
      if (closed[next]) continue;
      const int cand = g[cur] + 1;
      if (g[next] < 0 || cand < g[next]) {
        g[next] = cand;
        parent[next] = static_cast<std::int64_t>(cur);
        open.emplace(cand + h(nx, ny), nx, ny);
      }
    }
  }
  if (!found) throw Error(Errc::NoPath, "goal is not reachable from start");

  GridPath path;
  for (std::int64_t c = static_cast<std::int64_t>(idx(gx, gy)); c != kUnseen; c = parent[c]) {
    const int x = static_cast<int>(c % grid.width), y = static_cast<int>(c / grid.width);
    path.cells.push_back({x, y});
  }
  std::reverse(path.cells.begin(), path.cells.end());
  path.world_points.reserve(path.cells.size());
  for (const auto& [x, y] : path.cells) path.world_points.push_back(grid.cell_center(x, y));
  return path;
}

RobotState begin_follow(RobotState state) {
  state.status = RobotStatus::Moving;
  state.next_index = 0;
  return state;
}

RobotState step(const RobotState& state, const GridPath& path, double dt, double v,
                std::optional<double> final_yaw) {
  if (!(dt > 0.0) || !(v >= 0.0)) {
    throw Error(Errc::InvalidArgument, "step needs dt > 0 and v >= 0");
  }
  if (state.status != RobotStatus::Moving) return state;
  RobotState next = state;
  double budget = v * dt;
  const auto& pts = path.world_points;
  while (next.next_index < pts.size()) {
    const Vec2 seg = pts[next.next_index] - next.position;
    const double len = seg.norm();
    if (len <= budget) {
      next.position = pts[next.next_index];
      if (len > 0.0) next.yaw = std::atan2(seg.y(), seg.x());
      budget -= len;
      ++next.next_index;
      continue;
    }
    if (budget > 0.0) {
      next.position += seg * (budget / len);
      next.yaw = std::atan2(seg.y(), seg.x());
    }
    break;
  }
  if (next.next_index >= pts.size()) {
    next.status = RobotStatus::Arrived;
    next.speed = 0.0;
    if (final_yaw) next.yaw = wrap_angle(*final_yaw);
  } else {
    next.speed = v;
  }
  next.yaw = wrap_angle(next.yaw);
  return next;
}

RobotState preempt(RobotState state) {
  state.status = RobotStatus::Idle;
  state.speed = 0.0;
  return state;
}

}  // namespace anchorline
