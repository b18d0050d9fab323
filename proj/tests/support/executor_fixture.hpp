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

// A small walled room, missions placed in it and helpers to read back the
// event log. Shared by the executor tests, the service tests and the
// acceptance suite.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "anchorline/executor.hpp"
#include "anchorline/mission.hpp"

namespace anchorline::testing {

// Free square of side `size` centred on the origin, one cell of wall around
// it and optionally a 0.5 m pillar at (-2, 2).
inline std::shared_ptr<OccupancyGrid> room_grid(double size = 8.0, double resolution = 0.05,
                                                bool pillar = true) {
  auto g = std::make_shared<OccupancyGrid>();
  const int n = static_cast<int>(std::lround(size / resolution)) + 1;
  g->origin = Vec2(-size / 2, -size / 2);
  g->resolution = resolution;
  g->width = g->height = n;
  g->cells.assign(static_cast<std::size_t>(n) * n, Cell::Free);
  for (int i = 0; i < n; ++i) {
    g->at(i, 0) = g->at(i, n - 1) = g->at(0, i) = g->at(n - 1, i) = Cell::Occupied;
  }
  for (int iy = 0; iy < n && pillar; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const Vec2 c = g->cell_center(ix, iy);
      if (std::abs(c.x() + 2.0) <= 0.25 && std::abs(c.y() - 2.0) <= 0.25) {
        g->at(ix, iy) = Cell::Occupied;
      }
    }
  }
  return g;
}

struct PlacedMission {
  Mission mission;
  std::vector<std::string> ids;  // waypoint ids in placement order
  std::vector<Pose> world;       // ground-truth waypoint poses
};

struct Placement {
  double x, y, yaw;
  bool inspection = false;
};

// Places waypoints through the planning path (anchors created as needed) and
// connects them by index pairs, in the given order.
inline PlacedMission place_mission(AnchorStore& anchors, const std::string& id,
                                   const std::vector<Placement>& points,
                                   const std::vector<std::pair<int, int>>& edges) {
  PlacedMission out{make_mission(id), {}, {}};
  for (const auto& p : points) {
    const Pose world = Pose::from_yaw(p.yaw, Vec3(p.x, p.y, 0.0));
    auto [m, wp] = add_waypoint(out.mission, anchors, world, p.inspection, AnchorPolicy{});
    out.mission = std::move(m);
    out.ids.push_back(wp.id);
    out.world.push_back(world);
  }
  for (auto [a, b] : edges) out.mission = connect(out.mission, out.ids[a], out.ids[b]);
  return out;
}

// Five waypoints within 2.5 m of the first (one anchor), inspections at the
// second and fourth, and an Interactive branch at the third:
// 0 -> 1 -> 2 -> {3 (order 0), 4 (order 1)}, 3 -> 4.
inline PlacedMission branching_fixture(AnchorStore& anchors, const std::string& id = "fixture") {
  auto placed = place_mission(anchors, id,
                              {{0.0, 0.0, 0.0},
                               {1.5, 0.5, 1.0, true},
                               {2.0, -0.5, -0.5},
                               {1.0, -1.8, 3.0, true},
                               {-1.0, -1.5, 2.0}},
                              {{0, 1}, {1, 2}, {2, 3}, {2, 4}, {3, 4}});
  placed.mission = set_strategy(placed.mission, placed.ids[2], BranchStrategy::interactive());
  return placed;
}

inline std::vector<ExecutionState> state_trajectory(const EventLog& log) {
  std::vector<ExecutionState> out;
  for (const auto& e : log.since(0)) {
    if (e.kind != EventKind::StateChanged) continue;
    ExecutionState s;
    const std::string name = e.payload["state"];
    for (int k = 0; k <= static_cast<int>(ExecutionState::Kind::Failed); ++k) {
      if (name == to_string(static_cast<ExecutionState::Kind>(k))) {
        s.kind = static_cast<ExecutionState::Kind>(k);
      }
    }
    if (e.payload.contains("node")) s.node = e.payload["node"];
    if (e.payload.contains("reason")) s.reason = e.payload["reason"];
    out.push_back(s);
  }
  return out;
}

inline std::size_t count_events(const EventLog& log, EventKind kind) {
  std::size_t n = 0;
  for (const auto& e : log.since(0)) n += e.kind == kind;
  return n;
}

// Ticks until the state stops being Navigating or the budget runs out.
inline ExecutionState run_until_settled(Execution& exec, double dt = 0.05, int max_ticks = 200000) {
  ExecutionState s = exec.state();
  for (int i = 0; i < max_ticks && s.kind == ExecutionState::Kind::Navigating; ++i) {
    s = exec.tick(dt);
  }
  return s;
}

}  // namespace anchorline::testing
