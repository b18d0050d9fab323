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
#include <optional>
#include <vector>

#include "anchorline/geometry.hpp"
#include "anchorline/mapconv.hpp"

namespace anchorline {

inline constexpr double kArrivalPositionTolerance = 0.1;  // m
inline constexpr double kArrivalYawTolerance = 0.1;       // rad

struct GridPath {
  std::vector<std::array<int, 2>> cells;
  // Cell centers by default. Callers may replace the endpoints with the exact
  // start and goal positions before following the path.
  std::vector<Vec2> world_points;

  int steps() const { return cells.empty() ? 0 : static_cast<int>(cells.size()) - 1; }
  double length() const;
};

enum class RobotStatus { Idle, Moving, Arrived, Blocked };

const char* to_string(RobotStatus s);

struct RobotState {
  Vec2 position = Vec2::Zero();
  double yaw = 0.0;
  double speed = 0.0;
  RobotStatus status = RobotStatus::Idle;
  // Index into GridPath::world_points of the next point to reach.
  std::size_t next_index = 0;
};

// Shortest 4-connected path. A* with Manhattan heuristic and unit step cost;
// among equal f the lexicographically lower (ix, iy) is expanded first. Only
// Free cells are traversable.
// Throws StartOccupied / GoalOccupied if an endpoint is not on a Free cell,
// NoPath if the goal is unreachable.
GridPath plan(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal);

// Starts following a new path from its first point.
RobotState begin_follow(RobotState state);

// Advances a Moving robot by at most v * dt along the path polyline, facing
// the direction of travel. On reaching the final point the status becomes
// Arrived, speed drops to zero and, if given, the yaw is set to final_yaw.
// Robots that are not Moving are returned unchanged. InvalidArgument if
// dt <= 0 or v < 0.
RobotState step(const RobotState& state, const GridPath& path, double dt, double v,
                std::optional<double> final_yaw = std::nullopt);

RobotState preempt(RobotState state);

}  // namespace anchorline
