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
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "anchorline/errors.hpp"
#include "anchorline/nav.hpp"
#include "support/grid_oracle.hpp"

namespace anchorline {
namespace {

using testing::bfs_steps;
using testing::empty_grid;
using testing::random_grid;

Errc plan_error(const OccupancyGrid& g, const Vec2& s, const Vec2& t) {
  try {
    plan(g, s, t);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidArgument;
}

void expect_valid_path(const OccupancyGrid& g, const GridPath& p) {
  ASSERT_EQ(p.cells.size(), p.world_points.size());
  for (std::size_t i = 0; i < p.cells.size(); ++i) {
    const auto [x, y] = p.cells[i];
    ASSERT_TRUE(g.in_bounds(x, y));
    EXPECT_EQ(g.at(x, y), Cell::Free);
    EXPECT_EQ(p.world_points[i], g.cell_center(x, y));
    if (i > 0) {
      const auto [px, py] = p.cells[i - 1];
      EXPECT_EQ(std::abs(x - px) + std::abs(y - py), 1);
    }
  }
}

TEST(PlanTest, StraightCorridor) {
  const auto g = empty_grid(5, 5);
  const auto p = plan(g, Vec2(0, 0), Vec2(0, 4));
  EXPECT_EQ(p.steps(), 4);
  expect_valid_path(g, p);
}

TEST(PlanTest, StartEqualsGoal) {
  const auto p = plan(empty_grid(5, 5), Vec2(2, 2), Vec2(2.2, 1.9));
  EXPECT_EQ(p.steps(), 0);
  ASSERT_EQ(p.cells.size(), 1u);
}

TEST(PlanTest, Errors) {
  auto g = empty_grid(5, 5);
  g.at(1, 1) = Cell::Occupied;
  g.at(3, 3) = Cell::Unknown;
  EXPECT_EQ(plan_error(g, Vec2(1, 1), Vec2(0, 0)), Errc::StartOccupied);
  EXPECT_EQ(plan_error(g, Vec2(0, 0), Vec2(1, 1)), Errc::GoalOccupied);
  EXPECT_EQ(plan_error(g, Vec2(0, 0), Vec2(3, 3)), Errc::GoalOccupied);
  EXPECT_EQ(plan_error(g, Vec2(-3, 0), Vec2(0, 0)), Errc::StartOccupied);
  EXPECT_EQ(plan_error(g, Vec2(0, 0), Vec2(9, 0)), Errc::GoalOccupied);
  for (int y = 0; y < 5; ++y) g.at(2, y) = Cell::Occupied;
  EXPECT_EQ(plan_error(g, Vec2(0, 0), Vec2(4, 4)), Errc::NoPath);
}

TEST(PlanTest, TieBreakIsDeterministic) {
  // Many shortest paths exist on an empty grid; the same one must come back.
  const auto g = empty_grid(8, 8);
  const auto a = plan(g, Vec2(0, 0), Vec2(7, 7));
  const auto b = plan(g, Vec2(0, 0), Vec2(7, 7));
  EXPECT_EQ(a.cells, b.cells);
  EXPECT_EQ(a.steps(), 14);
}

void check_against_bfs(int size, int instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  int reachable = 0;
  for (int n = 0; n < instances; ++n) {
    auto g = random_grid(rng, size, size, 0.2);
    std::uniform_int_distribution<int> cell(0, size - 1);
    int sx, sy, gx, gy;
    do {
      sx = cell(rng), sy = cell(rng);
    } while (g.at(sx, sy) != Cell::Free);
    do {
      gx = cell(rng), gy = cell(rng);
    } while (g.at(gx, gy) != Cell::Free);
    const int expected = bfs_steps(g, sx, sy, gx, gy);
    const Vec2 s = g.cell_center(sx, sy), t = g.cell_center(gx, gy);
    if (expected < 0) {
      EXPECT_EQ(plan_error(g, s, t), Errc::NoPath);
      continue;
    }
    ++reachable;
    const auto p = plan(g, s, t);
    EXPECT_EQ(p.steps(), expected) << "instance " << n;
    expect_valid_path(g, p);
  }
  EXPECT_GT(reachable, instances / 2);
}

TEST(PlanTest, MatchesBfsOnRandomGrids20) { check_against_bfs(20, 100, 11); }
TEST(PlanTest, MatchesBfsOnRandomGrids50) { check_against_bfs(50, 20, 12); }

GridPath segment(Vec2 a, Vec2 b) {
  GridPath p;
  p.cells = {{0, 0}, {1, 0}};
  p.world_points = {a, b};
  return p;
}

TEST(StepTest, AdvancesByVelocityTimesDt) {
  const auto path = segment(Vec2(0, 0), Vec2(1, 0));
  auto s = begin_follow(RobotState{});
  s = step(s, path, 1.0, 0.5);
  EXPECT_NEAR(s.position.x(), 0.5, 1e-12);
  EXPECT_EQ(s.status, RobotStatus::Moving);
  EXPECT_DOUBLE_EQ(s.speed, 0.5);
  s = step(s, path, 1.0, 0.5);
  EXPECT_EQ(s.status, RobotStatus::Arrived);
  EXPECT_EQ(s.position, Vec2(1, 0));
  EXPECT_EQ(s.speed, 0.0);
}

TEST(StepTest, AtFinalPointArrivesWithoutMoving) {
  const auto path = segment(Vec2(0, 0), Vec2(1, 0));
  RobotState s;
  s.position = Vec2(1, 0);
  s.yaw = 0.3;
  s.status = RobotStatus::Moving;
  s.next_index = 1;
  const auto out = step(s, path, 0.1, 1.0);
  EXPECT_EQ(out.status, RobotStatus::Arrived);
  EXPECT_EQ(out.position, s.position);
  EXPECT_EQ(out.yaw, s.yaw);
}

TEST(StepTest, FacesTravelAndTakesFinalYaw) {
  const auto path = segment(Vec2(0, 0), Vec2(0, -2));
  auto s = step(begin_follow(RobotState{}), path, 0.5, 1.0, 1.0);
  EXPECT_NEAR(s.yaw, -std::numbers::pi / 2, 1e-12);
  s = step(s, path, 2.0, 1.0, 1.0);
  EXPECT_EQ(s.status, RobotStatus::Arrived);
  EXPECT_DOUBLE_EQ(s.yaw, 1.0);
}

TEST(StepTest, RejectsNonPositiveDt) {
  EXPECT_THROW(step(RobotState{}, GridPath{}, 0.0, 1.0), Error);
  EXPECT_THROW(step(RobotState{}, GridPath{}, 0.1, -1.0), Error);
}

TEST(StepTest, TelescopesToPolylineLengthOnRandomPaths) {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 30; ++n) {
    auto g = random_grid(rng, 30, 30, 0.15);
    std::uniform_int_distribution<int> cell(0, 29);
    int sx, sy, gx, gy;
    do {
      sx = cell(rng), sy = cell(rng);
      gx = cell(rng), gy = cell(rng);
    } while (g.at(sx, sy) != Cell::Free || g.at(gx, gy) != Cell::Free ||
             testing::bfs_steps(g, sx, sy, gx, gy) < 0);
    auto path = plan(g, g.cell_center(sx, sy), g.cell_center(gx, gy));
    const double v = 0.35, dt = 0.1;
    RobotState s;
    s.position = path.world_points.front();
    s = begin_follow(s);
    double travelled = 0.0;
    int calls = 0;
    while (s.status == RobotStatus::Moving && calls < 100000) {
      const auto next = step(s, path, dt, v);
      const double moved = (next.position - s.position).norm();
      ASSERT_LE(moved, v * dt + 1e-9);
      // Inside a segment the motion is straight; around corners it is shorter.
      travelled += moved;
      s = next;
      ++calls;
    }
    ASSERT_EQ(s.status, RobotStatus::Arrived);
    EXPECT_EQ(s.position, path.world_points.back());
    EXPECT_LE(std::abs(calls * v * dt - path.length()), v * dt + 1e-9);
    EXPECT_LE(travelled, path.length() + 1e-9);
  }
}

TEST(PreemptTest, StopsAndIsIdempotent) {
  const auto path = segment(Vec2(0, 0), Vec2(5, 0));
  auto s = step(begin_follow(RobotState{}), path, 1.0, 1.0);
  s = preempt(s);
  EXPECT_EQ(s.status, RobotStatus::Idle);
  EXPECT_EQ(s.speed, 0.0);
  const auto again = preempt(s);
  EXPECT_EQ(again.status, RobotStatus::Idle);
  EXPECT_EQ(again.position, s.position);
  const auto after = step(s, path, 1.0, 1.0);
  EXPECT_EQ(after.position, s.position);
  EXPECT_EQ(after.status, RobotStatus::Idle);
}

}  // namespace
}  // namespace anchorline
