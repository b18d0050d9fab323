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

#include "anchorline/errors.hpp"
#include "anchorline/gestures.hpp"

namespace anchorline {

const char* to_string(RobotCommand::Kind kind) {
  switch (kind) {
    case RobotCommand::Kind::Goal:
      return "Goal";
    case RobotCommand::Kind::Preempt:
      return "Preempt";
    case RobotCommand::Kind::NoOp:
      return "NoOp";
  }
  return "?";
}

RobotCommand gesture_to_command(GestureLabel label, const Pose& headset, const Vec3& hand,
                                const CommandConfig& cfg) {
  RobotCommand cmd;
  const Vec3& head = headset.translation();
  switch (label) {
    case GestureLabel::Stop:
      cmd.kind = RobotCommand::Kind::Preempt;
      return cmd;
    case GestureLabel::Background:
      return cmd;
    case GestureLabel::ComeHere: {
      const Vec3 forward = headset.rotation() * Vec3::UnitX();
      const Vec2 flat(forward.x(), forward.y());
      if (flat.norm() < 1e-9) {
        throw Error(Errc::InvalidArgument, "headset is looking straight up or down");
      }
      cmd.kind = RobotCommand::Kind::Goal;
      cmd.position = head.head<2>() + cfg.front_offset * flat.normalized();
      const Vec2 back = head.head<2>() - cmd.position;
      cmd.yaw = wrap_angle(std::atan2(back.y(), back.x()));
      return cmd;
    }
    case GestureLabel::Point: {
      const Vec3 dir = hand - head;
      if (!(dir.z() < 0.0) || !(head.z() > 0.0)) {
        throw Error(Errc::RayParallelToGround, "pointing ray does not reach the ground");
      }
      const double s = -head.z() / dir.z();
      const Vec3 hit = head + s * dir;
      cmd.kind = RobotCommand::Kind::Goal;
      cmd.position = hit.head<2>();
      cmd.yaw = dir.head<2>().norm() > 1e-12 ? wrap_angle(std::atan2(dir.y(), dir.x()))
                                             : headset.yaw();
      return cmd;
    }
  }
  return cmd;
}

void check_goal_on_map(const RobotCommand& cmd, const OccupancyGrid& grid) {
  if (cmd.kind != RobotCommand::Kind::Goal) return;
  if (grid.at_world(cmd.position) == Cell::Unknown) {
    throw Error(Errc::GoalOutsideMap, "goal (" + std::to_string(cmd.position.x()) + ", " +
                                          std::to_string(cmd.position.y()) +
                                          ") is outside the known map");
  }
}

}  // namespace anchorline
