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

#include <compare>
#include <map>
#include <shared_mutex>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <json.hpp>

namespace anchorline {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Rigid transform: rotate by `q`, then translate by `t`. The quaternion is
// kept unit-norm with w >= 0 so that equal rotations compare equal
// component-wise.
class Pose {
 public:
  Pose();
  Pose(const Vec3& translation, const Eigen::Quaterniond& rotation);

  static Pose identity() { return Pose(); }
  static Pose from_translation(const Vec3& t);
  // Rotation about +Z by `yaw` radians, at `t`.
  static Pose from_yaw(double yaw, const Vec3& t = Vec3::Zero());
  // Quaternion given as (w, x, y, z).
  static Pose from_components(const Vec3& t, double w, double x, double y,
                              double z);

  const Vec3& translation() const { return t_; }
  const Eigen::Quaterniond& rotation() const { return q_; }

  // Heading of the rotated +X axis projected onto the XY plane.
  double yaw() const;

  bool operator==(const Pose& other) const;

 private:
  Vec3 t_;
  Eigen::Quaterniond q_;
};

// Result is `a` applied after `b`: x -> a(b(x)).
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);
Vec3 transform_point(const Pose& p, const Vec3& x);

// Component-wise on translation and (w,x,y,z).
bool approx_equal(const Pose& a, const Pose& b, double tol = 1e-9);

// Wraps to (-pi, pi].
double wrap_angle(double a);

// {"t":[x,y,z],"q":[w,x,y,z]}
nlohmann::ordered_json pose_to_json(const Pose& p);
// Throws MalformedDocument on bad shape, non-finite values or a quaternion
// whose norm is not 1 within 1e-9.
Pose pose_from_json(const nlohmann::json& j);

class FrameId {
 public:
  explicit FrameId(std::string name);
  const std::string& str() const { return name_; }
  auto operator<=>(const FrameId&) const = default;

 private:
  std::string name_;
};

// A forest of named frames. Each edge stores the pose of the child expressed
// in the parent. Readers may run concurrently; writers are exclusive.
class TransformTree {
 public:
  TransformTree() = default;
  TransformTree(const TransformTree&) = delete;
  TransformTree& operator=(const TransformTree&) = delete;

  // Adds a root frame with no parent. DuplicateFrame if it exists.
  void add_root(const FrameId& frame);
  // Adds `child` under `parent`. `parent` is created as a root if missing.
  // DuplicateFrame if `child` already exists.
  void add(const FrameId& parent, const FrameId& child,
           const Pose& child_in_parent);
  // Replaces the edge transform of an existing non-root frame.
  void update(const FrameId& child, const Pose& child_in_parent);

  bool contains(const FrameId& frame) const;
  std::size_t size() const;

  // Pose of `to` expressed in `from`.
  Pose lookup(const FrameId& from, const FrameId& to) const;

 private:
  struct Node {
    std::string parent;  // empty for roots
    Pose child_in_parent;
  };

  // Pose of `frame` in its root; fills `root`.
  Pose pose_in_root(const std::string& frame, std::string& root) const;

  mutable std::shared_mutex mutex_;
  std::map<std::string, Node> nodes_;
};

}  // namespace anchorline
