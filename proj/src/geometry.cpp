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
#include "anchorline/geometry.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include "anchorline/errors.hpp"

namespace anchorline {
namespace {

Eigen::Quaterniond canonical(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || n < 1e-12) {
    throw Error(Errc::InvalidPose, "quaternion has zero or non-finite norm");
  }
  // Leave already-unit quaternions bit-identical so canonicalization is
  // idempotent across serialization.
  Eigen::Quaterniond u = std::abs(n - 1.0) <= 1e-14
                             ? q
                             : Eigen::Quaterniond(q.coeffs() / n);
  if (u.w() < 0.0) u.coeffs() = -u.coeffs();
  return u;
}

}  // namespace

Pose::Pose() : t_(Vec3::Zero()), q_(Eigen::Quaterniond::Identity()) {}

Pose::Pose(const Vec3& translation, const Eigen::Quaterniond& rotation)
    : t_(translation), q_(canonical(rotation)) {
  if (!t_.allFinite()) {
    throw Error(Errc::InvalidPose, "translation is not finite");
  }
}

Pose Pose::from_translation(const Vec3& t) {
  return Pose(t, Eigen::Quaterniond::Identity());
}

Pose Pose::from_yaw(double yaw, const Vec3& t) {
  return Pose(t, Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())));
}

Pose Pose::from_components(const Vec3& t, double w, double x, double y,
                           double z) {
  return Pose(t, Eigen::Quaterniond(w, x, y, z));
}

double Pose::yaw() const {
  const Vec3 x_axis = q_ * Vec3::UnitX();
  return std::atan2(x_axis.y(), x_axis.x());
}

bool Pose::operator==(const Pose& other) const {
  return t_ == other.t_ && q_.coeffs() == other.q_.coeffs();
}

Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.translation() + a.rotation() * b.translation(),
              a.rotation() * b.rotation());
}

Pose invert(const Pose& p) {
  const Eigen::Quaterniond qi = p.rotation().conjugate();
  return Pose(-(qi * p.translation()), qi);
}

Vec3 transform_point(const Pose& p, const Vec3& x) {
  return p.rotation() * x + p.translation();
}

bool approx_equal(const Pose& a, const Pose& b, double tol) {
  return (a.translation() - b.translation()).cwiseAbs().maxCoeff() <= tol &&
         (a.rotation().coeffs() - b.rotation().coeffs()).cwiseAbs().maxCoeff() <=
             tol;
}

double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

nlohmann::ordered_json pose_to_json(const Pose& p) {
  const auto& t = p.translation();
  const auto& q = p.rotation();
  nlohmann::ordered_json j;
  j["t"] = {t.x(), t.y(), t.z()};
  j["q"] = {q.w(), q.x(), q.y(), q.z()};
  return j;
}

Pose pose_from_json(const nlohmann::json& j) {
  auto numbers = [&](const char* key, std::size_t n) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_array() ||
        j[key].size() != n) {
      throw Error(Errc::MalformedDocument,
                  std::string("pose field '") + key + "' must be an array of " +
                      std::to_string(n) + " numbers");
    }
    std::vector<double> v;
    for (const auto& e : j[key]) {
      if (!e.is_number()) {
        throw Error(Errc::MalformedDocument,
                    std::string("pose field '") + key + "' holds a non-number");
      }
      const double d = e.get<double>();
      if (!std::isfinite(d)) {
        throw Error(Errc::MalformedDocument, "pose value is not finite");
      }
      v.push_back(d);
    }
    return v;
  };
  if (j.is_object() && j.size() != 2) {
    throw Error(Errc::MalformedDocument, "pose must hold exactly 't' and 'q'");
  }
  const auto t = numbers("t", 3);
  const auto q = numbers("q", 4);
  const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (std::abs(norm - 1.0) > 1e-9) {
    throw Error(Errc::MalformedDocument, "pose quaternion is not unit-norm");
  }
  return Pose::from_components(Vec3(t[0], t[1], t[2]), q[0], q[1], q[2], q[3]);
}

FrameId::FrameId(std::string name) : name_(std::move(name)) {
  if (name_.empty()) {
    throw Error(Errc::InvalidArgument, "frame id must be non-empty");
  }
}

void TransformTree::add_root(const FrameId& frame) {
  std::unique_lock lock(mutex_);
  if (nodes_.contains(frame.str())) {
    throw Error(Errc::DuplicateFrame, frame.str());
  }
  nodes_.emplace(frame.str(), Node{});
}

void TransformTree::add(const FrameId& parent, const FrameId& child,
                        const Pose& child_in_parent) {
  std::unique_lock lock(mutex_);
  if (nodes_.contains(child.str())) {
    throw Error(Errc::DuplicateFrame, child.str());
  }
  // A brand-new child cannot close a cycle, so the forest invariant holds.
  nodes_.try_emplace(parent.str(), Node{});
  nodes_.emplace(child.str(), Node{parent.str(), child_in_parent});
}

void TransformTree::update(const FrameId& child, const Pose& child_in_parent) {
  std::unique_lock lock(mutex_);
  auto it = nodes_.find(child.str());
  if (it == nodes_.end()) throw Error(Errc::UnknownFrame, child.str());
  if (it->second.parent.empty()) {
    throw Error(Errc::InvalidArgument, "cannot set a transform on root frame " +
                                           child.str());
  }
  it->second.child_in_parent = child_in_parent;
}

bool TransformTree::contains(const FrameId& frame) const {
  std::shared_lock lock(mutex_);
  return nodes_.contains(frame.str());
}

std::size_t TransformTree::size() const {
  std::shared_lock lock(mutex_);
  return nodes_.size();
}

Pose TransformTree::pose_in_root(const std::string& frame,
                                 std::string& root) const {
  auto it = nodes_.find(frame);
  if (it == nodes_.end()) throw Error(Errc::UnknownFrame, frame);
  Pose acc;
  std::string current = frame;
  while (!it->second.parent.empty()) {
    acc = compose(it->second.child_in_parent, acc);
    current = it->second.parent;
    it = nodes_.find(current);
  }
  root = current;
  return acc;
}

Pose TransformTree::lookup(const FrameId& from, const FrameId& to) const {
  std::shared_lock lock(mutex_);
  std::string root_from;
  std::string root_to;
  const Pose from_in_root = pose_in_root(from.str(), root_from);
  const Pose to_in_root = pose_in_root(to.str(), root_to);
  if (root_from != root_to) {
    throw Error(Errc::DisconnectedFrames, from.str() + " and " + to.str());
  }
  if (from == to) return Pose();
  return compose(invert(from_in_root), to_in_root);
}

}  // namespace anchorline
