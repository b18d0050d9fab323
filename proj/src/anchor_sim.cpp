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
#include "anchorline/anchor_sim.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

#include "anchorline/errors.hpp"
#include "internal/io.hpp"

namespace anchorline {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Anchor anchor_from_json(const json& j) {
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string() ||
      !j.contains("world_pose") || !j.contains("features") ||
      !j["features"].is_array() || !j.contains("created_at") ||
      !j["created_at"].is_number_integer()) {
    throw Error(Errc::MalformedDocument, "anchor entry is missing fields");
  }
  Anchor a;
  a.id = j["id"].get<std::string>();
  a.world_pose = pose_from_json(j["world_pose"]);
  a.created_at = j["created_at"].get<std::int64_t>();
  for (const auto& f : j["features"]) {
    if (!f.is_array() || f.size() != 3 || !f[0].is_number() ||
        !f[1].is_number() || !f[2].is_number()) {
      throw Error(Errc::MalformedDocument, "feature must be [x,y,z]");
    }
    a.features.emplace_back(f[0].get<double>(), f[1].get<double>(),
                            f[2].get<double>());
  }
  if (a.features.empty()) {
    throw Error(Errc::MalformedDocument, "anchor " + a.id + " has no features");
  }
  return a;
}

}  // namespace

void AnchorPolicy::validate() const {
  if (!(new_anchor_radius > 0.0) || feature_count < 1 || !(feature_radius > 0.0)) {
    throw Error(Errc::InvalidArgument, "anchor policy out of range");
  }
}

void RelocModel::validate() const {
  if (!(0.0 < degrade_onset && degrade_onset < cutoff) || sigma_t0 < 0.0 ||
      sigma_r0 < 0.0 || min_visible_fraction < 0.0 || min_visible_fraction > 1.0) {
    throw Error(Errc::InvalidArgument, "relocalization model out of range");
  }
}

double RelocModel::success_probability(double d) const {
  if (d <= degrade_onset) return 1.0;
  if (d >= cutoff) return 0.0;
  return (cutoff - d) / (cutoff - degrade_onset);
}

double RelocModel::sigma_t(double d) const {
  return sigma_t0 * (1.0 + std::max(0.0, d - degrade_onset));
}

double RelocModel::sigma_r(double d) const {
  return sigma_r0 * (1.0 + std::max(0.0, d - degrade_onset));
}

ordered_json reloc_model_to_json(const RelocModel& m) {
  ordered_json j;
  j["sigma_t0"] = m.sigma_t0;
  j["sigma_r0"] = m.sigma_r0;
  j["degrade_onset"] = m.degrade_onset;
  j["cutoff"] = m.cutoff;
  j["min_visible_fraction"] = m.min_visible_fraction;
  j["seed"] = m.seed;
  return j;
}

RelocModel reloc_model_from_json(const json& j) {
  RelocModel m;
  if (!j.is_object()) throw Error(Errc::MalformedDocument, "reloc model must be an object");
  m.sigma_t0 = j.value("sigma_t0", m.sigma_t0);
  m.sigma_r0 = j.value("sigma_r0", m.sigma_r0);
  m.degrade_onset = j.value("degrade_onset", m.degrade_onset);
  m.cutoff = j.value("cutoff", m.cutoff);
  m.min_visible_fraction = j.value("min_visible_fraction", m.min_visible_fraction);
  m.seed = j.value("seed", m.seed);
  m.validate();
  return m;
}

AnchorStore::AnchorStore(std::filesystem::path path, std::uint64_t id_seed)
    : path_(std::move(path)), rng_(id_seed) {}

std::unique_ptr<AnchorStore> AnchorStore::open(const std::filesystem::path& path,
                                               std::uint64_t id_seed) {
  auto store = std::make_unique<AnchorStore>(path, id_seed);
  if (!std::filesystem::exists(path)) {
    store->commit_locked();
    return store;
  }
  try {
    const json doc = json::parse(internal::read_file(path));
    if (!doc.is_object() || !doc.contains("anchors") || !doc["anchors"].is_array()) {
      throw Error(Errc::MalformedDocument, "expected {\"anchors\":[...]}");
    }
    for (const auto& entry : doc["anchors"]) {
      Anchor a = anchor_from_json(entry);
      if (store->anchors_.contains(a.id)) {
        throw Error(Errc::MalformedDocument, "duplicate anchor id " + a.id);
      }
      store->order_.push_back(a.id);
      store->anchors_.emplace(a.id, std::move(a));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::StoreCorrupt, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(Errc::StoreCorrupt, path.string() + ": " + e.what());
  }
  return store;
}

std::string AnchorStore::next_uuid_locked() {
  std::uniform_int_distribution<std::uint64_t> dist;
  std::uint64_t hi = dist(rng_);
  std::uint64_t lo = dist(rng_);
  hi = (hi & 0xFFFFFFFFFFFF0FFFull) | 0x0000000000004000ull;  // version 4
  lo = (lo & 0x3FFFFFFFFFFFFFFFull) | 0x8000000000000000ull;  // RFC 4122 variant
  char buf[37];
  std::snprintf(buf, sizeof(buf), "%08x-%04x-%04x-%04x-%012llx",
                static_cast<unsigned>(hi >> 32), static_cast<unsigned>((hi >> 16) & 0xFFFF),
                static_cast<unsigned>(hi & 0xFFFF), static_cast<unsigned>(lo >> 48),
                static_cast<unsigned long long>(lo & 0xFFFFFFFFFFFFull));
  return buf;
}

Anchor AnchorStore::create_anchor(const Pose& device_pose,
                                  const AnchorPolicy& policy) {
  policy.validate();
  std::unique_lock lock(mutex_);
  Anchor a;
  do {
    a.id = next_uuid_locked();
  } while (anchors_.contains(a.id));
  a.world_pose = device_pose;
  a.created_at = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::system_clock::now().time_since_epoch())
                     .count();

  // Uniform in the ball: isotropic direction, radius ~ R * cbrt(u).
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  a.features.reserve(static_cast<std::size_t>(policy.feature_count));
  for (int i = 0; i < policy.feature_count; ++i) {
    Vec3 dir;
    do {
      dir = Vec3(normal(rng_), normal(rng_), normal(rng_));
    } while (dir.norm() < 1e-12);
    const double r = policy.feature_radius * std::cbrt(unit(rng_));
    a.features.push_back(device_pose.translation() + r * dir.normalized());
  }

  order_.push_back(a.id);
  anchors_.emplace(a.id, a);
  try {
    commit_locked();
  } catch (...) {
    anchors_.erase(a.id);
    order_.pop_back();
    throw;
  }
  return a;
}

void AnchorStore::insert(Anchor anchor) {
  if (anchor.features.empty()) {
    throw Error(Errc::InvalidArgument, "anchor needs at least one feature");
  }
  std::unique_lock lock(mutex_);
  if (anchors_.contains(anchor.id)) {
    throw Error(Errc::InvalidArgument, "duplicate anchor id " + anchor.id);
  }
  const std::string id = anchor.id;
  order_.push_back(id);
  anchors_.emplace(id, std::move(anchor));
  try {
    commit_locked();
  } catch (...) {
    anchors_.erase(id);
    order_.pop_back();
    throw;
  }
}

std::optional<Anchor> AnchorStore::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = anchors_.find(id);
  if (it == anchors_.end()) return std::nullopt;
  return it->second;
}

Anchor AnchorStore::get(const std::string& id) const {
  auto a = find(id);
  if (!a) throw Error(Errc::UnknownAnchor, id);
  return *a;
}

bool AnchorStore::contains(const std::string& id) const {
  std::shared_lock lock(mutex_);
  return anchors_.contains(id);
}

std::vector<Anchor> AnchorStore::all() const {
  std::shared_lock lock(mutex_);
  std::vector<Anchor> out;
  out.reserve(order_.size());
  for (const auto& id : order_) out.push_back(anchors_.at(id));
  return out;
}

std::size_t AnchorStore::size() const {
  std::shared_lock lock(mutex_);
  return anchors_.size();
}

std::string AnchorStore::to_document() const {
  std::shared_lock lock(mutex_);
  return document_locked();
}

std::string AnchorStore::document_locked() const {
  ordered_json doc;
  doc["anchors"] = ordered_json::array();
  for (const auto& id : order_) {
    const Anchor& a = anchors_.at(id);
    ordered_json e;
    e["id"] = a.id;
    e["world_pose"] = pose_to_json(a.world_pose);
    e["features"] = ordered_json::array();
    for (const auto& f : a.features) e["features"].push_back({f.x(), f.y(), f.z()});
    e["created_at"] = a.created_at;
    doc["anchors"].push_back(std::move(e));
  }
  return doc.dump();
}

void AnchorStore::commit_locked() const {
  if (path_.empty()) return;
  internal::write_file_atomic(path_, document_locked());
}

bool needs_new_anchor(std::span<const Anchor> existing, const Vec3& device_pos,
                      const AnchorPolicy& policy) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : existing) {
    best = std::min(best, (a.world_pose.translation() - device_pos).norm());
  }
  return best > policy.new_anchor_radius;
}

std::optional<LocalizationResult> query(const AnchorStore& store,
                                        const std::string& anchor_id,
                                        const Pose& device_pose,
                                        const RelocModel& model,
                                        std::uint64_t query_index) {
  model.validate();
  const Anchor anchor = store.get(anchor_id);
  const Vec3& device_pos = device_pose.translation();
  const double d = (anchor.world_pose.translation() - device_pos).norm();

  std::seed_seq seq{static_cast<std::uint32_t>(model.seed),
                    static_cast<std::uint32_t>(model.seed >> 32),
                    static_cast<std::uint32_t>(fnv1a(anchor_id)),
                    static_cast<std::uint32_t>(fnv1a(anchor_id) >> 32),
                    static_cast<std::uint32_t>(query_index),
                    static_cast<std::uint32_t>(query_index >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double p = model.success_probability(d);
  if (!(unit(rng) < p)) return std::nullopt;

  if (model.min_visible_fraction > 0.0) {
    std::size_t visible = 0;
    for (const auto& f : anchor.features) {
      if ((f - device_pos).norm() <= model.cutoff) ++visible;
    }
    if (static_cast<double>(visible) <
        model.min_visible_fraction * static_cast<double>(anchor.features.size())) {
      return std::nullopt;
    }
  }

  Pose relative = compose(invert(device_pose), anchor.world_pose);
  const double st = model.sigma_t(d);
  const double sr = model.sigma_r(d);
  if (st > 0.0 || sr > 0.0) {
    std::normal_distribution<double> normal;
    const Vec3 dt(st * normal(rng), st * normal(rng), st * normal(rng));
    const Vec3 dr(sr * normal(rng), sr * normal(rng), sr * normal(rng));
    const double angle = dr.norm();
    const Eigen::Quaterniond dq =
        angle > 0.0 ? Eigen::Quaterniond(Eigen::AngleAxisd(angle, dr / angle))
                    : Eigen::Quaterniond::Identity();
    relative = Pose(relative.translation() + dt, dq * relative.rotation());
  }
  return LocalizationResult{anchor_id, relative, p};
}

Relocalizer::Relocalizer(const AnchorStore& store, RelocModel model)
    : store_(store), model_(model) {
  model_.validate();
}

std::optional<LocalizationResult> Relocalizer::query(const std::string& anchor_id,
                                                     const Pose& device_pose) {
  return anchorline::query(store_, anchor_id, device_pose, model_, counter_++);
}

FrameId localize_to_frame(TransformTree& tree, const LocalizationResult& result,
                          const FrameId& device_frame) {
  if (!tree.contains(device_frame)) {
    throw Error(Errc::UnknownFrame, device_frame.str());
  }
  FrameId anchor_frame(result.anchor_id);
  tree.add(device_frame, anchor_frame, result.anchor_in_query);
  return anchor_frame;
}

}  // namespace anchorline
