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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "anchorline/geometry.hpp"

namespace anchorline {

// A world-locked reference frame. `world_pose` is simulation ground truth and
// never leaves the simulator through the query API.
struct Anchor {
  std::string id;
  Pose world_pose;
  std::vector<Vec3> features;
  std::int64_t created_at = 0;  // unix milliseconds
};

struct AnchorPolicy {
  double new_anchor_radius = 2.5;
  int feature_count = 200;
  double feature_radius = 3.0;

  void validate() const;
};

// Distance-dependent relocalization behaviour. Recall is 1 up to
// `degrade_onset`, falls linearly to 0 at `cutoff`; noise grows linearly past
// the onset.
struct RelocModel {
  double sigma_t0 = 0.01;
  double sigma_r0 = 0.01;
  double degrade_onset = 4.0;
  double cutoff = 8.0;
  double min_visible_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  double success_probability(double distance) const;
  double sigma_t(double distance) const;
  double sigma_r(double distance) const;
};

nlohmann::ordered_json reloc_model_to_json(const RelocModel& m);
RelocModel reloc_model_from_json(const nlohmann::json& j);

struct LocalizationResult {
  std::string anchor_id;
  Pose anchor_in_query;  // anchor frame expressed in the querying device frame
  double confidence = 0.0;
};

// The cloud anchor registry. With an empty path the store is memory-only.
// Every create is committed to disk before it returns.
class AnchorStore {
 public:
  explicit AnchorStore(std::filesystem::path path = {},
                       std::uint64_t id_seed = std::random_device{}());
  AnchorStore(const AnchorStore&) = delete;
  AnchorStore& operator=(const AnchorStore&) = delete;

  // Reads an existing store file. StoreCorrupt on a malformed document.
  static std::unique_ptr<AnchorStore> open(const std::filesystem::path& path,
                                           std::uint64_t id_seed =
                                               std::random_device{}());

  Anchor create_anchor(const Pose& device_pose, const AnchorPolicy& policy);
  // Inserts a fully formed anchor (fixtures, imports).
  void insert(Anchor anchor);

  std::optional<Anchor> find(const std::string& id) const;
  Anchor get(const std::string& id) const;  // UnknownAnchor
  bool contains(const std::string& id) const;
  std::vector<Anchor> all() const;  // creation order
  std::size_t size() const;

  std::string to_document() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::string document_locked() const;
  void commit_locked() const;
  std::string next_uuid_locked();

  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::mt19937_64 rng_;
  std::map<std::string, Anchor> anchors_;
  std::vector<std::string> order_;
};

// True iff no anchor lies within `policy.new_anchor_radius` of `device_pos`.
bool needs_new_anchor(std::span<const Anchor> existing, const Vec3& device_pos,
                      const AnchorPolicy& policy);

// One relocalization attempt. Pure: the random stream is derived from
// (model.seed, anchor id, query_index), so equal inputs give equal outputs.
std::optional<LocalizationResult> query(const AnchorStore& store,
                                        const std::string& anchor_id,
                                        const Pose& device_pose,
                                        const RelocModel& model,
                                        std::uint64_t query_index);

// Threads a query counter through `query` so a sequence of calls is
// reproducible under a fixed seed.
class Relocalizer {
 public:
  Relocalizer(const AnchorStore& store, RelocModel model);

  std::optional<LocalizationResult> query(const std::string& anchor_id,
                                          const Pose& device_pose);
  const RelocModel& model() const { return model_; }
  std::uint64_t queries_issued() const { return counter_.load(); }

 private:
  const AnchorStore& store_;
  RelocModel model_;
  std::atomic<std::uint64_t> counter_{0};
};

// Inserts the anchor frame under `device_frame` and returns its id.
FrameId localize_to_frame(TransformTree& tree, const LocalizationResult& result,
                          const FrameId& device_frame);

}  // namespace anchorline
