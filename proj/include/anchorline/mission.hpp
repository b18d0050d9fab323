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

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "anchorline/anchor_sim.hpp"
#include "anchorline/geometry.hpp"

namespace anchorline {

inline constexpr int kMissionSchemaVersion = 1;

// Waypoints may drift this far past the anchor radius and still validate.
inline constexpr double kAnchorOffsetSlack = 0.5;

struct Waypoint {
  std::string id;
  std::string anchor_id;
  Pose local_pose;  // waypoint in its anchor's frame
  bool is_inspection = false;
  std::string label;

  bool operator==(const Waypoint&) const = default;
};

struct MissionEdge {
  std::string from;
  std::string to;
  int order = 0;  // rank among the out-edges of `from`

  bool operator==(const MissionEdge&) const = default;
};

struct BranchStrategy {
  enum class Kind { FirstEdge, Interactive, Callback };
  Kind kind = Kind::FirstEdge;
  std::string name;  // callback name; empty otherwise

  static BranchStrategy first_edge() { return {Kind::FirstEdge, {}}; }
  static BranchStrategy interactive() { return {Kind::Interactive, {}}; }
  static BranchStrategy callback(std::string name) {
    return {Kind::Callback, std::move(name)};
  }
  bool operator==(const BranchStrategy&) const = default;
};

// An immutable-by-convention snapshot; editing operations return a new one.
struct Mission {
  std::string id;
  std::vector<std::string> anchor_ids;  // creation order
  std::vector<Waypoint> waypoints;
  std::vector<MissionEdge> edges;
  std::string start;
  std::map<std::string, BranchStrategy> strategies;
  int schema_version = kMissionSchemaVersion;

  bool operator==(const Mission&) const = default;

  const Waypoint* find_waypoint(const std::string& wp_id) const;
  // Out-edges of `wp_id` sorted by order.
  std::vector<MissionEdge> out_edges(const std::string& wp_id) const;
};

Mission make_mission(std::string id);

// Places a waypoint at `world_pose`, creating an anchor there first when no
// mission anchor is within the policy radius. The first waypoint becomes the
// mission start.
std::pair<Mission, Waypoint> add_waypoint(const Mission& m, AnchorStore& anchors,
                                          const Pose& world_pose,
                                          bool is_inspection,
                                          const AnchorPolicy& policy,
                                          std::string label = {});

// Appends from -> to with the next order rank among `from`'s out-edges.
Mission connect(const Mission& m, const std::string& from, const std::string& to);
// Removes from -> to and re-ranks the remaining out-edges of `from`.
Mission disconnect(const Mission& m, const std::string& from,
                   const std::string& to);
// Removes a waypoint and its edges. Anchors are kept. The start waypoint can
// only be removed when it is the last one.
Mission remove_waypoint(const Mission& m, const std::string& wp_id);
Mission set_strategy(const Mission& m, const std::string& wp_id,
                     BranchStrategy strategy);
Mission set_start(const Mission& m, const std::string& wp_id);

// Throws IntegrityViolation when the mission breaks a graph invariant.
void validate(const Mission& m,
              double max_anchor_offset = AnchorPolicy{}.new_anchor_radius +
                                         kAnchorOffsetSlack);

// Canonical document of a valid mission. Byte-stable for equal missions.
std::string serialize(const Mission& m);
// Parses and revalidates. MalformedDocument, SchemaVersionUnsupported or
// IntegrityViolation on failure.
Mission deserialize(const std::string& doc);

// Draft forms skip graph validation so that editors can round-trip
// half-built missions. Shape errors still raise MalformedDocument.
nlohmann::ordered_json mission_to_json(const Mission& m);
Mission mission_from_json(const nlohmann::json& j);

struct MissionSummary {
  std::string id;
  std::string label;
  std::size_t waypoint_count = 0;
};

// One `<id>.json` file per mission. Loads may run concurrently; saves to the
// same id are serialized and the last write wins.
class MissionStore {
 public:
  // Creates the directory if needed.
  explicit MissionStore(std::filesystem::path dir);

  std::string save(const Mission& m);
  Mission load(const std::string& id) const;      // UnknownMission
  std::string load_document(const std::string& id) const;
  bool contains(const std::string& id) const;
  void remove(const std::string& id);             // UnknownMission
  std::vector<std::string> list() const;          // sorted ids
  std::vector<MissionSummary> summaries() const;

  // Deserializes every stored mission; StoreCorrupt names the first bad file.
  void check_all() const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path file_for(const std::string& id) const;
  std::mutex& lock_for(const std::string& id);

  std::filesystem::path dir_;
  std::mutex locks_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

// Mission ids double as file names: [A-Za-z0-9_.-], not starting with '.'.
bool is_valid_mission_id(const std::string& id);

}  // namespace anchorline
