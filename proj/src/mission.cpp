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
#include "anchorline/mission.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <set>

#include "anchorline/errors.hpp"
#include "internal/io.hpp"

namespace anchorline {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void integrity(const std::string& what) {
  throw Error(Errc::IntegrityViolation, what);
}

[[noreturn]] void malformed(const std::string& what) {
  throw Error(Errc::MalformedDocument, what);
}

std::string_view kind_name(BranchStrategy::Kind k) {
  switch (k) {
    case BranchStrategy::Kind::FirstEdge: return "first_edge";
    case BranchStrategy::Kind::Interactive: return "interactive";
    case BranchStrategy::Kind::Callback: return "callback";
  }
  return "first_edge";
}

void require_keys(const json& j, std::initializer_list<const char*> keys,
                  const std::string& where) {
  if (!j.is_object()) malformed(where + " must be an object");
  for (const char* k : keys) {
    if (!j.contains(k)) malformed(where + " is missing '" + k + "'");
  }
  if (j.size() != keys.size()) malformed(where + " has unexpected keys");
}

const std::string& str_field(const json& j, const char* key,
                             const std::string& where) {
  if (!j[key].is_string()) malformed(where + "." + key + " must be a string");
  return j[key].get_ref<const std::string&>();
}

Mission checked(Mission m, const std::function<void(Mission&)>& edit) {
  edit(m);
  return m;
}

}  // namespace

const Waypoint* Mission::find_waypoint(const std::string& wp_id) const {
  auto it = std::find_if(waypoints.begin(), waypoints.end(),
                         [&](const Waypoint& w) { return w.id == wp_id; });
  return it == waypoints.end() ? nullptr : &*it;
}

std::vector<MissionEdge> Mission::out_edges(const std::string& wp_id) const {
  std::vector<MissionEdge> out;
  for (const auto& e : edges) {
    if (e.from == wp_id) out.push_back(e);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const MissionEdge& a, const MissionEdge& b) { return a.order < b.order; });
  return out;
}

Mission make_mission(std::string id) {
  if (!is_valid_mission_id(id)) {
    throw Error(Errc::InvalidArgument, "invalid mission id '" + id + "'");
  }
  Mission m;
  m.id = std::move(id);
  return m;
}

std::pair<Mission, Waypoint> add_waypoint(const Mission& m, AnchorStore& anchors,
                                          const Pose& world_pose,
                                          bool is_inspection,
                                          const AnchorPolicy& policy,
                                          std::string label) {
  Mission next = m;
  std::vector<Anchor> existing;
  existing.reserve(m.anchor_ids.size());
  for (const auto& id : m.anchor_ids) existing.push_back(anchors.get(id));

  if (needs_new_anchor(existing, world_pose.translation(), policy)) {
    Anchor created = anchors.create_anchor(world_pose, policy);
    next.anchor_ids.push_back(created.id);
    existing.push_back(std::move(created));
  }

  // Nearest anchor; ties go to the earliest-created (first in list).
  const Anchor* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : existing) {
    const double d = (a.world_pose.translation() - world_pose.translation()).norm();
    if (d < best) {
      best = d;
      nearest = &a;
    }
  }

  Waypoint wp;
  std::size_t n = next.waypoints.size() + 1;
  do {
    wp.id = "wp-" + std::to_string(n++);
  } while (next.find_waypoint(wp.id) != nullptr);
  wp.anchor_id = nearest->id;
  wp.local_pose = compose(invert(nearest->world_pose), world_pose);
  wp.is_inspection = is_inspection;
  wp.label = std::move(label);

  next.waypoints.push_back(wp);
  if (next.start.empty()) next.start = wp.id;
  return {std::move(next), std::move(wp)};
}

Mission connect(const Mission& m, const std::string& from, const std::string& to) {
  if (!m.find_waypoint(from)) throw Error(Errc::UnknownWaypoint, from);
  if (!m.find_waypoint(to)) throw Error(Errc::UnknownWaypoint, to);
  if (from == to) throw Error(Errc::SelfLoop, from);
  int next_order = 0;
  for (const auto& e : m.edges) {
    if (e.from != from) continue;
    if (e.to == to) throw Error(Errc::DuplicateEdge, from + " -> " + to);
    next_order = std::max(next_order, e.order + 1);
  }
  return checked(m, [&](Mission& out) { out.edges.push_back({from, to, next_order}); });
}

Mission disconnect(const Mission& m, const std::string& from, const std::string& to) {
  auto it = std::find_if(m.edges.begin(), m.edges.end(), [&](const MissionEdge& e) {
    return e.from == from && e.to == to;
  });
  if (it == m.edges.end()) throw Error(Errc::UnknownEdge, from + " -> " + to);
  Mission out = m;
  out.edges.erase(out.edges.begin() + (it - m.edges.begin()));
  int rank = 0;
  std::vector<MissionEdge*> outs;
  for (auto& e : out.edges) {
    if (e.from == from) outs.push_back(&e);
  }
  std::stable_sort(outs.begin(), outs.end(),
                   [](const MissionEdge* a, const MissionEdge* b) { return a->order < b->order; });
  for (auto* e : outs) e->order = rank++;
  if (outs.size() < 2) out.strategies.erase(from);
  return out;
}

Mission remove_waypoint(const Mission& m, const std::string& wp_id) {
  if (!m.find_waypoint(wp_id)) throw Error(Errc::UnknownWaypoint, wp_id);
  if (wp_id == m.start && m.waypoints.size() > 1) {
    throw Error(Errc::InvalidArgument, "move the start before removing " + wp_id);
  }
  Mission out = m;
  std::erase_if(out.waypoints, [&](const Waypoint& w) { return w.id == wp_id; });
  std::set<std::string> touched;
  for (const auto& e : out.edges) {
    if (e.to == wp_id) touched.insert(e.from);
  }
  std::erase_if(out.edges, [&](const MissionEdge& e) { return e.from == wp_id || e.to == wp_id; });
  out.strategies.erase(wp_id);
  for (const auto& from : touched) {
    int rank = 0;
    std::vector<MissionEdge*> outs;
    for (auto& e : out.edges) {
      if (e.from == from) outs.push_back(&e);
    }
    std::stable_sort(outs.begin(), outs.end(),
                     [](const MissionEdge* a, const MissionEdge* b) { return a->order < b->order; });
    for (auto* e : outs) e->order = rank++;
    if (outs.size() < 2) out.strategies.erase(from);
  }
  if (out.waypoints.empty()) out.start.clear();
  return out;
}

Mission set_strategy(const Mission& m, const std::string& wp_id,
                     BranchStrategy strategy) {
  if (!m.find_waypoint(wp_id)) throw Error(Errc::UnknownWaypoint, wp_id);
  if (strategy.kind == BranchStrategy::Kind::Callback && strategy.name.empty()) {
    throw Error(Errc::InvalidArgument, "callback strategy needs a name");
  }
  if (strategy.kind != BranchStrategy::Kind::Callback) strategy.name.clear();
  return checked(m, [&](Mission& out) { out.strategies[wp_id] = strategy; });
}

Mission set_start(const Mission& m, const std::string& wp_id) {
  if (!m.find_waypoint(wp_id)) throw Error(Errc::UnknownWaypoint, wp_id);
  return checked(m, [&](Mission& out) { out.start = wp_id; });
}

void validate(const Mission& m, double max_anchor_offset) {
  if (m.schema_version != kMissionSchemaVersion) {
    throw Error(Errc::SchemaVersionUnsupported, std::to_string(m.schema_version));
  }
  if (!is_valid_mission_id(m.id)) integrity("invalid mission id '" + m.id + "'");
  if (m.waypoints.empty()) integrity("mission has no waypoints");

  std::set<std::string> anchors;
  for (const auto& a : m.anchor_ids) {
    if (a.empty() || !anchors.insert(a).second) integrity("duplicate or empty anchor id '" + a + "'");
  }

  std::set<std::string> ids;
  for (const auto& w : m.waypoints) {
    if (w.id.empty() || !ids.insert(w.id).second) {
      integrity("duplicate or empty waypoint id '" + w.id + "'");
    }
    if (!anchors.contains(w.anchor_id)) {
      integrity("waypoint " + w.id + " references unknown anchor " + w.anchor_id);
    }
    if (w.local_pose.translation().norm() > max_anchor_offset) {
      integrity("waypoint " + w.id + " is too far from its anchor");
    }
  }

  std::set<std::pair<std::string, std::string>> pairs;
  std::set<std::pair<std::string, int>> ranks;
  std::map<std::string, int> out_degree;
  std::map<std::string, std::vector<std::string>> adjacency;
  for (const auto& e : m.edges) {
    if (!ids.contains(e.from) || !ids.contains(e.to)) {
      integrity("edge " + e.from + " -> " + e.to + " has a dangling endpoint");
    }
    if (e.from == e.to) integrity("self loop on " + e.from);
    if (e.order < 0) integrity("negative edge order on " + e.from);
    if (!pairs.insert({e.from, e.to}).second) integrity("duplicate edge " + e.from + " -> " + e.to);
    if (!ranks.insert({e.from, e.order}).second) {
      integrity("duplicate order " + std::to_string(e.order) + " on " + e.from);
    }
    ++out_degree[e.from];
    adjacency[e.from].push_back(e.to);
  }

  if (!ids.contains(m.start)) integrity("start '" + m.start + "' is not a waypoint");
  std::set<std::string> seen{m.start};
  std::deque<std::string> frontier{m.start};
  while (!frontier.empty()) {
    const std::string cur = frontier.front();
    frontier.pop_front();
    for (const auto& nb : adjacency[cur]) {
      if (seen.insert(nb).second) frontier.push_back(nb);
    }
  }
  if (seen.size() != ids.size()) integrity("some waypoints are unreachable from start");

  for (const auto& [wp, strategy] : m.strategies) {
    if (!ids.contains(wp)) integrity("strategy for unknown waypoint " + wp);
    const bool callback = strategy.kind == BranchStrategy::Kind::Callback;
    if (callback == strategy.name.empty()) integrity("strategy name mismatch on " + wp);
  }
  for (const auto& [wp, degree] : out_degree) {
    if (degree >= 2 && !m.strategies.contains(wp)) {
      integrity("branching waypoint " + wp + " has no strategy");
    }
  }
}

ordered_json mission_to_json(const Mission& m) {
  ordered_json j;
  j["schema_version"] = m.schema_version;
  j["id"] = m.id;
  j["anchors"] = m.anchor_ids;
  j["start"] = m.start;
  j["waypoints"] = ordered_json::array();
  for (const auto& w : m.waypoints) {
    ordered_json e;
    e["id"] = w.id;
    e["anchor_id"] = w.anchor_id;
    e["local_pose"] = pose_to_json(w.local_pose);
    e["is_inspection"] = w.is_inspection;
    e["label"] = w.label;
    j["waypoints"].push_back(std::move(e));
  }
  j["edges"] = ordered_json::array();
  for (const auto& e : m.edges) {
    ordered_json x;
    x["from"] = e.from;
    x["to"] = e.to;
    x["order"] = e.order;
    j["edges"].push_back(std::move(x));
  }
  j["strategies"] = ordered_json::object();
  for (const auto& [wp, s] : m.strategies) {
    ordered_json x;
    x["kind"] = kind_name(s.kind);
    if (s.kind == BranchStrategy::Kind::Callback) x["name"] = s.name;
    j["strategies"][wp] = std::move(x);
  }
  return j;
}

Mission mission_from_json(const json& j) {
  require_keys(j, {"schema_version", "id", "anchors", "start", "waypoints", "edges", "strategies"},
               "mission");
  if (!j["schema_version"].is_number_integer()) malformed("schema_version must be an integer");
  Mission m;
  m.schema_version = j["schema_version"].get<int>();
  if (m.schema_version != kMissionSchemaVersion) {
    throw Error(Errc::SchemaVersionUnsupported, std::to_string(m.schema_version));
  }
  m.id = str_field(j, "id", "mission");
  m.start = str_field(j, "start", "mission");

  if (!j["anchors"].is_array()) malformed("anchors must be an array");
  for (const auto& a : j["anchors"]) {
    if (!a.is_string()) malformed("anchor ids must be strings");
    m.anchor_ids.push_back(a.get<std::string>());
  }

  if (!j["waypoints"].is_array()) malformed("waypoints must be an array");
  for (const auto& e : j["waypoints"]) {
    require_keys(e, {"id", "anchor_id", "local_pose", "is_inspection", "label"}, "waypoint");
    Waypoint w;
    w.id = str_field(e, "id", "waypoint");
    w.anchor_id = str_field(e, "anchor_id", "waypoint");
    w.local_pose = pose_from_json(e["local_pose"]);
    if (!e["is_inspection"].is_boolean()) malformed("waypoint.is_inspection must be a boolean");
    w.is_inspection = e["is_inspection"].get<bool>();
    w.label = str_field(e, "label", "waypoint");
    m.waypoints.push_back(std::move(w));
  }

  if (!j["edges"].is_array()) malformed("edges must be an array");
  for (const auto& e : j["edges"]) {
    require_keys(e, {"from", "to", "order"}, "edge");
    if (!e["order"].is_number_integer()) malformed("edge.order must be an integer");
    m.edges.push_back({str_field(e, "from", "edge"), str_field(e, "to", "edge"),
                       e["order"].get<int>()});
  }

  if (!j["strategies"].is_object()) malformed("strategies must be an object");
  for (const auto& [wp, s] : j["strategies"].items()) {
    if (!s.is_object() || !s.contains("kind") || !s["kind"].is_string()) {
      malformed("strategy for " + wp + " needs a kind");
    }
    const std::string kind = s["kind"].get<std::string>();
    BranchStrategy strategy;
    if (kind == "first_edge") {
      require_keys(s, {"kind"}, "strategy");
      strategy = BranchStrategy::first_edge();
    } else if (kind == "interactive") {
      require_keys(s, {"kind"}, "strategy");
      strategy = BranchStrategy::interactive();
    } else if (kind == "callback") {
      require_keys(s, {"kind", "name"}, "strategy");
      strategy = BranchStrategy::callback(str_field(s, "name", "strategy"));
    } else {
      malformed("unknown strategy kind '" + kind + "'");
    }
    m.strategies[wp] = strategy;
  }
  return m;
}

std::string serialize(const Mission& m) {
  validate(m);
  return mission_to_json(m).dump();
}

Mission deserialize(const std::string& doc) {
  json j;
  try {
    j = json::parse(doc);
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  Mission m = mission_from_json(j);
  validate(m);
  return m;
}

bool is_valid_mission_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-' || c == '.';
  });
}

MissionStore::MissionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(Errc::StoreWriteFailure, "cannot create " + dir_.string());
}

std::filesystem::path MissionStore::file_for(const std::string& id) const {
  if (!is_valid_mission_id(id)) throw Error(Errc::UnknownMission, id);
  return dir_ / (id + ".json");
}

std::mutex& MissionStore::lock_for(const std::string& id) {
  std::lock_guard guard(locks_mutex_);
  auto& slot = locks_[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string MissionStore::save(const Mission& m) {
  const std::string doc = serialize(m);
  std::lock_guard guard(lock_for(m.id));
  internal::write_file_atomic(file_for(m.id), doc);
  return m.id;
}

std::string MissionStore::load_document(const std::string& id) const {
  const auto path = file_for(id);
  if (!std::filesystem::exists(path)) throw Error(Errc::UnknownMission, id);
  return internal::read_file(path);
}

Mission MissionStore::load(const std::string& id) const {
  return deserialize(load_document(id));
}

bool MissionStore::contains(const std::string& id) const {
  return is_valid_mission_id(id) && std::filesystem::exists(file_for(id));
}

void MissionStore::remove(const std::string& id) {
  std::lock_guard guard(lock_for(id));
  std::error_code ec;
  if (!std::filesystem::remove(file_for(id), ec)) throw Error(Errc::UnknownMission, id);
}

std::vector<std::string> MissionStore::list() const {
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const std::string id = entry.path().stem().string();
    if (is_valid_mission_id(id)) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<MissionSummary> MissionStore::summaries() const {
  std::vector<MissionSummary> out;
  for (const auto& id : list()) {
    try {
      const Mission m = load(id);
      const Waypoint* start = m.find_waypoint(m.start);
      out.push_back({m.id, start && !start->label.empty() ? start->label : m.id,
                     m.waypoints.size()});
    } catch (const Error&) {
      // Removed or replaced between list() and load(); skip it.
    }
  }
  return out;
}

void MissionStore::check_all() const {
  for (const auto& id : list()) {
    try {
      load(id);
    } catch (const Error& e) {
      throw Error(Errc::StoreCorrupt, (dir_ / (id + ".json")).string() + ": " + e.what());
    }
  }
}

}  // namespace anchorline
