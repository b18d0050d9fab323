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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "anchorline/anchor_sim.hpp"
#include "anchorline/errors.hpp"
#include "anchorline/gestures.hpp"
#include "anchorline/mapconv.hpp"
#include "anchorline/mission.hpp"
#include "anchorline/nav.hpp"

namespace anchorline {

struct ExecutionState {
  enum class Kind {
    Idle,
    Fetching,
    Localizing,
    Navigating,
    Inspecting,
    AwaitingBranch,
    Preempted,
    Completed,
    Failed
  };
  Kind kind = Kind::Idle;
  std::string node;    // Navigating, Inspecting, AwaitingBranch
  std::string reason;  // Failed: error name

  bool terminal() const {
    return kind == Kind::Preempted || kind == Kind::Completed || kind == Kind::Failed;
  }
  bool operator==(const ExecutionState&) const = default;
};

const char* to_string(ExecutionState::Kind kind);
// {"state":"Navigating","node":"wp-1"}; "reason" for Failed.
nlohmann::ordered_json state_to_json(const ExecutionState& s);

enum class EventKind {
  StateChanged,
  PoseUpdate,
  PathPlanned,
  CaptureTaken,
  BranchRequested,
  BranchResolved,
  Error
};

const char* to_string(EventKind kind);

struct ExecutionEvent {
  std::uint64_t seq = 0;
  double t = 0.0;  // simulated seconds since start
  EventKind kind = EventKind::StateChanged;
  nlohmann::ordered_json payload = nlohmann::ordered_json::object();

  // {"seq","t","kind",...payload} on one line, no trailing newline.
  std::string to_line() const;
};

// Append-only, sequence numbers from 0 without gaps. Readers may wait for new
// entries from any thread.
class EventLog {
 public:
  void append(double t, EventKind kind, nlohmann::ordered_json payload);
  std::vector<ExecutionEvent> since(std::uint64_t from) const;
  std::uint64_t size() const;
  // Blocks until an event with seq >= from exists, the log is closed or the
  // timeout passes. True if such an event exists.
  bool wait(std::uint64_t from, std::chrono::milliseconds timeout) const;
  // Wakes waiters; closing is sticky until reopen().
  void close();
  void reopen();
  bool closed() const;

 private:
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::vector<ExecutionEvent> events_;
  bool closed_ = false;
};

struct Pose2d {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

struct InspectionCapture {
  std::string node;
  Pose2d achieved;
  double t = 0.0;
};

struct NodeVisit {
  std::string node;
  Pose2d achieved;
  Pose target;  // reconstructed map pose the robot was sent to
};

struct BranchContext {
  std::string node;
  std::vector<MissionEdge> out_edges;
  std::vector<InspectionCapture> captures;
};

// Returns the order of the chosen out-edge.
using BranchCallback = std::function<int(const BranchContext&)>;
using CallbackRegistry = std::map<std::string, BranchCallback>;

struct ExecutorConfig {
  Pose2d initial_pose;
  double speed = 0.5;  // m/s
  int max_steps = 1000;  // node visits
  // Vantage points tried for anchors that fail from the robot pose: the
  // robot pose itself, then probe_count - 1 points on a seeded spiral of
  // probe_radius around it.
  int probe_count = 8;
  double probe_radius = 2.0;
  std::uint64_t probe_seed = 0;
};

// One mission run (or a series of ad-hoc goals) against the simulated robot.
// All operations are serialized internally; the event log may be read from
// any thread.
class Execution {
 public:
  // Localizes to the mission's anchors and starts towards mission.start. The
  // mission must validate. Localization failures end in Failed rather than
  // throwing.
  static std::unique_ptr<Execution> start(const Mission& mission, const AnchorStore& anchors,
                                          std::shared_ptr<const OccupancyGrid> grid,
                                          const RelocModel& model, ExecutorConfig config = {},
                                          CallbackRegistry callbacks = {});
  // Loads the mission first; UnknownMission if it is not stored.
  static std::unique_ptr<Execution> start(const MissionStore& store, const std::string& mission_id,
                                          const AnchorStore& anchors,
                                          std::shared_ptr<const OccupancyGrid> grid,
                                          const RelocModel& model, ExecutorConfig config = {},
                                          CallbackRegistry callbacks = {});
  // An Idle robot without a mission, driven by inject_command.
  static std::unique_ptr<Execution> idle(std::shared_ptr<const OccupancyGrid> grid,
                                         ExecutorConfig config = {});

  Execution(const Execution&) = delete;
  Execution& operator=(const Execution&) = delete;

  ExecutionState tick(double dt);
  // NotAwaitingBranch unless AwaitingBranch(node); UnknownEdge for an order
  // that is not an out-edge. State is unchanged on error.
  ExecutionState resolve_branch(const std::string& node, int order);
  // Terminal states are left unchanged.
  ExecutionState preempt();
  // Goal starts an ad-hoc navigation (MissionActive while a mission runs,
  // GoalOccupied / NoPath from the planner); Preempt acts as preempt().
  ExecutionState inject_command(const RobotCommand& cmd);

  ExecutionState state() const;
  RobotState robot() const;
  std::optional<std::string> mission_id() const;
  std::vector<NodeVisit> visits() const;
  std::vector<InspectionCapture> captures() const;
  // Map pose of each waypoint whose anchor was localized.
  std::map<std::string, Pose> waypoint_targets() const;
  double time() const;

  const EventLog& events() const { return log_; }

 private:
  Execution(std::shared_ptr<const OccupancyGrid> grid, ExecutorConfig config,
            CallbackRegistry callbacks);

  void set_state(ExecutionState s);
  void fail(Errc code, const std::string& message);
  void localize(const AnchorStore& anchors, const RelocModel& model);
  // Plans to `node` and switches to Navigating(node); fails on errors.
  void dispatch(const std::string& node);
  void follow(const std::string& node, const Pose& target);
  void on_arrival();
  void choose_next(const std::string& node);
  void go_along(const MissionEdge& edge, const char* by);
  void emit_pose();

  mutable std::mutex mutex_;
  EventLog log_;
  std::shared_ptr<const OccupancyGrid> grid_;
  ExecutorConfig config_;
  CallbackRegistry callbacks_;
  std::optional<Mission> mission_;
  std::map<std::string, Pose> anchor_in_map_;
  ExecutionState state_;
  RobotState robot_;
  GridPath path_;
  Pose target_;
  double clock_ = 0.0;
  std::vector<NodeVisit> visits_;
  std::vector<InspectionCapture> captures_;
};

}  // namespace anchorline
