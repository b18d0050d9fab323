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
#include "anchorline/executor.hpp"

#include <cmath>
#include <random>

#include "anchorline/errors.hpp"

namespace anchorline {
namespace {

constexpr const char* kAdHocNode = "adhoc";

nlohmann::ordered_json pose2d_json(const Pose2d& p) {
  nlohmann::ordered_json j;
  j["x"] = p.x;
  j["y"] = p.y;
  j["yaw"] = p.yaw;
  return j;
}

Pose2d to_pose2d(const RobotState& r) { return {r.position.x(), r.position.y(), r.yaw}; }

Pose robot_pose3d(const Pose2d& p) { return Pose::from_yaw(p.yaw, Vec3(p.x, p.y, 0.0)); }

}  // namespace

const char* to_string(ExecutionState::Kind kind) {
  using K = ExecutionState::Kind;
  switch (kind) {
    case K::Idle:
      return "Idle";
    case K::Fetching:
      return "Fetching";
    case K::Localizing:
      return "Localizing";
    case K::Navigating:
      return "Navigating";
    case K::Inspecting:
      return "Inspecting";
    case K::AwaitingBranch:
      return "AwaitingBranch";
    case K::Preempted:
      return "Preempted";
    case K::Completed:
      return "Completed";
    case K::Failed:
      return "Failed";
  }
  return "?";
}

nlohmann::ordered_json state_to_json(const ExecutionState& s) {
  nlohmann::ordered_json j;
  j["state"] = to_string(s.kind);
  if (!s.node.empty()) j["node"] = s.node;
  if (s.kind == ExecutionState::Kind::Failed) j["reason"] = s.reason;
  return j;
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::StateChanged:
      return "StateChanged";
    case EventKind::PoseUpdate:
      return "PoseUpdate";
    case EventKind::PathPlanned:
      return "PathPlanned";
    case EventKind::CaptureTaken:
      return "CaptureTaken";
    case EventKind::BranchRequested:
      return "BranchRequested";
    case EventKind::BranchResolved:
      return "BranchResolved";
    case EventKind::Error:
      return "Error";
  }
  return "?";
}

std::string ExecutionEvent::to_line() const {
  nlohmann::ordered_json j;
  j["seq"] = seq;
  j["t"] = t;
  j["kind"] = to_string(kind);
  for (const auto& [k, v] : payload.items()) j[k] = v;
  return j.dump();
}

void EventLog::append(double t, EventKind kind, nlohmann::ordered_json payload) {
  {
    std::lock_guard lock(mutex_);
    events_.push_back(ExecutionEvent{events_.size(), t, kind, std::move(payload)});
  }
  cv_.notify_all();
}

std::vector<ExecutionEvent> EventLog::since(std::uint64_t from) const {
  std::lock_guard lock(mutex_);
  if (from >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(from), events_.end()};
}

std::uint64_t EventLog::size() const {
  std::lock_guard lock(mutex_);
  return events_.size();
}

bool EventLog::wait(std::uint64_t from, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return events_.size() > from || closed_; });
  return events_.size() > from;
}

void EventLog::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

void EventLog::reopen() {
  std::lock_guard lock(mutex_);
  closed_ = false;
}

bool EventLog::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

Execution::Execution(std::shared_ptr<const OccupancyGrid> grid, ExecutorConfig config,
                     CallbackRegistry callbacks)
    : grid_(std::move(grid)), config_(config), callbacks_(std::move(callbacks)) {
  if (!grid_) throw Error(Errc::InvalidArgument, "an occupancy grid is required");
  if (!(config_.speed > 0.0) || config_.max_steps < 1 || config_.probe_count < 1 ||
      config_.probe_radius < 0.0) {
    throw Error(Errc::InvalidArgument,
                "speed > 0, max_steps >= 1, probe_count >= 1, probe_radius >= 0 required");
  }
  robot_.position = Vec2(config_.initial_pose.x, config_.initial_pose.y);
  robot_.yaw = wrap_angle(config_.initial_pose.yaw);
}

std::unique_ptr<Execution> Execution::start(const Mission& mission, const AnchorStore& anchors,
                                            std::shared_ptr<const OccupancyGrid> grid,
                                            const RelocModel& model, ExecutorConfig config,
                                            CallbackRegistry callbacks) {
  validate(mission);
  model.validate();
  std::unique_ptr<Execution> e(new Execution(std::move(grid), config, std::move(callbacks)));
  std::lock_guard lock(e->mutex_);
  e->mission_ = mission;
  e->set_state({ExecutionState::Kind::Fetching, {}, {}});
  e->emit_pose();
  e->set_state({ExecutionState::Kind::Localizing, {}, {}});
  e->localize(anchors, model);
  if (e->anchor_in_map_.empty()) {
    e->fail(Errc::AnchorUnreachable, "no mission anchor could be localized from any probe pose");
  } else {
    e->dispatch(mission.start);
  }
  return e;
}

std::unique_ptr<Execution> Execution::start(const MissionStore& store,
                                            const std::string& mission_id,
                                            const AnchorStore& anchors,
                                            std::shared_ptr<const OccupancyGrid> grid,
                                            const RelocModel& model, ExecutorConfig config,
                                            CallbackRegistry callbacks) {
  return start(store.load(mission_id), anchors, std::move(grid), model, config,
               std::move(callbacks));
}

std::unique_ptr<Execution> Execution::idle(std::shared_ptr<const OccupancyGrid> grid,
                                           ExecutorConfig config) {
  std::unique_ptr<Execution> e(new Execution(std::move(grid), config, {}));
  std::lock_guard lock(e->mutex_);
  e->set_state({});
  e->emit_pose();
  return e;
}

void Execution::set_state(ExecutionState s) {
  if (s == state_ && log_.size() > 0) return;
  state_ = std::move(s);
  log_.append(clock_, EventKind::StateChanged, state_to_json(state_));
  if (state_.terminal()) log_.close();
}

void Execution::fail(Errc code, const std::string& message) {
  nlohmann::ordered_json p;
  p["error"] = to_string(code);
  p["message"] = message;
  log_.append(clock_, EventKind::Error, std::move(p));
  robot_ = anchorline::preempt(robot_);
  set_state({ExecutionState::Kind::Failed, {}, std::string(to_string(code))});
}

void Execution::emit_pose() {
  nlohmann::ordered_json p = pose2d_json(to_pose2d(robot_));
  p["speed"] = robot_.speed;
  p["status"] = to_string(robot_.status);
  log_.append(clock_, EventKind::PoseUpdate, std::move(p));
}

void Execution::localize(const AnchorStore& anchors, const RelocModel& model) {
  const Pose2d origin = to_pose2d(robot_);
  std::vector<Pose> probes{robot_pose3d(origin)};
  std::mt19937_64 rng(config_.probe_seed);
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * M_PI)(rng);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int k = 1; k < config_.probe_count; ++k) {
    const double r = config_.probe_radius * std::sqrt(static_cast<double>(k) /
                                                      std::max(1, config_.probe_count - 1));
    const double a = phase + golden * k;
    probes.push_back(robot_pose3d({origin.x + r * std::cos(a), origin.y + r * std::sin(a),
                                   origin.yaw}));
  }

  TransformTree tree;
  const FrameId map("map");
  tree.add_root(map);
  for (std::size_t k = 0; k < probes.size(); ++k) {
    tree.add(map, FrameId("probe-" + std::to_string(k)), probes[k]);
  }
  Relocalizer reloc(anchors, model);
  for (const auto& anchor_id : mission_->anchor_ids) {
    for (std::size_t k = 0; k < probes.size(); ++k) {
      std::optional<LocalizationResult> fix;
      if (anchors.contains(anchor_id)) fix = reloc.query(anchor_id, probes[k]);
      if (!fix) continue;
      const FrameId frame = localize_to_frame(tree, *fix, FrameId("probe-" + std::to_string(k)));
      anchor_in_map_[anchor_id] = tree.lookup(map, frame);
      break;
    }
  }
}

void Execution::dispatch(const std::string& node) {
  const Waypoint* wp = mission_->find_waypoint(node);
  const auto anchor = anchor_in_map_.find(wp->anchor_id);
  if (anchor == anchor_in_map_.end()) {
    fail(Errc::AnchorUnreachable, "anchor " + wp->anchor_id + " of waypoint " + node +
                                      " was never localized");
    return;
  }
  try {
    follow(node, compose(anchor->second, wp->local_pose));
  } catch (const Error& e) {
    fail(e.code(), "cannot reach waypoint " + node + ": " + e.what());
  }
}

void Execution::follow(const std::string& node, const Pose& target) {
  const Vec2 goal = target.translation().head<2>();
  GridPath path = plan(*grid_, robot_.position, goal);
  // Drive from where the robot actually is to exactly the target.
  if (path.world_points.size() == 1) path.world_points.push_back(goal);
  if (path.cells.size() == 1) path.cells.push_back(path.cells.front());
  path.world_points.front() = robot_.position;
  path.world_points.back() = goal;

  path_ = std::move(path);
  target_ = target;
  nlohmann::ordered_json p;
  p["node"] = node;
  p["cells"] = path_.cells;
  auto pts = nlohmann::ordered_json::array();
  for (const auto& w : path_.world_points) pts.push_back({w.x(), w.y()});
  p["points"] = std::move(pts);
  log_.append(clock_, EventKind::PathPlanned, std::move(p));
  robot_ = begin_follow(robot_);
  set_state({ExecutionState::Kind::Navigating, node, {}});
}

ExecutionState Execution::tick(double dt) {
  std::lock_guard lock(mutex_);
  if (!(dt > 0.0)) throw Error(Errc::InvalidArgument, "dt must be positive");
  if (state_.terminal()) return state_;
  clock_ += dt;
  if (state_.kind != ExecutionState::Kind::Navigating) return state_;
  robot_ = step(robot_, path_, dt, config_.speed, target_.yaw());
  emit_pose();
  if (robot_.status == RobotStatus::Arrived) on_arrival();
  return state_;
}

void Execution::on_arrival() {
  const std::string node = state_.node;
  const Pose2d achieved = to_pose2d(robot_);
  visits_.push_back(NodeVisit{node, achieved, target_});
  if (!mission_) {
    set_state({ExecutionState::Kind::Completed, {}, {}});
    return;
  }
  if (mission_->find_waypoint(node)->is_inspection) {
    set_state({ExecutionState::Kind::Inspecting, node, {}});
    captures_.push_back(InspectionCapture{node, achieved, clock_});
    nlohmann::ordered_json p;
    p["node"] = node;
    p["pose"] = pose2d_json(achieved);
    log_.append(clock_, EventKind::CaptureTaken, std::move(p));
  }
  choose_next(node);
}

void Execution::choose_next(const std::string& node) {
  const auto outs = mission_->out_edges(node);
  if (outs.empty()) {
    set_state({ExecutionState::Kind::Completed, {}, {}});
    return;
  }
  if (static_cast<int>(visits_.size()) >= config_.max_steps) {
    fail(Errc::StepBudget, "stopped after " + std::to_string(visits_.size()) + " node visits");
    return;
  }
  if (outs.size() == 1) {
    go_along(outs.front(), nullptr);
    return;
  }
  const auto it = mission_->strategies.find(node);
  const BranchStrategy strategy =
      it == mission_->strategies.end() ? BranchStrategy::first_edge() : it->second;
  switch (strategy.kind) {
    case BranchStrategy::Kind::FirstEdge:
      go_along(outs.front(), "first_edge");
      return;
    case BranchStrategy::Kind::Interactive: {
      set_state({ExecutionState::Kind::AwaitingBranch, node, {}});
      nlohmann::ordered_json p;
      p["node"] = node;
      auto options = nlohmann::ordered_json::array();
      for (const auto& e : outs) options.push_back({{"order", e.order}, {"to", e.to}});
      p["options"] = std::move(options);
      log_.append(clock_, EventKind::BranchRequested, std::move(p));
      return;
    }
    case BranchStrategy::Kind::Callback: {
      const auto cb = callbacks_.find(strategy.name);
      if (cb == callbacks_.end()) {
        fail(Errc::CallbackMissing, "no callback registered as '" + strategy.name + "'");
        return;
      }
      int order = 0;
      try {
        order = cb->second(BranchContext{node, outs, captures_});
      } catch (const std::exception& e) {
        fail(Errc::CallbackChoseUnknownEdge, "callback '" + strategy.name + "' threw: " + e.what());
        return;
      }
      for (const auto& e : outs) {
        if (e.order == order) {
          go_along(e, "callback");
          return;
        }
      }
      fail(Errc::CallbackChoseUnknownEdge,
           "callback '" + strategy.name + "' chose order " + std::to_string(order) + " at " + node);
      return;
    }
  }
}

void Execution::go_along(const MissionEdge& edge, const char* by) {
  if (by != nullptr) {
    nlohmann::ordered_json p;
    p["node"] = edge.from;
    p["order"] = edge.order;
    p["to"] = edge.to;
    p["by"] = by;
    log_.append(clock_, EventKind::BranchResolved, std::move(p));
  }
  dispatch(edge.to);
}

ExecutionState Execution::resolve_branch(const std::string& node, int order) {
  std::lock_guard lock(mutex_);
  if (state_.kind != ExecutionState::Kind::AwaitingBranch || state_.node != node) {
    throw Error(Errc::NotAwaitingBranch, "execution is not waiting for a branch at " + node);
  }
  for (const auto& e : mission_->out_edges(node)) {
    if (e.order == order) {
      go_along(e, "user");
      return state_;
    }
  }
  throw Error(Errc::UnknownEdge, node + " has no out-edge with order " + std::to_string(order));
}

ExecutionState Execution::preempt() {
  std::lock_guard lock(mutex_);
  if (state_.terminal()) return state_;
  robot_ = anchorline::preempt(robot_);
  emit_pose();
  set_state({ExecutionState::Kind::Preempted, {}, {}});
  return state_;
}

ExecutionState Execution::inject_command(const RobotCommand& cmd) {
  switch (cmd.kind) {
    case RobotCommand::Kind::NoOp:
      return state();
    case RobotCommand::Kind::Preempt:
      return preempt();
    case RobotCommand::Kind::Goal:
      break;
  }
  std::lock_guard lock(mutex_);
  if (mission_ && !state_.terminal()) {
    throw Error(Errc::MissionActive, "mission " + mission_->id + " is running");
  }
  const Pose target = Pose::from_yaw(cmd.yaw, Vec3(cmd.position.x(), cmd.position.y(), 0.0));
  // Plan before touching any state so that planner errors leave it unchanged.
  plan(*grid_, robot_.position, cmd.position);
  mission_.reset();
  log_.reopen();
  follow(kAdHocNode, target);
  return state_;
}

ExecutionState Execution::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

RobotState Execution::robot() const {
  std::lock_guard lock(mutex_);
  return robot_;
}

std::optional<std::string> Execution::mission_id() const {
  std::lock_guard lock(mutex_);
  if (!mission_) return std::nullopt;
  return mission_->id;
}

std::vector<NodeVisit> Execution::visits() const {
  std::lock_guard lock(mutex_);
  return visits_;
}

std::vector<InspectionCapture> Execution::captures() const {
  std::lock_guard lock(mutex_);
  return captures_;
}

std::map<std::string, Pose> Execution::waypoint_targets() const {
  std::lock_guard lock(mutex_);
  std::map<std::string, Pose> out;
  if (!mission_) return out;
  for (const auto& wp : mission_->waypoints) {
    const auto a = anchor_in_map_.find(wp.anchor_id);
    if (a != anchor_in_map_.end()) out[wp.id] = compose(a->second, wp.local_pose);
  }
  return out;
}

double Execution::time() const {
  std::lock_guard lock(mutex_);
  return clock_;
}

}  // namespace anchorline
