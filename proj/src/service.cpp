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
#include "anchorline/service.hpp"

#include <condition_variable>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <stop_token>

#include <httplib.h>

#include "anchorline/gestures.hpp"
#include "internal/io.hpp"

namespace anchorline {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, Errc code, const std::string& message) {
  ordered_json body;
  body["error"] = std::string(to_string(code));
  body["message"] = message;
  send_json(res, http_status(code), body);
}

template <typename Handler>
httplib::Server::Handler guarded(Handler fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, Errc::MalformedDocument, e.what());
    } catch (const std::exception& e) {
      ordered_json body;
      body["error"] = "Internal";
      body["message"] = e.what();
      send_json(res, 500, body);
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  json j = json::parse(req.body);
  if (!j.is_object()) throw Error(Errc::MalformedDocument, "request body must be a JSON object");
  return j;
}

Pose2d pose2d_from_json(const json& j) {
  Pose2d p;
  p.x = j.at("x").get<double>();
  p.y = j.at("y").get<double>();
  p.yaw = j.value("yaw", 0.0);
  return p;
}

ordered_json pose2d_to_json(const Pose2d& p) {
  ordered_json j;
  j["x"] = p.x;
  j["y"] = p.y;
  j["yaw"] = p.yaw;
  return j;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void ApiConfig::validate() const {
  if (port < 0 || port > 65535) throw Error(Errc::InvalidArgument, "port out of range");
  if (grid.empty()) throw Error(Errc::InvalidArgument, "an occupancy grid file is required");
  if (!(tick_dt > 0.0) || !(time_scale > 0.0)) {
    throw Error(Errc::InvalidArgument, "tick_dt and time_scale must be positive");
  }
  reloc_model.validate();
}

ApiConfig api_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  static const std::set<std::string> kKeys = {
      "host",  "port",   "mission_dir", "anchor_store", "grid",      "reloc_model",
      "seed",  "tick_dt", "time_scale", "speed",        "max_steps", "probe_count",
      "probe_radius", "initial_pose"};
  ApiConfig cfg;
  try {
    if (!j.is_object()) throw Error(Errc::MalformedDocument, "config must be an object");
    for (const auto& [key, value] : j.items()) {
      if (!kKeys.count(key)) throw Error(Errc::MalformedDocument, "unknown config key '" + key + "'");
    }
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    if (j.contains("mission_dir")) cfg.mission_dir = resolve(base_dir, j["mission_dir"]);
    else cfg.mission_dir = resolve(base_dir, cfg.mission_dir.string());
    if (j.contains("anchor_store")) cfg.anchor_store = resolve(base_dir, j["anchor_store"]);
    else cfg.anchor_store = resolve(base_dir, cfg.anchor_store.string());
    if (j.contains("grid")) cfg.grid = resolve(base_dir, j["grid"]);
    if (j.contains("reloc_model")) cfg.reloc_model = reloc_model_from_json(j["reloc_model"]);
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.tick_dt = j.value("tick_dt", cfg.tick_dt);
    cfg.time_scale = j.value("time_scale", cfg.time_scale);
    cfg.executor.speed = j.value("speed", cfg.executor.speed);
    cfg.executor.max_steps = j.value("max_steps", cfg.executor.max_steps);
    cfg.executor.probe_count = j.value("probe_count", cfg.executor.probe_count);
    cfg.executor.probe_radius = j.value("probe_radius", cfg.executor.probe_radius);
    if (j.contains("initial_pose")) cfg.executor.initial_pose = pose2d_from_json(j["initial_pose"]);
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedDocument, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ApiConfig load_api_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(internal::read_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedDocument, path.string() + ": " + e.what());
  }
  return api_config_from_json(j, path.parent_path());
}

CallbackRegistry builtin_callbacks() {
  CallbackRegistry r;
  r["first"] = [](const BranchContext& ctx) { return ctx.out_edges.front().order; };
  r["last"] = [](const BranchContext& ctx) { return ctx.out_edges.back().order; };
  r["capture-parity"] = [](const BranchContext& ctx) {
    if (ctx.captures.size() % 2 == 1) return ctx.out_edges.front().order;
    return ctx.out_edges[std::min<std::size_t>(1, ctx.out_edges.size() - 1)].order;
  };
  return r;
}

int http_status(Errc code) {
  switch (code) {
    case Errc::UnknownMission:
    case Errc::UnknownExecution:
    case Errc::UnknownAnchor:
    case Errc::UnknownWaypoint:
    case Errc::UnknownFrame:
      return 404;
    case Errc::MalformedDocument:
    case Errc::InvalidArgument:
    case Errc::InvalidPose:
    case Errc::ParseError:
      return 400;
    case Errc::NotAwaitingBranch:
    case Errc::MissionActive:
      return 409;
    case Errc::StoreWriteFailure:
    case Errc::StoreCorrupt:
      return 500;
    default:
      return 422;
  }
}

struct Service::Run {
  std::string id;
  std::optional<std::string> mission_id;
  std::unique_ptr<Execution> exec;
  std::mutex sleep_mutex;
  std::condition_variable_any sleeper;
  std::jthread ticker;

  ordered_json summary() const {
    ordered_json j;
    j["execution_id"] = id;
    j["mission_id"] = mission_id ? json(*mission_id) : json(nullptr);
    j["state"] = state_to_json(exec->state());
    const RobotState r = exec->robot();
    ordered_json robot = pose2d_to_json({r.position.x(), r.position.y(), r.yaw});
    robot["speed"] = r.speed;
    robot["status"] = to_string(r.status);
    j["robot"] = std::move(robot);
    j["t"] = exec->time();
    j["event_count"] = exec->events().size();
    auto visits = ordered_json::array();
    for (const auto& v : exec->visits()) {
      visits.push_back({{"node", v.node}, {"pose", pose2d_to_json(v.achieved)}});
    }
    j["visits"] = std::move(visits);
    auto captures = ordered_json::array();
    for (const auto& c : exec->captures()) {
      captures.push_back({{"node", c.node}, {"pose", pose2d_to_json(c.achieved)}, {"t", c.t}});
    }
    j["captures"] = std::move(captures);
    return j;
  }
};

Service::Service(ApiConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  anchors_ = AnchorStore::open(cfg_.anchor_store, cfg_.seed ? *cfg_.seed : std::random_device{}());
  missions_ = std::make_unique<MissionStore>(cfg_.mission_dir);
  missions_->check_all();
  grid_document_ = internal::read_file(cfg_.grid);
  try {
    grid_ = std::make_shared<const OccupancyGrid>(occupancy_from_json(grid_document_));
  } catch (const Error& e) {
    throw Error(Errc::StoreCorrupt, cfg_.grid.string() + ": " + e.what());
  }
  server_ = std::make_unique<httplib::Server>();
  // SO_REUSEADDR only: with SO_REUSEPORT a second instance would silently
  // share the port instead of failing.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  server_->new_task_queue = [] { return new httplib::ThreadPool(16); };
  routes();
}

Service::~Service() { stop(); }

void Service::start() {
  if (cfg_.port == 0) {
    port_ = server_->bind_to_any_port(cfg_.host);
    if (port_ < 0) throw Error(Errc::PortInUse, "could not bind any port on " + cfg_.host);
  } else {
    if (!server_->bind_to_port(cfg_.host, cfg_.port)) {
      throw Error(Errc::PortInUse, cfg_.host + ":" + std::to_string(cfg_.port) + " is not available");
    }
    port_ = cfg_.port;
  }
  listener_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void Service::stop() {
  if (stopping_.exchange(true)) return;
  std::map<std::string, std::shared_ptr<Run>> runs;
  {
    std::lock_guard lock(runs_mutex_);
    runs = runs_;
  }
  for (auto& [id, run] : runs) {
    run->ticker.request_stop();
  }
  if (server_) server_->stop();
  if (listener_.joinable()) listener_.join();
  for (auto& [id, run] : runs) {
    if (run->ticker.joinable()) run->ticker.join();
  }
}

std::shared_ptr<Service::Run> Service::find_run(const std::string& id) const {
  std::lock_guard lock(runs_mutex_);
  const auto it = runs_.find(id);
  if (it == runs_.end()) throw Error(Errc::UnknownExecution, "no execution '" + id + "'");
  return it->second;
}

std::string Service::launch(std::unique_ptr<Execution> exec,
                            std::optional<std::string> mission_id) {
  auto run = std::make_shared<Run>();
  run->mission_id = std::move(mission_id);
  run->exec = std::move(exec);
  {
    std::lock_guard lock(runs_mutex_);
    run->id = "exec-" + std::to_string(next_run_++);
    runs_[run->id] = run;
  }
  const double dt = cfg_.tick_dt;
  const auto pause = std::chrono::duration<double>(cfg_.tick_dt / cfg_.time_scale);
  Run* raw = run.get();
  run->ticker = std::jthread([raw, dt, pause](std::stop_token st) {
    while (!st.stop_requested()) {
      raw->exec->tick(dt);
      std::unique_lock lock(raw->sleep_mutex);
      raw->sleeper.wait_for(lock, st, pause, [] { return false; });
    }
  });
  return run->id;
}

void Service::routes() {
  auto& s = *server_;

  s.Get("/missions", guarded([this](const httplib::Request&, httplib::Response& res) {
    auto out = ordered_json::array();
    for (const auto& m : missions_->summaries()) {
      out.push_back({{"id", m.id}, {"label", m.label}, {"waypoint_count", m.waypoint_count}});
    }
    send_json(res, 200, out);
  }));

  s.Get(R"(/missions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    res.status = 200;
    res.set_content(missions_->load_document(req.matches[1]), "application/json");
  }));

  s.Put(R"(/missions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const Mission m = deserialize(req.body);
    if (m.id != id) {
      throw Error(Errc::IntegrityViolation,
                  "document id '" + m.id + "' does not match path id '" + id + "'");
    }
    res.status = 200;
    missions_->save(m);
    res.set_content(serialize(m), "application/json");
  }));

  s.Delete(R"(/missions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    missions_->remove(req.matches[1]);
    res.status = 204;
  }));

  s.Get("/map", [this](const httplib::Request&, httplib::Response& res) {
    res.status = 200;
    res.set_content(grid_document_, "application/json");
  });

  s.Post("/planning/waypoints", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    Mission draft = body.contains("mission") ? mission_from_json(body["mission"])
                                             : make_mission(body.at("mission_id").get<std::string>());
    const Pose pose = pose_from_json(body.at("pose"));
    auto [next, wp] = add_waypoint(draft, *anchors_, pose, body.value("is_inspection", false),
                                   AnchorPolicy{}, body.value("label", std::string()));
    ordered_json out;
    out["mission"] = mission_to_json(next);
    out["waypoint"] = wp.id;
    out["anchor_id"] = wp.anchor_id;
    send_json(res, 200, out);
  }));

  s.Get("/executions", guarded([this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(runs_mutex_);
    auto out = ordered_json::array();
    for (const auto& [id, run] : runs_) {
      out.push_back({{"execution_id", id},
                     {"mission_id", run->mission_id ? json(*run->mission_id) : json(nullptr)},
                     {"state", state_to_json(run->exec->state())}});
    }
    send_json(res, 200, out);
  }));

  s.Post("/executions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    ExecutorConfig ecfg = cfg_.executor;
    if (body.contains("initial_pose")) ecfg.initial_pose = pose2d_from_json(body["initial_pose"]);
    std::string id;
    if (body.contains("mission_id") && !body["mission_id"].is_null()) {
      const std::string mission_id = body["mission_id"].get<std::string>();
      id = launch(Execution::start(*missions_, mission_id, *anchors_, grid_, cfg_.reloc_model,
                                   ecfg, builtin_callbacks()),
                  mission_id);
    } else {
      id = launch(Execution::idle(grid_, ecfg), std::nullopt);
    }
    send_json(res, 201, {{"execution_id", id}});
  }));

  s.Get(R"(/executions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, find_run(req.matches[1])->summary());
  }));

  s.Get(R"(/executions/([^/]+)/events)",
        guarded([this](const httplib::Request& req, httplib::Response& res) {
          auto run = find_run(req.matches[1]);
          std::uint64_t from = 0;
          if (req.has_param("from")) {
            try {
              from = std::stoull(req.get_param_value("from"));
            } catch (const std::exception&) {
              throw Error(Errc::InvalidArgument, "from must be a sequence number");
            }
          }
          const bool follow = req.get_param_value("follow") != "0";
          auto cursor = std::make_shared<std::uint64_t>(from);
          res.set_chunked_content_provider(
              "application/x-ndjson",
              [this, run, cursor, follow](std::size_t, httplib::DataSink& sink) {
                const EventLog& log = run->exec->events();
                if (follow && !stopping_) log.wait(*cursor, std::chrono::milliseconds(200));
                const auto events = log.since(*cursor);
                for (const auto& e : events) {
                  const std::string line = e.to_line() + "\n";
                  if (!sink.write(line.data(), line.size())) return false;
                  ++*cursor;
                }
                if (events.empty() && (!follow || log.closed() || stopping_)) sink.done();
                return true;
              });
        }));

  s.Post(R"(/executions/([^/]+)/branch)",
         guarded([this](const httplib::Request& req, httplib::Response& res) {
           auto run = find_run(req.matches[1]);
           const json body = parse_body(req);
           const auto state = run->exec->resolve_branch(body.at("node").get<std::string>(),
                                                        body.at("order").get<int>());
           send_json(res, 200, state_to_json(state));
         }));

  s.Post(R"(/executions/([^/]+)/preempt)",
         guarded([this](const httplib::Request& req, httplib::Response& res) {
           send_json(res, 200, state_to_json(find_run(req.matches[1])->exec->preempt()));
         }));

  s.Post(R"(/executions/([^/]+)/command)",
         guarded([this](const httplib::Request& req, httplib::Response& res) {
           auto run = find_run(req.matches[1]);
           const json body = parse_body(req);
           const std::string kind = body.at("kind").get<std::string>();
           RobotCommand cmd;
           if (kind == "goal") {
             cmd.kind = RobotCommand::Kind::Goal;
             cmd.position = Vec2(body.at("x").get<double>(), body.at("y").get<double>());
             cmd.yaw = body.value("yaw", 0.0);
           } else if (kind == "preempt") {
             cmd.kind = RobotCommand::Kind::Preempt;
           } else if (kind == "noop") {
             cmd.kind = RobotCommand::Kind::NoOp;
           } else if (kind == "gesture") {
             const auto hand = body.at("hand").get<std::vector<double>>();
             if (hand.size() != 3) throw Error(Errc::MalformedDocument, "hand must be [x, y, z]");
             CommandConfig ccfg;
             ccfg.front_offset = body.value("front_offset", ccfg.front_offset);
             cmd = gesture_to_command(gesture_label_from_string(body.at("label").get<std::string>()),
                                      pose_from_json(body.at("headset")),
                                      Vec3(hand[0], hand[1], hand[2]), ccfg);
           } else {
             throw Error(Errc::MalformedDocument, "unknown command kind '" + kind + "'");
           }
           check_goal_on_map(cmd, *grid_);
           const auto state = run->exec->inject_command(cmd);
           ordered_json out = state_to_json(state);
           out["command"] = to_string(cmd.kind);
           if (cmd.kind == RobotCommand::Kind::Goal) {
             out["goal"] = pose2d_to_json({cmd.position.x(), cmd.position.y(), cmd.yaw});
           }
           send_json(res, 200, out);
         }));
}

}  // namespace anchorline
