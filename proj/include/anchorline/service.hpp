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
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "anchorline/anchor_sim.hpp"
#include "anchorline/errors.hpp"
#include "anchorline/executor.hpp"
#include "anchorline/mission.hpp"

namespace httplib {
class Server;
}

namespace anchorline {

struct ApiConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path mission_dir = "missions";
  std::filesystem::path anchor_store = "anchors.json";
  std::filesystem::path grid;  // occupancy file; required
  RelocModel reloc_model;
  std::optional<std::uint64_t> seed;  // anchor ids; random when unset
  ExecutorConfig executor;
  double tick_dt = 0.05;     // simulated seconds per executor tick
  double time_scale = 1.0;   // simulated seconds per wall-clock second

  void validate() const;
};

// Unknown keys are rejected (MalformedDocument). Relative paths resolve
// against `base_dir`.
ApiConfig api_config_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir = {});
ApiConfig load_api_config(const std::filesystem::path& path);

// Branch callbacks available to missions run by the service and the CLI:
// "first" (order 0), "last" (highest order) and "capture-parity" (order 0
// after an odd number of captures, else order 1 clamped to the last edge).
CallbackRegistry builtin_callbacks();

// HTTP status used for an error name.
int http_status(Errc code);

// HTTP facade over the stores and executions. Executions tick on their own
// background thread at tick_dt / time_scale wall-clock intervals.
class Service {
 public:
  // Opens the stores and the grid. StoreCorrupt if any of them is unreadable.
  explicit Service(ApiConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and starts serving on a background thread. PortInUse if the port
  // cannot be bound.
  void start();
  // Actual port once started.
  int port() const { return port_; }
  // Stops accepting requests, ends event streams and joins every thread.
  void stop();

 private:
  struct Run;

  void routes();
  std::shared_ptr<Run> find_run(const std::string& id) const;
  std::string launch(std::unique_ptr<Execution> exec, std::optional<std::string> mission_id);

  ApiConfig cfg_;
  std::unique_ptr<AnchorStore> anchors_;
  std::unique_ptr<MissionStore> missions_;
  std::shared_ptr<const OccupancyGrid> grid_;
  std::string grid_document_;
  std::unique_ptr<httplib::Server> server_;
  std::thread listener_;
  int port_ = 0;
  std::atomic<bool> stopping_{false};

  mutable std::mutex runs_mutex_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
  std::uint64_t next_run_ = 1;
};

}  // namespace anchorline
