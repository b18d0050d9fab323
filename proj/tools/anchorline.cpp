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
// anchorline command-line tool. Exit status: 0 success, 1 domain error,
// 2 usage error.

#include <pthread.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "anchorline/anchor_sim.hpp"
#include "anchorline/executor.hpp"
#include "anchorline/gestures.hpp"
#include "anchorline/mapconv.hpp"
#include "anchorline/mission.hpp"
#include "anchorline/service.hpp"

namespace {

using namespace anchorline;
using nlohmann::ordered_json;

constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Stores and paths shared by `execute` and `serve`. Values given on the
// command line override the config file.
struct StoreOptions {
  std::string config;
  std::string missions;
  std::string anchors;
  std::string grid;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON config (default: $ANCHORLINE_CONFIG)");
    cmd->add_option("--missions", missions, "Mission store directory");
    cmd->add_option("--anchors", anchors, "Anchor store file");
    cmd->add_option("--grid", grid, "Occupancy grid file");
    cmd->add_option("--seed", seed, "Relocalization and anchor id seed");
  }

  ApiConfig resolve() const {
    std::string path = config;
    if (path.empty()) {
      if (const char* env = std::getenv("ANCHORLINE_CONFIG")) path = env;
    }
    ApiConfig cfg;
    if (!path.empty()) {
      cfg = load_api_config(path);
    }
    if (!missions.empty()) cfg.mission_dir = missions;
    if (!anchors.empty()) cfg.anchor_store = anchors;
    if (!grid.empty()) cfg.grid = grid;
    if (seed) {
      cfg.seed = *seed;
      cfg.reloc_model.seed = *seed;
    }
    if (cfg.grid.empty()) throw UsageError("a grid is required (--grid or a config file)");
    cfg.validate();
    return cfg;
  }
};

ordered_json pose2d_json(const Pose2d& p) {
  return ordered_json{{"x", p.x}, {"y", p.y}, {"yaw", p.yaw}};
}

int convert_map(const std::string& mesh_path, double resolution, double slice_height,
                std::optional<double> band, const std::string& out, unsigned workers) {
  MeshLoadResult loaded;
  try {
    loaded = load_mesh(mesh_path);
  } catch (const Error& e) {
    // Malformed geometry is a parse failure from the user's point of view.
    if (e.code() == Errc::NonTriangleFace) throw Error(Errc::ParseError, e.what());
    throw;
  }
  const SdfGrid sdf = build_sdf(loaded.mesh, grid_for_mesh(loaded.mesh, resolution), workers);
  SliceConfig slice;
  slice.z_height = slice_height;
  slice.occupied_band = band.value_or(resolution);
  const OccupancyGrid grid = extract_slice(sdf, slice);
  save_occupancy(out, grid);
  std::size_t occupied = 0;
  for (Cell c : grid.cells) occupied += c == Cell::Occupied;
  std::cerr << "wrote " << out << ": " << grid.width << "x" << grid.height << " cells, "
            << occupied << " occupied, " << loaded.dropped_degenerate
            << " degenerate faces dropped\n";
  return 0;
}

int execute(const StoreOptions& stores, const std::string& mission_id, const std::string& branch,
            double dt, double max_time) {
  if (branch != "first" && branch != "last") throw UsageError("--branch must be first or last");
  if (!(dt > 0.0)) throw UsageError("--dt must be positive");
  const ApiConfig cfg = stores.resolve();
  auto anchors = AnchorStore::open(cfg.anchor_store, cfg.seed.value_or(0));
  MissionStore missions(cfg.mission_dir);
  const Mission mission = missions.load(mission_id);
  auto grid = std::make_shared<const OccupancyGrid>(load_occupancy(cfg.grid));
  auto exec = Execution::start(mission, *anchors, grid, cfg.reloc_model, cfg.executor,
                               builtin_callbacks());

  ExecutionState s = exec->state();
  while (!s.terminal() && exec->time() < max_time) {
    if (s.kind == ExecutionState::Kind::AwaitingBranch) {
      const auto edges = mission.out_edges(s.node);
      s = exec->resolve_branch(s.node, branch == "first" ? edges.front().order
                                                         : edges.back().order);
      continue;
    }
    s = exec->tick(dt);
  }
  if (!s.terminal()) s = exec->preempt();

  ordered_json out;
  out["mission_id"] = mission_id;
  out["state"] = state_to_json(s);
  out["t"] = exec->time();
  auto captures = ordered_json::array();
  for (const auto& c : exec->captures()) {
    captures.push_back({{"node", c.node}, {"pose", pose2d_json(c.achieved)}, {"t", c.t}});
  }
  out["captures"] = std::move(captures);
  auto visits = ordered_json::array();
  for (const auto& v : exec->visits()) {
    visits.push_back({{"node", v.node}, {"pose", pose2d_json(v.achieved)}});
  }
  out["visits"] = std::move(visits);
  std::cout << out.dump(2) << "\n";
  return s.kind == ExecutionState::Kind::Completed ? 0 : kDomainError;
}

int train_gestures(const std::string& data, const TrainConfig& tc, const std::string& out) {
  const TrainResult r = train(to_windows(read_recordings(data)), tc);
  save_net(out, r.net);
  ordered_json summary;
  summary["train_windows"] = r.train_windows;
  summary["holdout_windows"] = r.holdout_windows;
  summary["initial_loss"] = r.initial_loss;
  summary["final_loss"] = r.final_loss;
  summary["holdout_accuracy"] = r.holdout_accuracy;
  std::cout << summary.dump() << "\n";
  return 0;
}

int classify(const std::string& net_path, const std::string& data) {
  const GestureNet net = load_net(net_path);
  for (const auto& rec : read_recordings(data)) {
    for (const auto& w : window_stream(rec.frames)) {
      const Inference inf = infer(net, w);
      ordered_json line;
      line["t"] = w.frames.back().timestamp;
      line["label"] = to_string(inf.label);
      line["confidences"] = inf.confidences;
      std::cout << line.dump() << "\n";
    }
  }
  return 0;
}

int generate_gestures(const std::string& out, int reps, std::uint64_t seed, int frames,
                      double fps) {
  if (reps < 1 || frames < 1 || !(fps > 0.0)) throw UsageError("reps, frames and fps must be positive");
  const auto recordings = generate_dataset(default_subjects(seed), reps, frames, fps);
  std::ofstream file(out);
  if (!file) throw Error(Errc::StoreWriteFailure, "cannot write " + out);
  write_recordings(file, recordings);
  std::cerr << "wrote " << recordings.size() << " recordings to " << out << "\n";
  return 0;
}

int serve(const StoreOptions& stores, std::optional<int> port, const std::string& host) {
  ApiConfig cfg = stores.resolve();
  if (port) cfg.port = *port;
  if (!host.empty()) cfg.host = host;

  // Block the shutdown signals before any thread exists so that only the
  // sigwait below sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(cfg);
  service.start();
  std::cerr << "listening on " << cfg.host << ":" << service.port() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down\n";
  service.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchor-relative mission planning and execution"};
  app.require_subcommand(1);

  auto* convert = app.add_subcommand("convert-map", "Mesh (.obj/.ply) to 2D occupancy grid");
  std::string mesh_path, map_out;
  double resolution = 0.05, slice_height = 0.5;
  std::optional<double> band;
  unsigned workers = 0;
  convert->add_option("--mesh", mesh_path, "Input mesh")->required();
  convert->add_option("--resolution", resolution, "Voxel size in metres")->capture_default_str();
  convert->add_option("--slice-height", slice_height, "Slice height in metres")->capture_default_str();
  convert->add_option("--band", band, "Occupied band in metres (default: resolution)");
  convert->add_option("--workers", workers, "Distance-field threads (0 = all cores)");
  convert->add_option("--out", map_out, "Output grid file")->required();

  auto* exec = app.add_subcommand("execute", "Run a stored mission headlessly");
  StoreOptions exec_stores;
  std::string mission_id, branch = "first";
  double dt = 0.05, max_time = 3600.0;
  exec->add_option("--mission", mission_id, "Mission id")->required();
  exec_stores.add_to(exec);
  exec->add_option("--branch", branch, "Answer to interactive branches: first or last")
      ->capture_default_str();
  exec->add_option("--dt", dt, "Simulated seconds per tick")->capture_default_str();
  exec->add_option("--max-time", max_time, "Simulated time limit in seconds")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train-gestures", "Train the gesture network");
  std::string data, net_out;
  TrainConfig tc;
  train_cmd->add_option("--data", data, "Recordings (JSON lines)")->required();
  train_cmd->add_option("--holdout", tc.holdout, "Held-out subject")->capture_default_str();
  train_cmd->add_option("--seed", tc.seed, "Initialization and shuffle seed")->capture_default_str();
  train_cmd->add_option("--epochs", tc.epochs)->capture_default_str();
  train_cmd->add_option("--lr", tc.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch", tc.batch_size)->capture_default_str();
  train_cmd->add_option("--out", net_out, "Network parameter file")->required();

  auto* classify_cmd = app.add_subcommand("classify", "Classify every window of a recording file");
  std::string net_path, classify_data;
  classify_cmd->add_option("--net", net_path, "Network parameter file")->required();
  classify_cmd->add_option("--data", classify_data, "Recordings (JSON lines)")->required();

  auto* generate = app.add_subcommand("generate-gestures", "Write a synthetic gesture dataset");
  std::string gen_out;
  int reps = 2, frames = 60;
  std::uint64_t gen_seed = 2026;
  double fps = 60.0;
  generate->add_option("--out", gen_out, "Output file")->required();
  generate->add_option("--reps", reps, "Repetitions per subject and class")->capture_default_str();
  generate->add_option("--seed", gen_seed)->capture_default_str();
  generate->add_option("--frames", frames, "Frames per recording")->capture_default_str();
  generate->add_option("--fps", fps)->capture_default_str();

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service until SIGINT/SIGTERM");
  StoreOptions serve_stores;
  std::optional<int> port;
  std::string host;
  serve_stores.add_to(serve_cmd);
  serve_cmd->add_option("--port", port, "Listen port (0 picks one)");
  serve_cmd->add_option("--host", host, "Listen address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*convert) return convert_map(mesh_path, resolution, slice_height, band, map_out, workers);
    if (*exec) return execute(exec_stores, mission_id, branch, dt, max_time);
    if (*train_cmd) return train_gestures(data, tc, net_out);
    if (*classify_cmd) return classify(net_path, classify_data);
    if (*generate) return generate_gestures(gen_out, reps, gen_seed, frames, fps);
    if (*serve_cmd) return serve(serve_stores, port, host);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kDomainError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainError;
  }
  return kUsageError;
}
