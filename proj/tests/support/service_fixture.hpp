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

// A throwaway directory holding an anchor store, a mission store with the
// branching fixture saved as "tour", and the room grid, plus an ApiConfig
// pointing at them.

#include <filesystem>
#include <string>

#include "anchorline/anchor_sim.hpp"
#include "anchorline/mapconv.hpp"
#include "anchorline/mission.hpp"
#include "anchorline/service.hpp"
#include "support/executor_fixture.hpp"

namespace anchorline::testing {

struct ServiceWorkspace {
  std::filesystem::path dir;
  PlacedMission tour;

  explicit ServiceWorkspace(const std::string& name) {
    dir = std::filesystem::temp_directory_path() / ("anchorline_svc_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    save_occupancy(grid_path(), *room_grid());
    auto anchors = AnchorStore::open(anchor_path(), 17);
    tour = branching_fixture(*anchors, "tour");
    MissionStore(mission_dir()).save(tour.mission);
  }
  ~ServiceWorkspace() {
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }

  std::filesystem::path grid_path() const { return dir / "map.json"; }
  std::filesystem::path anchor_path() const { return dir / "anchors.json"; }
  std::filesystem::path mission_dir() const { return dir / "missions"; }

  // Ephemeral port, noiseless relocalization and a fast simulated clock.
  ApiConfig config() const {
    ApiConfig cfg;
    cfg.port = 0;
    cfg.mission_dir = mission_dir();
    cfg.anchor_store = anchor_path();
    cfg.grid = grid_path();
    cfg.seed = 99;
    cfg.reloc_model.sigma_t0 = cfg.reloc_model.sigma_r0 = 0.0;
    cfg.executor.initial_pose = {-0.5, 0.2, 0.0};
    cfg.executor.speed = 1.0;
    cfg.time_scale = 50.0;
    return cfg;
  }
};

}  // namespace anchorline::testing
