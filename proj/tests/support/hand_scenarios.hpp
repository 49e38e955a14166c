/* Copyright 2026 The wgsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wgsim/graph.hpp"
#include "wgsim/simulator.hpp"
#include "wgsim/topology.hpp"

namespace wgsim::testing {

// Small graphs whose schedules were worked out by hand. The expected values
// are literals, derived in the comments next to each graph.
struct HandScenario {
  std::string name;
  std::vector<WorkloadGraph> graphs;
  Topology topo;
  SimOptions opts;
  std::int64_t makespan_ns = 0;
  std::optional<std::int64_t> exposed_comm_ns;     // max over ranks
  std::optional<std::int64_t> peak_mem_bytes;      // max over ranks
  std::optional<std::int64_t> critical_path_ns;
};

std::vector<HandScenario> hand_scenarios();

} // namespace wgsim::testing
