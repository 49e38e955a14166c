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
#include <random>
#include <vector>

#include "wgsim/graph.hpp"
#include "wgsim/synth.hpp"
#include "wgsim/trace_io.hpp"

namespace wgsim::testing {

using Rng = std::mt19937_64;

// Uniform integer in [lo, hi].
std::int64_t uniform(Rng &rng, std::int64_t lo, std::int64_t hi);
bool coin(Rng &rng, double p = 0.5);

struct DagParams {
  int world_size = 2;
  int steps = 20;            // emitted operations per rank
  bool with_hosts = true;
  bool with_p2p = true;      // ring SEND/RECV exchanges between neighbours
  double coll_prob = 0.25;
  double ctrl_prob = 0.2;
};

// SPMD graphs: every rank emits the same structure (so collectives and
// point-to-point exchanges line up) with rank-specific compute durations.
std::vector<WorkloadGraph> random_spmd_graphs(Rng &rng, DagParams const &p);
DagParams random_dag_params(Rng &rng);

// A valid synthesizable FSDP or DP configuration at small dimensions.
struct SynthCase {
  ModelConfig model;
  ParallelConfig parallel;
  int world_size = 2;
};
SynthCase random_synth_case(Rng &rng);

// Hand-rolled FSDP/DP-shaped single-rank graph: gathered layers chained by
// optional fsdp-sync edges, a backward sweep with reduce-scatters or
// all-reduces, and all-reduces that can feed later compute.
WorkloadGraph random_collective_graph(Rng &rng);

// Random raw export over known operators, in definition order.
RawIrGraph random_raw_export(Rng &rng, int rank = 0, int world_size = 2);

} // namespace wgsim::testing
