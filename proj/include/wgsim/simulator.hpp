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
#include <utility>
#include <vector>

#include "wgsim/collectives.hpp"
#include "wgsim/graph.hpp"
#include "wgsim/topology.hpp"

namespace wgsim {

enum class CommMode { ANALYTICAL, EXPANDED };
std::string_view to_string(CommMode m);

struct SimOptions {
  CommMode comm_mode = CommMode::ANALYTICAL;
  CollectiveAlgo algo = CollectiveAlgo::RING;
  bool track_memory = true;
  bool emit_event_trace = false;
  std::int64_t host_launch_overhead_ns = 0;
};

// "analytical", "analytical:<algo>", "expanded:<algo>".
void parse_comm(std::string const &text, SimOptions &opts);
std::string describe_comm(SimOptions const &opts);

struct RankStats {
  int rank = 0;
  std::int64_t compute_busy_ns = 0;
  std::int64_t comm_busy_ns = 0;
  std::int64_t exposed_comm_ns = 0;
  std::int64_t peak_mem_bytes = 0;
  std::int64_t bytes_sent = 0;
  std::int64_t finish_ns = 0;
};

struct LinkStats {
  std::string name;
  std::int64_t bytes = 0;
  std::int64_t busy_ns = 0;
};

struct TraceEvent {
  int rank = 0;
  NodeId node_id = 0;
  std::string stream; // host, compute, comm, p2p
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;

  bool operator==(TraceEvent const &) const = default;
};

struct SimReport {
  std::int64_t makespan_ns = 0;
  std::vector<RankStats> ranks;
  std::vector<LinkStats> links; // EXPANDED only; links that carried traffic
  std::int64_t total_comm_bytes = 0;
  std::vector<TraceEvent> trace; // when emit_event_trace

  std::int64_t peak_mem_bytes() const;  // max over ranks
  std::int64_t exposed_comm_ns() const; // max over ranks
  std::int64_t comm_busy_ns() const;    // max over ranks
  std::int64_t link_busy_ns() const;    // sum over links
};

// Throws InvalidArgument (bad inputs), InconsistentGroups, DeadlockDetected,
// UnsupportedAlgoTopology.
SimReport simulate(std::vector<WorkloadGraph> const &graphs, Topology const &topo,
                   SimOptions const &opts);

struct CriticalPath {
  std::int64_t length_ns = 0;
  std::vector<std::pair<int, NodeId>> path; // (rank, node id), source first
};

// Longest dependency path with the same node durations as simulate but no
// stream or link contention; a lower bound on the makespan.
CriticalPath critical_path(std::vector<WorkloadGraph> const &graphs, Topology const &topo,
                           SimOptions const &opts);

std::string dump_report(SimReport const &r, Topology const &topo, SimOptions const &opts);
inline constexpr char const *kTraceFormatVersion = "trace-1";
std::string dump_trace(std::vector<TraceEvent> const &events);
std::vector<TraceEvent> parse_trace(std::string const &text);

// Expanded graphs: every COLL node replaced inline by its SEND/RECV ops.
std::vector<WorkloadGraph> expand_graphs(std::vector<WorkloadGraph> const &graphs,
                                         Topology const &topo, CollectiveAlgo algo);

} // namespace wgsim
