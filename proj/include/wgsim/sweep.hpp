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

#include "wgsim/passes.hpp"
#include "wgsim/profile.hpp"
#include "wgsim/simulator.hpp"
#include "wgsim/synth.hpp"

namespace wgsim {

// Either a synthesized model or a directory of graphs / raw exports.
struct WorkloadSpec {
  std::string preset;
  std::string parallel;            // "<strategy>:<degree>"
  std::string fsdp_mode = "delayed";
  std::string graph_dir;
  std::string raw_dir;

  std::string label() const;
};

struct PassSpec {
  std::optional<PassConfig> pass; // nullopt: no pass

  std::string label() const;
};
// "none", "reorder-ag:<k>", "bucket-ar:<bytes>".
PassSpec parse_pass_spec(std::string const &text);

struct TopologySpec {
  std::string variant = "switch";
  int ranks = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> bandwidths;
  std::int64_t latency_ns = 0;

  Topology at(double bw) const;
  std::string label() const;
};

struct SweepSpec {
  std::vector<WorkloadSpec> workloads;
  std::vector<PassSpec> passes;
  std::vector<TopologySpec> topologies;
  std::vector<SimOptions> comms;
  int repetitions = 1;
  std::string profile_path;
};

// Relative paths inside the spec resolve against base_dir.
SweepSpec parse_sweep_spec(std::string const &text, std::string const &base_dir = ".");

struct SweepPoint {
  int index = 0;
  int workload = 0;
  int pass = 0;
  int topology = 0;
  int bandwidth = 0;
  int comm = 0;
};

// Cartesian product in lexicographic (workload, pass, topology, bandwidth,
// comm) index order.
std::vector<SweepPoint> enumerate_points(SweepSpec const &spec);

// Graphs for one (workload, pass) pair, shared by all its points.
struct PreparedGraphs {
  std::vector<WorkloadGraph> graphs;
  std::optional<std::string> error;
  std::optional<std::string> pass_note;
};
std::vector<std::vector<PreparedGraphs>> prepare_workloads(SweepSpec const &spec);

struct PointResult {
  std::string status = "ok";
  std::int64_t makespan_ns = 0;
  std::int64_t peak_mem_bytes = 0;
  std::int64_t exposed_comm_ns = 0;
  std::int64_t total_comm_bytes = 0;
  std::int64_t comm_busy_ns = 0;
  std::int64_t link_busy_ns = 0;
  std::int64_t wall_clock_ns = 0;

  bool ok() const { return status == "ok" || status == "pass-not-applicable"; }
};

PointResult evaluate_point(SweepSpec const &spec, SweepPoint const &pt,
                           std::vector<std::vector<PreparedGraphs>> const &prepared);

// OpenMP over points with up to `jobs` threads; results in point order.
std::vector<PointResult> evaluate_points(SweepSpec const &spec, std::vector<SweepPoint> const &points,
                                         std::vector<std::vector<PreparedGraphs>> const &prepared,
                                         int jobs);
// Single-threaded reference used to check the parallel version.
std::vector<PointResult> evaluate_points_serial(SweepSpec const &spec,
                                                std::vector<SweepPoint> const &points,
                                                std::vector<std::vector<PreparedGraphs>> const &prepared);

struct CsvOptions {
  std::optional<int> normalize_to;
  bool timing = false;
};

std::string sweep_csv(SweepSpec const &spec, std::vector<SweepPoint> const &points,
                      std::vector<PointResult> const &results, CsvOptions const &opts = {});

std::string run_sweep(SweepSpec const &spec, int jobs, CsvOptions const &opts = {});

} // namespace wgsim
