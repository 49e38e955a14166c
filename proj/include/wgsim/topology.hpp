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
#include <string>
#include <vector>

namespace wgsim {

enum class TopologyKind { SWITCH, MESH2D };

// SWITCH: every rank has one egress and one ingress NIC link into a
// non-blocking switch. MESH2D: rank = row * cols + col, with directed links
// between 4-neighbours.
struct Topology {
  TopologyKind kind = TopologyKind::SWITCH;
  int num_ranks = 0; // SWITCH only
  int rows = 0;      // MESH2D only
  int cols = 0;
  double bw_bytes_per_s = 0;
  std::int64_t latency_ns = 0;

  static Topology make_switch(int ranks, double bw, std::int64_t latency_ns);
  static Topology make_mesh(int rows, int cols, double bw, std::int64_t latency_ns);

  int size() const { return kind == TopologyKind::SWITCH ? num_ranks : rows * cols; }
  int num_links() const;
  std::string link_name(int link) const;

  // Directed links a message from src to dst traverses, in order. SWITCH
  // paths are {egress(src), ingress(dst)} and are reserved together; MESH2D
  // paths move along the row first, then along the column.
  std::vector<int> route(int src, int dst) const;
  bool adjacent(int a, int b) const;

  double alpha_ns() const { return static_cast<double>(latency_ns); }
  double beta_ns_per_byte() const { return 1e9 / bw_bytes_per_s; }

  // Time one message spends on one link (or on the switch port pair).
  std::int64_t hop_time(std::int64_t bytes) const;
  // Uncontended delivery time along the full route.
  std::int64_t transfer_time(int src, int dst, std::int64_t bytes) const;

  std::string describe() const;
};

// "switch:<N>:<bw>:<lat>" or "mesh:<R>x<C>:<bw>:<lat>", e.g. "switch:8:100GB:2us".
Topology parse_topology(std::string const &text);

// "100GB", "25Gbps", "1e9" (bytes per second). Decimal prefixes.
double parse_bandwidth(std::string const &text);
// "2us", "500ns", "0", "1ms".
std::int64_t parse_latency(std::string const &text);

} // namespace wgsim
