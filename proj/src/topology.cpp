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

#include "wgsim/topology.hpp"

#include <cmath>
#include <regex>
#include <sstream>

#include "wgsim/error.hpp"
#include "wgsim/profile.hpp"

namespace wgsim {

namespace {

// Mesh link directions.
enum { kEast, kWest, kSouth, kNorth };

void check_link_params(double bw, std::int64_t latency_ns) {
  if (!(bw > 0) || !std::isfinite(bw)) {
    throw InvalidArgument("bandwidth must be positive");
  }
  if (latency_ns < 0) {
    throw InvalidArgument("latency must be non-negative");
  }
}

} // namespace

Topology Topology::make_switch(int ranks, double bw, std::int64_t latency_ns) {
  if (ranks < 1) {
    throw InvalidArgument("switch needs at least one rank");
  }
  check_link_params(bw, latency_ns);
  Topology t;
  t.kind = TopologyKind::SWITCH;
  t.num_ranks = ranks;
  t.bw_bytes_per_s = bw;
  t.latency_ns = latency_ns;
  return t;
}

Topology Topology::make_mesh(int rows, int cols, double bw, std::int64_t latency_ns) {
  if (rows < 1 || cols < 1) {
    throw InvalidArgument("mesh dimensions must be positive");
  }
  check_link_params(bw, latency_ns);
  Topology t;
  t.kind = TopologyKind::MESH2D;
  t.rows = rows;
  t.cols = cols;
  t.bw_bytes_per_s = bw;
  t.latency_ns = latency_ns;
  return t;
}

int Topology::num_links() const {
  return kind == TopologyKind::SWITCH ? 2 * num_ranks : 4 * rows * cols;
}

std::string Topology::link_name(int link) const {
  if (kind == TopologyKind::SWITCH) {
    return "rank" + std::to_string(link / 2) + (link % 2 == 0 ? ".egress" : ".ingress");
  }
  int node = link / 4;
  int r = node / cols, c = node % cols;
  switch (link % 4) {
  case kEast: ++c; break;
  case kWest: --c; break;
  case kSouth: ++r; break;
  default: --r; break;
  }
  return std::to_string(node) + "->" + std::to_string(r * cols + c);
}

std::vector<int> Topology::route(int src, int dst) const {
  if (src < 0 || dst < 0 || src >= size() || dst >= size()) {
    throw InvalidArgument("route endpoint outside topology");
  }
  if (src == dst) {
    return {};
  }
  if (kind == TopologyKind::SWITCH) {
    return {2 * src, 2 * dst + 1};
  }
  std::vector<int> path;
  int r = src / cols, c = src % cols;
  int const tr = dst / cols, tc = dst % cols;
  while (c != tc) {
    int dir = tc > c ? kEast : kWest;
    path.push_back(4 * (r * cols + c) + dir);
    c += dir == kEast ? 1 : -1;
  }
  while (r != tr) {
    int dir = tr > r ? kSouth : kNorth;
    path.push_back(4 * (r * cols + c) + dir);
    r += dir == kSouth ? 1 : -1;
  }
  return path;
}

bool Topology::adjacent(int a, int b) const {
  if (kind == TopologyKind::SWITCH) {
    return a != b;
  }
  return route(a, b).size() == 1;
}

std::int64_t Topology::hop_time(std::int64_t bytes) const {
  return latency_ns + round_half_up(static_cast<long double>(bytes) * 1e9L / bw_bytes_per_s);
}

std::int64_t Topology::transfer_time(int src, int dst, std::int64_t bytes) const {
  auto hops = static_cast<std::int64_t>(route(src, dst).size());
  if (kind == TopologyKind::SWITCH) {
    hops = std::min<std::int64_t>(hops, 1);
  }
  return hops * hop_time(bytes);
}

std::string Topology::describe() const {
  std::ostringstream os;
  if (kind == TopologyKind::SWITCH) {
    os << "switch:" << num_ranks;
  } else {
    os << "mesh:" << rows << "x" << cols;
  }
  os << ":" << bw_bytes_per_s << ":" << latency_ns << "ns";
  return os.str();
}

double parse_bandwidth(std::string const &text) {
  static std::regex const re(R"(^\s*([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*([KMGT]?)(B|bps)?(?:/s)?\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) {
    throw InvalidArgument("cannot parse bandwidth '" + text + "'");
  }
  double v = std::stod(m[1].str());
  std::string const prefix = m[2].str();
  if (prefix == "K") v *= 1e3;
  if (prefix == "M") v *= 1e6;
  if (prefix == "G") v *= 1e9;
  if (prefix == "T") v *= 1e12;
  if (m[3].str() == "bps") {
    v /= 8;
  }
  if (!(v > 0)) {
    throw InvalidArgument("bandwidth must be positive: '" + text + "'");
  }
  return v;
}

std::int64_t parse_latency(std::string const &text) {
  static std::regex const re(R"(^\s*([0-9]*\.?[0-9]+)\s*(ns|us|ms|s)?\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) {
    throw InvalidArgument("cannot parse latency '" + text + "'");
  }
  long double v = std::stold(m[1].str());
  std::string const unit = m[2].str();
  if (unit == "us") v *= 1e3L;
  if (unit == "ms") v *= 1e6L;
  if (unit == "s") v *= 1e9L;
  return round_half_up(v);
}

Topology parse_topology(std::string const &text) {
  static std::regex const sw(R"(^switch:(\d+):([^:]+):([^:]+)$)");
  static std::regex const mesh(R"(^mesh:(\d+)x(\d+):([^:]+):([^:]+)$)");
  std::smatch m;
  if (std::regex_match(text, m, sw)) {
    return Topology::make_switch(std::stoi(m[1].str()), parse_bandwidth(m[2].str()),
                                 parse_latency(m[3].str()));
  }
  if (std::regex_match(text, m, mesh)) {
    return Topology::make_mesh(std::stoi(m[1].str()), std::stoi(m[2].str()),
                               parse_bandwidth(m[3].str()), parse_latency(m[4].str()));
  }
  throw InvalidArgument("cannot parse topology '" + text +
                        "' (expected switch:<N>:<bw>:<lat> or mesh:<R>x<C>:<bw>:<lat>)");
}

} // namespace wgsim
