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
#include "wgsim/topology.hpp"

namespace wgsim {

enum class CollectiveAlgo { RING, TREE, MESH_HIER };
std::string_view to_string(CollectiveAlgo a);
CollectiveAlgo parse_collective_algo(std::string_view tag);

// A byte range of the collective's logical buffer.
struct Slice {
  std::int64_t offset = 0;
  std::int64_t length = 0;

  bool operator==(Slice const &) const = default;
};

struct P2pOp {
  enum Dir { SEND, RECV };
  Dir dir = SEND;
  int peer = 0; // global rank
  std::int64_t tag = 0;
  Slice slice;
  bool reduce = false;    // RECV: accumulate instead of overwrite
  std::vector<int> deps;  // indices into the same rank's op list

  std::int64_t bytes() const { return slice.length; }
};

// The logical buffer is the full collective payload: S bytes for ALL_REDUCE
// and REDUCE_SCATTER, group size times the shard for ALL_GATHER. Rank at group
// position p owns shard p of it for ALL_GATHER and ends with shard p for
// REDUCE_SCATTER.
struct P2pPlan {
  CollectiveKind kind = CollectiveKind::ALL_REDUCE;
  CollectiveAlgo algo = CollectiveAlgo::RING;
  std::vector<int> group;
  std::int64_t buffer_bytes = 0;
  std::vector<Slice> shards;             // one per group position
  std::vector<std::vector<P2pOp>> ops;   // one list per group position

  int size() const { return static_cast<int>(group.size()); }
  int position_of(int rank) const;
};

// Splits `total` into n pieces, larger pieces first.
std::vector<Slice> split_bytes(Slice whole, int n);

// Buffer size a collective node moves: comm_bytes, times the group size for
// ALL_GATHER (whose input is the local shard).
std::int64_t collective_payload(CollAttrs const &c);

P2pPlan expand_collective(CollectiveKind kind, std::vector<int> const &group,
                          std::int64_t payload_bytes, CollectiveAlgo algo, Topology const &topo);
P2pPlan expand(Node const &coll, CollectiveAlgo algo, Topology const &topo);

// Static SEND/RECV pairing: the i-th SEND from a to b with tag t pairs with
// the i-th RECV at b from a with tag t, both counted in list order.
struct OpRef {
  int pos = -1;
  int index = -1;

  bool valid() const { return pos >= 0; }
  bool operator==(OpRef const &) const = default;
};
struct PlanMatching {
  std::vector<std::vector<OpRef>> peer; // parallel to plan.ops
  int unmatched_sends = 0;
  int unmatched_recvs = 0;
};
PlanMatching match_plan(P2pPlan const &plan);

// Ordering within a plan is acyclic and SEND/RECV pairing is a bijection with
// equal byte counts.
bool plan_well_formed(P2pPlan const &plan);

std::int64_t plan_bytes(P2pPlan const &plan);
std::vector<std::int64_t> plan_bytes_per_rank(P2pPlan const &plan);
std::vector<int> plan_sends_per_rank(P2pPlan const &plan);

// Alpha-beta time. S is the buffer size (see P2pPlan). MESH_HIER needs a
// mesh topology whose ranks are exactly the group.
std::int64_t analytical_time(CollectiveKind kind, std::int64_t S, int N, CollectiveAlgo algo,
                             double alpha_ns, double beta_ns_per_byte,
                             Topology const *mesh = nullptr);

// Symbolically runs the plan, rank r starting from the value r + 1 in every
// byte it owns. Throws DeadlockDetected if some op can never run.
bool dataflow_check(P2pPlan const &plan);

} // namespace wgsim
