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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wgsim {

using NodeId = std::int64_t;
using TensorId = std::int64_t;

enum class Dtype { F32, F16, BF16, I64, I32, BOOL };

int byte_width(Dtype dtype);
std::string_view to_string(Dtype dtype);
// Throws FormatError on an unknown tag.
Dtype parse_dtype(std::string_view tag);

struct TensorMeta {
  TensorId id = 0;
  std::vector<std::int64_t> shape;
  Dtype dtype = Dtype::F32;
  std::int64_t bytes = 0;

  bool operator==(TensorMeta const &) const = default;
};

// Builds a tensor whose byte count is recomputed from shape and dtype.
TensorMeta make_tensor(TensorId id, std::vector<std::int64_t> shape, Dtype dtype);
std::int64_t num_elements(std::vector<std::int64_t> const &shape);

enum class NodeKind { HOST, COMP, COLL, SEND, RECV };
std::string_view to_string(NodeKind kind);
NodeKind parse_node_kind(std::string_view tag);

enum class CollectiveKind { ALL_REDUCE, ALL_GATHER, REDUCE_SCATTER };
std::string_view to_string(CollectiveKind kind);
CollectiveKind parse_collective_kind(std::string_view tag);

struct CollAttrs {
  CollectiveKind kind = CollectiveKind::ALL_REDUCE;
  std::vector<int> group;
  // Input bytes on this rank. For ALL_GATHER this is the local shard.
  std::int64_t comm_bytes = 0;

  bool operator==(CollAttrs const &) const = default;
};

struct P2pAttrs {
  int peer_rank = 0;
  std::int64_t comm_bytes = 0;
  std::int64_t channel_tag = 0;

  bool operator==(P2pAttrs const &) const = default;
};

// Well-known control-edge provenance labels.
namespace ctrl_label {
inline constexpr std::string_view kLaunch = "launch";
inline constexpr std::string_view kFsdpSync = "fsdp-sync";
inline constexpr std::string_view kStreamOrder = "stream-order";
inline constexpr std::string_view kPrefetchGate = "prefetch-gate";
inline constexpr std::string_view kP2pStep = "p2p-step";
} // namespace ctrl_label

struct CtrlDep {
  NodeId node = 0;
  std::string label;

  bool operator==(CtrlDep const &) const = default;
};

struct Node {
  NodeId id = 0;
  NodeKind kind = NodeKind::COMP;
  std::string op_name;
  std::vector<TensorId> inputs;
  std::vector<TensorId> outputs;
  std::vector<NodeId> data_deps;
  std::vector<CtrlDep> ctrl_deps;
  std::optional<std::int64_t> duration_ns;
  std::optional<CollAttrs> coll;
  std::optional<P2pAttrs> p2p;
  // Ids of the nodes a pass merged into this one (empty for ordinary nodes).
  std::vector<NodeId> fused_from;

  bool operator==(Node const &) const = default;
};

struct WorkloadGraph {
  int rank = 0;
  int world_size = 1;
  std::vector<Node> nodes; // sorted by id
  std::map<TensorId, TensorMeta> tensors;
  std::map<std::string, std::string> meta;
  // Tensors that exist before the iteration starts (weights, batch inputs).
  std::vector<TensorId> graph_inputs;
  // Tensors that must survive the iteration (gradients, final outputs).
  std::vector<TensorId> graph_outputs;
  // Nodes the graph's final output waits on; a sink that is not a node.
  std::vector<NodeId> output_deps;

  bool operator==(WorkloadGraph const &) const = default;

  Node const *find(NodeId id) const;
  Node *find(NodeId id);
  NodeId next_node_id() const;
  TensorId next_tensor_id() const;
};

// id -> position in g.nodes
std::unordered_map<NodeId, std::size_t> index_nodes(WorkloadGraph const &g);

// All dependencies (data and control) of a node, deduplicated, sorted.
std::vector<NodeId> all_deps(Node const &n);

enum class Rule {
  DuplicateNodeId,
  DanglingDep,
  SelfDep,
  CycleDetected,
  AttrMismatch,
  BadTensorMeta,
  UnknownTensor,
  MultipleProducers,
  MissingProducer,
  DataDepMismatch,
  RankNotInGroup,
  RankOutOfRange,
  NegativeDuration,
};
std::string_view to_string(Rule rule);

struct Violation {
  Rule rule;
  std::optional<NodeId> node;
  std::optional<TensorId> tensor;
  std::string detail;
};

// Empty iff every graph/node invariant holds.
std::vector<Violation> validate_graph(WorkloadGraph const &g);

// Kahn order over data+ctrl edges, smallest ready id first. Throws CyclicGraph.
std::vector<NodeId> topo_order(WorkloadGraph const &g);

enum class OpClass { MM, Attn, Elementwise, AllReduce, AllGather, ReduceScatter, Other };
inline constexpr OpClass kAllOpClasses[] = {OpClass::MM,        OpClass::Attn,
                                           OpClass::Elementwise, OpClass::AllReduce,
                                           OpClass::AllGather, OpClass::ReduceScatter,
                                           OpClass::Other};
std::string_view to_string(OpClass c);
std::string_view short_name(OpClass c); // MM, Attn, Elem, AR, AG, RS, Other

using OpHistogram = std::map<OpClass, std::int64_t>;
using OpRatios = std::map<OpClass, double>;

// HOST nodes are excluded; every class appears in the result.
OpHistogram op_histogram(WorkloadGraph const &g);
// count_a / count_b per class present in either map; 0/0 = 1, x/0 = inf.
OpRatios compare_histograms(OpHistogram const &a, OpHistogram const &b);

} // namespace wgsim
