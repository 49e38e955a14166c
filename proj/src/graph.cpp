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

#include "wgsim/graph.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "wgsim/error.hpp"
#include "wgsim/op_table.hpp"

namespace wgsim {

int byte_width(Dtype dtype) {
  switch (dtype) {
  case Dtype::F32: return 4;
  case Dtype::F16: return 2;
  case Dtype::BF16: return 2;
  case Dtype::I64: return 8;
  case Dtype::I32: return 4;
  case Dtype::BOOL: return 1;
  }
  return 0;
}

std::string_view to_string(Dtype dtype) {
  switch (dtype) {
  case Dtype::F32: return "F32";
  case Dtype::F16: return "F16";
  case Dtype::BF16: return "BF16";
  case Dtype::I64: return "I64";
  case Dtype::I32: return "I32";
  case Dtype::BOOL: return "BOOL";
  }
  return "?";
}

Dtype parse_dtype(std::string_view tag) {
  for (Dtype d : {Dtype::F32, Dtype::F16, Dtype::BF16, Dtype::I64, Dtype::I32,
                  Dtype::BOOL}) {
    if (to_string(d) == tag) {
      return d;
    }
  }
  throw FormatError("unknown dtype '" + std::string(tag) + "'");
}

std::int64_t num_elements(std::vector<std::int64_t> const &shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    n *= d;
  }
  return n;
}

TensorMeta make_tensor(TensorId id, std::vector<std::int64_t> shape, Dtype dtype) {
  TensorMeta t;
  t.id = id;
  t.bytes = num_elements(shape) * byte_width(dtype);
  t.shape = std::move(shape);
  t.dtype = dtype;
  return t;
}

std::string_view to_string(NodeKind kind) {
  switch (kind) {
  case NodeKind::HOST: return "HOST";
  case NodeKind::COMP: return "COMP";
  case NodeKind::COLL: return "COLL";
  case NodeKind::SEND: return "SEND";
  case NodeKind::RECV: return "RECV";
  }
  return "?";
}

NodeKind parse_node_kind(std::string_view tag) {
  for (NodeKind k : {NodeKind::HOST, NodeKind::COMP, NodeKind::COLL, NodeKind::SEND,
                     NodeKind::RECV}) {
    if (to_string(k) == tag) {
      return k;
    }
  }
  throw FormatError("unknown node kind '" + std::string(tag) + "'");
}

std::string_view to_string(CollectiveKind kind) {
  switch (kind) {
  case CollectiveKind::ALL_REDUCE: return "ALL_REDUCE";
  case CollectiveKind::ALL_GATHER: return "ALL_GATHER";
  case CollectiveKind::REDUCE_SCATTER: return "REDUCE_SCATTER";
  }
  return "?";
}

CollectiveKind parse_collective_kind(std::string_view tag) {
  for (CollectiveKind k : {CollectiveKind::ALL_REDUCE, CollectiveKind::ALL_GATHER,
                           CollectiveKind::REDUCE_SCATTER}) {
    if (to_string(k) == tag) {
      return k;
    }
  }
  throw FormatError("unknown collective kind '" + std::string(tag) + "'");
}

Node const *WorkloadGraph::find(NodeId id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](Node const &n, NodeId v) { return n.id < v; });
  if (it != nodes.end() && it->id == id) {
    return &*it;
  }
  // Fall back to a scan for graphs whose node list is not sorted.
  for (auto const &n : nodes) {
    if (n.id == id) {
      return &n;
    }
  }
  return nullptr;
}

Node *WorkloadGraph::find(NodeId id) {
  return const_cast<Node *>(std::as_const(*this).find(id));
}

NodeId WorkloadGraph::next_node_id() const {
  NodeId next = 0;
  for (auto const &n : nodes) {
    next = std::max(next, n.id + 1);
  }
  return next;
}

TensorId WorkloadGraph::next_tensor_id() const {
  return tensors.empty() ? 0 : tensors.rbegin()->first + 1;
}

std::unordered_map<NodeId, std::size_t> index_nodes(WorkloadGraph const &g) {
  std::unordered_map<NodeId, std::size_t> idx;
  idx.reserve(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    idx.emplace(g.nodes[i].id, i);
  }
  return idx;
}

std::vector<NodeId> all_deps(Node const &n) {
  std::vector<NodeId> deps = n.data_deps;
  for (auto const &c : n.ctrl_deps) {
    deps.push_back(c.node);
  }
  std::sort(deps.begin(), deps.end());
  deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
  return deps;
}

std::string_view to_string(Rule rule) {
  switch (rule) {
  case Rule::DuplicateNodeId: return "DuplicateNodeId";
  case Rule::DanglingDep: return "DanglingDep";
  case Rule::SelfDep: return "SelfDep";
  case Rule::CycleDetected: return "CycleDetected";
  case Rule::AttrMismatch: return "AttrMismatch";
  case Rule::BadTensorMeta: return "BadTensorMeta";
  case Rule::UnknownTensor: return "UnknownTensor";
  case Rule::MultipleProducers: return "MultipleProducers";
  case Rule::MissingProducer: return "MissingProducer";
  case Rule::DataDepMismatch: return "DataDepMismatch";
  case Rule::RankNotInGroup: return "RankNotInGroup";
  case Rule::RankOutOfRange: return "RankOutOfRange";
  case Rule::NegativeDuration: return "NegativeDuration";
  }
  return "?";
}

namespace {

std::string join_ids(std::vector<NodeId> const &ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    os << (i ? "," : "") << ids[i];
  }
  return os.str();
}

// Nodes left over after Kahn's algorithm sit on or downstream of a cycle.
// Walk predecessors among them until one repeats to name a concrete cycle.
std::vector<NodeId> find_cycle(WorkloadGraph const &g,
                               std::unordered_map<NodeId, std::size_t> const &idx,
                               std::set<NodeId> const &stuck) {
  if (stuck.empty()) {
    return {};
  }
  std::map<NodeId, std::size_t> seen_at;
  std::vector<NodeId> walk;
  NodeId cur = *stuck.begin();
  while (!seen_at.count(cur)) {
    seen_at[cur] = walk.size();
    walk.push_back(cur);
    Node const &n = g.nodes[idx.at(cur)];
    NodeId next = cur;
    for (NodeId d : all_deps(n)) {
      if (stuck.count(d)) {
        next = d;
        break;
      }
    }
    cur = next;
  }
  std::vector<NodeId> cycle(walk.begin() + static_cast<std::ptrdiff_t>(seen_at[cur]),
                            walk.end());
  std::sort(cycle.begin(), cycle.end());
  return cycle;
}

} // namespace

std::vector<Violation> validate_graph(WorkloadGraph const &g) {
  std::vector<Violation> out;
  auto add = [&](Rule r, std::optional<NodeId> n, std::optional<TensorId> t,
                 std::string detail) {
    out.push_back(Violation{r, n, t, std::move(detail)});
  };

  if (g.world_size <= 0 || g.rank < 0 || g.rank >= g.world_size) {
    add(Rule::RankOutOfRange, std::nullopt, std::nullopt,
        "rank " + std::to_string(g.rank) + " world_size " +
            std::to_string(g.world_size));
  }

  std::unordered_map<NodeId, std::size_t> idx;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!idx.emplace(g.nodes[i].id, i).second) {
      add(Rule::DuplicateNodeId, g.nodes[i].id, std::nullopt, "");
    }
  }

  for (auto const &[id, t] : g.tensors) {
    bool ok = id == t.id && !t.shape.empty() &&
              std::all_of(t.shape.begin(), t.shape.end(),
                          [](std::int64_t d) { return d > 0; }) &&
              t.bytes == num_elements(t.shape) * byte_width(t.dtype);
    if (!ok) {
      add(Rule::BadTensorMeta, std::nullopt, id,
          "bytes must equal product(shape) x byte_width with a non-empty positive shape");
    }
  }

  std::map<TensorId, NodeId> producer;
  for (auto const &n : g.nodes) {
    for (TensorId t : n.outputs) {
      if (!g.tensors.count(t)) {
        add(Rule::UnknownTensor, n.id, t, "output not in tensor table");
      }
      auto [it, inserted] = producer.emplace(t, n.id);
      if (!inserted) {
        add(Rule::MultipleProducers, n.id, t,
            "also produced by node " + std::to_string(it->second));
      }
    }
  }
  std::set<TensorId> inputs(g.graph_inputs.begin(), g.graph_inputs.end());
  for (TensorId t : inputs) {
    if (!g.tensors.count(t)) {
      add(Rule::UnknownTensor, std::nullopt, t, "graph input not in tensor table");
    }
    if (producer.count(t)) {
      add(Rule::MultipleProducers, producer.at(t), t,
          "graph input also produced by a node");
    }
  }

  for (auto const &n : g.nodes) {
    bool coll_expected = n.kind == NodeKind::COLL;
    bool p2p_expected = n.kind == NodeKind::SEND || n.kind == NodeKind::RECV;
    if (n.coll.has_value() != coll_expected) {
      add(Rule::AttrMismatch, n.id, std::nullopt, "coll present iff kind = COLL");
    }
    if (n.p2p.has_value() != p2p_expected) {
      add(Rule::AttrMismatch, n.id, std::nullopt, "p2p present iff kind in {SEND, RECV}");
    }
    if (n.duration_ns && *n.duration_ns < 0) {
      add(Rule::NegativeDuration, n.id, std::nullopt, "");
    }
    if (n.coll && std::find(n.coll->group.begin(), n.coll->group.end(), g.rank) ==
                      n.coll->group.end()) {
      add(Rule::RankNotInGroup, n.id, std::nullopt,
          "rank " + std::to_string(g.rank) + " not in collective group");
    }

    for (NodeId d : all_deps(n)) {
      if (d == n.id) {
        add(Rule::SelfDep, n.id, std::nullopt, "");
      } else if (!idx.count(d)) {
        add(Rule::DanglingDep, n.id, std::nullopt, "dep " + std::to_string(d));
      }
    }

    std::set<NodeId> expected;
    for (TensorId t : n.inputs) {
      if (!g.tensors.count(t)) {
        add(Rule::UnknownTensor, n.id, t, "input not in tensor table");
      }
      auto p = producer.find(t);
      if (p == producer.end()) {
        if (!inputs.count(t)) {
          add(Rule::MissingProducer, n.id, t, "consumed tensor has no producer");
        }
        continue;
      }
      expected.insert(p->second);
      // Consumers of a collective also wait on its host-side launch.
      auto pi = idx.find(p->second);
      if (pi != idx.end()) {
        Node const &prod = g.nodes[pi->second];
        if (prod.kind == NodeKind::COLL) {
          for (auto const &c : prod.ctrl_deps) {
            if (c.label == ctrl_label::kLaunch) {
              expected.insert(c.node);
            }
          }
        }
      }
    }
    std::set<NodeId> actual(n.data_deps.begin(), n.data_deps.end());
    if (actual != expected) {
      std::vector<NodeId> a(actual.begin(), actual.end());
      std::vector<NodeId> e(expected.begin(), expected.end());
      add(Rule::DataDepMismatch, n.id, std::nullopt,
          "data_deps [" + join_ids(a) + "] expected [" + join_ids(e) + "]");
    }
  }

  for (NodeId d : g.output_deps) {
    if (!idx.count(d)) {
      add(Rule::DanglingDep, std::nullopt, std::nullopt,
          "output dep " + std::to_string(d));
    }
  }
  for (TensorId t : g.graph_outputs) {
    if (!g.tensors.count(t)) {
      add(Rule::UnknownTensor, std::nullopt, t, "graph output not in tensor table");
    }
  }

  // Cycle check over the well-formed part of the edge set.
  std::map<NodeId, int> indeg;
  std::map<NodeId, std::vector<NodeId>> succ;
  for (auto const &n : g.nodes) {
    indeg.emplace(n.id, 0);
  }
  for (auto const &n : g.nodes) {
    for (NodeId d : all_deps(n)) {
      if (d != n.id && idx.count(d)) {
        ++indeg[n.id];
        succ[d].push_back(n.id);
      }
    }
  }
  std::queue<NodeId> ready;
  for (auto const &[id, deg] : indeg) {
    if (deg == 0) {
      ready.push(id);
    }
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    NodeId u = ready.front();
    ready.pop();
    ++visited;
    for (NodeId v : succ[u]) {
      if (--indeg[v] == 0) {
        ready.push(v);
      }
    }
  }
  if (visited < indeg.size()) {
    std::set<NodeId> stuck;
    for (auto const &[id, deg] : indeg) {
      if (deg > 0) {
        stuck.insert(id);
      }
    }
    auto cycle = find_cycle(g, idx, stuck);
    add(Rule::CycleDetected, cycle.empty() ? std::nullopt : std::optional(cycle.front()),
        std::nullopt, "cycle {" + join_ids(cycle) + "}");
  }
  return out;
}

std::vector<NodeId> topo_order(WorkloadGraph const &g) {
  auto idx = index_nodes(g);
  std::vector<int> indeg(g.nodes.size(), 0);
  std::vector<std::vector<std::size_t>> succ(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    for (NodeId d : all_deps(g.nodes[i])) {
      auto it = idx.find(d);
      if (it == idx.end()) {
        throw CyclicGraph("node " + std::to_string(g.nodes[i].id) +
                          " depends on missing node " + std::to_string(d));
      }
      ++indeg[i];
      succ[it->second].push_back(i);
    }
  }
  using Item = std::pair<NodeId, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> ready;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (indeg[i] == 0) {
      ready.emplace(g.nodes[i].id, i);
    }
  }
  std::vector<NodeId> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    auto [id, i] = ready.top();
    ready.pop();
    order.push_back(id);
    for (std::size_t s : succ[i]) {
      if (--indeg[s] == 0) {
        ready.emplace(g.nodes[s].id, s);
      }
    }
  }
  if (order.size() != g.nodes.size()) {
    throw CyclicGraph(std::to_string(g.nodes.size() - order.size()) +
                      " nodes lie on or behind a cycle");
  }
  return order;
}

std::string_view to_string(OpClass c) {
  switch (c) {
  case OpClass::MM: return "MM";
  case OpClass::Attn: return "Attn";
  case OpClass::Elementwise: return "Elementwise";
  case OpClass::AllReduce: return "AllReduce";
  case OpClass::AllGather: return "AllGather";
  case OpClass::ReduceScatter: return "ReduceScatter";
  case OpClass::Other: return "Other";
  }
  return "?";
}

std::string_view short_name(OpClass c) {
  switch (c) {
  case OpClass::MM: return "MM";
  case OpClass::Attn: return "Attn";
  case OpClass::Elementwise: return "Elem";
  case OpClass::AllReduce: return "AR";
  case OpClass::AllGather: return "AG";
  case OpClass::ReduceScatter: return "RS";
  case OpClass::Other: return "Other";
  }
  return "?";
}

OpHistogram op_histogram(WorkloadGraph const &g) {
  OpHistogram h;
  for (OpClass c : kAllOpClasses) {
    h[c] = 0;
  }
  auto const &table = default_op_table();
  for (auto const &n : g.nodes) {
    switch (n.kind) {
    case NodeKind::HOST:
      break;
    case NodeKind::COLL:
      switch (n.coll->kind) {
      case CollectiveKind::ALL_REDUCE: ++h[OpClass::AllReduce]; break;
      case CollectiveKind::ALL_GATHER: ++h[OpClass::AllGather]; break;
      case CollectiveKind::REDUCE_SCATTER: ++h[OpClass::ReduceScatter]; break;
      }
      break;
    case NodeKind::SEND:
    case NodeKind::RECV:
      ++h[OpClass::Other];
      break;
    case NodeKind::COMP: {
      OpInfo const *info = table.by_op(n.op_name);
      ++h[info ? info->op_class : OpClass::Other];
      break;
    }
    }
  }
  return h;
}

OpRatios compare_histograms(OpHistogram const &a, OpHistogram const &b) {
  std::set<OpClass> classes;
  for (auto const &[c, _] : a) {
    classes.insert(c);
  }
  for (auto const &[c, _] : b) {
    classes.insert(c);
  }
  OpRatios r;
  for (OpClass c : classes) {
    auto ca = a.count(c) ? a.at(c) : 0;
    auto cb = b.count(c) ? b.at(c) : 0;
    if (cb == 0) {
      r[c] = ca == 0 ? 1.0 : std::numeric_limits<double>::infinity();
    } else {
      r[c] = static_cast<double>(ca) / static_cast<double>(cb);
    }
  }
  return r;
}

} // namespace wgsim
