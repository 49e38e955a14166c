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

#include "wgsim/passes.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "wgsim/error.hpp"

namespace wgsim {

namespace {

bool is_coll(Node const &n, CollectiveKind kind) {
  return n.kind == NodeKind::COLL && n.coll && n.coll->kind == kind;
}

void record_pass(WorkloadGraph &g, std::string const &entry) {
  auto &history = g.meta["passes"];
  history += history.empty() ? entry : "," + entry;
}

// Every node reachable backwards from `start` over data and control edges.
std::set<NodeId> ancestors(WorkloadGraph const &g,
                           std::unordered_map<NodeId, std::size_t> const &idx, NodeId start) {
  std::set<NodeId> seen;
  std::vector<NodeId> stack{start};
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    if (!seen.insert(u).second) {
      continue;
    }
    auto it = idx.find(u);
    if (it == idx.end()) {
      continue;
    }
    for (NodeId d : all_deps(g.nodes[it->second])) {
      if (!seen.count(d)) {
        stack.push_back(d);
      }
    }
  }
  return seen;
}

void add_ctrl(Node &n, NodeId dep, std::string_view label) {
  if (dep == n.id) {
    return;
  }
  for (auto const &c : n.ctrl_deps) {
    if (c.node == dep && c.label == label) {
      return;
    }
  }
  n.ctrl_deps.push_back(CtrlDep{dep, std::string(label)});
}

} // namespace

PassResult reorder_allgather(WorkloadGraph const &g, int prefetch_distance) {
  if (prefetch_distance < 1) {
    throw InvalidArgument("prefetch distance must be positive");
  }
  auto idx = index_nodes(g);

  // Gather -> the gather whose layer its sync edge waits on.
  std::map<NodeId, NodeId> pred;
  std::vector<NodeId> gathers;
  bool any_sync = false;
  for (auto const &n : g.nodes) {
    if (!is_coll(n, CollectiveKind::ALL_GATHER)) {
      for (auto const &c : n.ctrl_deps) {
        any_sync |= c.label == ctrl_label::kFsdpSync;
      }
      continue;
    }
    gathers.push_back(n.id);
    for (auto const &c : n.ctrl_deps) {
      if (c.label != ctrl_label::kFsdpSync) {
        continue;
      }
      any_sync = true;
      // The previous layer's gather is the latest gather upstream of the
      // compute node this one was held behind.
      NodeId best = -1;
      for (NodeId a : ancestors(g, idx, c.node)) {
        if (a != n.id && is_coll(g.nodes[idx.at(a)], CollectiveKind::ALL_GATHER)) {
          best = std::max(best, a);
        }
      }
      if (best >= 0) {
        pred[n.id] = best;
      }
    }
  }
  if (!any_sync) {
    return PassResult{g, "reorder_allgather: graph has no fsdp-sync edges"};
  }
  std::sort(gathers.begin(), gathers.end());

  // Link gathers into chains; a gather claimed twice keeps the lower id.
  std::map<NodeId, NodeId> succ;
  for (auto const &[b, a] : pred) {
    auto it = succ.find(a);
    if (it == succ.end() || b < it->second) {
      succ[a] = b;
    }
  }
  std::set<NodeId> has_pred;
  for (auto const &[a, b] : succ) {
    has_pred.insert(b);
  }
  std::vector<std::vector<NodeId>> chains;
  for (NodeId a : gathers) {
    if (has_pred.count(a)) {
      continue;
    }
    std::vector<NodeId> chain{a};
    for (auto it = succ.find(a); it != succ.end(); it = succ.find(it->second)) {
      chain.push_back(it->second);
    }
    chains.push_back(std::move(chain));
  }

  // First compute of each gather's layer: the lowest-id COMP consuming it.
  std::map<NodeId, NodeId> first_comp;
  for (auto const &n : g.nodes) {
    if (n.kind != NodeKind::COMP) {
      continue;
    }
    for (NodeId d : n.data_deps) {
      auto it = idx.find(d);
      if (it != idx.end() && is_coll(g.nodes[it->second], CollectiveKind::ALL_GATHER) &&
          !first_comp.count(d)) {
        first_comp[d] = n.id;
      }
    }
  }

  WorkloadGraph out = g;
  for (auto &n : out.nodes) {
    std::erase_if(n.ctrl_deps,
                  [](CtrlDep const &c) { return c.label == ctrl_label::kFsdpSync; });
  }
  auto out_idx = index_nodes(out);
  std::size_t const k = static_cast<std::size_t>(prefetch_distance);
  for (auto const &chain : chains) {
    for (std::size_t j = 1; j < chain.size(); ++j) {
      Node &ag = out.nodes[out_idx.at(chain[j])];
      add_ctrl(ag, chain[j - 1], ctrl_label::kStreamOrder);
      if (j >= k) {
        auto gate = first_comp.find(chain[j - k]);
        if (gate != first_comp.end()) {
          add_ctrl(ag, gate->second, ctrl_label::kPrefetchGate);
        }
      }
    }
  }
  record_pass(out, "reorder_ag:" + std::to_string(prefetch_distance));
  topo_order(out); // throws CyclicGraph if the gating closed a loop
  return PassResult{std::move(out), std::nullopt};
}

PassResult bucket_allreduce(WorkloadGraph const &g, std::int64_t cap_bytes) {
  if (cap_bytes <= 0) {
    throw InvalidArgument("bucket cap must be positive");
  }
  auto idx = index_nodes(g);
  std::vector<NodeId> reduces;
  for (auto const &n : g.nodes) {
    if (is_coll(n, CollectiveKind::ALL_REDUCE)) {
      reduces.push_back(n.id);
    }
  }
  if (reduces.empty()) {
    return PassResult{g, "bucket_allreduce: graph has no ALL_REDUCE nodes"};
  }
  std::sort(reduces.begin(), reduces.end());

  auto const &node = [&](NodeId id) -> Node const & { return g.nodes[idx.at(id)]; };

  std::vector<std::vector<NodeId>> buckets;
  std::vector<NodeId> cur;
  std::int64_t cur_bytes = 0;
  for (NodeId r : reduces) {
    Node const &n = node(r);
    std::int64_t bytes = n.coll->comm_bytes;
    bool fits = !cur.empty() && node(cur.front()).coll->group == n.coll->group &&
                bytes <= cap_bytes - cur_bytes;
    if (fits) {
      // Merging a reduce that (transitively) consumes a bucket member would
      // close a loop through the bucket node.
      auto up = ancestors(g, idx, r);
      fits = std::none_of(cur.begin(), cur.end(), [&](NodeId m) { return up.count(m) > 0; });
    }
    if (!fits) {
      if (!cur.empty()) {
        buckets.push_back(std::move(cur));
      }
      cur.clear();
      cur_bytes = 0;
    }
    cur.push_back(r);
    cur_bytes += bytes;
  }
  buckets.push_back(std::move(cur));

  auto launch_of = [&](Node const &n) -> std::optional<NodeId> {
    for (auto const &c : n.ctrl_deps) {
      if (c.label == ctrl_label::kLaunch) {
        return c.node;
      }
    }
    return std::nullopt;
  };

  std::map<NodeId, NodeId> remap;
  std::map<NodeId, Node> replaced;
  for (auto const &b : buckets) {
    if (b.size() < 2) {
      continue;
    }
    Node lead = node(b.front());
    auto lead_host = launch_of(lead);
    std::optional<Node> host;
    if (lead_host) {
      host = node(*lead_host);
    }
    lead.inputs.clear();
    lead.outputs.clear();
    lead.data_deps.clear();
    lead.ctrl_deps.clear();
    lead.coll->comm_bytes = 0;
    lead.fused_from.clear();
    for (NodeId m : b) {
      Node const &mn = node(m);
      lead.inputs.insert(lead.inputs.end(), mn.inputs.begin(), mn.inputs.end());
      lead.outputs.insert(lead.outputs.end(), mn.outputs.begin(), mn.outputs.end());
      lead.data_deps.insert(lead.data_deps.end(), mn.data_deps.begin(), mn.data_deps.end());
      lead.coll->comm_bytes += mn.coll->comm_bytes;
      lead.fused_from.push_back(m);
      remap[m] = lead.id;
      auto mh = launch_of(mn);
      for (auto const &c : mn.ctrl_deps) {
        if (c.label != ctrl_label::kLaunch) {
          lead.ctrl_deps.push_back(c);
        }
      }
      if (mh && host) {
        remap[*mh] = host->id;
        if (*mh != host->id) {
          Node const &hn = node(*mh);
          host->data_deps.insert(host->data_deps.end(), hn.data_deps.begin(),
                                 hn.data_deps.end());
          host->ctrl_deps.insert(host->ctrl_deps.end(), hn.ctrl_deps.begin(),
                                 hn.ctrl_deps.end());
        }
        host->fused_from.push_back(*mh);
      }
    }
    if (lead_host) {
      lead.ctrl_deps.insert(lead.ctrl_deps.begin(),
                            CtrlDep{*lead_host, std::string(ctrl_label::kLaunch)});
      replaced[host->id] = std::move(*host);
    }
    replaced[lead.id] = std::move(lead);
  }

  auto map_id = [&](NodeId id) {
    auto it = remap.find(id);
    return it == remap.end() ? id : it->second;
  };

  WorkloadGraph out = g;
  out.nodes.clear();
  for (auto const &orig : g.nodes) {
    auto r = remap.find(orig.id);
    if (r != remap.end() && r->second != orig.id) {
      continue; // absorbed into a bucket
    }
    Node n = replaced.count(orig.id) ? replaced.at(orig.id) : orig;
    std::set<NodeId> data;
    for (NodeId d : n.data_deps) {
      data.insert(map_id(d));
    }
    data.erase(n.id);
    n.data_deps.assign(data.begin(), data.end());
    std::vector<CtrlDep> ctrl;
    std::set<std::pair<NodeId, std::string>> seen;
    for (auto const &c : n.ctrl_deps) {
      NodeId d = map_id(c.node);
      if (d != n.id && seen.emplace(d, c.label).second) {
        ctrl.push_back(CtrlDep{d, c.label});
      }
    }
    n.ctrl_deps = std::move(ctrl);
    out.nodes.push_back(std::move(n));
  }
  std::set<NodeId> od;
  for (NodeId d : g.output_deps) {
    od.insert(map_id(d));
  }
  out.output_deps.assign(od.begin(), od.end());

  record_pass(out, "bucket_ar:" + std::to_string(cap_bytes));
  topo_order(out);
  return PassResult{std::move(out), std::nullopt};
}

PassResult apply_pass(WorkloadGraph const &g, PassConfig const &cfg) {
  switch (cfg.which) {
  case PassKind::REORDER_AG: return reorder_allgather(g, cfg.prefetch_distance);
  case PassKind::BUCKET_AR: return bucket_allreduce(g, cfg.bucket_cap_bytes);
  }
  throw InvalidArgument("unknown pass");
}

std::string_view to_string(SafetyRule r) {
  switch (r) {
  case SafetyRule::DataDepLost: return "DataDepLost";
  case SafetyRule::NodeMissing: return "NodeMissing";
  case SafetyRule::CycleIntroduced: return "CycleIntroduced";
  case SafetyRule::ComputeSetChanged: return "ComputeSetChanged";
  }
  return "?";
}

std::vector<SafetyViolation> verify_pass_safety(WorkloadGraph const &before,
                                                WorkloadGraph const &after) {
  std::vector<SafetyViolation> out;

  using CompKey = std::tuple<NodeId, std::string, std::int64_t>;
  auto comp_set = [](WorkloadGraph const &g) {
    std::vector<CompKey> s;
    for (auto const &n : g.nodes) {
      if (n.kind == NodeKind::COMP) {
        s.emplace_back(n.id, n.op_name, n.duration_ns.value_or(-1));
      }
    }
    std::sort(s.begin(), s.end());
    return s;
  };
  if (comp_set(before) != comp_set(after)) {
    out.push_back({SafetyRule::ComputeSetChanged, std::nullopt, std::nullopt,
                   "COMP node multiset differs"});
  }

  std::vector<NodeId> order;
  try {
    order = topo_order(after);
  } catch (CyclicGraph const &e) {
    out.push_back({SafetyRule::CycleIntroduced, std::nullopt, std::nullopt, e.what()});
    return out;
  }

  auto idx = index_nodes(after);
  std::map<NodeId, NodeId> remap;
  for (auto const &n : after.nodes) {
    for (NodeId f : n.fused_from) {
      remap[f] = n.id;
    }
  }
  auto map_id = [&](NodeId id) -> std::optional<NodeId> {
    auto r = remap.find(id);
    if (r != remap.end()) {
      return r->second;
    }
    if (idx.count(id)) {
      return id;
    }
    return std::nullopt;
  };

  // Data-edge ancestor sets of `after`, as bitsets in topological order.
  std::size_t const n = after.nodes.size();
  std::size_t const words = (n + 63) / 64;
  std::vector<std::vector<std::uint64_t>> anc(n, std::vector<std::uint64_t>(words, 0));
  for (NodeId id : order) {
    std::size_t v = idx.at(id);
    for (NodeId d : after.nodes[v].data_deps) {
      auto it = idx.find(d);
      if (it == idx.end()) {
        continue;
      }
      std::size_t u = it->second;
      anc[v][u / 64] |= 1ULL << (u % 64);
      for (std::size_t w = 0; w < words; ++w) {
        anc[v][w] |= anc[u][w];
      }
    }
  }

  for (auto const &node : before.nodes) {
    auto v = map_id(node.id);
    if (!v) {
      out.push_back({SafetyRule::NodeMissing, std::nullopt, node.id,
                     "node " + std::to_string(node.id) + " has no counterpart"});
      continue;
    }
    for (NodeId d : node.data_deps) {
      auto u = map_id(d);
      bool kept = false;
      if (u && *u != *v) {
        std::size_t ui = idx.at(*u), vi = idx.at(*v);
        kept = (anc[vi][ui / 64] >> (ui % 64)) & 1ULL;
      }
      if (!kept) {
        out.push_back({SafetyRule::DataDepLost, d, node.id,
                       "data edge " + std::to_string(d) + " -> " + std::to_string(node.id) +
                           " not preserved"});
      }
    }
  }
  return out;
}

} // namespace wgsim
