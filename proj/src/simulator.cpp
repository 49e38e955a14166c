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

#include "wgsim/simulator.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "wgsim/error.hpp"

namespace wgsim {

using json = nlohmann::json;

std::string_view to_string(CommMode m) {
  return m == CommMode::ANALYTICAL ? "analytical" : "expanded";
}

void parse_comm(std::string const &text, SimOptions &opts) {
  auto colon = text.find(':');
  std::string mode = text.substr(0, colon);
  if (mode == "analytical") {
    opts.comm_mode = CommMode::ANALYTICAL;
  } else if (mode == "expanded") {
    opts.comm_mode = CommMode::EXPANDED;
  } else {
    throw InvalidArgument("unknown comm mode '" + text + "' (expected analytical or expanded)");
  }
  opts.algo = colon == std::string::npos ? CollectiveAlgo::RING
                                         : parse_collective_algo(text.substr(colon + 1));
}

std::string describe_comm(SimOptions const &opts) {
  return std::string(to_string(opts.comm_mode)) + ":" + std::string(to_string(opts.algo));
}

std::int64_t SimReport::peak_mem_bytes() const {
  std::int64_t v = 0;
  for (auto const &r : ranks) v = std::max(v, r.peak_mem_bytes);
  return v;
}

std::int64_t SimReport::exposed_comm_ns() const {
  std::int64_t v = 0;
  for (auto const &r : ranks) v = std::max(v, r.exposed_comm_ns);
  return v;
}

std::int64_t SimReport::comm_busy_ns() const {
  std::int64_t v = 0;
  for (auto const &r : ranks) v = std::max(v, r.comm_busy_ns);
  return v;
}

std::int64_t SimReport::link_busy_ns() const {
  std::int64_t v = 0;
  for (auto const &l : links) v += l.busy_ns;
  return v;
}

namespace {

constexpr int kNoStream = -1;

int stream_of(NodeKind k) {
  switch (k) {
  case NodeKind::HOST: return 0;
  case NodeKind::COMP: return 1;
  case NodeKind::COLL: return 2;
  default: return kNoStream;
  }
}

std::string_view stream_name(NodeKind k) {
  switch (k) {
  case NodeKind::HOST: return "host";
  case NodeKind::COMP: return "compute";
  case NodeKind::COLL: return "comm";
  default: return "p2p";
  }
}

struct PlanInfo {
  P2pPlan plan;
  PlanMatching match;
  std::vector<std::vector<std::vector<int>>> dependents; // [pos][op] -> ops
  std::vector<std::vector<int>> roots;                   // [pos] ops with no deps
};

std::shared_ptr<PlanInfo const> make_plan_info(P2pPlan plan) {
  auto info = std::make_shared<PlanInfo>();
  info->match = match_plan(plan);
  info->dependents.resize(plan.ops.size());
  info->roots.resize(plan.ops.size());
  for (std::size_t p = 0; p < plan.ops.size(); ++p) {
    info->dependents[p].resize(plan.ops[p].size());
    for (int i = 0; i < static_cast<int>(plan.ops[p].size()); ++i) {
      for (int d : plan.ops[p][i].deps) {
        info->dependents[p][d].push_back(i);
      }
      if (plan.ops[p][i].deps.empty()) {
        info->roots[p].push_back(i);
      }
    }
  }
  info->plan = std::move(plan);
  return info;
}

// Static structure shared by simulate and critical_path.
struct Model {
  struct Rank {
    WorkloadGraph const *g = nullptr;
    std::unordered_map<NodeId, int> idx;
    std::vector<std::vector<int>> dependents;
    std::vector<std::vector<int>> deps;
    std::vector<int> instance;                  // COLL node -> instance, else -1
    std::vector<std::pair<int, int>> p2p_peer;  // graph SEND/RECV partner (rank, node)
  };
  struct Instance {
    CollectiveKind kind;
    std::vector<int> group;
    std::int64_t payload = 0;
    std::vector<int> member; // node index on group[p]
    std::int64_t analytical_ns = 0;
    std::shared_ptr<PlanInfo const> plan;
  };

  std::vector<Rank> ranks;
  std::vector<Instance> instances;
};

using PlanKey = std::tuple<CollectiveKind, std::vector<int>, std::int64_t>;

Model build_model(std::vector<WorkloadGraph> const &graphs, Topology const &topo,
                  SimOptions const &opts, bool need_plans) {
  if (graphs.empty()) {
    throw InvalidArgument("no graphs to simulate");
  }
  int const R = static_cast<int>(graphs.size());
  if (topo.size() != R) {
    throw InvalidArgument("topology has " + std::to_string(topo.size()) + " ranks but " +
                          std::to_string(R) + " graphs were given");
  }
  Model m;
  m.ranks.resize(R);
  for (int r = 0; r < R; ++r) {
    auto const &g = graphs[r];
    if (g.rank != r || g.world_size != R) {
      throw InvalidArgument("graph " + std::to_string(r) + " has rank " + std::to_string(g.rank) +
                            " / world size " + std::to_string(g.world_size));
    }
    auto violations = validate_graph(g);
    if (!violations.empty()) {
      auto const &v = violations.front();
      throw InvalidArgument("rank " + std::to_string(r) + " graph invalid: " +
                            std::string(to_string(v.rule)) + " " + v.detail);
    }
    auto &rk = m.ranks[r];
    rk.g = &g;
    for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
      rk.idx[g.nodes[i].id] = i;
    }
    rk.dependents.assign(g.nodes.size(), {});
    rk.deps.assign(g.nodes.size(), {});
    rk.instance.assign(g.nodes.size(), -1);
    rk.p2p_peer.assign(g.nodes.size(), {-1, -1});
    for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
      auto const &n = g.nodes[i];
      for (NodeId d : all_deps(n)) {
        int di = rk.idx.at(d);
        rk.deps[i].push_back(di);
        rk.dependents[di].push_back(i);
      }
      if (n.kind == NodeKind::COMP && !n.duration_ns) {
        throw InvalidArgument("rank " + std::to_string(r) + " COMP node " +
                              std::to_string(n.id) + " has no duration");
      }
    }
  }

  // The k-th COLL (by node id) of a given group on every member rank forms
  // one collective instance.
  std::map<std::pair<std::vector<int>, int>, int> by_key;
  for (int r = 0; r < R; ++r) {
    auto &rk = m.ranks[r];
    std::map<std::vector<int>, int> seen;
    for (int i = 0; i < static_cast<int>(rk.g->nodes.size()); ++i) {
      auto const &n = rk.g->nodes[i];
      if (n.kind != NodeKind::COLL) continue;
      auto const &c = *n.coll;
      int occ = seen[c.group]++;
      auto [it, fresh] = by_key.try_emplace({c.group, occ}, static_cast<int>(m.instances.size()));
      if (fresh) {
        Model::Instance inst;
        inst.kind = c.kind;
        inst.group = c.group;
        inst.payload = collective_payload(c);
        inst.member.assign(c.group.size(), -1);
        m.instances.push_back(std::move(inst));
      }
      auto &inst = m.instances[it->second];
      if (inst.kind != c.kind || inst.payload != collective_payload(c)) {
        throw InconsistentGroups("collective #" + std::to_string(occ) + " of group differs on rank " +
                                 std::to_string(r) + " (node " + std::to_string(n.id) + ")");
      }
      for (int q : c.group) {
        if (q < 0 || q >= R) {
          throw InconsistentGroups("group of node " + std::to_string(n.id) + " names rank " +
                                   std::to_string(q));
        }
      }
      int pos = static_cast<int>(std::find(c.group.begin(), c.group.end(), r) - c.group.begin());
      inst.member[pos] = i;
      rk.instance[i] = it->second;
    }
  }
  std::map<PlanKey, std::shared_ptr<PlanInfo const>> plans;
  for (auto &inst : m.instances) {
    for (std::size_t p = 0; p < inst.group.size(); ++p) {
      if (inst.member[p] < 0) {
        throw InconsistentGroups("rank " + std::to_string(inst.group[p]) +
                                 " is missing a collective its group peers issue");
      }
    }
    int const N = static_cast<int>(inst.group.size());
    if (N >= 2) {
      inst.analytical_ns = analytical_time(inst.kind, inst.payload, N, opts.algo, topo.alpha_ns(),
                                           topo.beta_ns_per_byte(), &topo);
      if (need_plans) {
        PlanKey key{inst.kind, inst.group, inst.payload};
        auto &slot = plans[key];
        if (!slot) {
          slot = make_plan_info(expand_collective(inst.kind, inst.group, inst.payload, opts.algo, topo));
        }
        inst.plan = slot;
      }
    }
  }

  // Graph-level SEND/RECV pairing, FIFO per (src, dst, tag) in node id order.
  using Chan = std::tuple<int, int, std::int64_t>;
  std::map<Chan, std::vector<std::pair<int, int>>> sends, recvs;
  for (int r = 0; r < R; ++r) {
    auto const &g = *m.ranks[r].g;
    for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
      auto const &n = g.nodes[i];
      if (n.kind == NodeKind::SEND) {
        sends[{r, n.p2p->peer_rank, n.p2p->channel_tag}].emplace_back(r, i);
      } else if (n.kind == NodeKind::RECV) {
        recvs[{n.p2p->peer_rank, r, n.p2p->channel_tag}].emplace_back(r, i);
      }
    }
  }
  for (auto const &[chan, s] : sends) {
    auto it = recvs.find(chan);
    if (it == recvs.end()) continue;
    for (std::size_t j = 0; j < std::min(s.size(), it->second.size()); ++j) {
      auto [sr, si] = s[j];
      auto [rr, ri] = it->second[j];
      auto const &sn = m.ranks[sr].g->nodes[si];
      auto const &rn = m.ranks[rr].g->nodes[ri];
      if (sn.p2p->comm_bytes != rn.p2p->comm_bytes) {
        throw InconsistentGroups("SEND " + std::to_string(sn.id) + " and RECV " +
                                 std::to_string(rn.id) + " disagree on size");
      }
      m.ranks[sr].p2p_peer[si] = {rr, ri};
      m.ranks[rr].p2p_peer[ri] = {sr, si};
    }
  }
  return m;
}

// Measure of the union of intervals minus its overlap with `cover` (which is
// disjoint and sorted).
std::int64_t uncovered(std::vector<std::pair<std::int64_t, std::int64_t>> iv,
                       std::vector<std::pair<std::int64_t, std::int64_t>> const &cover,
                       std::int64_t *union_len) {
  std::sort(iv.begin(), iv.end());
  std::vector<std::pair<std::int64_t, std::int64_t>> merged;
  for (auto const &x : iv) {
    if (x.second <= x.first) continue;
    if (!merged.empty() && x.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, x.second);
    } else {
      merged.push_back(x);
    }
  }
  std::int64_t total = 0, covered = 0;
  std::size_t j = 0;
  for (auto const &[a, b] : merged) {
    total += b - a;
    while (j < cover.size() && cover[j].second <= a) ++j;
    for (std::size_t k = j; k < cover.size() && cover[k].first < b; ++k) {
      covered += std::max<std::int64_t>(0, std::min(b, cover[k].second) - std::max(a, cover[k].first));
    }
  }
  if (union_len) *union_len = total;
  return total - covered;
}

class Engine {
 public:
  Engine(std::vector<WorkloadGraph> const &graphs, Topology const &topo, SimOptions const &opts)
      : topo_(topo), opts_(opts), m_(build_model(graphs, topo, opts, true)) {}

  SimReport run();

 private:
  enum EventType { NODE_DONE = 0, OP_DONE = 1 };
  enum PendingType { P2P_NODE = 0, PLAN_OP = 1 };

  struct RankRun {
    std::vector<int> indeg;
    std::vector<std::int64_t> start, end, active_start;
    std::vector<char> done;
    std::vector<std::int64_t> recv_post, recv_arrival; // graph RECV/SEND bookkeeping
    std::array<std::set<std::pair<NodeId, int>>, 3> ready;
    std::array<int, 3> running{-1, -1, -1};
    std::int64_t bytes_sent = 0;
  };
  struct OpRun {
    std::vector<int> deps_left;
    std::vector<char> done;
    std::vector<std::int64_t> post, arrival;
    int ops_left = 0;
    bool arrived = false;
    std::int64_t arrived_at = 0;
    std::int64_t first_send = -1;
  };
  struct InstRun {
    int arrived = 0;
    std::vector<OpRun> pos;
  };

  void make_ready(int r, int i);
  void start_node(int r, int i);
  void node_done(int r, int i);
  void op_done(int inst, int pos, int op);
  void execute_pending(int type, int r, std::int64_t a, int b);
  // Returns {first link start, arrival}.
  std::pair<std::int64_t, std::int64_t> send_message(int src, int dst, std::int64_t bytes);
  void recv_ready(int inst, int pos, int op);
  void dispatch();

  Topology const &topo_;
  SimOptions const &opts_;
  Model m_;
  std::vector<RankRun> run_;
  std::vector<InstRun> inst_run_;
  std::set<std::tuple<std::int64_t, int, int, std::int64_t, int>> events_;
  std::set<std::tuple<int, int, std::int64_t, int>> pending_;
  std::vector<std::int64_t> link_free_, link_busy_, link_bytes_;
  std::int64_t now_ = 0;
  std::int64_t total_bytes_ = 0;
};

void Engine::make_ready(int r, int i) {
  auto const &n = m_.ranks[r].g->nodes[i];
  int s = stream_of(n.kind);
  if (s == kNoStream) {
    pending_.emplace(P2P_NODE, r, i, 0);
  } else {
    run_[r].ready[s].emplace(n.id, i);
  }
}

std::pair<std::int64_t, std::int64_t> Engine::send_message(int src, int dst, std::int64_t bytes) {
  run_[src].bytes_sent += bytes;
  total_bytes_ += bytes;
  auto path = topo_.route(src, dst);
  if (path.empty()) {
    return {now_, now_};
  }
  std::int64_t const hop = topo_.hop_time(bytes);
  if (topo_.kind == TopologyKind::SWITCH) {
    std::int64_t t = std::max({now_, link_free_[path[0]], link_free_[path[1]]});
    for (int l : path) {
      link_free_[l] = t + hop;
      link_busy_[l] += hop;
      link_bytes_[l] += bytes;
    }
    return {t, t + hop};
  }
  std::int64_t t = now_, first = -1;
  for (int l : path) {
    t = std::max(t, link_free_[l]);
    if (first < 0) first = t;
    link_free_[l] = t + hop;
    link_busy_[l] += hop;
    link_bytes_[l] += bytes;
    t += hop;
  }
  return {first, t};
}

void Engine::start_node(int r, int i) {
  auto &rr = run_[r];
  auto const &n = m_.ranks[r].g->nodes[i];
  rr.start[i] = now_;
  rr.active_start[i] = now_;
  switch (n.kind) {
  case NodeKind::HOST:
    events_.emplace(now_ + opts_.host_launch_overhead_ns, NODE_DONE, r, i, 0);
    break;
  case NodeKind::COMP: events_.emplace(now_ + *n.duration_ns, NODE_DONE, r, i, 0); break;
  case NodeKind::COLL: {
    int id = m_.ranks[r].instance[i];
    auto const &inst = m_.instances[id];
    auto &ir = inst_run_[id];
    int const N = static_cast<int>(inst.group.size());
    int pos = static_cast<int>(std::find(inst.group.begin(), inst.group.end(), r) - inst.group.begin());
    if (N < 2) {
      events_.emplace(now_, NODE_DONE, r, i, 0);
      break;
    }
    if (opts_.comm_mode == CommMode::ANALYTICAL) {
      if (++ir.arrived == N) {
        for (int p = 0; p < N; ++p) {
          int q = inst.group[p];
          run_[q].active_start[inst.member[p]] = now_;
          events_.emplace(now_ + inst.analytical_ns, NODE_DONE, q, inst.member[p], 0);
        }
      }
    } else {
      auto &op = ir.pos[pos];
      op.arrived = true;
      op.arrived_at = now_;
      for (int root : inst.plan->roots[pos]) {
        pending_.emplace(PLAN_OP, r, id, root);
      }
    }
    break;
  }
  default: break;
  }
}

void Engine::node_done(int r, int i) {
  auto &rr = run_[r];
  auto const &n = m_.ranks[r].g->nodes[i];
  rr.done[i] = 1;
  rr.end[i] = now_;
  int s = stream_of(n.kind);
  if (s != kNoStream) {
    rr.running[s] = -1;
  }
  for (int d : m_.ranks[r].dependents[i]) {
    if (--rr.indeg[d] == 0) make_ready(r, d);
  }
}

void Engine::recv_ready(int id, int pos, int op) {
  auto &o = inst_run_[id].pos[pos];
  if (o.post[op] >= 0 && o.arrival[op] >= 0) {
    events_.emplace(std::max(o.post[op], o.arrival[op]), OP_DONE, m_.instances[id].group[pos], id, op);
  }
}

void Engine::op_done(int id, int pos, int op) {
  auto const &inst = m_.instances[id];
  auto &o = inst_run_[id].pos[pos];
  o.done[op] = 1;
  for (int d : inst.plan->dependents[pos][op]) {
    if (--o.deps_left[d] == 0) {
      pending_.emplace(PLAN_OP, inst.group[pos], id, d);
    }
  }
  if (--o.ops_left == 0) {
    int r = inst.group[pos];
    run_[r].active_start[inst.member[pos]] = o.first_send >= 0 ? o.first_send : o.arrived_at;
    events_.emplace(now_, NODE_DONE, r, inst.member[pos], 0);
  }
}

void Engine::execute_pending(int type, int r, std::int64_t a, int b) {
  if (type == P2P_NODE) {
    int i = static_cast<int>(a);
    auto &rr = run_[r];
    auto const &n = m_.ranks[r].g->nodes[i];
    rr.start[i] = now_;
    rr.active_start[i] = now_;
    auto [pr, pi] = m_.ranks[r].p2p_peer[i];
    if (n.kind == NodeKind::SEND) {
      auto [first, arrival] = send_message(r, n.p2p->peer_rank, n.p2p->comm_bytes);
      rr.active_start[i] = first;
      events_.emplace(arrival, NODE_DONE, r, i, 0);
      if (pr >= 0) {
        auto &peer = run_[pr];
        peer.recv_arrival[pi] = arrival;
        if (peer.recv_post[pi] >= 0) {
          events_.emplace(std::max(peer.recv_post[pi], arrival), NODE_DONE, pr, pi, 0);
        }
      }
    } else {
      rr.recv_post[i] = now_;
      if (rr.recv_arrival[i] >= 0) {
        events_.emplace(std::max(now_, rr.recv_arrival[i]), NODE_DONE, r, i, 0);
      }
    }
    return;
  }
  int id = static_cast<int>(a);
  auto const &inst = m_.instances[id];
  int pos = static_cast<int>(std::find(inst.group.begin(), inst.group.end(), r) - inst.group.begin());
  auto const &op = inst.plan->plan.ops[pos][b];
  auto &o = inst_run_[id].pos[pos];
  if (op.dir == P2pOp::SEND) {
    auto [first, arrival] = send_message(r, op.peer, op.bytes());
    if (o.first_send < 0 || first < o.first_send) o.first_send = first;
    events_.emplace(arrival, OP_DONE, r, id, b);
    OpRef peer = inst.plan->match.peer[pos][b];
    if (peer.valid()) {
      inst_run_[id].pos[peer.pos].arrival[peer.index] = arrival;
      recv_ready(id, peer.pos, peer.index);
    }
  } else {
    o.post[b] = now_;
    recv_ready(id, pos, b);
  }
}

void Engine::dispatch() {
  bool progress = true;
  while (progress) {
    progress = false;
    for (int r = 0; r < static_cast<int>(run_.size()); ++r) {
      auto &rr = run_[r];
      for (int s = 0; s < 3; ++s) {
        if (rr.running[s] < 0 && !rr.ready[s].empty()) {
          auto [id, i] = *rr.ready[s].begin();
          rr.ready[s].erase(rr.ready[s].begin());
          rr.running[s] = i;
          start_node(r, i);
          progress = true;
        }
      }
    }
    while (!pending_.empty()) {
      auto [type, r, a, b] = *pending_.begin();
      pending_.erase(pending_.begin());
      execute_pending(type, r, a, b);
      progress = true;
    }
  }
}

SimReport Engine::run() {
  int const R = static_cast<int>(m_.ranks.size());
  run_.resize(R);
  for (int r = 0; r < R; ++r) {
    auto &rr = run_[r];
    std::size_t n = m_.ranks[r].g->nodes.size();
    rr.indeg.assign(n, 0);
    rr.start.assign(n, -1);
    rr.end.assign(n, -1);
    rr.active_start.assign(n, -1);
    rr.done.assign(n, 0);
    rr.recv_post.assign(n, -1);
    rr.recv_arrival.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      rr.indeg[i] = static_cast<int>(m_.ranks[r].deps[i].size());
    }
  }
  inst_run_.resize(m_.instances.size());
  std::vector<std::int64_t> analytical_sent(R, 0);
  for (std::size_t id = 0; id < m_.instances.size(); ++id) {
    auto const &inst = m_.instances[id];
    if (!inst.plan) continue;
    auto &ir = inst_run_[id];
    ir.pos.resize(inst.group.size());
    for (std::size_t p = 0; p < inst.group.size(); ++p) {
      auto const &ops = inst.plan->plan.ops[p];
      auto &o = ir.pos[p];
      o.deps_left.resize(ops.size());
      for (std::size_t k = 0; k < ops.size(); ++k) {
        o.deps_left[k] = static_cast<int>(ops[k].deps.size());
      }
      o.done.assign(ops.size(), 0);
      o.post.assign(ops.size(), -1);
      o.arrival.assign(ops.size(), -1);
      o.ops_left = static_cast<int>(ops.size());
    }
    if (opts_.comm_mode == CommMode::ANALYTICAL) {
      auto per = plan_bytes_per_rank(inst.plan->plan);
      for (std::size_t p = 0; p < per.size(); ++p) {
        analytical_sent[inst.group[p]] += per[p];
        total_bytes_ += per[p];
      }
    }
  }
  link_free_.assign(topo_.num_links(), 0);
  link_busy_.assign(topo_.num_links(), 0);
  link_bytes_.assign(topo_.num_links(), 0);

  for (int r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < run_[r].indeg.size(); ++i) {
      if (run_[r].indeg[i] == 0) make_ready(r, static_cast<int>(i));
    }
  }
  dispatch();
  while (!events_.empty()) {
    now_ = std::get<0>(*events_.begin());
    while (!events_.empty() && std::get<0>(*events_.begin()) == now_) {
      auto [t, type, r, a, b] = *events_.begin();
      events_.erase(events_.begin());
      if (type == NODE_DONE) {
        node_done(r, static_cast<int>(a));
      } else {
        int id = static_cast<int>(a);
        auto const &g = m_.instances[id].group;
        op_done(id, static_cast<int>(std::find(g.begin(), g.end(), r) - g.begin()), b);
      }
    }
    dispatch();
  }

  std::vector<std::string> stuck;
  for (int r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < run_[r].done.size(); ++i) {
      if (!run_[r].done[i] && stuck.size() < 8) {
        stuck.push_back("rank " + std::to_string(r) + " node " +
                        std::to_string(m_.ranks[r].g->nodes[i].id));
      }
    }
  }
  if (!stuck.empty()) {
    std::string msg = "no runnable node; blocked:";
    for (auto const &s : stuck) msg += " [" + s + "]";
    throw DeadlockDetected(msg);
  }

  SimReport rep;
  rep.total_comm_bytes = total_bytes_;
  for (int r = 0; r < R; ++r) {
    auto const &g = *m_.ranks[r].g;
    auto const &rr = run_[r];
    RankStats st;
    st.rank = r;
    st.bytes_sent = opts_.comm_mode == CommMode::ANALYTICAL ? analytical_sent[r] + rr.bytes_sent
                                                            : rr.bytes_sent;
    std::vector<std::pair<std::int64_t, std::int64_t>> compute, comm;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      auto const &n = g.nodes[i];
      st.finish_ns = std::max(st.finish_ns, rr.end[i]);
      if (n.kind == NodeKind::COMP) {
        compute.emplace_back(rr.start[i], rr.end[i]);
        st.compute_busy_ns += rr.end[i] - rr.start[i];
      } else if (n.kind == NodeKind::COLL || n.kind == NodeKind::SEND) {
        comm.emplace_back(rr.active_start[i], rr.end[i]);
      }
      if (opts_.emit_event_trace) {
        rep.trace.push_back(TraceEvent{r, n.id, std::string(stream_name(n.kind)),
                                       rr.active_start[i], rr.end[i]});
      }
    }
    std::sort(compute.begin(), compute.end());
    st.exposed_comm_ns = uncovered(comm, compute, &st.comm_busy_ns);
    rep.makespan_ns = std::max(rep.makespan_ns, st.finish_ns);

    if (opts_.track_memory) {
      // Inputs stay resident; everything else lives from producer start to
      // the end of its last consumer (outputs until the end of the step).
      std::set<TensorId> inputs(g.graph_inputs.begin(), g.graph_inputs.end());
      std::set<TensorId> outputs(g.graph_outputs.begin(), g.graph_outputs.end());
      std::map<TensorId, std::int64_t> last_use;
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        for (TensorId t : g.nodes[i].inputs) {
          auto &lu = last_use[t];
          lu = std::max(lu, rr.end[i]);
        }
      }
      std::int64_t base = 0;
      for (TensorId t : inputs) base += g.tensors.at(t).bytes;
      std::vector<std::pair<std::int64_t, std::int64_t>> deltas; // (time, +/-bytes)
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        for (TensorId t : g.nodes[i].outputs) {
          if (inputs.count(t)) continue;
          std::int64_t bytes = g.tensors.at(t).bytes;
          deltas.emplace_back(rr.start[i], bytes);
          if (outputs.count(t)) continue;
          auto lu = last_use.find(t);
          deltas.emplace_back(lu == last_use.end() ? rr.end[i] : std::max(lu->second, rr.end[i]), -bytes);
        }
      }
      std::sort(deltas.begin(), deltas.end()); // frees sort before allocations at equal times
      std::int64_t live = base, peak = base;
      for (auto const &[t, d] : deltas) {
        live += d;
        peak = std::max(peak, live);
      }
      st.peak_mem_bytes = peak;
    }
    rep.ranks.push_back(st);
  }
  for (int l = 0; l < topo_.num_links(); ++l) {
    if (link_bytes_[l] > 0 || link_busy_[l] > 0) {
      rep.links.push_back(LinkStats{topo_.link_name(l), link_bytes_[l], link_busy_[l]});
    }
  }
  std::sort(rep.trace.begin(), rep.trace.end(), [](TraceEvent const &a, TraceEvent const &b) {
    return std::tie(a.start_ns, a.rank, a.node_id) < std::tie(b.start_ns, b.rank, b.node_id);
  });
  return rep;
}

} // namespace

SimReport simulate(std::vector<WorkloadGraph> const &graphs, Topology const &topo,
                   SimOptions const &opts) {
  Engine e(graphs, topo, opts);
  return e.run();
}

CriticalPath critical_path(std::vector<WorkloadGraph> const &graphs, Topology const &topo,
                           SimOptions const &opts) {
  bool const expanded = opts.comm_mode == CommMode::EXPANDED;
  Model m = build_model(graphs, topo, opts, expanded);
  int const R = static_cast<int>(m.ranks.size());

  struct Vertex {
    std::int64_t weight = 0;
    int rank = 0;
    NodeId node = 0;
    std::vector<int> in;
  };
  std::vector<Vertex> vs;
  auto add = [&](std::int64_t w, int r, NodeId n) {
    vs.push_back(Vertex{w, r, n, {}});
    return static_cast<int>(vs.size()) - 1;
  };
  // Each node gets an entry vertex (takes its deps) and an exit vertex
  // (what its dependents wait on); for most nodes they coincide.
  std::vector<std::vector<int>> entry(R), exit(R);
  std::vector<int> inst_vertex(m.instances.size(), -1);
  for (int r = 0; r < R; ++r) {
    auto const &g = *m.ranks[r].g;
    entry[r].assign(g.nodes.size(), -1);
    exit[r].assign(g.nodes.size(), -1);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      auto const &n = g.nodes[i];
      std::int64_t w = 0;
      switch (n.kind) {
      case NodeKind::HOST: w = opts.host_launch_overhead_ns; break;
      case NodeKind::COMP: w = *n.duration_ns; break;
      case NodeKind::SEND: w = topo.transfer_time(r, n.p2p->peer_rank, n.p2p->comm_bytes); break;
      default: break;
      }
      if (n.kind == NodeKind::COLL) {
        int id = m.ranks[r].instance[i];
        auto const &inst = m.instances[id];
        if (!expanded || !inst.plan) {
          if (inst_vertex[id] < 0) {
            inst_vertex[id] = add(inst.group.size() < 2 ? 0 : inst.analytical_ns,
                                  inst.group.front(), g.nodes[inst.member[0]].id);
          }
          entry[r][i] = exit[r][i] = inst_vertex[id];
        } else {
          entry[r][i] = add(0, r, n.id);
          exit[r][i] = add(0, r, n.id);
        }
      } else {
        entry[r][i] = exit[r][i] = add(w, r, n.id);
      }
    }
  }
  for (int r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < m.ranks[r].deps.size(); ++i) {
      for (int d : m.ranks[r].deps[i]) {
        vs[entry[r][i]].in.push_back(exit[r][d]);
      }
      auto [pr, pi] = m.ranks[r].p2p_peer[i];
      if (m.ranks[r].g->nodes[i].kind == NodeKind::RECV && pr >= 0) {
        vs[entry[r][i]].in.push_back(exit[pr][pi]);
      }
    }
  }
  if (expanded) {
    for (auto const &inst : m.instances) {
      if (!inst.plan) continue;
      auto const &plan = inst.plan->plan;
      std::vector<std::vector<int>> opv(plan.ops.size());
      for (int p = 0; p < plan.size(); ++p) {
        int r = plan.group[p];
        NodeId nid = m.ranks[r].g->nodes[inst.member[p]].id;
        for (auto const &op : plan.ops[p]) {
          std::int64_t w = op.dir == P2pOp::SEND ? topo.transfer_time(r, op.peer, op.bytes()) : 0;
          opv[p].push_back(add(w, r, nid));
        }
      }
      for (int p = 0; p < plan.size(); ++p) {
        int r = plan.group[p];
        int ent = entry[r][inst.member[p]], ex = exit[r][inst.member[p]];
        for (std::size_t k = 0; k < plan.ops[p].size(); ++k) {
          auto const &op = plan.ops[p][k];
          auto &v = vs[opv[p][k]];
          v.in.push_back(ent);
          for (int d : op.deps) v.in.push_back(opv[p][d]);
          if (op.dir == P2pOp::RECV) {
            OpRef s = inst.plan->match.peer[p][k];
            if (s.valid()) v.in.push_back(opv[s.pos][s.index]);
          }
          vs[ex].in.push_back(opv[p][k]);
        }
      }
    }
  }

  // Longest path by Kahn's algorithm.
  std::size_t const V = vs.size();
  std::vector<std::vector<int>> out(V);
  std::vector<int> indeg(V, 0);
  for (std::size_t v = 0; v < V; ++v) {
    for (int u : vs[v].in) {
      out[u].push_back(static_cast<int>(v));
      ++indeg[v];
    }
  }
  std::vector<std::int64_t> finish(V, 0);
  std::vector<int> best_pred(V, -1);
  std::vector<int> stack;
  for (std::size_t v = 0; v < V; ++v) {
    if (indeg[v] == 0) stack.push_back(static_cast<int>(v));
  }
  std::size_t visited = 0;
  std::vector<std::int64_t> ready(V, 0);
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    ++visited;
    finish[v] = ready[v] + vs[v].weight;
    for (int w : out[v]) {
      if (finish[v] > ready[w] || best_pred[w] < 0) {
        if (finish[v] >= ready[w]) {
          ready[w] = finish[v];
          best_pred[w] = v;
        }
      }
      if (--indeg[w] == 0) stack.push_back(w);
    }
  }
  if (visited != V) {
    throw DeadlockDetected("dependency cycle across ranks");
  }
  CriticalPath cp;
  int end = -1;
  for (std::size_t v = 0; v < V; ++v) {
    if (end < 0 || finish[v] > finish[end]) end = static_cast<int>(v);
  }
  if (end < 0) return cp;
  cp.length_ns = finish[end];
  for (int v = end; v >= 0; v = best_pred[v]) {
    std::pair<int, NodeId> label{vs[v].rank, vs[v].node};
    if (cp.path.empty() || cp.path.back() != label) cp.path.push_back(label);
  }
  std::reverse(cp.path.begin(), cp.path.end());
  return cp;
}

std::string dump_report(SimReport const &r, Topology const &topo, SimOptions const &opts) {
  json j;
  j["makespan_ns"] = r.makespan_ns;
  j["total_comm_bytes"] = r.total_comm_bytes;
  j["peak_mem_bytes"] = r.peak_mem_bytes();
  j["topology"] = topo.describe();
  j["comm"] = describe_comm(opts);
  j["ranks"] = json::array();
  for (auto const &s : r.ranks) {
    j["ranks"].push_back({{"rank", s.rank},
                          {"compute_busy_ns", s.compute_busy_ns},
                          {"comm_busy_ns", s.comm_busy_ns},
                          {"exposed_comm_ns", s.exposed_comm_ns},
                          {"peak_mem_bytes", s.peak_mem_bytes},
                          {"bytes_sent", s.bytes_sent},
                          {"finish_ns", s.finish_ns}});
  }
  j["links"] = json::array();
  for (auto const &l : r.links) {
    j["links"].push_back({{"link", l.name}, {"bytes", l.bytes}, {"busy_ns", l.busy_ns}});
  }
  return j.dump(1) + "\n";
}

std::string dump_trace(std::vector<TraceEvent> const &events) {
  // One event per line keeps large traces diff-friendly.
  std::ostringstream os;
  os << "{\"format_version\": \"" << kTraceFormatVersion << "\", \"events\": [\n";
  for (std::size_t i = 0; i < events.size(); ++i) {
    auto const &e = events[i];
    json rec = {{"rank", e.rank},
                {"node_id", e.node_id},
                {"stream", e.stream},
                {"start_ns", e.start_ns},
                {"end_ns", e.end_ns}};
    os << " " << rec.dump() << (i + 1 < events.size() ? ",\n" : "\n");
  }
  os << "]}\n";
  return os.str();
}

std::vector<TraceEvent> parse_trace(std::string const &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (json::exception const &e) {
    throw FormatError(std::string("trace is not JSON: ") + e.what());
  }
  if (j.value("format_version", "") != kTraceFormatVersion) {
    throw FormatError("unsupported trace format version");
  }
  std::vector<TraceEvent> out;
  for (auto const &e : j.at("events")) {
    out.push_back(TraceEvent{e.at("rank").get<int>(), e.at("node_id").get<NodeId>(),
                             e.at("stream").get<std::string>(), e.at("start_ns").get<std::int64_t>(),
                             e.at("end_ns").get<std::int64_t>()});
  }
  return out;
}

std::vector<WorkloadGraph> expand_graphs(std::vector<WorkloadGraph> const &graphs,
                                         Topology const &topo, CollectiveAlgo algo) {
  SimOptions opts;
  opts.algo = algo;
  opts.comm_mode = CommMode::EXPANDED;
  Model m = build_model(graphs, topo, opts, true);
  std::vector<WorkloadGraph> out;
  for (int r = 0; r < static_cast<int>(graphs.size()); ++r) {
    auto const &g = graphs[r];
    auto const &rk = m.ranks[r];
    WorkloadGraph eg = g;
    eg.nodes.clear();
    NodeId next = g.next_node_id();
    std::map<NodeId, NodeId> replaced;  // COLL id -> node producing its outputs
    std::map<NodeId, std::vector<NodeId>> sinks; // COLL id -> its final ops
    std::set<NodeId> dropped_hosts;     // launch hosts consumers no longer need
    std::vector<Node> extra;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      auto const &n = g.nodes[i];
      if (n.kind != NodeKind::COLL) continue;
      auto const &inst = m.instances[rk.instance[i]];
      if (!inst.plan) continue;
      auto const &plan = inst.plan->plan;
      int pos = plan.position_of(r);
      auto const &ops = plan.ops[pos];
      std::optional<NodeId> host;
      std::vector<CtrlDep> inherited;
      for (auto const &c : n.ctrl_deps) {
        if (c.label == ctrl_label::kLaunch) host = c.node;
        inherited.push_back(c);
      }
      if (host) dropped_hosts.insert(*host);
      std::vector<char> has_dependent(ops.size(), 0);
      for (auto const &op : ops) {
        for (int d : op.deps) has_dependent[d] = 1;
      }
      NodeId const first = next;
      int const last = static_cast<int>(ops.size()) - 1;
      for (int k = 0; k <= last; ++k) {
        auto const &op = ops[k];
        Node s;
        s.id = first + k;
        s.kind = op.dir == P2pOp::SEND ? NodeKind::SEND : NodeKind::RECV;
        s.op_name = op.dir == P2pOp::SEND ? "send" : "recv";
        s.p2p = P2pAttrs{op.peer, op.bytes(), (static_cast<std::int64_t>(rk.instance[i]) << 20) | op.tag};
        if (op.deps.empty()) {
          s.inputs = n.inputs;
          s.data_deps = n.data_deps;
          s.ctrl_deps = inherited;
        }
        for (int d : op.deps) {
          s.ctrl_deps.push_back(CtrlDep{first + d, std::string(ctrl_label::kP2pStep)});
        }
        if (k == last) s.outputs = n.outputs;
        extra.push_back(std::move(s));
      }
      // The collective is complete once every op without a dependent is.
      for (int t = 0; t <= last; ++t) {
        if (!has_dependent[t]) sinks[n.id].push_back(first + t);
      }
      next += static_cast<NodeId>(ops.size());
      replaced[n.id] = first + last;
    }
    auto remap_data = [&](std::vector<NodeId> const &deps) {
      bool touches = std::any_of(deps.begin(), deps.end(), [&](NodeId d) { return replaced.count(d) > 0; });
      std::set<NodeId> outd;
      for (NodeId d : deps) {
        auto it = replaced.find(d);
        if (it != replaced.end()) {
          outd.insert(it->second);
        } else if (!(touches && dropped_hosts.count(d))) {
          outd.insert(d);
        }
      }
      return std::vector<NodeId>(outd.begin(), outd.end());
    };
    // Anything that waited on a collective now waits on all of its final ops:
    // data edges go to the op holding the outputs, the rest become ctrl edges.
    auto rewire = [&](Node &c) {
      std::vector<CtrlDep> ctrl;
      auto add = [&](CtrlDep d) {
        if (std::find(ctrl.begin(), ctrl.end(), d) == ctrl.end()) ctrl.push_back(std::move(d));
      };
      for (auto const &cd : c.ctrl_deps) {
        auto it = sinks.find(cd.node);
        if (it == sinks.end()) {
          add(cd);
        } else {
          for (NodeId s : it->second) add(CtrlDep{s, cd.label});
        }
      }
      for (NodeId d : c.data_deps) {
        auto it = sinks.find(d);
        if (it == sinks.end()) continue;
        for (NodeId s : it->second) {
          if (s != replaced.at(d)) add(CtrlDep{s, std::string(ctrl_label::kP2pStep)});
        }
      }
      c.data_deps = remap_data(c.data_deps);
      c.ctrl_deps = std::move(ctrl);
    };
    for (auto const &n : g.nodes) {
      if (replaced.count(n.id)) continue;
      Node c = n;
      rewire(c);
      eg.nodes.push_back(std::move(c));
    }
    for (auto &s : extra) {
      rewire(s);
      eg.nodes.push_back(std::move(s));
    }
    std::sort(eg.nodes.begin(), eg.nodes.end(), [](Node const &a, Node const &b) { return a.id < b.id; });
    std::set<NodeId> outs;
    for (NodeId d : remap_data(g.output_deps)) outs.insert(d);
    for (NodeId d : g.output_deps) {
      auto it = sinks.find(d);
      if (it != sinks.end()) outs.insert(it->second.begin(), it->second.end());
    }
    eg.output_deps.assign(outs.begin(), outs.end());
    eg.meta["expanded"] = std::string(to_string(algo));
    out.push_back(std::move(eg));
  }
  return out;
}

} // namespace wgsim
