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

#include "wgsim/collectives.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>

#include "wgsim/error.hpp"
#include "wgsim/profile.hpp"

namespace wgsim {

std::string_view to_string(CollectiveAlgo a) {
  switch (a) {
  case CollectiveAlgo::RING: return "ring";
  case CollectiveAlgo::TREE: return "tree";
  case CollectiveAlgo::MESH_HIER: return "mesh_hier";
  }
  return "?";
}

CollectiveAlgo parse_collective_algo(std::string_view tag) {
  if (tag == "ring" || tag == "RING") return CollectiveAlgo::RING;
  if (tag == "tree" || tag == "TREE") return CollectiveAlgo::TREE;
  if (tag == "mesh_hier" || tag == "mesh-hier" || tag == "MESH_HIER") {
    return CollectiveAlgo::MESH_HIER;
  }
  throw InvalidArgument("unknown collective algorithm '" + std::string(tag) + "'");
}

int P2pPlan::position_of(int rank) const {
  auto it = std::find(group.begin(), group.end(), rank);
  return it == group.end() ? -1 : static_cast<int>(it - group.begin());
}

std::vector<Slice> split_bytes(Slice whole, int n) {
  std::vector<Slice> out;
  std::int64_t base = whole.length / n, extra = whole.length % n;
  std::int64_t off = whole.offset;
  for (int i = 0; i < n; ++i) {
    std::int64_t len = base + (i < extra ? 1 : 0);
    out.push_back(Slice{off, len});
    off += len;
  }
  return out;
}

std::int64_t collective_payload(CollAttrs const &c) {
  if (c.kind == CollectiveKind::ALL_GATHER) {
    return c.comm_bytes * static_cast<std::int64_t>(c.group.size());
  }
  return c.comm_bytes;
}

namespace {

void check_combo(CollectiveKind kind, int n, CollectiveAlgo algo, Topology const *topo) {
  if (n < 2) {
    throw InvalidArgument("collective group needs at least two ranks");
  }
  if (algo == CollectiveAlgo::TREE && kind != CollectiveKind::ALL_REDUCE) {
    throw UnsupportedAlgoTopology("tree is only defined for all_reduce");
  }
  if (algo == CollectiveAlgo::MESH_HIER) {
    if (!topo || topo->kind != TopologyKind::MESH2D) {
      throw UnsupportedAlgoTopology("mesh_hier requires a mesh topology");
    }
    if (topo->size() != n) {
      throw UnsupportedAlgoTopology("mesh_hier requires the group to span the whole mesh");
    }
  }
}

// Appends ops to a plan. `entry[p]` holds the ops position p's next phase
// must wait for; each phase replaces it with the ops it added for p.
class PlanBuilder {
 public:
  explicit PlanBuilder(P2pPlan &plan) : plan_(plan), entry_(plan.group.size()) {}

  void begin_phase() { added_.assign(plan_.group.size(), {}); }

  void end_phase() {
    for (std::size_t p = 0; p < added_.size(); ++p) {
      if (!added_[p].empty()) {
        entry_[p] = added_[p];
      }
    }
  }

  std::vector<int> const &entry(int pos) const { return entry_[pos]; }

  // Returns {send index at `from`, recv index at `to`}.
  std::pair<int, int> transfer(int from, int to, Slice s, std::int64_t tag, bool reduce,
                               std::vector<int> send_deps) {
    P2pOp snd;
    snd.dir = P2pOp::SEND;
    snd.peer = plan_.group[to];
    snd.tag = tag;
    snd.slice = s;
    snd.deps = std::move(send_deps);
    P2pOp rcv;
    rcv.dir = P2pOp::RECV;
    rcv.peer = plan_.group[from];
    rcv.tag = tag;
    rcv.slice = s;
    rcv.reduce = reduce;
    rcv.deps = entry_[to];
    return {push(from, std::move(snd)), push(to, std::move(rcv))};
  }

  // Ring over `members` (group positions); member i ends with reduced chunk i.
  void ring_reduce_scatter(std::vector<int> const &m, std::vector<Slice> const &chunks) {
    int n = static_cast<int>(m.size());
    std::vector<int> last_recv(n, -1);
    for (int s = 0; s + 1 < n; ++s) {
      std::vector<int> got(n);
      for (int i = 0; i < n; ++i) {
        int c = ((i - s - 1) % n + n) % n;
        auto deps = s == 0 ? entry_[m[i]] : std::vector<int>{last_recv[i]};
        got[(i + 1) % n] = transfer(m[i], m[(i + 1) % n], chunks[c], c, true, deps).second;
      }
      last_recv = got;
    }
  }

  // Ring over `members`; member i starts owning chunk i.
  void ring_all_gather(std::vector<int> const &m, std::vector<Slice> const &chunks) {
    int n = static_cast<int>(m.size());
    std::vector<int> last_recv(n, -1);
    for (int s = 0; s + 1 < n; ++s) {
      std::vector<int> got(n);
      for (int i = 0; i < n; ++i) {
        int c = ((i - s) % n + n) % n;
        auto deps = s == 0 ? entry_[m[i]] : std::vector<int>{last_recv[i]};
        got[(i + 1) % n] = transfer(m[i], m[(i + 1) % n], chunks[c], c, false, deps).second;
      }
      last_recv = got;
    }
  }

  // Bidirectional pipeline over a line of mesh neighbours: partial sums of
  // chunk k flow towards member k from both sides.
  void line_reduce_scatter(std::vector<int> const &m, std::vector<Slice> const &chunks) {
    int n = static_cast<int>(m.size());
    std::vector<std::map<int, int>> from_left(n), from_right(n);
    for (int i = 0; i + 1 < n; ++i) {
      for (int k = i + 1; k < n; ++k) {
        auto deps = i == 0 ? entry_[m[i]] : std::vector<int>{from_left[i].at(k)};
        from_left[i + 1][k] = transfer(m[i], m[i + 1], chunks[k], k, true, deps).second;
      }
    }
    for (int i = n - 1; i > 0; --i) {
      for (int k = i - 1; k >= 0; --k) {
        auto deps = i == n - 1 ? entry_[m[i]] : std::vector<int>{from_right[i].at(k)};
        from_right[i - 1][k] = transfer(m[i], m[i - 1], chunks[k], k, true, deps).second;
      }
    }
  }

  void line_all_gather(std::vector<int> const &m, std::vector<Slice> const &chunks) {
    int n = static_cast<int>(m.size());
    std::vector<std::map<int, int>> from_left(n), from_right(n);
    for (int i = 0; i + 1 < n; ++i) {
      for (int k = i; k >= 0; --k) {
        auto deps = k == i ? entry_[m[i]] : std::vector<int>{from_left[i].at(k)};
        from_left[i + 1][k] = transfer(m[i], m[i + 1], chunks[k], k, false, deps).second;
      }
    }
    for (int i = n - 1; i > 0; --i) {
      for (int k = i; k < n; ++k) {
        auto deps = k == i ? entry_[m[i]] : std::vector<int>{from_right[i].at(k)};
        from_right[i - 1][k] = transfer(m[i], m[i - 1], chunks[k], k, false, deps).second;
      }
    }
  }

  // Binomial reduce to position 0 followed by a binomial broadcast.
  void tree_all_reduce(Slice whole) {
    int n = plan_.size();
    std::vector<std::vector<int>> held(n);
    for (int p = 0; p < n; ++p) {
      held[p] = entry_[p];
    }
    std::vector<int> reduce_send(n, -1);
    for (int mask = 1; mask < n; mask <<= 1) {
      for (int p = 0; p < n; ++p) {
        if (p % (2 * mask) == mask) {
          auto [snd, rcv] = transfer(p, p - mask, whole, 0, true, held[p]);
          reduce_send[p] = snd;
          held[p - mask].push_back(rcv);
        }
      }
    }
    int top = 1;
    while (top * 2 < n) {
      top *= 2;
    }
    for (int mask = top; mask >= 1; mask >>= 1) {
      for (int p = 0; p < n; p += 2 * mask) {
        if (p + mask < n) {
          int child = p + mask;
          auto [snd, rcv] = transfer(p, child, whole, 0, false, held[p]);
          (void)snd;
          plan_.ops[child][rcv].deps = {reduce_send[child]};
          held[child] = {rcv};
        }
      }
    }
  }

 private:
  int push(int pos, P2pOp op) {
    plan_.ops[pos].push_back(std::move(op));
    int idx = static_cast<int>(plan_.ops[pos].size()) - 1;
    added_[pos].push_back(idx);
    return idx;
  }

  P2pPlan &plan_;
  std::vector<std::vector<int>> entry_;
  std::vector<std::vector<int>> added_;
};

Slice span(std::vector<Slice> const &s, std::size_t first, std::size_t count) {
  std::int64_t len = 0;
  for (std::size_t i = first; i < first + count; ++i) {
    len += s[i].length;
  }
  return Slice{s[first].offset, len};
}

void expand_mesh(P2pPlan &plan, Topology const &topo) {
  int const R = topo.rows, C = topo.cols;
  for (int p = 0; p < plan.size(); ++p) {
    if (plan.group[p] != p) {
      throw UnsupportedAlgoTopology("mesh_hier requires the group in mesh rank order");
    }
  }
  auto row = [&](int r) {
    std::vector<int> m(C);
    std::iota(m.begin(), m.end(), r * C);
    return m;
  };
  auto col = [&](int c) {
    std::vector<int> m(R);
    for (int r = 0; r < R; ++r) {
      m[r] = r * C + c;
    }
    return m;
  };
  // Row r's contiguous span of shards.
  std::vector<Slice> row_spans;
  for (int r = 0; r < R; ++r) {
    row_spans.push_back(span(plan.shards, static_cast<std::size_t>(r) * C, C));
  }

  PlanBuilder b(plan);
  auto phase = [&](auto &&body) {
    b.begin_phase();
    body();
    b.end_phase();
  };
  Slice const whole{0, plan.buffer_bytes};
  switch (plan.kind) {
  case CollectiveKind::ALL_REDUCE: {
    auto by_col = split_bytes(whole, C);
    phase([&] {
      for (int r = 0; r < R; ++r) b.line_reduce_scatter(row(r), by_col);
    });
    phase([&] {
      for (int c = 0; c < C; ++c) b.line_reduce_scatter(col(c), split_bytes(by_col[c], R));
    });
    phase([&] {
      for (int c = 0; c < C; ++c) b.line_all_gather(col(c), split_bytes(by_col[c], R));
    });
    phase([&] {
      for (int r = 0; r < R; ++r) b.line_all_gather(row(r), by_col);
    });
    break;
  }
  case CollectiveKind::ALL_GATHER:
    phase([&] {
      for (int r = 0; r < R; ++r) {
        std::vector<Slice> mine(plan.shards.begin() + r * C, plan.shards.begin() + (r + 1) * C);
        b.line_all_gather(row(r), mine);
      }
    });
    phase([&] {
      for (int c = 0; c < C; ++c) b.line_all_gather(col(c), row_spans);
    });
    break;
  case CollectiveKind::REDUCE_SCATTER:
    phase([&] {
      for (int c = 0; c < C; ++c) b.line_reduce_scatter(col(c), row_spans);
    });
    phase([&] {
      for (int r = 0; r < R; ++r) {
        std::vector<Slice> mine(plan.shards.begin() + r * C, plan.shards.begin() + (r + 1) * C);
        b.line_reduce_scatter(row(r), mine);
      }
    });
    break;
  }
}

} // namespace

P2pPlan expand_collective(CollectiveKind kind, std::vector<int> const &group,
                          std::int64_t payload_bytes, CollectiveAlgo algo, Topology const &topo) {
  int const n = static_cast<int>(group.size());
  check_combo(kind, n, algo, &topo);
  if (payload_bytes < 0) {
    throw InvalidArgument("negative collective payload");
  }
  for (int r : group) {
    if (r < 0 || r >= topo.size()) {
      throw InvalidArgument("group rank " + std::to_string(r) + " outside topology");
    }
  }
  P2pPlan plan;
  plan.kind = kind;
  plan.algo = algo;
  plan.group = group;
  plan.buffer_bytes = payload_bytes;
  plan.shards = split_bytes(Slice{0, payload_bytes}, n);
  plan.ops.assign(n, {});

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  PlanBuilder b(plan);
  switch (algo) {
  case CollectiveAlgo::RING:
    if (kind != CollectiveKind::ALL_GATHER) {
      b.begin_phase();
      b.ring_reduce_scatter(all, plan.shards);
      b.end_phase();
    }
    if (kind != CollectiveKind::REDUCE_SCATTER) {
      b.begin_phase();
      b.ring_all_gather(all, plan.shards);
      b.end_phase();
    }
    break;
  case CollectiveAlgo::TREE:
    b.begin_phase();
    b.tree_all_reduce(Slice{0, payload_bytes});
    b.end_phase();
    break;
  case CollectiveAlgo::MESH_HIER: expand_mesh(plan, topo); break;
  }
  return plan;
}

P2pPlan expand(Node const &coll, CollectiveAlgo algo, Topology const &topo) {
  if (coll.kind != NodeKind::COLL || !coll.coll) {
    throw InvalidArgument("expand needs a COLL node");
  }
  return expand_collective(coll.coll->kind, coll.coll->group, collective_payload(*coll.coll),
                           algo, topo);
}

PlanMatching match_plan(P2pPlan const &plan) {
  PlanMatching m;
  m.peer.resize(plan.ops.size());
  using Key = std::tuple<int, int, std::int64_t>; // src pos, dst pos, tag
  std::map<Key, std::vector<OpRef>> sends, recvs;
  for (int p = 0; p < plan.size(); ++p) {
    m.peer[p].assign(plan.ops[p].size(), OpRef{});
    for (int i = 0; i < static_cast<int>(plan.ops[p].size()); ++i) {
      auto const &op = plan.ops[p][i];
      int q = plan.position_of(op.peer);
      if (op.dir == P2pOp::SEND) {
        sends[{p, q, op.tag}].push_back(OpRef{p, i});
      } else {
        recvs[{q, p, op.tag}].push_back(OpRef{p, i});
      }
    }
  }
  for (auto const &[key, s] : sends) {
    auto it = recvs.find(key);
    std::size_t paired = it == recvs.end() ? 0 : std::min(s.size(), it->second.size());
    for (std::size_t j = 0; j < paired; ++j) {
      OpRef a = s[j], b = it->second[j];
      m.peer[a.pos][a.index] = b;
      m.peer[b.pos][b.index] = a;
    }
    m.unmatched_sends += static_cast<int>(s.size() - paired);
  }
  for (auto const &[key, r] : recvs) {
    auto it = sends.find(key);
    std::size_t paired = it == sends.end() ? 0 : std::min(r.size(), it->second.size());
    m.unmatched_recvs += static_cast<int>(r.size() - paired);
  }
  return m;
}

bool plan_well_formed(P2pPlan const &plan) {
  auto m = match_plan(plan);
  if (m.unmatched_sends || m.unmatched_recvs) {
    return false;
  }
  for (int p = 0; p < plan.size(); ++p) {
    for (std::size_t i = 0; i < plan.ops[p].size(); ++i) {
      auto const &op = plan.ops[p][i];
      OpRef o = m.peer[p][i];
      if (plan.ops[o.pos][o.index].bytes() != op.bytes()) {
        return false;
      }
      for (int d : op.deps) {
        if (d < 0 || d >= static_cast<int>(plan.ops[p].size()) || d == static_cast<int>(i)) {
          return false;
        }
      }
    }
  }
  // Kahn over intra-rank deps plus send -> recv edges.
  std::vector<std::vector<int>> indeg(plan.size());
  std::vector<std::vector<std::vector<OpRef>>> out(plan.size());
  for (int p = 0; p < plan.size(); ++p) {
    indeg[p].assign(plan.ops[p].size(), 0);
    out[p].assign(plan.ops[p].size(), {});
  }
  for (int p = 0; p < plan.size(); ++p) {
    for (int i = 0; i < static_cast<int>(plan.ops[p].size()); ++i) {
      auto const &op = plan.ops[p][i];
      for (int d : op.deps) {
        out[p][d].push_back(OpRef{p, i});
        ++indeg[p][i];
      }
      if (op.dir == P2pOp::RECV) {
        OpRef s = m.peer[p][i];
        out[s.pos][s.index].push_back(OpRef{p, i});
        ++indeg[p][i];
      }
    }
  }
  std::vector<OpRef> ready;
  std::size_t total = 0, seen = 0;
  for (int p = 0; p < plan.size(); ++p) {
    total += plan.ops[p].size();
    for (int i = 0; i < static_cast<int>(plan.ops[p].size()); ++i) {
      if (indeg[p][i] == 0) ready.push_back(OpRef{p, i});
    }
  }
  while (!ready.empty()) {
    OpRef u = ready.back();
    ready.pop_back();
    ++seen;
    for (OpRef v : out[u.pos][u.index]) {
      if (--indeg[v.pos][v.index] == 0) ready.push_back(v);
    }
  }
  return seen == total;
}

std::vector<std::int64_t> plan_bytes_per_rank(P2pPlan const &plan) {
  std::vector<std::int64_t> out(plan.size(), 0);
  for (int p = 0; p < plan.size(); ++p) {
    for (auto const &op : plan.ops[p]) {
      if (op.dir == P2pOp::SEND) out[p] += op.bytes();
    }
  }
  return out;
}

std::vector<int> plan_sends_per_rank(P2pPlan const &plan) {
  std::vector<int> out(plan.size(), 0);
  for (int p = 0; p < plan.size(); ++p) {
    for (auto const &op : plan.ops[p]) {
      if (op.dir == P2pOp::SEND) ++out[p];
    }
  }
  return out;
}

std::int64_t plan_bytes(P2pPlan const &plan) {
  auto per = plan_bytes_per_rank(plan);
  return std::accumulate(per.begin(), per.end(), std::int64_t{0});
}

namespace {

long double ring_phase(int n, long double S, double alpha, double beta) {
  if (n < 2) return 0;
  return (n - 1) * static_cast<long double>(alpha) +
         static_cast<long double>(n - 1) / n * S * beta;
}

int ceil_log2(int n) {
  int k = 0;
  while ((1 << k) < n) ++k;
  return k;
}

} // namespace

std::int64_t analytical_time(CollectiveKind kind, std::int64_t S, int N, CollectiveAlgo algo,
                             double alpha_ns, double beta_ns_per_byte, Topology const *mesh) {
  check_combo(kind, N, algo, mesh);
  long double const s = static_cast<long double>(S);
  long double t = 0;
  switch (algo) {
  case CollectiveAlgo::RING:
    t = ring_phase(N, s, alpha_ns, beta_ns_per_byte);
    if (kind == CollectiveKind::ALL_REDUCE) t *= 2;
    break;
  case CollectiveAlgo::TREE:
    t = 2.0L * ceil_log2(N) * alpha_ns + 2.0L * s * beta_ns_per_byte;
    break;
  case CollectiveAlgo::MESH_HIER: {
    int const R = mesh->rows, C = mesh->cols;
    auto ring = [&](int n, long double bytes) {
      return ring_phase(n, bytes, alpha_ns, beta_ns_per_byte);
    };
    switch (kind) {
    case CollectiveKind::ALL_REDUCE:
      t = ring(C, s) + 2 * ring(R, s / C) + ring(C, s);
      break;
    case CollectiveKind::ALL_GATHER: t = ring(C, s / R) + ring(R, s); break;
    case CollectiveKind::REDUCE_SCATTER: t = ring(R, s) + ring(C, s / R); break;
    }
    break;
  }
  }
  return round_half_up(t);
}

bool dataflow_check(P2pPlan const &plan) {
  int const n = plan.size();
  std::int64_t const S = plan.buffer_bytes;
  bool const use_mask = n <= 64;
  struct Cell {
    std::int64_t value = 0;
    std::uint64_t mask = 0;
  };
  std::vector<std::vector<Cell>> buf(n, std::vector<Cell>(static_cast<std::size_t>(S)));
  for (int p = 0; p < n; ++p) {
    Cell own{p + 1, use_mask ? (1ULL << p) : 0};
    if (plan.kind == CollectiveKind::ALL_GATHER) {
      auto sh = plan.shards[p];
      std::fill(buf[p].begin() + sh.offset, buf[p].begin() + sh.offset + sh.length, own);
    } else {
      std::fill(buf[p].begin(), buf[p].end(), own);
    }
  }

  auto m = match_plan(plan);
  std::vector<std::vector<bool>> done(n);
  std::vector<std::vector<std::vector<Cell>>> payload(n); // per send, snapshot once sent
  std::size_t remaining = 0;
  for (int p = 0; p < n; ++p) {
    done[p].assign(plan.ops[p].size(), false);
    payload[p].assign(plan.ops[p].size(), {});
    remaining += plan.ops[p].size();
  }
  std::vector<std::vector<bool>> sent(n);
  for (int p = 0; p < n; ++p) sent[p].assign(plan.ops[p].size(), false);

  bool ok = m.unmatched_sends == 0;
  bool progress = true;
  while (remaining > 0 && progress) {
    progress = false;
    for (int p = 0; p < n; ++p) {
      for (std::size_t i = 0; i < plan.ops[p].size(); ++i) {
        if (done[p][i]) continue;
        auto const &op = plan.ops[p][i];
        bool deps_ok = std::all_of(op.deps.begin(), op.deps.end(),
                                   [&](int d) { return done[p][d]; });
        if (!deps_ok) continue;
        auto const sl = op.slice;
        if (sl.offset < 0 || sl.length < 0 || sl.offset + sl.length > S) return false;
        if (op.dir == P2pOp::SEND) {
          payload[p][i].assign(buf[p].begin() + sl.offset,
                               buf[p].begin() + sl.offset + sl.length);
          sent[p][i] = true;
        } else {
          OpRef s = m.peer[p][i];
          if (!s.valid() || !sent[s.pos][s.index]) continue;
          auto const &data = payload[s.pos][s.index];
          if (static_cast<std::int64_t>(data.size()) != sl.length) return false;
          for (std::int64_t b = 0; b < sl.length; ++b) {
            Cell &c = buf[p][sl.offset + b];
            if (op.reduce) {
              if (c.mask & data[b].mask) ok = false; // a contribution counted twice
              c.value += data[b].value;
              c.mask |= data[b].mask;
            } else {
              c = data[b];
            }
          }
        }
        done[p][i] = true;
        --remaining;
        progress = true;
      }
    }
  }
  if (remaining > 0) {
    throw DeadlockDetected(std::to_string(remaining) + " plan ops can never run");
  }
  if (!ok) return false;

  std::int64_t const total = static_cast<std::int64_t>(n) * (n + 1) / 2;
  std::uint64_t const full = use_mask ? (n == 64 ? ~0ULL : (1ULL << n) - 1) : 0;
  for (int p = 0; p < n; ++p) {
    switch (plan.kind) {
    case CollectiveKind::ALL_REDUCE:
      for (auto const &c : buf[p]) {
        if (c.value != total || c.mask != full) return false;
      }
      break;
    case CollectiveKind::ALL_GATHER:
      for (int q = 0; q < n; ++q) {
        auto sh = plan.shards[q];
        for (std::int64_t b = sh.offset; b < sh.offset + sh.length; ++b) {
          auto const &c = buf[p][b];
          if (c.value != q + 1 || c.mask != (use_mask ? 1ULL << q : 0)) return false;
        }
      }
      break;
    case CollectiveKind::REDUCE_SCATTER: {
      auto sh = plan.shards[p];
      for (std::int64_t b = sh.offset; b < sh.offset + sh.length; ++b) {
        if (buf[p][b].value != total || buf[p][b].mask != full) return false;
      }
      break;
    }
    }
  }
  return true;
}

} // namespace wgsim
