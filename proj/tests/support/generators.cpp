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

#include "generators.hpp"

#include <numeric>
#include <string>

#include "graph_builder.hpp"

namespace wgsim::testing {

std::int64_t uniform(Rng &rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

bool coin(Rng &rng, double p) { return std::bernoulli_distribution(p)(rng); }

namespace {

template <typename T>
T const &pick(Rng &rng, std::vector<T> const &v) {
  return v[static_cast<std::size_t>(uniform(rng, 0, static_cast<std::int64_t>(v.size()) - 1))];
}

enum class Step { COMP, AR, AG, RS, P2P };

struct PlannedStep {
  Step kind = Step::COMP;
  std::vector<int> inputs; // indices into the running tensor list
  std::int64_t bytes = 0;  // output bytes (COMP), message bytes (P2P)
  std::vector<std::int64_t> duration; // per rank
  std::vector<int> after;  // earlier step indices (ctrl edges)
};

} // namespace

DagParams random_dag_params(Rng &rng) {
  DagParams p;
  p.world_size = static_cast<int>(uniform(rng, 1, 4));
  p.steps = static_cast<int>(uniform(rng, 3, 40));
  p.with_hosts = coin(rng, 0.7);
  p.with_p2p = p.world_size > 1 && coin(rng, 0.5);
  p.coll_prob = p.world_size > 1 ? 0.1 + 0.3 * std::uniform_real_distribution<double>()(rng) : 0.0;
  p.ctrl_prob = 0.3 * std::uniform_real_distribution<double>()(rng);
  return p;
}

std::vector<WorkloadGraph> random_spmd_graphs(Rng &rng, DagParams const &p) {
  int const W = p.world_size;
  std::vector<int> group(W);
  std::iota(group.begin(), group.end(), 0);

  // Draw the shared structure once. Tensor 0.. are graph inputs.
  int const n_inputs = static_cast<int>(uniform(rng, 1, 3));
  std::vector<std::int64_t> tensor_bytes;
  for (int i = 0; i < n_inputs; ++i) tensor_bytes.push_back(4 * W * uniform(rng, 1, 64));
  std::vector<PlannedStep> plan;
  for (int s = 0; s < p.steps; ++s) {
    PlannedStep st;
    double u = std::uniform_real_distribution<double>()(rng);
    int avail = static_cast<int>(tensor_bytes.size());
    if (W > 1 && u < p.coll_prob) {
      st.kind = pick(rng, std::vector<Step>{Step::AR, Step::AG, Step::RS});
      st.inputs = {static_cast<int>(uniform(rng, 0, avail - 1))};
      std::int64_t in = tensor_bytes[st.inputs[0]];
      if (st.kind == Step::RS && in % (4 * W) != 0) st.kind = Step::AR;
      st.bytes = st.kind == Step::AR ? in : st.kind == Step::AG ? in * W : in / W;
    } else if (W > 1 && p.with_p2p && u < p.coll_prob + 0.1) {
      st.kind = Step::P2P;
      st.bytes = uniform(rng, 0, 2048);
    } else {
      st.kind = Step::COMP;
      int k = static_cast<int>(uniform(rng, 1, std::min(3, avail)));
      for (int j = 0; j < k; ++j) st.inputs.push_back(static_cast<int>(uniform(rng, 0, avail - 1)));
      st.bytes = 4 * W * uniform(rng, 1, 256);
      for (int r = 0; r < W; ++r) st.duration.push_back(uniform(rng, 1, 500));
    }
    for (int e = 0; e < s; ++e) {
      if (coin(rng, p.ctrl_prob / std::max(1, s / 4))) st.after.push_back(e);
    }
    if (st.kind != Step::P2P) tensor_bytes.push_back(st.bytes);
    plan.push_back(std::move(st));
  }
  int const n_outputs = static_cast<int>(uniform(rng, 0, 2));

  std::vector<WorkloadGraph> graphs;
  for (int r = 0; r < W; ++r) {
    GraphBuilder b(r, W, p.with_hosts);
    std::vector<TensorId> tensors;
    for (int i = 0; i < n_inputs; ++i) tensors.push_back(b.input(tensor_bytes[i]));
    std::vector<std::vector<NodeId>> step_nodes; // nodes emitted per step
    NodeId last_coll = -1;
    for (auto const &st : plan) {
      std::vector<NodeId> nodes;
      std::vector<TensorId> in;
      for (int i : st.inputs) in.push_back(tensors[i]);
      switch (st.kind) {
      case Step::COMP: {
        auto e = b.comp(in, st.bytes, st.duration[r]);
        tensors.push_back(e.out);
        nodes.push_back(e.node);
        break;
      }
      case Step::AR:
      case Step::AG:
      case Step::RS: {
        auto kind = st.kind == Step::AR   ? CollectiveKind::ALL_REDUCE
                    : st.kind == Step::AG ? CollectiveKind::ALL_GATHER
                                          : CollectiveKind::REDUCE_SCATTER;
        auto e = b.coll(kind, group, in[0], st.bytes);
        // Collectives share one comm stream per rank, so every rank must
        // issue them in the same order.
        if (last_coll >= 0) b.ctrl(last_coll, e.node, std::string(ctrl_label::kStreamOrder));
        last_coll = e.node;
        tensors.push_back(e.out);
        nodes.push_back(e.node);
        break;
      }
      case Step::P2P: {
        std::int64_t tag = static_cast<std::int64_t>(step_nodes.size());
        nodes.push_back(b.send((r + 1) % W, st.bytes, tag));
        nodes.push_back(b.recv((r + W - 1) % W, st.bytes, tag));
        break;
      }
      }
      for (int e : st.after) {
        for (NodeId from : step_nodes[e]) {
          for (NodeId to : nodes) b.ctrl(from, to);
        }
      }
      step_nodes.push_back(std::move(nodes));
    }
    for (int i = 0; i < n_outputs; ++i) b.output(tensors[tensors.size() - 1 - i]);
    graphs.push_back(b.build());
  }
  return graphs;
}

SynthCase random_synth_case(Rng &rng) {
  SynthCase c;
  c.world_size = static_cast<int>(uniform(rng, 2, 4));
  c.parallel.strategy = coin(rng) ? Strategy::FSDP : Strategy::DP;
  c.parallel.degree = c.world_size;
  c.parallel.fsdp_mode = coin(rng, 0.8) ? FsdpMode::DELAYED : FsdpMode::NONE;
  auto &m = c.model;
  m.layers = static_cast<int>(uniform(rng, 1, 4));
  m.num_heads = static_cast<int>(uniform(rng, 1, 4));
  m.hidden_dim = std::lcm(m.num_heads, c.world_size) * static_cast<int>(uniform(rng, 1, 3));
  m.ffn_mult = static_cast<int>(uniform(rng, 1, 4));
  m.seq_len = static_cast<int>(uniform(rng, 1, 8));
  m.micro_batch = static_cast<int>(uniform(rng, 1, 2));
  m.dtype = pick(rng, std::vector<Dtype>{Dtype::F32, Dtype::F16, Dtype::BF16});
  return c;
}

WorkloadGraph random_collective_graph(Rng &rng) {
  int const W = static_cast<int>(uniform(rng, 2, 4));
  std::vector<int> group(W);
  std::iota(group.begin(), group.end(), 0);
  bool const fsdp = coin(rng, 0.7);
  bool const delayed = coin(rng, 0.85);
  int const L = static_cast<int>(uniform(rng, 1, 5));
  auto fsdp_sync = std::string(ctrl_label::kFsdpSync);

  GraphBuilder b(0, W, true);
  auto bytes = [&] { return 4 * W * uniform(rng, 1, 64); };
  TensorId act = b.input(bytes());
  std::vector<TensorId> weights;
  for (int l = 0; l < L; ++l) weights.push_back(b.input(bytes()));
  std::vector<TensorId> outputs;

  NodeId prev_last = -1;
  auto layer = [&](int l, bool backward) {
    TensorId w = weights[l];
    if (fsdp) {
      auto ag = b.coll(CollectiveKind::ALL_GATHER, group, w, b.bytes_of(w) * W);
      if (delayed && prev_last >= 0 && coin(rng, 0.9)) b.ctrl(prev_last, ag.node, fsdp_sync);
      w = ag.out;
    }
    int k = static_cast<int>(uniform(rng, 1, 3));
    for (int j = 0; j < k; ++j) {
      std::vector<TensorId> in = {act};
      if (j == 0 || coin(rng, 0.4)) in.push_back(w);
      auto c = b.comp(in, bytes(), uniform(rng, 1, 1000));
      act = c.out;
      prev_last = c.node;
    }
    if (backward) {
      auto grad = b.comp({act, weights[l]}, bytes(), uniform(rng, 1, 1000), "mm_grad_weight");
      prev_last = grad.node;
      auto red = fsdp && coin(rng, 0.8)
                     ? b.coll(CollectiveKind::REDUCE_SCATTER, group, grad.out, b.bytes_of(grad.out) / W)
                     : b.all_reduce(group, grad.out);
      outputs.push_back(red.out);
      // Sometimes a reduced gradient feeds further compute, which in turn
      // feeds another all-reduce (a dependency bucketing must respect).
      if (coin(rng, 0.25)) {
        auto use = b.comp({red.out}, bytes(), uniform(rng, 1, 200), "mul");
        auto again = b.all_reduce(group, use.out);
        outputs.push_back(again.out);
      }
    }
  };
  for (int l = 0; l < L; ++l) layer(l, false);
  for (int l = L - 1; l >= 0; --l) layer(l, true);
  // A few independent small all-reduces (e.g. norms) to give the bucketer
  // unrelated members.
  int extra = static_cast<int>(uniform(rng, 0, 3));
  for (int i = 0; i < extra; ++i) outputs.push_back(b.all_reduce(group, b.input(bytes())).out);
  b.output(act);
  for (TensorId t : outputs) b.output(t);
  auto g = b.build();
  g.meta["parallel"] = fsdp ? "fsdp" : "dp";
  return g;
}

RawIrGraph random_raw_export(Rng &rng, int rank, int world_size) {
  RawIrGraph raw;
  raw.rank = rank;
  raw.world_size = world_size;
  std::vector<int> group(world_size);
  std::iota(group.begin(), group.end(), 0);
  struct Value {
    std::string name;
    Shape shape;
  };
  std::vector<Value> values;
  auto dim = [&] { return pick(rng, std::vector<std::int64_t>{2, 4, 8, 16}); };
  auto dtype = coin(rng) ? Dtype::F32 : Dtype::BF16;
  auto add = [&](RawIrNode n, Shape shape) {
    n.tensor_out = RawTensor{shape, dtype};
    values.push_back({n.name, shape});
    raw.nodes.push_back(std::move(n));
  };

  int const n_inputs = static_cast<int>(uniform(rng, 1, 4));
  for (int i = 0; i < n_inputs; ++i) {
    RawIrNode n;
    n.name = "primals_" + std::to_string(i + 1);
    n.kind = RawNodeKind::PLACEHOLDER;
    add(std::move(n), {dim() * world_size, dim()});
  }
  int const steps = static_cast<int>(uniform(rng, 0, 30));
  for (int s = 0; s < steps; ++s) {
    Value a = pick(rng, values);
    RawIrNode n;
    n.name = "v" + std::to_string(s);
    n.kind = RawNodeKind::CALL;
    int choice = static_cast<int>(uniform(rng, 0, 6));
    if (choice == 0) {
      std::vector<Value> rhs;
      for (auto const &v : values) {
        if (v.shape.size() == 2 && v.shape[0] == a.shape[1]) rhs.push_back(v);
      }
      if (!rhs.empty()) {
        Value bv = pick(rng, rhs);
        n.target = "aten.mm";
        n.arg_names = {a.name, bv.name};
        add(std::move(n), {a.shape[0], bv.shape[1]});
        continue;
      }
      choice = 1;
    }
    if (choice == 1 || choice == 2) {
      n.target = pick(rng, std::vector<std::string>{"aten.relu", "aten.gelu", "aten.exp", "aten._softmax"});
      n.arg_names = {a.name};
      add(std::move(n), a.shape);
    } else if (choice == 3) {
      n.target = "aten.add";
      std::vector<Value> same;
      for (auto const &v : values) {
        if (v.shape == a.shape) same.push_back(v);
      }
      n.arg_names = {a.name, pick(rng, same).name};
      add(std::move(n), a.shape);
    } else if (choice == 4) {
      n.target = pick(rng, std::vector<std::string>{"aten.view", "aten.detach", "aten.t"});
      n.arg_names = {a.name};
      add(std::move(n), a.shape);
    } else {
      int which = static_cast<int>(uniform(rng, 0, 2));
      Shape out = a.shape;
      std::string kind;
      if (which == 0) {
        n.target = "_c10d_functional.all_reduce";
        kind = "ALL_REDUCE";
      } else if (which == 1) {
        n.target = "_c10d_functional.all_gather_into_tensor";
        kind = "ALL_GATHER";
        out[0] *= world_size;
      } else if (a.shape[0] % world_size == 0) {
        n.target = "_c10d_functional.reduce_scatter_tensor";
        kind = "REDUCE_SCATTER";
        out[0] /= world_size;
      } else {
        n.target = "_c10d_functional.all_reduce";
        kind = "ALL_REDUCE";
      }
      n.arg_names = {a.name};
      n.coll_attrs = RawCollAttrs{kind, group};
      std::string coll_name = n.name;
      add(std::move(n), out);
      if (coin(rng, 0.8)) {
        RawIrNode w;
        w.name = "wait_" + coll_name;
        w.kind = RawNodeKind::WAIT;
        w.target = "_c10d_functional.wait_tensor";
        w.arg_names = {coll_name};
        add(std::move(w), out);
      }
    }
  }
  RawIrNode out;
  out.name = "output";
  out.kind = RawNodeKind::OUTPUT;
  out.arg_names = {values.back().name};
  raw.nodes.push_back(std::move(out));
  return raw;
}

} // namespace wgsim::testing
