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

#include "wgsim/synth.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "wgsim/error.hpp"

namespace wgsim {

std::string_view to_string(Strategy s) {
  switch (s) {
  case Strategy::DP: return "dp";
  case Strategy::FSDP: return "fsdp";
  case Strategy::TP: return "tp";
  }
  return "?";
}

std::string_view to_string(FsdpMode m) {
  return m == FsdpMode::DELAYED ? "delayed" : "none";
}

FsdpMode parse_fsdp_mode(std::string_view tag) {
  if (tag == "delayed") return FsdpMode::DELAYED;
  if (tag == "none") return FsdpMode::NONE;
  throw InvalidArgument("unknown fsdp mode '" + std::string(tag) + "' (expected delayed or none)");
}

ModelConfig model_preset(std::string const &name) {
  ModelConfig m;
  if (name == "tiny") {
    m.layers = 8;
    m.hidden_dim = 1024;
    m.num_heads = 16;
    m.ffn_mult = 4;
    m.seq_len = 1024;
    m.micro_batch = 1;
    m.dtype = Dtype::BF16;
  } else if (name == "llama-8b-like") {
    m.layers = 32;
    m.hidden_dim = 4096;
    m.num_heads = 32;
    m.ffn_mult = 3;
    m.ffn_dim = 14336;
    m.seq_len = 2048;
    m.micro_batch = 1;
    m.dtype = Dtype::BF16;
  } else if (name == "llama-70b-like") {
    m.layers = 80;
    m.hidden_dim = 8192;
    m.num_heads = 64;
    m.ffn_mult = 3;
    m.ffn_dim = 28672;
    m.seq_len = 2048;
    m.micro_batch = 1;
    m.dtype = Dtype::BF16;
  } else {
    throw InvalidArgument("unknown preset '" + name + "'");
  }
  return m;
}

std::vector<std::string> preset_names() {
  return {"tiny", "llama-8b-like", "llama-70b-like"};
}

ParallelConfig parse_parallel(std::string const &text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw InvalidArgument("parallel spec '" + text + "' must be <dp|fsdp|tp>:<degree>");
  }
  std::string kind = text.substr(0, colon);
  ParallelConfig p;
  if (kind == "dp") {
    p.strategy = Strategy::DP;
  } else if (kind == "fsdp") {
    p.strategy = Strategy::FSDP;
  } else if (kind == "tp") {
    p.strategy = Strategy::TP;
  } else {
    throw InvalidArgument("unknown parallel strategy '" + kind + "'");
  }
  try {
    std::size_t used = 0;
    p.degree = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) {
      throw std::invalid_argument("trailing");
    }
  } catch (std::exception const &) {
    throw InvalidArgument("bad degree in parallel spec '" + text + "'");
  }
  if (p.degree < 1) {
    throw InvalidArgument("parallel degree must be positive");
  }
  return p;
}

std::int64_t layer_weight_bytes(ModelConfig const &m) {
  std::int64_t h = m.hidden_dim;
  std::int64_t f = m.ffn_inner();
  return (3 * h * h + h * h + 2 * h * f) * byte_width(m.dtype);
}

namespace {

struct LayerWeights {
  TensorId qkv, out, up, down;
  std::vector<TensorId> all() const { return {qkv, out, up, down}; }
};

class Emitter {
 public:
  Emitter(ModelConfig const &m, ParallelConfig const &p, int world_size, int rank,
          ProfileTable const &profile)
      : m_(m), p_(p), profile_(profile) {
    g_.rank = rank;
    g_.world_size = world_size;
    for (int r = 0; r < world_size; ++r) {
      group_.push_back(r);
    }
  }

  WorkloadGraph run();

 private:
  TensorId tensor(Shape shape) {
    TensorId id = next_tensor_++;
    g_.tensors.emplace(id, make_tensor(id, std::move(shape), m_.dtype));
    return id;
  }

  TensorId input(Shape shape) {
    TensorId t = tensor(std::move(shape));
    g_.graph_inputs.push_back(t);
    return t;
  }

  std::vector<NodeId> deps_for(std::vector<TensorId> const &inputs) const {
    std::set<NodeId> deps;
    for (TensorId t : inputs) {
      auto p = producer_.find(t);
      if (p == producer_.end()) {
        continue;
      }
      deps.insert(p->second);
      auto h = coll_host_.find(p->second);
      if (h != coll_host_.end()) {
        deps.insert(h->second);
      }
    }
    return {deps.begin(), deps.end()};
  }

  // HOST + kernel pair; returns the kernel node id.
  NodeId emit(NodeKind kind, std::string const &op, std::vector<TensorId> const &inputs,
              std::vector<TensorId> const &outputs) {
    Node host;
    host.id = next_node_++;
    host.kind = NodeKind::HOST;
    host.op_name = op;

    Node k;
    k.id = next_node_++;
    k.kind = kind;
    k.op_name = op;
    k.inputs = inputs;
    k.outputs = outputs;
    k.data_deps = deps_for(inputs);
    k.ctrl_deps.push_back(CtrlDep{host.id, std::string(ctrl_label::kLaunch)});
    for (TensorId t : outputs) {
      producer_[t] = k.id;
    }
    NodeId id = k.id;
    g_.nodes.push_back(std::move(host));
    g_.nodes.push_back(std::move(k));
    return id;
  }

  TensorId compute(std::string const &op, std::vector<TensorId> const &inputs, Shape out) {
    std::vector<Shape> shapes;
    for (TensorId t : inputs) {
      shapes.push_back(g_.tensors.at(t).shape);
    }
    TensorId o = tensor(std::move(out));
    NodeId id = emit(NodeKind::COMP, op, inputs, {o});
    g_.find(id)->duration_ns = resolve_duration(profile_, op, shapes, m_.dtype);
    last_comp_ = id;
    return o;
  }

  NodeId collective(CollectiveKind kind, std::string const &op,
                    std::vector<TensorId> const &inputs, std::vector<TensorId> const &outputs) {
    NodeId id = emit(NodeKind::COLL, op, inputs, outputs);
    Node *n = g_.find(id);
    CollAttrs c;
    c.kind = kind;
    c.group = group_;
    for (TensorId t : inputs) {
      c.comm_bytes += g_.tensors.at(t).bytes;
    }
    n->coll = std::move(c);
    coll_host_[id] = id - 1;
    return id;
  }

  TensorId all_reduce(TensorId t) {
    TensorId o = tensor(g_.tensors.at(t).shape);
    collective(CollectiveKind::ALL_REDUCE, "all_reduce", {t}, {o});
    return o;
  }

  // Full-size weight tensors for this layer, gathering them under FSDP.
  LayerWeights materialize(LayerWeights const &local, std::optional<NodeId> sync_after) {
    if (p_.strategy != Strategy::FSDP) {
      return local;
    }
    LayerWeights full{tensor(full_shapes_[0]), tensor(full_shapes_[1]), tensor(full_shapes_[2]),
                      tensor(full_shapes_[3])};
    NodeId ag = collective(CollectiveKind::ALL_GATHER, "all_gather", local.all(), full.all());
    if (p_.fsdp_mode == FsdpMode::DELAYED && sync_after) {
      g_.find(ag)->ctrl_deps.push_back(CtrlDep{*sync_after, std::string(ctrl_label::kFsdpSync)});
    }
    return full;
  }

  ModelConfig const &m_;
  ParallelConfig const &p_;
  ProfileTable const &profile_;
  WorkloadGraph g_;
  std::vector<int> group_;
  NodeId next_node_ = 0;
  TensorId next_tensor_ = 0;
  NodeId last_comp_ = -1;
  std::map<TensorId, NodeId> producer_;
  std::map<NodeId, NodeId> coll_host_;
  std::vector<Shape> full_shapes_;
};

struct Saved {
  TensorId x, qkv, attn, o, h1;
  LayerWeights w;
};

WorkloadGraph Emitter::run() {
  std::int64_t const B = m_.micro_batch, S = m_.seq_len, H = m_.hidden_dim, F = m_.ffn_inner();
  int const deg = p_.degree;
  bool const tp = p_.strategy == Strategy::TP;
  std::int64_t const split = tp ? deg : 1;

  full_shapes_ = {{H, 3 * H / split}, {H / split, H}, {H, F / split}, {F / split, H}};

  g_.meta["source"] = "synth";
  g_.meta["parallel"] = std::string(to_string(p_.strategy)) + ":" + std::to_string(deg);
  g_.meta["layers"] = std::to_string(m_.layers);
  if (p_.strategy == Strategy::FSDP) {
    g_.meta["fsdp_mode"] = std::string(to_string(p_.fsdp_mode));
  }

  // Resident parameters: shards under FSDP, full (or TP-split) matrices otherwise.
  std::vector<LayerWeights> local(m_.layers);
  for (auto &lw : local) {
    std::vector<TensorId> ids;
    for (auto const &s : full_shapes_) {
      if (p_.strategy == Strategy::FSDP) {
        ids.push_back(input({num_elements(s) / deg}));
      } else {
        ids.push_back(input(s));
      }
    }
    lw = LayerWeights{ids[0], ids[1], ids[2], ids[3]};
  }

  TensorId x = input({B, S, H});
  std::vector<Saved> saved(m_.layers);
  std::optional<NodeId> prev_last;

  for (int l = 0; l < m_.layers; ++l) {
    LayerWeights w = materialize(local[l], prev_last);
    Saved &sv = saved[l];
    sv.x = x;
    sv.w = w;
    sv.qkv = compute("mm", {x, w.qkv}, {B, S, 3 * H / split});
    sv.attn = compute("scaled_dot_product_attention", {sv.qkv}, {B, S, H / split});
    TensorId o = compute("mm", {sv.attn, w.out}, {B, S, H});
    sv.o = tp ? all_reduce(o) : o;
    sv.h1 = compute("mm", {sv.o, w.up}, {B, S, F / split});
    TensorId y = compute("mm", {sv.h1, w.down}, {B, S, H});
    x = tp ? all_reduce(y) : y;
    prev_last = last_comp_;
  }
  g_.graph_outputs.push_back(x);

  TensorId dy = input({B, S, H});
  for (int l = m_.layers - 1; l >= 0; --l) {
    Saved const &sv = saved[l];
    LayerWeights w = p_.strategy == Strategy::FSDP ? materialize(local[l], prev_last) : sv.w;

    TensorId dh1 = compute("mm_grad_input", {dy, w.down}, {B, S, F / split});
    TensorId d_down = compute("mm_grad_weight", {sv.h1, dy}, {F / split, H});
    TensorId d_o = compute("mm_grad_input", {dh1, w.up}, {B, S, H});
    if (tp) {
      d_o = all_reduce(d_o);
    }
    TensorId d_up = compute("mm_grad_weight", {sv.o, dh1}, {H, F / split});
    TensorId d_attn = compute("mm_grad_input", {d_o, w.out}, {B, S, H / split});
    TensorId d_out = compute("mm_grad_weight", {sv.attn, d_o}, {H / split, H});
    TensorId d_qkv = compute("scaled_dot_product_attention_backward", {d_attn, sv.qkv},
                             {B, S, 3 * H / split});
    TensorId dx = compute("mm_grad_input", {d_qkv, w.qkv}, {B, S, H});
    TensorId d_qkvw = compute("mm_grad_weight", {sv.x, d_qkv}, {H, 3 * H / split});
    prev_last = last_comp_;
    if (tp) {
      dx = all_reduce(dx);
    }

    std::vector<TensorId> grads = {d_down, d_up, d_out, d_qkvw};
    if (p_.strategy == Strategy::DP) {
      std::vector<TensorId> reduced;
      for (TensorId t : grads) {
        reduced.push_back(tensor(g_.tensors.at(t).shape));
      }
      collective(CollectiveKind::ALL_REDUCE, "all_reduce", grads, reduced);
      grads = reduced;
    } else if (p_.strategy == Strategy::FSDP) {
      std::vector<TensorId> shards;
      for (TensorId t : grads) {
        shards.push_back(tensor({num_elements(g_.tensors.at(t).shape) / deg}));
      }
      collective(CollectiveKind::REDUCE_SCATTER, "reduce_scatter", grads, shards);
      grads = shards;
    }
    g_.graph_outputs.insert(g_.graph_outputs.end(), grads.begin(), grads.end());
    dy = dx;
  }
  g_.graph_outputs.push_back(dy);
  g_.output_deps = deps_for(g_.graph_outputs);
  return std::move(g_);
}

void check_config(ModelConfig const &m, ParallelConfig const &p, int world_size) {
  auto fail = [](std::string const &why) { throw UnsupportedCombo(why); };
  if (m.layers < 1 || m.hidden_dim < 1 || m.num_heads < 1 || m.ffn_inner() < 1 ||
      m.seq_len < 1 || m.micro_batch < 1) {
    fail("model dimensions must be positive");
  }
  if (m.hidden_dim % m.num_heads != 0) {
    fail("hidden_dim must be divisible by num_heads");
  }
  if (p.degree < 1 || p.degree != world_size) {
    fail("parallel degree must equal world_size (no hybrid meshes)");
  }
  std::int64_t h = m.hidden_dim, f = m.ffn_inner();
  if (p.strategy == Strategy::TP) {
    if (h % p.degree || f % p.degree || m.num_heads % p.degree) {
      fail("TP degree must divide hidden_dim, the FFN width, and num_heads");
    }
  }
  if (p.strategy == Strategy::FSDP) {
    for (std::int64_t numel : {3 * h * h, h * h, h * f}) {
      if (numel % p.degree) {
        fail("FSDP degree must divide every weight's element count");
      }
    }
  }
}

} // namespace

std::vector<WorkloadGraph> synth_transformer(ModelConfig const &m, ParallelConfig const &p,
                                             int world_size, ProfileTable const &profile) {
  check_config(m, p, world_size);
  std::vector<WorkloadGraph> graphs;
  graphs.reserve(world_size);
  for (int r = 0; r < world_size; ++r) {
    graphs.push_back(Emitter(m, p, world_size, r, profile).run());
  }
  return graphs;
}

} // namespace wgsim
