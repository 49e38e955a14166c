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

#include "wgsim/trace_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wgsim/error.hpp"

namespace wgsim {

using nlohmann::json;

std::string read_text_file(std::filesystem::path const &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(std::filesystem::path const &path, std::string const &text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError("cannot write " + path.string());
  }
  out << text;
}

// ---------------------------------------------------------------------------
// Raw IR export

namespace {

std::string_view to_string(RawNodeKind k) {
  switch (k) {
  case RawNodeKind::PLACEHOLDER: return "PLACEHOLDER";
  case RawNodeKind::CALL: return "CALL";
  case RawNodeKind::WAIT: return "WAIT";
  case RawNodeKind::OUTPUT: return "OUTPUT";
  }
  return "?";
}

RawNodeKind parse_raw_kind(std::string const &s) {
  for (auto k : {RawNodeKind::PLACEHOLDER, RawNodeKind::CALL, RawNodeKind::WAIT,
                 RawNodeKind::OUTPUT}) {
    if (to_string(k) == s) {
      return k;
    }
  }
  throw FormatError("unknown raw node kind '" + s + "'");
}

json parse_json(std::string const &text, char const *what) {
  try {
    return json::parse(text);
  } catch (json::exception const &e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

} // namespace

RawIrGraph parse_raw_export(std::string const &text) {
  json doc = parse_json(text, "raw export");
  RawIrGraph raw;
  std::set<std::string> seen;
  try {
    raw.format_version = doc.at("format_version").get<std::string>();
    if (raw.format_version != kRawFormatVersion) {
      throw FormatError("raw export: unrecognized format_version '" + raw.format_version + "'");
    }
    raw.rank = doc.at("rank").get<int>();
    raw.world_size = doc.at("world_size").get<int>();
    if (raw.world_size <= 0 || raw.rank < 0 || raw.rank >= raw.world_size) {
      throw FormatError("raw export: rank must lie in [0, world_size)");
    }
    auto const &nodes = doc.at("nodes");
    if (!nodes.is_array() || nodes.empty()) {
      throw FormatError("raw export: node list is empty");
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      auto const &n = nodes[i];
      RawIrNode node;
      node.name = n.at("name").get<std::string>();
      node.kind = parse_raw_kind(n.at("kind").get<std::string>());
      node.target = n.value("target", "");
      node.arg_names = n.value("arg_names", std::vector<std::string>{});
      if (n.contains("tensor_out")) {
        auto const &t = n.at("tensor_out");
        node.tensor_out = RawTensor{t.at("shape").get<Shape>(),
                                    parse_dtype(t.at("dtype").get<std::string>())};
      }
      if (n.contains("coll_attrs")) {
        auto const &c = n.at("coll_attrs");
        node.coll_attrs =
            RawCollAttrs{c.value("kind", ""), c.value("group", std::vector<int>{})};
      }
      for (auto const &arg : node.arg_names) {
        if (!seen.count(arg)) {
          throw ReferenceError("node '" + node.name + "' (index " + std::to_string(i) +
                               ") references unseen node '" + arg + "'");
        }
      }
      if (!seen.insert(node.name).second) {
        throw FormatError("raw export: duplicate node name '" + node.name + "'");
      }
      raw.nodes.push_back(std::move(node));
    }
  } catch (json::exception const &e) {
    throw FormatError(std::string("raw export: ") + e.what());
  }
  return raw;
}

RawIrGraph read_raw_export(std::filesystem::path const &path) {
  try {
    return parse_raw_export(read_text_file(path));
  } catch (FormatError const &e) {
    throw FormatError(path.string() + ": " + e.detail());
  } catch (ReferenceError const &e) {
    throw ReferenceError(path.string() + ": " + e.detail());
  }
}

std::string dump_raw_export(RawIrGraph const &raw) {
  json doc;
  doc["format_version"] = raw.format_version;
  doc["rank"] = raw.rank;
  doc["world_size"] = raw.world_size;
  doc["nodes"] = json::array();
  for (auto const &n : raw.nodes) {
    json j;
    j["name"] = n.name;
    j["kind"] = std::string(to_string(n.kind));
    if (!n.target.empty()) {
      j["target"] = n.target;
    }
    j["arg_names"] = n.arg_names;
    if (n.tensor_out) {
      j["tensor_out"] = {{"shape", n.tensor_out->shape},
                         {"dtype", std::string(wgsim::to_string(n.tensor_out->dtype))}};
    }
    if (n.coll_attrs) {
      j["coll_attrs"] = {{"kind", n.coll_attrs->kind}, {"group", n.coll_attrs->group}};
    }
    doc["nodes"].push_back(std::move(j));
  }
  return doc.dump(1) + "\n";
}

// ---------------------------------------------------------------------------
// Conversion

namespace {

class Converter {
 public:
  Converter(RawIrGraph const &raw, ProfileTable const &profile, OpTable const &table)
      : raw_(raw), profile_(profile), table_(table) {
    g_.rank = raw.rank;
    g_.world_size = raw.world_size;
    g_.meta["source"] = "capture";
  }

  WorkloadGraph run() {
    for (auto const &n : raw_.nodes) {
      switch (n.kind) {
      case RawNodeKind::PLACEHOLDER: placeholder(n); break;
      case RawNodeKind::CALL: call(n); break;
      case RawNodeKind::WAIT: alias(n); break;
      case RawNodeKind::OUTPUT: output(n); break;
      }
    }
    return std::move(g_);
  }

 private:
  TensorId new_tensor(RawTensor const &t) {
    TensorId id = next_tensor_++;
    g_.tensors.emplace(id, make_tensor(id, t.shape, t.dtype));
    return id;
  }

  RawTensor const &need_shape(RawIrNode const &n) {
    if (!n.tensor_out) {
      throw MissingShape("node '" + n.name + "' (" + n.target + ") has no tensor_out");
    }
    return *n.tensor_out;
  }

  std::vector<TensorId> resolve_args(RawIrNode const &n) {
    std::vector<TensorId> ts;
    for (auto const &a : n.arg_names) {
      auto it = value_of_.find(a);
      if (it != value_of_.end()) {
        ts.push_back(it->second);
      }
    }
    return ts;
  }

  // Producers of the given tensors, plus the host launch of any collective.
  std::vector<NodeId> deps_for(std::vector<TensorId> const &tensors) {
    std::set<NodeId> deps;
    for (TensorId t : tensors) {
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

  void placeholder(RawIrNode const &n) {
    TensorId t = new_tensor(need_shape(n));
    g_.graph_inputs.push_back(t);
    value_of_[n.name] = t;
  }

  void alias(RawIrNode const &n) {
    if (n.arg_names.empty()) {
      throw FormatError("node '" + n.name + "' aliases nothing");
    }
    auto it = value_of_.find(n.arg_names.front());
    if (it != value_of_.end()) {
      value_of_[n.name] = it->second;
    }
  }

  void output(RawIrNode const &n) {
    auto ts = resolve_args(n);
    for (TensorId t : ts) {
      g_.graph_outputs.push_back(t);
    }
    auto deps = deps_for(ts);
    g_.output_deps.insert(g_.output_deps.end(), deps.begin(), deps.end());
    std::sort(g_.output_deps.begin(), g_.output_deps.end());
    g_.output_deps.erase(std::unique(g_.output_deps.begin(), g_.output_deps.end()),
                         g_.output_deps.end());
  }

  void call(RawIrNode const &n) {
    OpInfo const *info = table_.by_target(n.target);
    if (!info) {
      throw UnknownOperator("node '" + n.name + "': target '" + n.target +
                            "' is not in the operator table");
    }
    if (info->role == OpRole::Elide) {
      alias(n);
      return;
    }
    RawTensor const &out_meta = need_shape(n);
    auto inputs = resolve_args(n);

    Node host;
    host.id = next_node_++;
    host.kind = NodeKind::HOST;
    host.op_name = info->op;

    Node kernel;
    kernel.id = next_node_++;
    kernel.op_name = info->op;
    kernel.inputs = inputs;
    kernel.data_deps = deps_for(inputs);
    kernel.ctrl_deps.push_back(CtrlDep{host.id, std::string(ctrl_label::kLaunch)});

    if (info->role == OpRole::Compute) {
      kernel.kind = NodeKind::COMP;
      std::vector<Shape> shapes;
      for (TensorId t : inputs) {
        shapes.push_back(g_.tensors.at(t).shape);
      }
      kernel.duration_ns = resolve_duration(profile_, info->op, shapes, out_meta.dtype);
    } else {
      kernel.kind = NodeKind::COLL;
      CollAttrs coll;
      coll.kind = *info->coll;
      if (n.coll_attrs && !n.coll_attrs->kind.empty() &&
          parse_collective_kind(n.coll_attrs->kind) != coll.kind) {
        throw FormatError("node '" + n.name + "': coll_attrs.kind disagrees with target");
      }
      if (n.coll_attrs && !n.coll_attrs->group.empty()) {
        coll.group = n.coll_attrs->group;
      } else {
        for (int r = 0; r < raw_.world_size; ++r) {
          coll.group.push_back(r);
        }
      }
      if (std::find(coll.group.begin(), coll.group.end(), raw_.rank) == coll.group.end()) {
        throw FormatError("node '" + n.name + "': rank not in collective group");
      }
      for (TensorId t : inputs) {
        coll.comm_bytes += g_.tensors.at(t).bytes;
      }
      kernel.coll = std::move(coll);
      coll_host_[kernel.id] = host.id;
    }

    TensorId out = new_tensor(out_meta);
    kernel.outputs.push_back(out);
    producer_[out] = kernel.id;
    value_of_[n.name] = out;

    g_.nodes.push_back(std::move(host));
    g_.nodes.push_back(std::move(kernel));
  }

  RawIrGraph const &raw_;
  ProfileTable const &profile_;
  OpTable const &table_;
  WorkloadGraph g_;
  NodeId next_node_ = 0;
  TensorId next_tensor_ = 0;
  std::map<std::string, TensorId> value_of_;
  std::map<TensorId, NodeId> producer_;
  std::map<NodeId, NodeId> coll_host_;
};

} // namespace

WorkloadGraph convert(RawIrGraph const &raw, ProfileTable const &profile,
                      OpTable const &table) {
  return Converter(raw, profile, table).run();
}

// ---------------------------------------------------------------------------
// Workload graph format

namespace {

constexpr char const *kReservedMeta[] = {"graph_inputs", "graph_outputs", "output_deps"};

json node_to_json(Node const &n) {
  json j;
  j["id"] = n.id;
  j["kind"] = std::string(to_string(n.kind));
  j["op"] = n.op_name;
  j["inputs"] = n.inputs;
  j["outputs"] = n.outputs;
  j["data_deps"] = n.data_deps;
  j["ctrl_deps"] = json::array();
  for (auto const &c : n.ctrl_deps) {
    j["ctrl_deps"].push_back({{"node", c.node}, {"label", c.label}});
  }
  if (n.duration_ns) {
    j["duration_ns"] = *n.duration_ns;
  }
  if (n.coll) {
    j["coll"] = {{"kind", std::string(to_string(n.coll->kind))},
                 {"group", n.coll->group},
                 {"comm_bytes", n.coll->comm_bytes}};
  }
  if (n.p2p) {
    j["p2p"] = {{"peer_rank", n.p2p->peer_rank},
                {"comm_bytes", n.p2p->comm_bytes},
                {"channel_tag", n.p2p->channel_tag}};
  }
  if (!n.fused_from.empty()) {
    j["fused_from"] = n.fused_from;
  }
  return j;
}

Node node_from_json(json const &j) {
  Node n;
  n.id = j.at("id").get<NodeId>();
  n.kind = parse_node_kind(j.at("kind").get<std::string>());
  n.op_name = j.at("op").get<std::string>();
  n.inputs = j.value("inputs", std::vector<TensorId>{});
  n.outputs = j.value("outputs", std::vector<TensorId>{});
  n.data_deps = j.value("data_deps", std::vector<NodeId>{});
  for (auto const &c : j.value("ctrl_deps", json::array())) {
    n.ctrl_deps.push_back(CtrlDep{c.at("node").get<NodeId>(), c.at("label").get<std::string>()});
  }
  if (j.contains("duration_ns")) {
    n.duration_ns = j.at("duration_ns").get<std::int64_t>();
  }
  if (j.contains("coll")) {
    auto const &c = j.at("coll");
    n.coll = CollAttrs{parse_collective_kind(c.at("kind").get<std::string>()),
                       c.at("group").get<std::vector<int>>(),
                       c.at("comm_bytes").get<std::int64_t>()};
  }
  if (j.contains("p2p")) {
    auto const &p = j.at("p2p");
    n.p2p = P2pAttrs{p.at("peer_rank").get<int>(), p.at("comm_bytes").get<std::int64_t>(),
                     p.at("channel_tag").get<std::int64_t>()};
  }
  n.fused_from = j.value("fused_from", std::vector<NodeId>{});
  return n;
}

} // namespace

std::string dump_graph(WorkloadGraph const &g) {
  json doc;
  doc["format_version"] = kGraphFormatVersion;
  doc["rank"] = g.rank;
  doc["world_size"] = g.world_size;
  doc["tensors"] = json::object();
  for (auto const &[id, t] : g.tensors) {
    doc["tensors"][std::to_string(id)] = {
        {"shape", t.shape}, {"dtype", std::string(to_string(t.dtype))}, {"bytes", t.bytes}};
  }
  std::vector<Node const *> order;
  for (auto const &n : g.nodes) {
    order.push_back(&n);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](Node const *a, Node const *b) { return a->id < b->id; });
  doc["nodes"] = json::array();
  for (Node const *n : order) {
    doc["nodes"].push_back(node_to_json(*n));
  }
  json meta = json::object();
  for (auto const &[k, v] : g.meta) {
    meta[k] = v;
  }
  meta["graph_inputs"] = g.graph_inputs;
  meta["graph_outputs"] = g.graph_outputs;
  meta["output_deps"] = g.output_deps;
  doc["meta"] = std::move(meta);
  return doc.dump(1) + "\n";
}

WorkloadGraph parse_graph(std::string const &text) {
  json doc = parse_json(text, "workload graph");
  WorkloadGraph g;
  try {
    auto version = doc.at("format_version").get<std::string>();
    if (version != kGraphFormatVersion) {
      throw FormatError("workload graph: unrecognized format_version '" + version + "'");
    }
    g.rank = doc.at("rank").get<int>();
    g.world_size = doc.at("world_size").get<int>();
    for (auto const &[key, t] : doc.at("tensors").items()) {
      TensorMeta m;
      try {
        m.id = std::stoll(key);
      } catch (std::exception const &) {
        throw FormatError("workload graph: tensor key '" + key + "' is not an integer");
      }
      m.shape = t.at("shape").get<Shape>();
      m.dtype = parse_dtype(t.at("dtype").get<std::string>());
      m.bytes = t.at("bytes").get<std::int64_t>();
      g.tensors.emplace(m.id, std::move(m));
    }
    for (auto const &n : doc.at("nodes")) {
      g.nodes.push_back(node_from_json(n));
    }
    std::stable_sort(g.nodes.begin(), g.nodes.end(),
                     [](Node const &a, Node const &b) { return a.id < b.id; });
    json const meta = doc.value("meta", json::object());
    for (auto const &[key, v] : meta.items()) {
      if (key == kReservedMeta[0]) {
        g.graph_inputs = v.get<std::vector<TensorId>>();
      } else if (key == kReservedMeta[1]) {
        g.graph_outputs = v.get<std::vector<TensorId>>();
      } else if (key == kReservedMeta[2]) {
        g.output_deps = v.get<std::vector<NodeId>>();
      } else if (v.is_string()) {
        g.meta[key] = v.get<std::string>();
      } else {
        throw FormatError("workload graph: meta value for '" + key + "' must be a string");
      }
    }
  } catch (json::exception const &e) {
    throw FormatError(std::string("workload graph: ") + e.what());
  }
  return g;
}

void write_graph(WorkloadGraph const &g, std::filesystem::path const &path) {
  write_text_file(path, dump_graph(g));
}

WorkloadGraph read_graph(std::filesystem::path const &path) {
  try {
    return parse_graph(read_text_file(path));
  } catch (FormatError const &e) {
    throw FormatError(path.string() + ": " + e.detail());
  }
}

std::filesystem::path rank_file(std::filesystem::path const &dir, int rank) {
  return dir / ("rank_" + std::to_string(rank) + ".json");
}

void write_graph_dir(std::vector<WorkloadGraph> const &graphs,
                     std::filesystem::path const &dir) {
  std::filesystem::create_directories(dir);
  for (auto const &g : graphs) {
    write_graph(g, rank_file(dir, g.rank));
  }
}

namespace {

std::map<int, std::filesystem::path> rank_files(std::filesystem::path const &dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw FormatError(dir.string() + " is not a directory");
  }
  static std::regex const pattern(R"(rank_(\d+)\.json)");
  std::map<int, std::filesystem::path> files;
  for (auto const &entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) {
      files.emplace(std::stoi(m[1].str()), entry.path());
    }
  }
  return files;
}

} // namespace

std::vector<WorkloadGraph> read_graph_dir(std::filesystem::path const &dir) {
  std::vector<WorkloadGraph> graphs;
  for (auto const &[rank, path] : rank_files(dir)) {
    graphs.push_back(read_graph(path));
  }
  return graphs;
}

std::vector<RawIrGraph> read_raw_dir(std::filesystem::path const &dir) {
  std::vector<RawIrGraph> raws;
  for (auto const &[rank, path] : rank_files(dir)) {
    raws.push_back(read_raw_export(path));
  }
  return raws;
}

std::vector<WorkloadGraph> ingest_dir(std::filesystem::path const &dir, ProfileTable const &profile,
                                      OpTable const &table) {
  std::vector<WorkloadGraph> graphs;
  for (auto const &raw : read_raw_dir(dir)) {
    graphs.push_back(convert(raw, profile, table));
  }
  return graphs;
}

} // namespace wgsim
