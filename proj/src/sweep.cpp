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

#include "wgsim/sweep.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wgsim/error.hpp"
#include "wgsim/trace_io.hpp"

namespace wgsim {

using json = nlohmann::json;

std::string WorkloadSpec::label() const {
  if (!graph_dir.empty()) return graph_dir;
  if (!raw_dir.empty()) return raw_dir;
  return preset;
}

std::string PassSpec::label() const {
  if (!pass) return "none";
  if (pass->which == PassKind::REORDER_AG) {
    return "reorder-ag:" + std::to_string(pass->prefetch_distance);
  }
  return "bucket-ar:" + std::to_string(pass->bucket_cap_bytes);
}

PassSpec parse_pass_spec(std::string const &text) {
  if (text == "none") return PassSpec{};
  auto colon = text.find(':');
  std::string name = text.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  PassConfig cfg;
  try {
    if (name == "reorder-ag") {
      cfg.which = PassKind::REORDER_AG;
      cfg.prefetch_distance = arg.empty() ? 1 : std::stoi(arg);
      return PassSpec{cfg};
    }
    if (name == "bucket-ar") {
      cfg.which = PassKind::BUCKET_AR;
      if (!arg.empty()) cfg.bucket_cap_bytes = std::stoll(arg);
      return PassSpec{cfg};
    }
  } catch (std::logic_error const &) {
    // fall through to the error below
  }
  throw InvalidArgument("cannot parse pass '" + text + "' (none, reorder-ag:<k>, bucket-ar:<bytes>)");
}

Topology TopologySpec::at(double bw) const {
  if (variant == "switch") return Topology::make_switch(ranks, bw, latency_ns);
  if (variant == "mesh") return Topology::make_mesh(rows, cols, bw, latency_ns);
  throw InvalidArgument("unknown topology variant '" + variant + "'");
}

std::string TopologySpec::label() const {
  if (variant == "mesh") return "mesh:" + std::to_string(rows) + "x" + std::to_string(cols);
  return variant + ":" + std::to_string(ranks);
}

namespace {

double bandwidth_value(json const &v) {
  return v.is_string() ? parse_bandwidth(v.get<std::string>()) : v.get<double>();
}

std::int64_t latency_value(json const &v) {
  return v.is_string() ? parse_latency(v.get<std::string>()) : v.get<std::int64_t>();
}

std::string resolve(std::string const &base, std::string const &p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  return path.is_absolute() ? p : (std::filesystem::path(base) / path).lexically_normal().string();
}

} // namespace

SweepSpec parse_sweep_spec(std::string const &text, std::string const &base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (json::exception const &e) {
    throw FormatError(std::string("sweep spec is not JSON: ") + e.what());
  }
  SweepSpec spec;
  try {
    static std::set<std::string> const known = {"workloads", "passes",      "topologies",
                                                "comm",      "repetitions", "profile"};
    for (auto const &[key, _] : j.items()) {
      if (!known.count(key)) throw FormatError("sweep spec: unknown key '" + key + "'");
    }
    for (auto const &w : j.at("workloads")) {
      WorkloadSpec ws;
      ws.preset = w.value("preset", "");
      ws.parallel = w.value("parallel", "");
      ws.fsdp_mode = w.value("fsdp_mode", "delayed");
      ws.graph_dir = resolve(base_dir, w.value("graph_dir", ""));
      ws.raw_dir = resolve(base_dir, w.value("raw_dir", ""));
      int sources = !ws.preset.empty() + !ws.graph_dir.empty() + !ws.raw_dir.empty();
      if (sources != 1) {
        throw FormatError("each workload needs exactly one of preset, graph_dir, raw_dir");
      }
      if (!ws.preset.empty() && ws.parallel.empty()) {
        throw FormatError("preset workload '" + ws.preset + "' needs a parallel field");
      }
      spec.workloads.push_back(ws);
    }
    if (j.contains("passes")) {
      for (auto const &p : j.at("passes")) spec.passes.push_back(parse_pass_spec(p.get<std::string>()));
    } else {
      spec.passes.push_back(PassSpec{});
    }
    for (auto const &t : j.at("topologies")) {
      TopologySpec ts;
      ts.variant = t.value("variant", "switch");
      ts.ranks = t.value("ranks", 0);
      ts.rows = t.value("rows", 0);
      ts.cols = t.value("cols", 0);
      for (auto const &b : t.at("bandwidths")) ts.bandwidths.push_back(bandwidth_value(b));
      if (t.contains("latency")) ts.latency_ns = latency_value(t.at("latency"));
      if (ts.bandwidths.empty()) throw FormatError("topology needs at least one bandwidth");
      ts.at(ts.bandwidths.front()); // validates the shape early
      spec.topologies.push_back(ts);
    }
    if (j.contains("comm")) {
      for (auto const &c : j.at("comm")) {
        SimOptions o;
        parse_comm(c.get<std::string>(), o);
        spec.comms.push_back(o);
      }
    } else {
      spec.comms.push_back(SimOptions{});
    }
    spec.repetitions = j.value("repetitions", 1);
    spec.profile_path = resolve(base_dir, j.value("profile", ""));
  } catch (json::exception const &e) {
    throw FormatError(std::string("sweep spec: ") + e.what());
  }
  if (spec.workloads.empty() || spec.topologies.empty() || spec.passes.empty() || spec.comms.empty()) {
    throw FormatError("sweep spec has an empty axis");
  }
  if (spec.repetitions < 1) {
    throw FormatError("repetitions must be at least 1");
  }
  return spec;
}

std::vector<SweepPoint> enumerate_points(SweepSpec const &spec) {
  std::vector<SweepPoint> out;
  int idx = 0;
  for (int w = 0; w < static_cast<int>(spec.workloads.size()); ++w) {
    for (int p = 0; p < static_cast<int>(spec.passes.size()); ++p) {
      for (int t = 0; t < static_cast<int>(spec.topologies.size()); ++t) {
        for (int b = 0; b < static_cast<int>(spec.topologies[t].bandwidths.size()); ++b) {
          for (int c = 0; c < static_cast<int>(spec.comms.size()); ++c) {
            out.push_back(SweepPoint{idx++, w, p, t, b, c});
          }
        }
      }
    }
  }
  return out;
}

std::vector<std::vector<PreparedGraphs>> prepare_workloads(SweepSpec const &spec) {
  ProfileTable profile;
  std::optional<std::string> profile_error;
  if (!spec.profile_path.empty()) {
    try {
      profile = load_profile(spec.profile_path);
    } catch (Error const &e) {
      profile_error = e.what();
    }
  }
  std::vector<std::vector<PreparedGraphs>> out;
  for (auto const &w : spec.workloads) {
    std::vector<WorkloadGraph> base;
    std::optional<std::string> error = profile_error;
    if (!error) {
      try {
        if (!w.graph_dir.empty()) {
          base = read_graph_dir(w.graph_dir);
        } else if (!w.raw_dir.empty()) {
          base = ingest_dir(w.raw_dir, profile);
        } else {
          ParallelConfig pc = parse_parallel(w.parallel);
          pc.fsdp_mode = parse_fsdp_mode(w.fsdp_mode);
          base = synth_transformer(model_preset(w.preset), pc, pc.degree, profile);
        }
        if (base.empty()) throw FormatError("workload " + w.label() + " has no graphs");
      } catch (Error const &e) {
        error = e.what();
      }
    }
    std::vector<PreparedGraphs> per_pass;
    for (auto const &p : spec.passes) {
      PreparedGraphs pg;
      pg.error = error;
      if (!error) {
        try {
          for (auto const &g : base) {
            if (!p.pass) {
              pg.graphs.push_back(g);
              continue;
            }
            auto res = apply_pass(g, *p.pass);
            if (!res.applied()) pg.pass_note = res.not_applicable;
            pg.graphs.push_back(std::move(res.graph));
          }
        } catch (Error const &e) {
          pg.error = e.what();
          pg.graphs.clear();
        }
      }
      per_pass.push_back(std::move(pg));
    }
    out.push_back(std::move(per_pass));
  }
  return out;
}

PointResult evaluate_point(SweepSpec const &spec, SweepPoint const &pt,
                           std::vector<std::vector<PreparedGraphs>> const &prepared) {
  PointResult res;
  auto const &pg = prepared[pt.workload][pt.pass];
  if (pg.error) {
    res.status = "error: " + *pg.error;
    return res;
  }
  try {
    auto const &ts = spec.topologies[pt.topology];
    Topology topo = ts.at(ts.bandwidths[pt.bandwidth]);
    SimOptions opts = spec.comms[pt.comm];
    opts.track_memory = true;
    opts.emit_event_trace = false;
    std::optional<SimReport> first;
    for (int rep = 0; rep < spec.repetitions; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      SimReport r = simulate(pg.graphs, topo, opts);
      auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
      res.wall_clock_ns = rep == 0 ? ns : std::min<std::int64_t>(res.wall_clock_ns, ns);
      if (!first) {
        first = r;
      } else if (r.makespan_ns != first->makespan_ns || r.peak_mem_bytes() != first->peak_mem_bytes()) {
        res.status = "error: repetitions disagree";
        return res;
      }
    }
    res.makespan_ns = first->makespan_ns;
    res.peak_mem_bytes = first->peak_mem_bytes();
    res.exposed_comm_ns = first->exposed_comm_ns();
    res.total_comm_bytes = first->total_comm_bytes;
    res.comm_busy_ns = first->comm_busy_ns();
    res.link_busy_ns = first->link_busy_ns();
    res.status = pg.pass_note ? "pass-not-applicable" : "ok";
  } catch (Error const &e) {
    res = PointResult{};
    res.status = std::string("error: ") + e.what();
  }
  return res;
}

std::vector<PointResult> evaluate_points(SweepSpec const &spec, std::vector<SweepPoint> const &points,
                                         std::vector<std::vector<PreparedGraphs>> const &prepared,
                                         int jobs) {
  std::vector<PointResult> out(points.size());
  int const n = static_cast<int>(points.size());
  int const threads = std::max(1, jobs);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int i = 0; i < n; ++i) {
    out[i] = evaluate_point(spec, points[i], prepared);
  }
  return out;
}

std::vector<PointResult> evaluate_points_serial(SweepSpec const &spec,
                                                std::vector<SweepPoint> const &points,
                                                std::vector<std::vector<PreparedGraphs>> const &prepared) {
  std::vector<PointResult> out;
  out.reserve(points.size());
  for (auto const &pt : points) {
    out.push_back(evaluate_point(spec, pt, prepared));
  }
  return out;
}

namespace {

std::string csv_field(std::string const &s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string ratio(std::int64_t a, std::int64_t b) {
  if (b == 0) return a == 0 ? "1.000000" : "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(a) / static_cast<double>(b));
  return buf;
}

} // namespace

std::string sweep_csv(SweepSpec const &spec, std::vector<SweepPoint> const &points,
                      std::vector<PointResult> const &results, CsvOptions const &opts) {
  PointResult const *ref = nullptr;
  if (opts.normalize_to) {
    int r = *opts.normalize_to;
    if (r < 0 || r >= static_cast<int>(results.size())) {
      throw InvalidArgument("--normalize-to point " + std::to_string(r) + " does not exist");
    }
    if (!results[r].ok()) {
      throw InvalidArgument("--normalize-to point " + std::to_string(r) + " failed: " + results[r].status);
    }
    ref = &results[r];
  }
  std::ostringstream os;
  os << "point,workload,parallel,fsdp_mode,pass,topology,bandwidth_Bps,latency_ns,comm,status,"
        "makespan_ns,peak_mem_bytes,exposed_comm_ns,total_comm_bytes,comm_busy_ns,link_busy_ns";
  if (ref) os << ",makespan_ratio,peak_mem_ratio,exposed_comm_ratio,total_comm_bytes_ratio";
  if (opts.timing) os << ",wall_clock_ns";
  os << "\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto const &pt = points[i];
    auto const &r = results[i];
    auto const &w = spec.workloads[pt.workload];
    auto const &t = spec.topologies[pt.topology];
    bool synth = !w.preset.empty();
    os << pt.index << ',' << csv_field(w.label()) << ',' << (synth ? w.parallel : "-") << ','
       << (synth ? w.fsdp_mode : "-") << ',' << spec.passes[pt.pass].label() << ',' << t.label() << ','
       << std::llround(t.bandwidths[pt.bandwidth]) << ',' << t.latency_ns << ','
       << describe_comm(spec.comms[pt.comm]) << ',' << csv_field(r.status) << ',' << r.makespan_ns << ','
       << r.peak_mem_bytes << ',' << r.exposed_comm_ns << ',' << r.total_comm_bytes << ','
       << r.comm_busy_ns << ',' << r.link_busy_ns;
    if (ref) {
      if (r.ok()) {
        os << ',' << ratio(r.makespan_ns, ref->makespan_ns) << ','
           << ratio(r.peak_mem_bytes, ref->peak_mem_bytes) << ','
           << ratio(r.exposed_comm_ns, ref->exposed_comm_ns) << ','
           << ratio(r.total_comm_bytes, ref->total_comm_bytes);
      } else {
        os << ",,,,";
      }
    }
    if (opts.timing) os << ',' << r.wall_clock_ns;
    os << "\n";
  }
  return os.str();
}

std::string run_sweep(SweepSpec const &spec, int jobs, CsvOptions const &opts) {
  auto points = enumerate_points(spec);
  auto prepared = prepare_workloads(spec);
  auto results = evaluate_points(spec, points, prepared, jobs);
  return sweep_csv(spec, points, results, opts);
}

} // namespace wgsim
