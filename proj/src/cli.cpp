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

#include "wgsim/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "wgsim/error.hpp"
#include "wgsim/passes.hpp"
#include "wgsim/simulator.hpp"
#include "wgsim/sweep.hpp"
#include "wgsim/synth.hpp"
#include "wgsim/trace_io.hpp"

namespace wgsim {

namespace fs = std::filesystem;

namespace {

ProfileTable profile_or_empty(std::string const &path, std::ostream &err) {
  if (path.empty()) return ProfileTable{};
  ProfileTable p = load_profile(path);
  for (auto const &w : p.warnings) err << "warning: " << path << ": " << w << "\n";
  return p;
}

// Writes graphs after checking them; returns kExitInvalid on violations.
int emit_graphs(std::vector<WorkloadGraph> const &graphs, std::string const &out_dir,
                std::ostream &out, std::ostream &err) {
  int rc = kExitOk;
  for (auto const &g : graphs) {
    for (auto const &v : validate_graph(g)) {
      err << "error: rank " << g.rank << ": " << to_string(v.rule) << ": " << v.detail << "\n";
      rc = kExitInvalid;
    }
  }
  if (rc != kExitOk) return rc;
  write_graph_dir(graphs, out_dir);
  out << "wrote " << graphs.size() << " graph(s) to " << out_dir << "\n";
  return rc;
}

std::vector<WorkloadGraph> load_dir(std::string const &dir) {
  auto graphs = read_graph_dir(dir);
  if (graphs.empty()) {
    throw FormatError(dir + " contains no rank_<r>.json graphs");
  }
  return graphs;
}

std::string ratio_cell(double r) {
  if (std::isinf(r)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", r);
  return buf;
}

void print_ratio_row(std::ostream &out, std::string const &label, OpRatios const &r) {
  out << std::left << std::setw(6) << label;
  for (OpClass c : kAllOpClasses) {
    out << " " << std::setw(10) << ratio_cell(r.at(c));
  }
  out << "\n";
}

struct Args {
  std::string preset, parallel, fsdp_mode = "delayed", profile, in, out, topo, comm = "analytical:ring",
                                                                      algo = "ring", trace, spec;
  std::string op_table;
  int reorder_ag = 0;
  std::int64_t bucket_ar = 0;
  int jobs = 1;
  int normalize_to = -1;
  bool timing = false;
  bool no_memory = false;
  bool show_critical_path = false;
  std::int64_t host_overhead_ns = 0;
  std::vector<std::string> dirs;
};

int cmd_synth(Args const &a, std::ostream &out, std::ostream &err) {
  ParallelConfig pc = parse_parallel(a.parallel);
  pc.fsdp_mode = parse_fsdp_mode(a.fsdp_mode);
  auto graphs = synth_transformer(model_preset(a.preset), pc, pc.degree, profile_or_empty(a.profile, err));
  return emit_graphs(graphs, a.out, out, err);
}

int cmd_ingest(Args const &a, std::ostream &out, std::ostream &err) {
  auto profile = profile_or_empty(a.profile, err);
  std::vector<WorkloadGraph> graphs;
  if (!a.op_table.empty()) {
    graphs = ingest_dir(a.in, profile, load_op_table(a.op_table));
  } else {
    graphs = ingest_dir(a.in, profile);
  }
  if (graphs.empty()) throw FormatError(a.in + " contains no rank_<r>.json exports");
  return emit_graphs(graphs, a.out, out, err);
}

int cmd_pass(Args const &a, std::ostream &out, std::ostream &err) {
  if ((a.reorder_ag > 0) == (a.bucket_ar > 0)) {
    throw InvalidArgument("pass needs exactly one of --reorder-ag <k> or --bucket-ar <bytes>");
  }
  PassConfig cfg;
  if (a.reorder_ag > 0) {
    cfg.which = PassKind::REORDER_AG;
    cfg.prefetch_distance = a.reorder_ag;
  } else {
    cfg.which = PassKind::BUCKET_AR;
    cfg.bucket_cap_bytes = a.bucket_ar;
  }
  auto graphs = load_dir(a.in);
  std::vector<WorkloadGraph> after;
  int rc = kExitOk;
  bool warned = false;
  for (auto const &g : graphs) {
    auto res = apply_pass(g, cfg);
    if (!res.applied() && !warned) {
      err << "warning: NotApplicable: " << *res.not_applicable << "\n";
      warned = true;
    }
    for (auto const &v : verify_pass_safety(g, res.graph)) {
      err << "error: rank " << g.rank << ": " << to_string(v.rule) << ": " << v.detail << "\n";
      rc = kExitInvalid;
    }
    after.push_back(std::move(res.graph));
  }
  if (rc != kExitOk) return rc;
  return emit_graphs(after, a.out, out, err);
}

int cmd_expand(Args const &a, std::ostream &out, std::ostream &err) {
  auto graphs = load_dir(a.in);
  auto expanded = expand_graphs(graphs, parse_topology(a.topo), parse_collective_algo(a.algo));
  return emit_graphs(expanded, a.out, out, err);
}

int cmd_simulate(Args const &a, std::ostream &out, std::ostream &) {
  auto graphs = load_dir(a.in);
  Topology topo = parse_topology(a.topo);
  SimOptions opts;
  parse_comm(a.comm, opts);
  opts.track_memory = !a.no_memory;
  opts.emit_event_trace = !a.trace.empty();
  opts.host_launch_overhead_ns = a.host_overhead_ns;
  SimReport rep = simulate(graphs, topo, opts);
  std::string path = a.out.empty() ? "report.json" : a.out;
  write_text_file(path, dump_report(rep, topo, opts));
  if (!a.trace.empty()) write_text_file(a.trace, dump_trace(rep.trace));
  out << "makespan_ns " << rep.makespan_ns << "\n"
      << "peak_mem_bytes " << rep.peak_mem_bytes() << "\n"
      << "exposed_comm_ns " << rep.exposed_comm_ns() << "\n"
      << "total_comm_bytes " << rep.total_comm_bytes << "\n";
  if (a.show_critical_path) {
    auto cp = critical_path(graphs, topo, opts);
    out << "critical_path_ns " << cp.length_ns << "\n";
    for (auto const &[r, n] : cp.path) out << "  rank " << r << " node " << n << "\n";
  }
  out << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_sweep(Args const &a, std::ostream &out, std::ostream &err) {
  SweepSpec spec = parse_sweep_spec(read_text_file(a.spec), fs::path(a.spec).parent_path().string());
  CsvOptions co;
  if (a.normalize_to >= 0) co.normalize_to = a.normalize_to;
  co.timing = a.timing;
  auto points = enumerate_points(spec);
  auto prepared = prepare_workloads(spec);
  auto results = evaluate_points(spec, points, prepared, a.jobs);
  std::string csv = sweep_csv(spec, points, results, co);
  int failed = 0;
  for (auto const &r : results) failed += !r.ok();
  if (failed) err << "warning: " << failed << " of " << results.size() << " point(s) failed\n";
  if (a.out.empty()) {
    out << csv;
  } else {
    write_text_file(a.out, csv);
    out << "wrote " << points.size() << " row(s) to " << a.out << "\n";
  }
  return kExitOk;
}

int cmd_validate(Args const &a, std::ostream &out, std::ostream &err) {
  auto ga = load_dir(a.dirs.at(0));
  auto gb = load_dir(a.dirs.at(1));
  std::set<int> ra, rb;
  for (auto const &g : ga) ra.insert(g.rank);
  for (auto const &g : gb) rb.insert(g.rank);
  if (ra != rb) {
    throw RankMismatch(a.dirs[0] + " holds " + std::to_string(ra.size()) + " rank(s), " + a.dirs[1] +
                       " holds " + std::to_string(rb.size()) + " with different ids");
  }
  out << std::left << std::setw(6) << "rank";
  for (OpClass c : kAllOpClasses) out << " " << std::setw(10) << short_name(c);
  out << "\n";
  OpHistogram ta, tb;
  for (std::size_t i = 0; i < ga.size(); ++i) {
    auto ha = op_histogram(ga[i]), hb = op_histogram(gb[i]);
    for (OpClass c : kAllOpClasses) {
      ta[c] += ha[c];
      tb[c] += hb[c];
    }
    print_ratio_row(out, std::to_string(ga[i].rank), compare_histograms(ha, hb));
  }
  auto total = compare_histograms(ta, tb);
  print_ratio_row(out, "all", total);

  bool strict_ok = true;
  for (OpClass c : {OpClass::MM, OpClass::Attn, OpClass::AllReduce, OpClass::AllGather,
                    OpClass::ReduceScatter}) {
    if (ta[c] != tb[c]) {
      err << "error: " << short_name(c) << " counts differ (" << ta[c] << " vs " << tb[c] << ")\n";
      strict_ok = false;
    }
  }
  for (OpClass c : {OpClass::Elementwise, OpClass::Other}) {
    if (ta[c] != tb[c]) {
      err << "warning: " << short_name(c) << " counts differ (" << ta[c] << " vs " << tb[c] << ")\n";
    }
  }
  // Per-rank strict check too: aggregate equality can hide offsetting ranks.
  for (std::size_t i = 0; i < ga.size(); ++i) {
    auto ha = op_histogram(ga[i]), hb = op_histogram(gb[i]);
    for (OpClass c : {OpClass::MM, OpClass::Attn, OpClass::AllReduce, OpClass::AllGather,
                      OpClass::ReduceScatter}) {
      strict_ok &= ha[c] == hb[c];
    }
  }
  return strict_ok ? kExitOk : kExitInvalid;
}

} // namespace

int run_cli(std::vector<std::string> const &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"wgsim: workload graphs, passes and a discrete-event training simulator", "wgsim"};
  app.require_subcommand(1);
  Args a;

  auto *synth = app.add_subcommand("synth", "synthesize per-rank graphs for a model preset");
  synth->add_option("--preset", a.preset, "model preset")->required()->check(CLI::IsMember(preset_names()));
  synth->add_option("--parallel", a.parallel, "<dp|fsdp|tp>:<degree>")->required();
  synth->add_option("--fsdp-mode", a.fsdp_mode, "delayed or none")->check(CLI::IsMember({"delayed", "none"}));
  synth->add_option("--profile", a.profile, "profiled compute durations");
  synth->add_option("--out", a.out, "output graph directory")->required();

  auto *ingest = app.add_subcommand("ingest", "convert raw IR exports into workload graphs");
  ingest->add_option("--in", a.in, "directory of rank_<r>.json raw exports")->required();
  ingest->add_option("--out", a.out, "output graph directory")->required();
  ingest->add_option("--profile", a.profile, "profiled compute durations");
  ingest->add_option("--op-table", a.op_table, "operator mapping table (defaults to the built-in one)");

  auto *pass = app.add_subcommand("pass", "apply a scheduling pass");
  pass->add_option("--in", a.in, "input graph directory")->required();
  pass->add_option("--out", a.out, "output graph directory")->required();
  pass->add_option("--reorder-ag", a.reorder_ag, "prefetch distance k")->check(CLI::PositiveNumber);
  pass->add_option("--bucket-ar", a.bucket_ar, "bucket cap in bytes")->check(CLI::PositiveNumber);

  auto *expand = app.add_subcommand("expand", "replace collectives with SEND/RECV nodes");
  expand->add_option("--in", a.in, "input graph directory")->required();
  expand->add_option("--out", a.out, "output graph directory")->required();
  expand->add_option("--topo", a.topo, "switch:<N>:<bw>:<lat> or mesh:<R>x<C>:<bw>:<lat>")->required();
  expand->add_option("--algo", a.algo, "ring, tree or mesh_hier");

  auto *sim = app.add_subcommand("simulate", "run the discrete-event simulator");
  sim->add_option("--in", a.in, "graph directory")->required();
  sim->add_option("--topo", a.topo, "switch:<N>:<bw>:<lat> or mesh:<R>x<C>:<bw>:<lat>")->required();
  sim->add_option("--comm", a.comm, "analytical[:<algo>] or expanded:<algo>");
  sim->add_option("--out", a.out, "report path (default report.json)");
  sim->add_option("--trace", a.trace, "event trace path");
  sim->add_option("--host-overhead", a.host_overhead_ns, "per-launch host cost in ns")->check(CLI::NonNegativeNumber);
  sim->add_flag("--no-memory", a.no_memory, "skip memory tracking");
  sim->add_flag("--critical-path", a.show_critical_path, "also print the contention-free critical path");

  auto *sweep = app.add_subcommand("sweep", "evaluate a configuration sweep into CSV");
  sweep->add_option("spec", a.spec, "sweep spec JSON")->required();
  sweep->add_option("--out", a.out, "CSV path (default stdout)");
  sweep->add_option("--jobs", a.jobs, "concurrent points")->check(CLI::PositiveNumber);
  sweep->add_option("--normalize-to", a.normalize_to, "point id for ratio columns")->check(CLI::NonNegativeNumber);
  sweep->add_flag("--timing", a.timing, "append wall-clock column (non-deterministic)");

  auto *validate = app.add_subcommand("validate", "compare operator histograms of two graph directories");
  validate->add_option("dirs", a.dirs, "<a> <b>")->required()->expected(2);

  std::vector<char *> argv;
  std::vector<std::string> storage = args;
  for (auto &s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (CLI::ParseError const &e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(a, out, err);
    if (*ingest) return cmd_ingest(a, out, err);
    if (*pass) return cmd_pass(a, out, err);
    if (*expand) return cmd_expand(a, out, err);
    if (*sim) return cmd_simulate(a, out, err);
    if (*sweep) return cmd_sweep(a, out, err);
    if (*validate) return cmd_validate(a, out, err);
  } catch (InvalidArgument const &e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (Error const &e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (std::exception const &e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitUsage;
}

int run_cli(int argc, char **argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

} // namespace wgsim
