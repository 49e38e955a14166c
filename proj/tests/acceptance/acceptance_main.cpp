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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "hand_scenarios.hpp"
#include "wgsim/cli.hpp"
#include "wgsim/collectives.hpp"
#include "wgsim/error.hpp"
#include "wgsim/passes.hpp"
#include "wgsim/simulator.hpp"
#include "wgsim/sweep.hpp"
#include "wgsim/synth.hpp"
#include "wgsim/trace_io.hpp"

using namespace wgsim;
using namespace wgsim::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records a failed check; the first few reasons are kept for the report.
  void require(bool ok, std::string const &why) {
    if (ok) return;
    if (pass) {
      detail = why;
    } else if (detail.size() < 300) {
      detail += "; " + why;
    }
    pass = false;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(char const *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<int> iota_group(int n) {
  std::vector<int> g(n);
  for (int i = 0; i < n; ++i) g[i] = i;
  return g;
}

// Criterion 1: every valid kind x algorithm x group size in 2..9.
Outcome collective_suite() {
  Outcome o;
  auto t0 = Clock::now();
  int plans = 0;
  for (int N = 2; N <= 9; ++N) {
    auto sw = Topology::make_switch(N, 1e9, 0);
    for (auto kind : {CollectiveKind::ALL_REDUCE, CollectiveKind::ALL_GATHER, CollectiveKind::REDUCE_SCATTER}) {
      std::int64_t S = 1000 * N + 7;
      std::vector<std::pair<P2pPlan, std::string>> batch;
      batch.emplace_back(expand_collective(kind, iota_group(N), S, CollectiveAlgo::RING, sw), "ring");
      if (kind == CollectiveKind::ALL_REDUCE) {
        batch.emplace_back(expand_collective(kind, iota_group(N), S, CollectiveAlgo::TREE, sw), "tree");
      }
      for (int R = 1; R <= N; ++R) {
        if (N % R) continue;
        auto mesh = Topology::make_mesh(R, N / R, 1e9, 0);
        batch.emplace_back(expand_collective(kind, iota_group(N), S, CollectiveAlgo::MESH_HIER, mesh),
                           "mesh_hier " + std::to_string(R) + "x" + std::to_string(N / R));
      }
      for (auto const &[plan, name] : batch) {
        std::string where = std::string(to_string(kind)) + " " + name + " N=" + std::to_string(N);
        bool ok = false;
        try {
          ok = plan_well_formed(plan) && dataflow_check(plan);
        } catch (Error const &e) {
          o.require(false, where + ": " + e.what());
        }
        o.require(ok, where + ": dataflow check failed");
        ++plans;
      }
      auto const &ring = batch.front().first;
      double closed = (kind == CollectiveKind::ALL_REDUCE ? 2.0 : 1.0) * S * (N - 1) / N;
      for (auto b : plan_bytes_per_rank(ring)) {
        o.require(std::abs(static_cast<double>(b) - closed) <= N, "ring bytes off closed form at N=" + std::to_string(N));
      }
      if (kind == CollectiveKind::ALL_REDUCE) {
        for (int s : plan_sends_per_rank(ring)) {
          o.require(s == 2 * (N - 1), "ring all-reduce sends " + std::to_string(s) + " at N=" + std::to_string(N));
        }
      }
    }
  }
  double secs = seconds_since(t0);
  o.require(secs < 5.0, "runtime " + fmt("%.2f s", secs));
  if (o.pass) o.detail = std::to_string(plans) + " plans verified in " + fmt("%.2f s", secs);
  return o;
}

// Criterion 2: hand schedules plus the critical-path lower bound.
Outcome simulator_oracle() {
  Outcome o;
  auto scenarios = hand_scenarios();
  o.require(scenarios.size() >= 10, "fewer than 10 hand scenarios");
  for (auto const &sc : scenarios) {
    auto rep = simulate(sc.graphs, sc.topo, sc.opts);
    o.require(rep.makespan_ns == sc.makespan_ns, sc.name + ": makespan " + std::to_string(rep.makespan_ns) +
                                                    " expected " + std::to_string(sc.makespan_ns));
  }
  Rng rng(2024);
  int seeds = 1000;
  for (int s = 0; s < seeds; ++s) {
    auto p = random_dag_params(rng);
    auto graphs = random_spmd_graphs(rng, p);
    auto topo = Topology::make_switch(p.world_size, 1e9 * static_cast<double>(uniform(rng, 1, 10)), uniform(rng, 0, 500));
    SimOptions opts;
    if (s % 2) opts.comm_mode = CommMode::EXPANDED;
    auto rep = simulate(graphs, topo, opts);
    auto cp = critical_path(graphs, topo, opts);
    o.require(rep.makespan_ns >= cp.length_ns, "seed " + std::to_string(s) + " beats its critical path");
  }
  if (o.pass) {
    o.detail = std::to_string(scenarios.size()) + " hand schedules exact; " + std::to_string(seeds) +
               " random graphs respect the critical path";
  }
  return o;
}

std::string scratch(std::string const &name) {
  fs::path p = fs::path(WGSIM_SCRATCH_DIR) / "acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p.string();
}

int quiet_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "wgsim");
  std::ostringstream out, err;
  return run_cli(args, out, err);
}

// Criterion 3: the addmm + all_reduce export and synth-vs-synth validation.
Outcome conversion_fidelity() {
  Outcome o;
  auto graphs = ingest_dir(fs::path(WGSIM_FIXTURE_DIR) / "addmm_allreduce_export", ProfileTable{});
  o.require(graphs.size() == 2, "expected two ranks");
  for (auto const &g : graphs) {
    std::vector<std::pair<NodeKind, std::string>> got;
    for (auto const &n : g.nodes) got.emplace_back(n.kind, n.op_name);
    std::vector<std::pair<NodeKind, std::string>> want = {{NodeKind::HOST, "addmm"},
                                                          {NodeKind::COMP, "addmm"},
                                                          {NodeKind::HOST, "all_reduce"},
                                                          {NodeKind::COLL, "all_reduce"}};
    o.require(got == want, "rank " + std::to_string(g.rank) + ": unexpected node set");
    if (got != want) continue;
    // The consumer of the collective result depends on both its host call and the kernel.
    std::vector<NodeId> deps(g.output_deps.begin(), g.output_deps.end());
    std::sort(deps.begin(), deps.end());
    o.require(deps == std::vector<NodeId>{2, 3}, "output is not gated on host call and collective");
    o.require(validate_graph(g).empty(), "converted graph does not validate");
  }

  int configs = 0;
  for (std::string par : {"dp:2", "fsdp:4", "tp:2"}) {
    auto a = scratch("synth_a_" + par.substr(0, par.find(':')));
    auto b = scratch("synth_b_" + par.substr(0, par.find(':')));
    o.require(quiet_cli({"synth", "--preset", "tiny", "--parallel", par, "--out", a}) == kExitOk, "synth " + par);
    o.require(quiet_cli({"synth", "--preset", "tiny", "--parallel", par, "--out", b}) == kExitOk, "synth " + par);
    o.require(quiet_cli({"validate", a, b}) == kExitOk, "validate " + par + " did not exit 0");
    auto ga = read_graph_dir(a), gb = read_graph_dir(b);
    for (std::size_t r = 0; r < ga.size() && r < gb.size(); ++r) {
      auto ratios = compare_histograms(op_histogram(ga[r]), op_histogram(gb[r]));
      for (OpClass c : {OpClass::MM, OpClass::Attn, OpClass::AllReduce, OpClass::AllGather,
                        OpClass::ReduceScatter}) {
        o.require(ratios.at(c) == 1.0, par + ": " + std::string(short_name(c)) + " ratio not 1.0");
      }
    }
    ++configs;
  }
  if (o.pass) {
    o.detail = "addmm/all_reduce export converts to 4 nodes with dual output gating; " + std::to_string(configs) +
               " synth configs validate at ratio 1.0";
  }
  return o;
}

struct ReorderPoint {
  SimReport delayed, reordered;
  double benefit() const {
    return static_cast<double>(delayed.makespan_ns - reordered.makespan_ns) / static_cast<double>(delayed.makespan_ns);
  }
};

std::vector<WorkloadGraph> tiny_fsdp8() {
  ParallelConfig pc{Strategy::FSDP, 8, FsdpMode::DELAYED};
  return synth_transformer(model_preset("tiny"), pc, 8, ProfileTable{});
}

std::vector<WorkloadGraph> reorder_all(std::vector<WorkloadGraph> const &gs, int k) {
  std::vector<WorkloadGraph> out;
  for (auto const &g : gs) out.push_back(reorder_allgather(g, k).graph);
  return out;
}

ReorderPoint reorder_at(std::vector<WorkloadGraph> const &delayed, std::vector<WorkloadGraph> const &reordered,
                        double bw, SimOptions opts = {}) {
  auto topo = Topology::make_switch(8, bw, 1000);
  return {simulate(delayed, topo, opts), simulate(reordered, topo, opts)};
}

constexpr double kBaseBandwidth = 400e9;

// Criterion 4: reordering trades memory for overlap on the tiny model.
Outcome reorder_tradeoff() {
  Outcome o;
  auto t0 = Clock::now();
  auto delayed = tiny_fsdp8();
  auto reordered = reorder_all(delayed, 1);
  for (auto const &g : reordered) o.require(validate_graph(g).empty(), "reordered graph invalid");
  auto pt = reorder_at(delayed, reordered, kBaseBandwidth);
  double exposed = static_cast<double>(pt.delayed.exposed_comm_ns()) / static_cast<double>(pt.delayed.makespan_ns);
  double secs = seconds_since(t0);
  std::int64_t mem_delta = pt.reordered.peak_mem_bytes() - pt.delayed.peak_mem_bytes();
  o.require(exposed >= 0.30, "exposed comm only " + fmt("%.1f%%", 100 * exposed));
  o.require(pt.benefit() >= 0.05, "makespan cut only " + fmt("%.2f%%", 100 * pt.benefit()));
  o.require(mem_delta > 0, "peak memory did not grow");
  o.require(secs < 30.0, "runtime " + fmt("%.2f s", secs));
  if (o.pass) {
    o.detail = "exposed " + fmt("%.1f%%", 100 * exposed) + " of " + std::to_string(pt.delayed.makespan_ns) +
               " ns; reorder cuts makespan " + fmt("%.1f%%", 100 * pt.benefit()) + ", peak memory +" +
               std::to_string(mem_delta) + " B (" +
               fmt("%.2f%%", 100.0 * static_cast<double>(mem_delta) / static_cast<double>(pt.delayed.peak_mem_bytes())) +
               "); " + fmt("%.2f s", secs);
  }
  return o;
}

// Criterion 5: the benefit shrinks with bandwidth.
Outcome bandwidth_sensitivity() {
  Outcome o;
  auto delayed = tiny_fsdp8();
  auto reordered = reorder_all(delayed, 1);
  std::vector<double> benefits;
  for (double bw : {kBaseBandwidth, kBaseBandwidth / 10, kBaseBandwidth / 100}) {
    benefits.push_back(reorder_at(delayed, reordered, bw).benefit());
  }
  for (std::size_t i = 1; i < benefits.size(); ++i) {
    o.require(benefits[i] <= benefits[i - 1] + 0.005, "benefit rises as bandwidth drops");
  }
  o.require(benefits.back() <= 0.01, "benefit at B/100 is " + fmt("%.2f%%", 100 * benefits.back()));
  std::string d = "benefit at B, B/10, B/100 (B = 400 GB/s):";
  for (double b : benefits) d += " " + fmt("%.2f%%", 100 * b);
  if (o.pass) o.detail = d;
  else o.detail += " [" + d + "]";
  return o;
}

// Criterion 6: hierarchical rings on a 4x4 mesh.
Outcome mesh_collective_study() {
  Outcome o;
  auto graphs = synth_transformer(model_preset("tiny"), ParallelConfig{Strategy::DP, 16}, 16, ProfileTable{});
  auto mesh = Topology::make_mesh(4, 4, 100e9, 100);
  SimOptions ring, hier;
  ring.comm_mode = hier.comm_mode = CommMode::EXPANDED;
  ring.algo = CollectiveAlgo::RING;
  hier.algo = CollectiveAlgo::MESH_HIER;
  auto rr = simulate(graphs, mesh, ring);
  auto rh = simulate(graphs, mesh, hier);
  double comm_speedup = static_cast<double>(rr.comm_busy_ns()) / static_cast<double>(rh.comm_busy_ns());
  double e2e_speedup = static_cast<double>(rr.makespan_ns) / static_cast<double>(rh.makespan_ns);
  o.require(rh.link_busy_ns() < rr.link_busy_ns(), "mesh_hier link busy time not below ring");
  o.require(e2e_speedup <= comm_speedup, "end-to-end speedup exceeds comm speedup");
  std::string d = "link busy ring " + std::to_string(rr.link_busy_ns()) + " ns vs mesh_hier " +
                  std::to_string(rh.link_busy_ns()) + " ns; comm speedup " + fmt("%.2fx", comm_speedup) +
                  ", end-to-end " + fmt("%.2fx", e2e_speedup);
  if (o.pass) o.detail = d;
  else o.detail += " [" + d + "]";
  return o;
}

std::int64_t allreduce_bytes(WorkloadGraph const &g) {
  std::int64_t s = 0;
  for (auto const &n : g.nodes) {
    if (n.kind == NodeKind::COLL && n.coll->kind == CollectiveKind::ALL_REDUCE) s += n.coll->comm_bytes;
  }
  return s;
}

// Criterion 7: both passes are safe on random FSDP/DP graphs.
Outcome pass_safety() {
  Outcome o;
  Rng rng(7);
  int cases = 0, applied = 0;
  for (int i = 0; i < 600; ++i) {
    std::vector<WorkloadGraph> inputs;
    if (i % 2) {
      auto c = random_synth_case(rng);
      inputs.push_back(synth_transformer(c.model, c.parallel, c.world_size, ProfileTable{})[0]);
    } else {
      inputs.push_back(random_collective_graph(rng));
    }
    for (auto const &g : inputs) {
      auto cap = coin(rng) ? kUnlimitedBucket : uniform(rng, 1, 1 << 16);
      for (auto const &res : {reorder_allgather(g, static_cast<int>(uniform(rng, 1, 4))), bucket_allreduce(g, cap)}) {
        auto v = verify_pass_safety(g, res.graph);
        o.require(v.empty(), "case " + std::to_string(i) + ": " + (v.empty() ? "" : v.front().detail));
        o.require(validate_graph(res.graph).empty(), "case " + std::to_string(i) + ": pass output invalid");
        o.require(allreduce_bytes(res.graph) == allreduce_bytes(g), "case " + std::to_string(i) + ": AR bytes changed");
        applied += res.applied();
      }
      ++cases;
    }
  }
  if (o.pass) {
    o.detail = std::to_string(cases) + " graphs, " + std::to_string(applied) +
               " rewrites; all safe, all-reduce bytes conserved";
  }
  return o;
}

// Criterion 8: reruns are byte-identical.
Outcome determinism() {
  Outcome o;
  auto spec_text = read_text_file(fs::path(WGSIM_FIXTURE_DIR) / "sweep_bandwidth.json");
  auto spec = parse_sweep_spec(spec_text, WGSIM_FIXTURE_DIR);
  auto csv1 = run_sweep(spec, 1, CsvOptions{0, false});
  auto csv2 = run_sweep(spec, 1, CsvOptions{0, false});
  auto csv3 = run_sweep(spec, 4, CsvOptions{0, false});
  o.require(csv1 == csv2, "sweep CSV differs between runs");
  o.require(csv1 == csv3, "parallel sweep differs from serial");

  int traces = 0;
  auto same_trace = [&](std::vector<WorkloadGraph> const &gs, Topology const &topo, SimOptions opts,
                        std::string const &what) {
    opts.emit_event_trace = true;
    auto a = simulate(gs, topo, opts);
    auto b = simulate(gs, topo, opts);
    o.require(dump_trace(a.trace) == dump_trace(b.trace), what + ": event traces differ");
    o.require(dump_report(a, topo, opts) == dump_report(b, topo, opts), what + ": reports differ");
    ++traces;
  };
  for (auto const &sc : hand_scenarios()) same_trace(sc.graphs, sc.topo, sc.opts, sc.name);
  auto delayed = tiny_fsdp8();
  auto reordered = reorder_all(delayed, 1);
  for (double bw : {kBaseBandwidth, kBaseBandwidth / 10, kBaseBandwidth / 100}) {
    same_trace(delayed, Topology::make_switch(8, bw, 1000), {}, "delayed");
    same_trace(reordered, Topology::make_switch(8, bw, 1000), {}, "reordered");
  }
  auto dp16 = synth_transformer(model_preset("tiny"), ParallelConfig{Strategy::DP, 16}, 16, ProfileTable{});
  for (auto algo : {CollectiveAlgo::RING, CollectiveAlgo::MESH_HIER}) {
    SimOptions opts;
    opts.comm_mode = CommMode::EXPANDED;
    opts.algo = algo;
    same_trace(dp16, Topology::make_mesh(4, 4, 100e9, 100), opts, "mesh");
  }
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    auto p = random_dag_params(rng);
    auto gs = random_spmd_graphs(rng, p);
    SimOptions opts;
    opts.comm_mode = i % 2 ? CommMode::EXPANDED : CommMode::ANALYTICAL;
    same_trace(gs, Topology::make_switch(p.world_size, 1e9, 100), opts, "random graph");
  }
  if (o.pass) {
    o.detail = "sweep CSV identical across reruns and job counts; " + std::to_string(traces) +
               " traces identical across reruns";
  }
  return o;
}

} // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> criteria = {
      {1, "collective oracle suite", collective_suite},
      {2, "simulator oracle", simulator_oracle},
      {3, "conversion fidelity", conversion_fidelity},
      {4, "reordering tradeoff", reorder_tradeoff},
      {5, "bandwidth sensitivity", bandwidth_sensitivity},
      {6, "mesh collective study", mesh_collective_study},
      {7, "pass safety", pass_safety},
      {8, "determinism", determinism},
  };
  int failed = 0;
  for (auto const &c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (std::exception const &e) {
      o.pass = false;
      o.detail = std::string("threw ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("SKIP criterion 9 (capture shim round-trip): secondary component, not built here\n");
  return failed == 0 ? 0 : 1;
}
