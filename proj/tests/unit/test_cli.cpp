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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "wgsim/cli.hpp"
#include "wgsim/trace_io.hpp"

using namespace wgsim;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run wgsim_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "wgsim");
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string scratch(std::string const &name) {
  fs::path p = fs::path(WGSIM_SCRATCH_DIR) / "cli" / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p.string();
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("synth, pass twice, simulate") {
  auto g = scratch("g"), g2 = scratch("g2"), g3 = scratch("g3");
  auto r = wgsim_cli({"synth", "--preset", "tiny", "--parallel", "fsdp:4", "--out", g});
  REQUIRE(r.code == kExitOk);
  auto graphs = read_graph_dir(g);
  REQUIRE(graphs.size() == 4);
  for (auto const &wg : graphs) CHECK(validate_graph(wg).empty());

  r = wgsim_cli({"pass", "--reorder-ag", "1", "--in", g, "--out", g2});
  CHECK(r.code == kExitOk);
  CHECK(r.err.empty());
  r = wgsim_cli({"pass", "--reorder-ag", "1", "--in", g2, "--out", g3});
  CHECK(r.code == kExitOk);
  CHECK(r.err.find("warning: NotApplicable") != std::string::npos);

  auto report = scratch("report.json"), trace = scratch("trace.json");
  r = wgsim_cli({"simulate", "--in", g2, "--topo", "switch:4:100GB:2us", "--out", report, "--trace", trace,
                 "--critical-path"});
  REQUIRE(r.code == kExitOk);
  std::ifstream in(report);
  auto j = nlohmann::json::parse(in);
  CHECK(j.at("makespan_ns").get<std::int64_t>() > 0);
  CHECK(r.out.find("critical_path_ns") != std::string::npos);
  CHECK(fs::exists(trace));
}

TEST_CASE("validate compares histograms") {
  auto a = scratch("base"), b = scratch("extra"), c = scratch("missing");
  REQUIRE(wgsim_cli({"ingest", "--in", WGSIM_FIXTURE_DIR "/addmm_allreduce_export", "--out", a}).code == kExitOk);
  REQUIRE(wgsim_cli({"ingest", "--in", WGSIM_FIXTURE_DIR "/addmm_allreduce_extra_elementwise", "--out", b}).code ==
          kExitOk);

  auto r = wgsim_cli({"validate", a, a});
  CHECK(r.code == kExitOk);
  CHECK(r.err.empty());
  CHECK(r.out.find("inf") == std::string::npos);

  r = wgsim_cli({"validate", b, a});
  CHECK(r.code == kExitOk);
  CHECK(r.err.find("warning: Elem") != std::string::npos);

  fs::create_directories(c);
  fs::copy_file(fs::path(a) / "rank_0.json", fs::path(c) / "rank_0.json");
  r = wgsim_cli({"validate", a, c});
  CHECK(r.code == kExitInvalid);
  CHECK(r.err.find("RankMismatch") != std::string::npos);
}

TEST_CASE("synth-vs-synth validation is exact") {
  auto a = scratch("sa"), b = scratch("sb"), c = scratch("sc");
  REQUIRE(wgsim_cli({"synth", "--preset", "tiny", "--parallel", "dp:2", "--out", a}).code == kExitOk);
  REQUIRE(wgsim_cli({"synth", "--preset", "tiny", "--parallel", "dp:2", "--out", b}).code == kExitOk);
  CHECK(wgsim_cli({"validate", a, b}).code == kExitOk);
  // A different strategy changes the collective mix.
  REQUIRE(wgsim_cli({"synth", "--preset", "tiny", "--parallel", "fsdp:2", "--out", c}).code == kExitOk);
  auto r = wgsim_cli({"validate", a, c});
  CHECK(r.code == kExitInvalid);
  CHECK(r.err.find("error: AR") != std::string::npos);
}

TEST_CASE("usage and input errors") {
  CHECK(wgsim_cli({}).code == kExitUsage);
  CHECK(wgsim_cli({"frobnicate"}).code == kExitUsage);
  CHECK(wgsim_cli({"synth", "--preset", "tiny"}).code == kExitUsage);
  CHECK(wgsim_cli({"synth", "--preset", "huge", "--parallel", "dp:2", "--out", scratch("x")}).code == kExitUsage);
  CHECK(wgsim_cli({"synth", "--preset", "tiny", "--parallel", "pp:2", "--out", scratch("x")}).code == kExitUsage);
  CHECK(wgsim_cli({"pass", "--in", "a", "--out", "b"}).code == kExitUsage);
  CHECK(wgsim_cli({"simulate", "--in", WGSIM_FIXTURE_DIR "/minimal_graph", "--topo", "ring:4"}).code ==
        kExitUsage);
  CHECK(wgsim_cli({"--help"}).code == kExitOk);
  // Unreadable inputs are validation failures, not usage errors.
  auto r = wgsim_cli({"simulate", "--in", scratch("nothing"), "--topo", "switch:1:1GB:0"});
  CHECK(r.code == kExitInvalid);
  r = wgsim_cli({"simulate", "--in", WGSIM_FIXTURE_DIR "/minimal_graph", "--topo", "switch:1:1GB:0", "--out",
                 scratch("minimal_report.json")});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("makespan_ns 1234") != std::string::npos);
}

} // TEST_SUITE
