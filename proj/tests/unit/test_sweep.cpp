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

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "wgsim/error.hpp"
#include "wgsim/sweep.hpp"

using namespace wgsim;

namespace {

std::string slurp(std::string const &path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(std::string const &text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> cells(std::string const &line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string c; std::getline(in, c, ',');) out.push_back(c);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

int column(std::string const &header, std::string const &name) {
  auto h = cells(header);
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] == name) return static_cast<int>(i);
  }
  return -1;
}

// Small DP/FSDP sweep; four ranks keeps it quick.
std::string const kSmallSpec = R"({
  "workloads": [{"preset": "tiny", "parallel": "fsdp:4"}, {"preset": "tiny", "parallel": "dp:4"}],
  "passes": ["none", "reorder-ag:1", "bucket-ar:100000000"],
  "topologies": [{"variant": "switch", "ranks": 4, "bandwidths": ["100GB", "10GB"], "latency": "2us"}],
  "comm": ["analytical:ring"]
})";

} // namespace

TEST_SUITE("sweep") {

TEST_CASE("spec parsing") {
  auto spec = parse_sweep_spec(kSmallSpec);
  CHECK(spec.workloads.size() == 2);
  CHECK(spec.passes.size() == 3);
  REQUIRE(spec.topologies.size() == 1);
  CHECK(spec.topologies[0].bandwidths == std::vector<double>{100e9, 10e9});
  CHECK(spec.topologies[0].latency_ns == 2000);
  CHECK(spec.repetitions == 1);

  CHECK_THROWS_AS(parse_sweep_spec("[1, 2"), FormatError);
  CHECK_THROWS_AS(parse_sweep_spec(R"({"workloads": [], "topologies": []})"), FormatError);
  CHECK_THROWS_AS(parse_sweep_spec(R"({"workloads": [{"preset": "tiny", "parallel": "dp:2"}],
      "topologies": [{"ranks": 2, "bandwidths": [1e9]}], "comms": ["analytical"]})"),
                  FormatError);
  CHECK_THROWS_AS(parse_sweep_spec(R"({"workloads": [{"preset": "tiny"}],
      "topologies": [{"ranks": 2, "bandwidths": [1e9]}]})"),
                  FormatError);
  CHECK_THROWS_AS(parse_pass_spec("reorder-ag:x"), InvalidArgument);
  CHECK_FALSE(parse_pass_spec("none").pass.has_value());
  CHECK(parse_pass_spec("bucket-ar:1024").pass->bucket_cap_bytes == 1024);
}

TEST_CASE("the bandwidth fixture enumerates six points") {
  auto spec = parse_sweep_spec(slurp(WGSIM_FIXTURE_DIR "/sweep_bandwidth.json"), WGSIM_FIXTURE_DIR);
  auto points = enumerate_points(spec);
  CHECK(points.size() == 2 * 3);
  for (std::size_t i = 0; i < points.size(); ++i) CHECK(points[i].index == static_cast<int>(i));
  // Lexicographic: pass varies slower than bandwidth.
  CHECK(points[0].pass == 0);
  CHECK(points[2].bandwidth == 2);
  CHECK(points[3].pass == 1);
  CHECK(points[3].bandwidth == 0);
}

TEST_CASE("csv rows, statuses and ratios") {
  auto spec = parse_sweep_spec(kSmallSpec);
  auto csv = run_sweep(spec, 1, CsvOptions{0, false});
  auto ls = lines(csv);
  REQUIRE(ls.size() == 1 + 2 * 3 * 2);
  auto const &hdr = ls[0];
  int status = column(hdr, "status");
  int ratio = column(hdr, "makespan_ratio");
  int makespan = column(hdr, "makespan_ns");
  REQUIRE(status >= 0);
  REQUIRE(ratio >= 0);
  CHECK(column(hdr, "wall_clock_ns") < 0);
  CHECK(cells(ls[1])[ratio] == "1.000000");
  // fsdp + bucket-ar and dp + reorder-ag have nothing to rewrite.
  CHECK(cells(ls[5])[status] == "pass-not-applicable");
  CHECK(cells(ls[9])[status] == "pass-not-applicable");
  CHECK(cells(ls[1])[status] == "ok");
  // Not-applicable rows simulate the untouched graph.
  CHECK(cells(ls[5])[makespan] == cells(ls[1])[makespan]);
  for (std::size_t i = 1; i < ls.size(); ++i) {
    auto c = cells(ls[i]);
    CHECK(c.size() == cells(hdr).size());
    CHECK(c[ratio].size() == std::string("1.000000").size());
  }
  auto timed = run_sweep(spec, 1, CsvOptions{std::nullopt, true});
  CHECK(column(lines(timed)[0], "wall_clock_ns") >= 0);
  CHECK(column(lines(timed)[0], "makespan_ratio") < 0);
}

TEST_CASE("failing points become rows and the sweep continues") {
  auto spec = parse_sweep_spec(R"({
    "workloads": [{"preset": "tiny", "parallel": "dp:3"}, {"preset": "tiny", "parallel": "dp:2"},
                  {"graph_dir": "no/such/dir"}],
    "topologies": [{"ranks": 2, "bandwidths": ["10GB"]}]
  })");
  auto ls = lines(run_sweep(spec, 1));
  REQUIRE(ls.size() == 4);
  int status = column(ls[0], "status");
  CHECK(cells(ls[1])[status].rfind("error: ", 0) == 0);
  CHECK(cells(ls[2])[status] == "ok");
  CHECK(cells(ls[3])[status].rfind("error: ", 0) == 0);
  // Normalizing to a failed point is refused.
  auto points = enumerate_points(spec);
  auto prepared = prepare_workloads(spec);
  auto results = evaluate_points_serial(spec, points, prepared);
  CHECK_THROWS_AS(sweep_csv(spec, points, results, CsvOptions{0, false}), InvalidArgument);
  CHECK_THROWS_AS(sweep_csv(spec, points, results, CsvOptions{7, false}), InvalidArgument);
  CHECK_NOTHROW(sweep_csv(spec, points, results, CsvOptions{1, false}));
}

TEST_CASE("parallel and serial evaluation agree and reruns are byte-identical") {
  auto spec = parse_sweep_spec(kSmallSpec);
  auto points = enumerate_points(spec);
  auto prepared = prepare_workloads(spec);
  auto serial = evaluate_points_serial(spec, points, prepared);
  auto parallel = evaluate_points(spec, points, prepared, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].status == parallel[i].status);
    CHECK(serial[i].makespan_ns == parallel[i].makespan_ns);
    CHECK(serial[i].peak_mem_bytes == parallel[i].peak_mem_bytes);
    CHECK(serial[i].exposed_comm_ns == parallel[i].exposed_comm_ns);
    CHECK(serial[i].total_comm_bytes == parallel[i].total_comm_bytes);
  }
  CHECK(run_sweep(spec, 1) == run_sweep(spec, 4));
  CHECK(run_sweep(spec, 2) == run_sweep(spec, 2));
}

} // TEST_SUITE
