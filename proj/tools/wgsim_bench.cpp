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

// Times the OpenMP sweep evaluator against the serial one on the same points
// and checks that both produce the same CSV.

#include <chrono>
#include <iostream>

#include <omp.h>

#include <CLI11.hpp>

#include "wgsim/sweep.hpp"
#include "wgsim/trace_io.hpp"

namespace {

char const *const kDefaultSpec = R"({
  "workloads": [
    {"preset": "tiny", "parallel": "fsdp:8", "fsdp_mode": "delayed"},
    {"preset": "tiny", "parallel": "dp:8"}
  ],
  "passes": ["none", "reorder-ag:1", "bucket-ar:26214400"],
  "topologies": [
    {"variant": "switch", "ranks": 8, "bandwidths": ["400GB", "100GB", "40GB", "4GB"], "latency": "1us"}
  ],
  "comm": ["analytical:ring", "expanded:ring"]
})";

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"compare parallel and serial sweep evaluation", "wgsim_bench"};
  std::string spec_path;
  int jobs = omp_get_max_threads();
  int rounds = 3;
  app.add_option("--spec", spec_path, "sweep spec (defaults to a built-in one)");
  app.add_option("--jobs", jobs, "threads for the parallel evaluator")->check(CLI::PositiveNumber);
  app.add_option("--rounds", rounds, "timed rounds per evaluator")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  wgsim::SweepSpec spec = spec_path.empty()
                              ? wgsim::parse_sweep_spec(kDefaultSpec)
                              : wgsim::parse_sweep_spec(wgsim::read_text_file(spec_path));
  auto points = wgsim::enumerate_points(spec);
  auto prepared = wgsim::prepare_workloads(spec);

  using clock = std::chrono::steady_clock;
  auto best = [&](auto &&fn) {
    double best_s = 1e300;
    std::string csv;
    for (int i = 0; i < rounds; ++i) {
      auto t0 = clock::now();
      auto results = fn();
      best_s = std::min(best_s, std::chrono::duration<double>(clock::now() - t0).count());
      csv = wgsim::sweep_csv(spec, points, results);
    }
    return std::make_pair(best_s, csv);
  };
  auto [serial_s, serial_csv] = best([&] { return wgsim::evaluate_points_serial(spec, points, prepared); });
  auto [par_s, par_csv] = best([&] { return wgsim::evaluate_points(spec, points, prepared, jobs); });

  std::cout << "points    " << points.size() << "\n"
            << "serial    " << serial_s << " s\n"
            << "parallel  " << par_s << " s (" << jobs << " thread(s))\n"
            << "speedup   " << serial_s / par_s << "\n"
            << "identical " << (serial_csv == par_csv ? "yes" : "NO") << "\n";
  return serial_csv == par_csv ? 0 : 1;
}
