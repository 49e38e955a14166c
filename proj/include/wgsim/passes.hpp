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

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "wgsim/graph.hpp"

namespace wgsim {

enum class PassKind { REORDER_AG, BUCKET_AR };

struct PassConfig {
  PassKind which = PassKind::REORDER_AG;
  int prefetch_distance = 1;
  std::int64_t bucket_cap_bytes = 25LL << 20;
};

inline constexpr std::int64_t kUnlimitedBucket = std::numeric_limits<std::int64_t>::max();

// A pass either rewrites the graph or declines with a diagnostic and hands
// the input back untouched.
struct PassResult {
  WorkloadGraph graph;
  std::optional<std::string> not_applicable;

  bool applied() const { return !not_applicable.has_value(); }
};

// Drops "fsdp-sync" edges, chains gathers with "stream-order" edges and gates
// gather j + k on the first compute of gather j's layer ("prefetch-gate").
PassResult reorder_allgather(WorkloadGraph const &g, int prefetch_distance = 1);

// Greedily merges ALL_REDUCE nodes in emission order while the running byte
// total stays within cap_bytes.
PassResult bucket_allreduce(WorkloadGraph const &g,
                            std::int64_t cap_bytes = PassConfig{}.bucket_cap_bytes);

PassResult apply_pass(WorkloadGraph const &g, PassConfig const &cfg);

enum class SafetyRule { DataDepLost, NodeMissing, CycleIntroduced, ComputeSetChanged };
std::string_view to_string(SafetyRule r);

struct SafetyViolation {
  SafetyRule rule;
  std::optional<NodeId> from;
  std::optional<NodeId> to;
  std::string detail;
};

// Empty iff every data edge of `before` survives in `after` (possibly through
// merged nodes), `after` is acyclic, and the COMP node set is unchanged.
std::vector<SafetyViolation> verify_pass_safety(WorkloadGraph const &before,
                                                WorkloadGraph const &after);

} // namespace wgsim
