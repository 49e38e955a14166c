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

#include <string>
#include <vector>

#include "wgsim/graph.hpp"
#include "wgsim/profile.hpp"

namespace wgsim {

struct ModelConfig {
  int layers = 1;
  int hidden_dim = 4;
  int num_heads = 1;
  int ffn_mult = 4;
  int seq_len = 2;
  int micro_batch = 1;
  Dtype dtype = Dtype::F32;
  // Overrides ffn_mult * hidden_dim when positive (non-integer FFN ratios).
  int ffn_dim = 0;

  int ffn_inner() const { return ffn_dim > 0 ? ffn_dim : ffn_mult * hidden_dim; }
};

enum class Strategy { DP, FSDP, TP };
enum class FsdpMode { DELAYED, NONE };

std::string_view to_string(Strategy s);
std::string_view to_string(FsdpMode m);
FsdpMode parse_fsdp_mode(std::string_view tag);

struct ParallelConfig {
  Strategy strategy = Strategy::DP;
  int degree = 1;
  FsdpMode fsdp_mode = FsdpMode::DELAYED;
};

// "tiny", "llama-8b-like", "llama-70b-like". Throws InvalidArgument.
ModelConfig model_preset(std::string const &name);
std::vector<std::string> preset_names();

// Parses "<dp|fsdp|tp>:<degree>".
ParallelConfig parse_parallel(std::string const &text);

// Bytes of one layer's four weight matrices (QKV, out-proj, FFN up, FFN down)
// at full (unsharded) size.
std::int64_t layer_weight_bytes(ModelConfig const &m);

// One graph per rank for a single training step (forward + backward +
// gradient collectives). Throws UnsupportedCombo for configurations the
// emission rules cannot express.
std::vector<WorkloadGraph> synth_transformer(ModelConfig const &m, ParallelConfig const &p,
                                             int world_size, ProfileTable const &profile);

} // namespace wgsim
