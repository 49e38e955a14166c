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

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "wgsim/graph.hpp"

namespace wgsim {

// How an IR operator is lowered during conversion.
enum class OpRole {
  Compute,    // HOST + COMP pair
  Collective, // HOST + COLL pair
  Elide,      // no node; output aliases the first argument (waits, views)
};

// Analytical FLOP model attached to a compute operator.
enum class FlopModel {
  None,
  Matmul,           // A[..., k] x B[k, n]
  Addmm,            // bias, A[..., k], B[k, n]
  MatmulGradInput,  // dY[..., n], W[k, n] -> dX[..., k]
  MatmulGradWeight, // X[..., k], dY[..., n] -> dW[k, n]
  Attention,        // qkv[b, s, 3h] or q, k, v[b, heads, s, d]
  AttentionBackward,
  Elementwise,
};

struct OpInfo {
  std::string target; // IR operator name, e.g. "aten.addmm"
  std::string op;     // canonical op_name on graph nodes, e.g. "addmm"
  OpRole role = OpRole::Compute;
  OpClass op_class = OpClass::Other;
  FlopModel flops = FlopModel::None;
  std::optional<CollectiveKind> coll;
};

// Operator mapping table. Shipped as data (data/op_table.json) and compiled
// in as the default; alternative tables load from JSON text.
class OpTable {
 public:
  static OpTable from_json(std::string const &text);

  OpInfo const *by_target(std::string_view target) const;
  OpInfo const *by_op(std::string_view op) const;
  std::size_t size() const { return by_target_.size(); }

 private:
  std::map<std::string, OpInfo, std::less<>> by_target_;
  std::map<std::string, OpInfo, std::less<>> by_op_;
};

OpTable const &default_op_table();
OpTable load_op_table(std::string const &path);

} // namespace wgsim
