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
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "wgsim/graph.hpp"

namespace wgsim {

using Shape = std::vector<std::int64_t>;

struct DeviceSpec {
  double peak_flops = 1e15; // ops/s
  double efficiency = 0.5;  // (0, 1]
};

// Profile lookup key: (op_name, "[a,b]x[c,d]", dtype tag).
struct ProfileKey {
  std::string op;
  std::string shapes;
  Dtype dtype = Dtype::F32;

  auto operator<=>(ProfileKey const &) const = default;
};

// "[64,64]x[64,64]" for two 2-D operands.
std::string shape_signature(std::vector<Shape> const &shapes);

struct ProfileTable {
  std::map<ProfileKey, std::int64_t> entries; // duration_ns > 0
  DeviceSpec device;
  std::vector<std::string> warnings; // load diagnostics (duplicates etc.)

  std::optional<std::int64_t> lookup(std::string const &op, std::vector<Shape> const &shapes,
                                     Dtype dtype) const;
};

// Reads {device:{peak_flops, efficiency}, entries:[{op, shape, dtype, ns}]}.
// Duplicate signatures: the last entry wins and a warning is recorded.
ProfileTable load_profile(std::string const &path);
ProfileTable parse_profile(std::string const &text);

// FLOP count of a known compute operator under its table FLOP model.
double op_flops(std::string const &op_name, std::vector<Shape> const &shapes);

// flops / (peak * efficiency) in ns, rounded half-up. Throws UnknownOperator.
std::int64_t analytical_duration(std::string const &op_name, std::vector<Shape> const &shapes,
                                 Dtype dtype, DeviceSpec const &device);

// Profile entry when present, analytical model otherwise.
std::int64_t resolve_duration(ProfileTable const &profile, std::string const &op_name,
                              std::vector<Shape> const &shapes, Dtype dtype);

// Round-half-up of a non-negative real ns quantity.
std::int64_t round_half_up(long double ns);

} // namespace wgsim
