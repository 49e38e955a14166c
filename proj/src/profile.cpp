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

#include "wgsim/profile.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wgsim/error.hpp"
#include "wgsim/op_table.hpp"

namespace wgsim {

std::string shape_signature(std::vector<Shape> const &shapes) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (i) {
      os << 'x';
    }
    os << '[';
    for (std::size_t j = 0; j < shapes[i].size(); ++j) {
      os << (j ? "," : "") << shapes[i][j];
    }
    os << ']';
  }
  return os.str();
}

std::optional<std::int64_t> ProfileTable::lookup(std::string const &op,
                                                 std::vector<Shape> const &shapes,
                                                 Dtype dtype) const {
  auto it = entries.find(ProfileKey{op, shape_signature(shapes), dtype});
  if (it == entries.end()) {
    return std::nullopt;
  }
  return it->second;
}

ProfileTable parse_profile(std::string const &text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (nlohmann::json::exception const &e) {
    throw FormatError(std::string("profile: ") + e.what());
  }
  ProfileTable table;
  try {
    if (doc.contains("device")) {
      auto const &d = doc.at("device");
      table.device.peak_flops = d.at("peak_flops").get<double>();
      table.device.efficiency = d.at("efficiency").get<double>();
    }
    if (!(table.device.peak_flops > 0)) {
      throw FormatError("profile: peak_flops must be positive");
    }
    if (!(table.device.efficiency > 0 && table.device.efficiency <= 1)) {
      throw FormatError("profile: efficiency must lie in (0, 1]");
    }
    for (auto const &e : doc.value("entries", nlohmann::json::array())) {
      ProfileKey key{e.at("op").get<std::string>(), e.at("shape").get<std::string>(),
                     parse_dtype(e.at("dtype").get<std::string>())};
      auto ns = e.at("ns").get<std::int64_t>();
      if (ns <= 0) {
        throw FormatError("profile: duration must be positive for " + key.op);
      }
      auto [it, inserted] = table.entries.insert_or_assign(key, ns);
      if (!inserted) {
        table.warnings.push_back("duplicate profile entry (" + key.op + ", " + key.shapes +
                                 ", " + std::string(to_string(key.dtype)) +
                                 "); last entry wins");
      }
    }
  } catch (nlohmann::json::exception const &e) {
    throw FormatError(std::string("profile: ") + e.what());
  }
  return table;
}

ProfileTable load_profile(std::string const &path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open profile " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_profile(ss.str());
}

namespace {

long double elems(Shape const &s) {
  long double n = 1;
  for (auto d : s) {
    n *= static_cast<long double>(d);
  }
  return n;
}

void need(bool ok, std::string const &op, char const *what) {
  if (!ok) {
    throw UnknownOperator(op + ": operand shapes do not fit the " + what + " model");
  }
}

long double matmul_flops(std::string const &op, Shape const &a, Shape const &b) {
  need(!a.empty() && !b.empty(), op, "matmul");
  long double k = static_cast<long double>(a.back());
  long double n = static_cast<long double>(b.back());
  long double rows = elems(a) / k;
  return 2 * rows * k * n;
}

long double attention_flops(std::string const &op, std::vector<Shape> const &shapes) {
  need(!shapes.empty(), op, "attention");
  Shape const &q = shapes.front();
  if (q.size() == 4) {
    // [batch, heads, seq, head_dim]
    long double s = static_cast<long double>(q[2]);
    return 2.0L * 2.0L * q[0] * q[1] * s * s * q[3];
  }
  // Packed [batch, seq, 3 * hidden]; heads x head_dim = hidden.
  need(q.size() == 3 && q[2] % 3 == 0, op, "attention");
  long double s = static_cast<long double>(q[1]);
  return 2.0L * 2.0L * q[0] * s * s * (q[2] / 3);
}

} // namespace

double op_flops(std::string const &op_name, std::vector<Shape> const &shapes) {
  OpInfo const *info = default_op_table().by_op(op_name);
  if (!info || info->role != OpRole::Compute || info->flops == FlopModel::None) {
    throw UnknownOperator("no FLOP model for '" + op_name + "'");
  }
  switch (info->flops) {
  case FlopModel::Matmul:
    need(shapes.size() >= 2, op_name, "matmul");
    return static_cast<double>(matmul_flops(op_name, shapes[0], shapes[1]));
  case FlopModel::Addmm:
    need(shapes.size() >= 3, op_name, "addmm");
    return static_cast<double>(matmul_flops(op_name, shapes[1], shapes[2]));
  case FlopModel::MatmulGradInput: {
    need(shapes.size() >= 2 && shapes[1].size() == 2, op_name, "matmul_grad_input");
    Shape const &dy = shapes[0];
    long double n = static_cast<long double>(dy.back());
    long double k = static_cast<long double>(shapes[1][0]);
    return static_cast<double>(2 * (elems(dy) / n) * k * n);
  }
  case FlopModel::MatmulGradWeight: {
    need(shapes.size() >= 2, op_name, "matmul_grad_weight");
    long double k = static_cast<long double>(shapes[0].back());
    long double n = static_cast<long double>(shapes[1].back());
    return static_cast<double>(2 * (elems(shapes[0]) / k) * k * n);
  }
  case FlopModel::Attention:
    return static_cast<double>(attention_flops(op_name, shapes));
  case FlopModel::AttentionBackward: {
    // Inputs: grad_out, then the forward operands. Twice the forward work.
    need(shapes.size() >= 2, op_name, "attention_backward");
    std::vector<Shape> fwd(shapes.begin() + 1, shapes.end());
    return static_cast<double>(2 * attention_flops(op_name, fwd));
  }
  case FlopModel::Elementwise:
    need(!shapes.empty(), op_name, "elementwise");
    return static_cast<double>(elems(shapes.front()));
  case FlopModel::None:
    break;
  }
  throw UnknownOperator("no FLOP model for '" + op_name + "'");
}

std::int64_t round_half_up(long double ns) {
  return static_cast<std::int64_t>(std::floor(ns + 0.5L));
}

std::int64_t analytical_duration(std::string const &op_name, std::vector<Shape> const &shapes,
                                 Dtype /*dtype*/, DeviceSpec const &device) {
  long double flops = op_flops(op_name, shapes);
  long double rate = static_cast<long double>(device.peak_flops) * device.efficiency;
  return round_half_up(flops * 1e9L / rate);
}

std::int64_t resolve_duration(ProfileTable const &profile, std::string const &op_name,
                              std::vector<Shape> const &shapes, Dtype dtype) {
  if (auto ns = profile.lookup(op_name, shapes, dtype)) {
    return *ns;
  }
  return analytical_duration(op_name, shapes, dtype, profile.device);
}

} // namespace wgsim
