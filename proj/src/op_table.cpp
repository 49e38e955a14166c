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

#include "wgsim/op_table.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "op_table_data.hpp"
#include "wgsim/error.hpp"

namespace wgsim {

namespace {

OpClass parse_class(std::string const &s) {
  for (OpClass c : kAllOpClasses) {
    if (to_string(c) == s) {
      return c;
    }
  }
  throw FormatError("op table: unknown class '" + s + "'");
}

FlopModel parse_flops(std::string const &s) {
  static std::map<std::string, FlopModel> const kModels = {
      {"none", FlopModel::None},
      {"matmul", FlopModel::Matmul},
      {"addmm", FlopModel::Addmm},
      {"matmul_grad_input", FlopModel::MatmulGradInput},
      {"matmul_grad_weight", FlopModel::MatmulGradWeight},
      {"attention", FlopModel::Attention},
      {"attention_backward", FlopModel::AttentionBackward},
      {"elementwise", FlopModel::Elementwise},
  };
  auto it = kModels.find(s);
  if (it == kModels.end()) {
    throw FormatError("op table: unknown flop model '" + s + "'");
  }
  return it->second;
}

} // namespace

OpTable OpTable::from_json(std::string const &text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (nlohmann::json::exception const &e) {
    throw FormatError(std::string("op table: ") + e.what());
  }
  if (doc.value("format_version", "") != "optable-1") {
    throw FormatError("op table: unrecognized format_version");
  }
  OpTable table;
  try {
    for (auto const &e : doc.at("operators")) {
      OpInfo info;
      info.target = e.at("target").get<std::string>();
      info.op = e.at("op").get<std::string>();
      auto role = e.at("role").get<std::string>();
      if (role == "compute") {
        info.role = OpRole::Compute;
        info.flops = parse_flops(e.value("flops", "none"));
      } else if (role == "collective") {
        info.role = OpRole::Collective;
        info.coll = parse_collective_kind(e.at("coll").get<std::string>());
      } else if (role == "elide") {
        info.role = OpRole::Elide;
      } else {
        throw FormatError("op table: unknown role '" + role + "' for " + info.target);
      }
      info.op_class = parse_class(e.value("class", "Other"));
      if (!table.by_target_.emplace(info.target, info).second) {
        throw FormatError("op table: duplicate target " + info.target);
      }
      table.by_op_.emplace(info.op, info);
    }
  } catch (nlohmann::json::exception const &e) {
    throw FormatError(std::string("op table: ") + e.what());
  }
  return table;
}

OpInfo const *OpTable::by_target(std::string_view target) const {
  auto it = by_target_.find(target);
  return it == by_target_.end() ? nullptr : &it->second;
}

OpInfo const *OpTable::by_op(std::string_view op) const {
  auto it = by_op_.find(op);
  return it == by_op_.end() ? nullptr : &it->second;
}

OpTable const &default_op_table() {
  static OpTable const table = OpTable::from_json(detail::kDefaultOpTableJson);
  return table;
}

OpTable load_op_table(std::string const &path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open op table " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return OpTable::from_json(ss.str());
}

} // namespace wgsim
