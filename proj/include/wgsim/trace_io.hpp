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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wgsim/graph.hpp"
#include "wgsim/op_table.hpp"
#include "wgsim/profile.hpp"

namespace wgsim {

inline constexpr char const kRawFormatVersion[] = "ir-1";
inline constexpr char const kGraphFormatVersion[] = "wg-1";

enum class RawNodeKind { PLACEHOLDER, CALL, WAIT, OUTPUT };

struct RawTensor {
  Shape shape;
  Dtype dtype = Dtype::F32;
};

struct RawCollAttrs {
  std::string kind;
  std::vector<int> group;
};

struct RawIrNode {
  std::string name;
  RawNodeKind kind = RawNodeKind::CALL;
  std::string target;
  std::vector<std::string> arg_names;
  std::optional<RawTensor> tensor_out;
  std::optional<RawCollAttrs> coll_attrs;
};

struct RawIrGraph {
  std::string format_version = kRawFormatVersion;
  int rank = 0;
  int world_size = 1;
  std::vector<RawIrNode> nodes;
};

// Throws FormatError (bad version, malformed or empty node list) or
// ReferenceError (an argument names a node not listed earlier).
RawIrGraph parse_raw_export(std::string const &text);
RawIrGraph read_raw_export(std::filesystem::path const &path);
std::string dump_raw_export(RawIrGraph const &raw);

// IR -> workload graph. Placeholders become graph-input tensors, compute calls
// become HOST+COMP pairs, collectives HOST+COLL pairs, and waits/views vanish
// with consumers depending on what they alias.
WorkloadGraph convert(RawIrGraph const &raw, ProfileTable const &profile,
                      OpTable const &table = default_op_table());

// Canonical JSON: sorted keys, nodes in id order, integers only.
std::string dump_graph(WorkloadGraph const &g);
WorkloadGraph parse_graph(std::string const &text);
void write_graph(WorkloadGraph const &g, std::filesystem::path const &path);
WorkloadGraph read_graph(std::filesystem::path const &path);

// One file per rank: <dir>/rank_<r>.json.
std::filesystem::path rank_file(std::filesystem::path const &dir, int rank);
void write_graph_dir(std::vector<WorkloadGraph> const &graphs,
                     std::filesystem::path const &dir);
// Reads every rank_<r>.json in dir, ordered by rank.
std::vector<WorkloadGraph> read_graph_dir(std::filesystem::path const &dir);

// Raw exports use the same rank_<r>.json naming.
std::vector<RawIrGraph> read_raw_dir(std::filesystem::path const &dir);
std::vector<WorkloadGraph> ingest_dir(std::filesystem::path const &dir, ProfileTable const &profile,
                                      OpTable const &table = default_op_table());

std::string read_text_file(std::filesystem::path const &path);
void write_text_file(std::filesystem::path const &path, std::string const &text);

} // namespace wgsim
