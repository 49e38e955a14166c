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

#include <stdexcept>
#include <string>
#include <utility>

namespace wgsim {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  Error(std::string const &what, std::string detail)
      : std::runtime_error(what), detail_(std::move(detail)) {}

  // The message without the "Name: " prefix.
  std::string const &detail() const { return detail_; }

 private:
  std::string detail_;
};

#define WGSIM_DEFINE_ERROR(Name)                                               \
  class Name : public Error {                                                  \
   public:                                                                     \
    explicit Name(std::string const &what) : Error(#Name ": " + what, what) {}   \
  }

WGSIM_DEFINE_ERROR(FormatError);
WGSIM_DEFINE_ERROR(ReferenceError);
WGSIM_DEFINE_ERROR(UnknownOperator);
WGSIM_DEFINE_ERROR(MissingShape);
WGSIM_DEFINE_ERROR(CyclicGraph);
WGSIM_DEFINE_ERROR(UnsupportedCombo);
WGSIM_DEFINE_ERROR(UnsupportedAlgoTopology);
WGSIM_DEFINE_ERROR(DeadlockDetected);
WGSIM_DEFINE_ERROR(InconsistentGroups);
WGSIM_DEFINE_ERROR(RankMismatch);
WGSIM_DEFINE_ERROR(InvalidArgument);

#undef WGSIM_DEFINE_ERROR

} // namespace wgsim
