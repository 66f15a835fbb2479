/*
 * Copyright 2026 The medxgan Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace medxgan {

enum class ErrorCode {
  kConfig,
  kIo,
  kShape,
  kPrecondition,
  kNumeric,
  kDivergence,
  kUndefined,
  kMissingArtifact,
  kHashMismatch,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library is reported as an Error. The context map
// carries machine-readable details (paths, offending values) for the CLI.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::map<std::string, std::string> context = {})
      : std::runtime_error(message), code_(code), context_(std::move(context)) {}

  ErrorCode code() const { return code_; }
  const std::map<std::string, std::string>& context() const { return context_; }

 private:
  ErrorCode code_;
  std::map<std::string, std::string> context_;
};

}  // namespace medxgan
