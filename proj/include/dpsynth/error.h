// Copyright 2026 The dpsynth Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPSYNTH_ERROR_H_
#define DPSYNTH_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpsynth {

enum class ErrorCode {
  kInvalidArgument,
  kConfig,
  kIo,
  kFormat,
  kTruncated,
  kDimMismatch,
  kAlignment,
  kInfeasible,
  kUnboundedEpsilon,
  kCalibration,
  kRefinement,
  kMissingArtifact,
  kStaleInput,
  kIncompleteRun,
  kService,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported with this exception type; `code()`
// distinguishes the failure kinds callers are expected to branch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dpsynth

#endif  // DPSYNTH_ERROR_H_
