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

#include "dpsynth/error.h"

namespace dpsynth {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kDimMismatch: return "dim_mismatch";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kUnboundedEpsilon: return "unbounded_epsilon";
    case ErrorCode::kCalibration: return "calibration";
    case ErrorCode::kRefinement: return "refinement";
    case ErrorCode::kMissingArtifact: return "missing_artifact";
    case ErrorCode::kStaleInput: return "stale_input";
    case ErrorCode::kIncompleteRun: return "incomplete_run";
    case ErrorCode::kService: return "service";
  }
  return "unknown";
}

}  // namespace dpsynth
