// Copyright 2026 The svkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "svkit/common.h"

#include <cmath>
#include <limits>

namespace svkit {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kInsufficientContext: return "insufficient-context";
    case ErrorCode::kTooShortUtterance: return "too-short-utterance";
    case ErrorCode::kDegenerateInit: return "degenerate-init";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kState: return "state";
    case ErrorCode::kDegenerateIvector: return "degenerate-ivector";
    case ErrorCode::kCoverage: return "coverage";
    case ErrorCode::kOneClass: return "one-class";
    case ErrorCode::kHashMismatch: return "hash-mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kTraining: return "training";
    case ErrorCode::kModel: return "model";
    case ErrorCode::kNumerical: return "numerical";
  }
  return "unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage:
    case ErrorCode::kConfiguration:
      return 1;
    case ErrorCode::kTraining:
    case ErrorCode::kModel:
    case ErrorCode::kNumerical:
      return 3;
    default:
      return 2;
  }
}

double log_sum_exp(const Eigen::Ref<const Vector> &v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double max = v.maxCoeff();
  if (!std::isfinite(max)) return max;
  return max + std::log((v.array() - max).exp().sum());
}

}  // namespace svkit
