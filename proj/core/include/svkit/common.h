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

#ifndef SVKIT_COMMON_H_
#define SVKIT_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace svkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Error categories. Each maps onto one of the CLI exit codes
// (1 usage, 2 data, 3 numerical).
enum class ErrorCode {
  kUsage,
  kConfiguration,
  kEmptyInput,
  kInsufficientContext,
  kTooShortUtterance,
  kDegenerateInit,
  kDimensionMismatch,
  kFormat,
  kAlignment,
  kState,
  kDegenerateIvector,
  kCoverage,
  kOneClass,
  kHashMismatch,
  kIo,
  kTraining,
  kModel,
  kNumerical,
};

std::string_view error_code_name(ErrorCode code);
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }
  int exit_code() const { return exit_code_for(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &what) {
  throw Error(code, what);
}

// Numerically stable log(sum(exp(v))).
double log_sum_exp(const Eigen::Ref<const Vector> &v);

}  // namespace svkit

#endif  // SVKIT_COMMON_H_
