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

#ifndef SVKIT_PLDA_H_
#define SVKIT_PLDA_H_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "svkit/common.h"
#include "svkit/total_variability.h"

namespace svkit {

// Two-covariance Gaussian PLDA: speaker variable y ~ N(mu, AC), observation
// w ~ N(y, WC).
struct PldaModel {
  Vector mu;  // R
  Matrix ac;  // R x R, across-class (speaker) covariance, PSD
  Matrix wc;  // R x R, within-class (session) covariance, PD

  Eigen::Index dim() const { return mu.size(); }
  void validate() const;
};

enum class TrialLabel { kTarget, kNontarget, kUnknown };

std::string_view trial_label_name(TrialLabel label);
TrialLabel parse_trial_label(std::string_view text);

struct TrialScore {
  std::string enrol_id;
  std::string test_id;
  double score = 0.0;  // log-likelihood ratio, nats
  TrialLabel label = TrialLabel::kUnknown;
};

Vector ivector_mean(std::span<const IVector> ivectors);

// (w - mean) / ||w - mean||; throws kDegenerateIvector for a zero vector.
Vector length_normalize(const Vector &w, const Vector &mean);

// Batch form. Degenerate vectors are dropped with a warning; their ids are
// appended to `dropped` when given.
std::vector<IVector> center_and_length_normalize(std::span<const IVector> ivectors,
                                                 const Vector &mean,
                                                 std::vector<std::string> *dropped = nullptr);

enum class PldaEstimator { kEm, kScatter };

struct PldaTrainOptions {
  int iters = 20;
  PldaEstimator estimator = PldaEstimator::kEm;
  double wc_floor = 1e-8;  // eigenvalue floor, relative to trace(WC)/R
};

struct PldaTrainResult {
  PldaModel model;
  // Marginal log-likelihood under the model entering each EM iteration.
  std::vector<double> objective;
};

// speaker_labels[i] names the speaker of vectors[i]. The mean stays at the
// global mean of the training vectors; EM updates AC and WC.
PldaTrainResult train_gplda(std::span<const Vector> vectors,
                            std::span<const std::string> speaker_labels,
                            const PldaTrainOptions &opts = {});

double gplda_objective(const PldaModel &model, std::span<const Vector> vectors,
                       std::span<const std::string> speaker_labels);

// Precomputes the quadratic forms of the two-covariance likelihood ratio.
class PldaScorer {
 public:
  // Throws kModel if AC + WC or its Schur complement is not positive definite.
  explicit PldaScorer(const PldaModel &model);

  double score(const Vector &enrol, const Vector &test) const;
  const PldaModel &model() const { return model_; }

 private:
  PldaModel model_;
  Matrix q_;  // same-vector quadratic term
  Matrix p_;  // cross term
  double constant_ = 0.0;
};

// ln N([e;t]; [mu;mu], [[AC+WC, AC], [AC, AC+WC]]) - ln N(e; mu, AC+WC)
// - ln N(t; mu, AC+WC).
TrialScore score_trial(const PldaModel &model, const IVector &enrol, const IVector &test);

// "SVKL", version, R, mu, AC, WC.
void write_plda(const std::filesystem::path &path, const PldaModel &model);
PldaModel read_plda(const std::filesystem::path &path);

}  // namespace svkit

#endif  // SVKIT_PLDA_H_
