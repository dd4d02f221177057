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

#ifndef SVKIT_TOTAL_VARIABILITY_H_
#define SVKIT_TOTAL_VARIABILITY_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "svkit/common.h"
#include "svkit/gmm.h"
#include "svkit/stats.h"

namespace svkit {

// Total-variability model. Supervector index is c * D + d.
struct TvModel {
  Matrix t_matrix;   // CD x R
  Vector sigma;      // CD, diagonal residual covariance
  Matrix ubm_means;  // C x D, used for centering

  Eigen::Index num_classes() const { return ubm_means.rows(); }
  Eigen::Index dim() const { return ubm_means.cols(); }
  Eigen::Index rank() const { return t_matrix.cols(); }
  void validate() const;
};

struct IVector {
  std::string utterance_id;
  double duration_active = 0.0;  // seconds
  Vector w;
};

// Holds T' Sigma^-1 and the per-class R x R blocks T_c' Sigma_c^-1 T_c so
// repeated extraction is cheap.
class IvectorExtractor {
 public:
  explicit IvectorExtractor(const TvModel &model);

  // Posterior mean and precision of the latent factor for one utterance.
  struct Posterior {
    Vector mean;
    Matrix precision;  // I + T' Sigma^-1 N T
  };
  Posterior posterior(const SuffStats &centered) const;
  Vector extract(const SuffStats &centered) const;

  const TvModel &model() const { return model_; }

 private:
  void check(const SuffStats &stats) const;

  TvModel model_;
  Matrix t_sigma_inv_;              // CD x R, Sigma^-1 T
  std::vector<Matrix> class_gram_;  // C blocks of R x R
};

// Solves (I + T' Sigma^-1 N T) w = T' Sigma^-1 F with a Cholesky factorization.
IVector extract_ivector(const TvModel &model, const SuffStats &centered_stats,
                        double frame_shift = 0.01);

// Second-order statistics centered around the model means, diagonal only.
Matrix centered_second_order(const SuffStats &centered, const Matrix &means);

struct TvTrainOptions {
  int rank = 20;
  int iters = 20;
  std::uint64_t seed = 7;
  bool update_sigma = true;
  double floor_factor = 1e-4;
};

struct TvTrainResult {
  TvModel model;
  // Marginal log-likelihood of the training statistics under the model that
  // entered each iteration; nondecreasing for exact EM.
  std::vector<double> objective;
};

// The UBM supplies centering means and the initial Sigma.
TvTrainResult train_tv(std::span<const SuffStats> centered_stats, const GmmModel &ubm,
                       const TvTrainOptions &opts);

// Total marginal log-likelihood of centered statistics under the model.
double tv_objective(const TvModel &model, std::span<const SuffStats> centered_stats);

// "SVKT", version, C, D, R, T (CD x R, row-major), sigma, means.
void write_tv(const std::filesystem::path &path, const TvModel &model);
TvModel read_tv(const std::filesystem::path &path);

// "SVKI", version, R, count; per record id, duration, R values.
void write_ivectors(const std::filesystem::path &path, std::span<const IVector> ivectors);
std::vector<IVector> read_ivectors(const std::filesystem::path &path);

}  // namespace svkit

#endif  // SVKIT_TOTAL_VARIABILITY_H_
