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

#ifndef SVKIT_GMM_H_
#define SVKIT_GMM_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "svkit/common.h"
#include "svkit/frontend.h"

namespace svkit {

// Diagonal-covariance Gaussian mixture; also used as the UBM.
struct GmmModel {
  Vector weights;    // C
  Matrix means;      // C x D
  Matrix variances;  // C x D

  Eigen::Index num_components() const { return means.rows(); }
  Eigen::Index dim() const { return means.cols(); }

  // Throws kModel if the weights are not a simplex or any variance is
  // non-positive.
  void validate() const;
};

// Per-frame class responsibilities, T x C. Rows sum to one.
struct PosteriorMatrix {
  Matrix gamma;

  Eigen::Index num_frames() const { return gamma.rows(); }
  Eigen::Index num_classes() const { return gamma.cols(); }
};

// 1e-4 x the per-dimension variance of the pool.
Vector variance_floor(const Matrix &pool, double factor = 1e-4);

// T x C matrix of log(w_c N(x_t; mu_c, diag(var_c))).
Matrix component_log_likelihoods(const GmmModel &model, const Matrix &frames);

// k-means++ seeding followed by Lloyd refinement; per-cluster variances and
// occupancy fractions become the initial GMM.
GmmModel init_kmeans(const Matrix &pool, int num_components, std::uint64_t seed,
                     int lloyd_iters = 10);

// E-step accumulators. Partial accumulators over disjoint frame sets merge
// associatively before the M-step.
class GmmAccumulator {
 public:
  GmmAccumulator(Eigen::Index num_components, Eigen::Index dim);

  void accumulate(const GmmModel &model, const Matrix &frames);
  void merge(const GmmAccumulator &other);

  const Vector &occupancy() const { return occupancy_; }
  const Matrix &first_order() const { return first_; }
  const Matrix &second_order() const { return second_; }
  double log_likelihood() const { return log_likelihood_; }
  std::int64_t num_frames() const { return num_frames_; }

 private:
  Vector occupancy_;
  Matrix first_;
  Matrix second_;
  double log_likelihood_ = 0.0;
  std::int64_t num_frames_ = 0;
};

// M-step. Components with no responsibility mass are reseeded by splitting
// the highest-variance component.
GmmModel gmm_update(const GmmModel &model, const GmmAccumulator &acc,
                    const Vector &var_floor);

struct EmStepResult {
  GmmModel model;
  double log_likelihood = 0.0;  // total, under the input model
};

EmStepResult em_step(const GmmModel &model, const Matrix &pool);

struct UbmTrainOptions {
  int num_components = 64;
  int iters = 20;
  std::uint64_t seed = 7;
  double min_relative_gain = 1e-6;
};

struct UbmTrainResult {
  GmmModel model;
  std::vector<double> log_likelihoods;
};

UbmTrainResult train_ubm(const Matrix &pool, const UbmTrainOptions &opts);

PosteriorMatrix frame_posteriors(const GmmModel &model, const FeatureMatrix &features);

// Versioned binary: "SVKG", version, C, D, weights, means, variances.
void write_gmm(const std::filesystem::path &path, const GmmModel &model);
GmmModel read_gmm(const std::filesystem::path &path);

}  // namespace svkit

#endif  // SVKIT_GMM_H_
