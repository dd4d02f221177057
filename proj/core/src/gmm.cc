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

#include "svkit/gmm.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <spdlog/spdlog.h>

#include "svkit/binary_io.h"

namespace svkit {
namespace {

constexpr std::uint8_t kGmmVersion = 1;
constexpr double kMinOccupancy = 1e-10;

Matrix squared_distances(const Matrix &x, const Matrix &centers) {
  // ||x||^2 - 2 x.c + ||c||^2
  Matrix d = -2.0 * x * centers.transpose();
  d.colwise() += x.rowwise().squaredNorm();
  d.rowwise() += centers.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

}  // namespace

void GmmModel::validate() const {
  const Eigen::Index c = num_components();
  if (c == 0 || weights.size() != c || variances.rows() != c || variances.cols() != dim())
    fail(ErrorCode::kModel, "GMM parameter shapes disagree");
  if ((weights.array() < 0).any() || std::abs(weights.sum() - 1.0) > 1e-10)
    fail(ErrorCode::kModel, "GMM weights are not a probability vector");
  if (!(variances.array() > 0).all() || !means.allFinite())
    fail(ErrorCode::kModel, "GMM variances must be positive and means finite");
}

Vector variance_floor(const Matrix &pool, double factor) {
  if (pool.rows() == 0) fail(ErrorCode::kEmptyInput, "empty frame pool");
  const Vector mean = pool.colwise().mean();
  Vector var = (pool.rowwise() - mean.transpose()).colwise().squaredNorm() /
               static_cast<double>(pool.rows());
  return (factor * var).cwiseMax(std::numeric_limits<double>::min());
}

Matrix component_log_likelihoods(const GmmModel &model, const Matrix &frames) {
  if (frames.cols() != model.dim())
    fail(ErrorCode::kDimensionMismatch, "feature dimension " + std::to_string(frames.cols()) +
                                            " does not match model dimension " +
                                            std::to_string(model.dim()));
  const Matrix inv_var = model.variances.cwiseInverse();
  const Matrix mean_over_var = model.means.cwiseProduct(inv_var);
  // Per-component constant: log w - 0.5 (D log 2pi + sum log var + sum m^2/var).
  Vector constant(model.num_components());
  const double d_log_2pi = model.dim() * std::log(2.0 * std::numbers::pi);
  for (Eigen::Index c = 0; c < model.num_components(); ++c) {
    constant(c) = std::log(model.weights(c)) -
                  0.5 * (d_log_2pi + model.variances.row(c).array().log().sum() +
                         model.means.row(c).dot(mean_over_var.row(c)));
  }
  Matrix ll = frames * mean_over_var.transpose();
  ll.noalias() -= 0.5 * frames.cwiseAbs2() * inv_var.transpose();
  ll.rowwise() += constant.transpose();
  return ll;
}

GmmModel init_kmeans(const Matrix &pool, int num_components, std::uint64_t seed,
                     int lloyd_iters) {
  const Eigen::Index n = pool.rows(), dim = pool.cols();
  if (num_components < 1) fail(ErrorCode::kConfiguration, "need at least one component");
  if (n < num_components)
    fail(ErrorCode::kDegenerateInit, "pool has fewer frames than components");
  std::mt19937_64 rng(seed);

  Matrix centers(num_components, dim);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = pool.row(pick(rng));
  Vector best = (pool.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int k = 1; k < num_components; ++k) {
    const double total = best.sum();
    if (!(total > 0.0))
      fail(ErrorCode::kDegenerateInit,
           "pool has fewer distinct frames than the " + std::to_string(num_components) +
               " requested components");
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng), acc = 0.0;
    Eigen::Index chosen = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += best(i);
      if (acc > target && best(i) > 0.0) {
        chosen = i;
        break;
      }
    }
    centers.row(k) = pool.row(chosen);
    best = best.cwiseMin((pool.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }

  std::vector<Eigen::Index> assign(n);
  auto assign_all = [&] {
    const Matrix d = squared_distances(pool, centers);
    for (Eigen::Index i = 0; i < n; ++i) d.row(i).minCoeff(&assign[i]);
  };
  for (int it = 0; it < lloyd_iters; ++it) {
    assign_all();
    Matrix sums = Matrix::Zero(num_components, dim);
    Vector counts = Vector::Zero(num_components);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += pool.row(i);
      counts(assign[i]) += 1.0;
    }
    for (int k = 0; k < num_components; ++k)
      if (counts(k) > 0) centers.row(k) = sums.row(k) / counts(k);
  }
  assign_all();

  const Vector floor = variance_floor(pool);
  const Vector global_var = floor / 1e-4;
  GmmModel model;
  model.weights = Vector::Zero(num_components);
  model.means = centers;
  model.variances = Matrix::Zero(num_components, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    model.weights(assign[i]) += 1.0;
    model.variances.row(assign[i]) += (pool.row(i) - centers.row(assign[i])).cwiseAbs2();
  }
  for (int k = 0; k < num_components; ++k) {
    if (model.weights(k) > 0)
      model.variances.row(k) /= model.weights(k);
    else
      model.variances.row(k) = global_var.transpose();
    model.variances.row(k) = model.variances.row(k).cwiseMax(floor.transpose());
  }
  model.weights /= static_cast<double>(n);
  return model;
}

GmmAccumulator::GmmAccumulator(Eigen::Index num_components, Eigen::Index dim)
    : occupancy_(Vector::Zero(num_components)),
      first_(Matrix::Zero(num_components, dim)),
      second_(Matrix::Zero(num_components, dim)) {}

void GmmAccumulator::accumulate(const GmmModel &model, const Matrix &frames) {
  Matrix post = component_log_likelihoods(model, frames);
  for (Eigen::Index t = 0; t < post.rows(); ++t) {
    const double lse = log_sum_exp(post.row(t).transpose());
    log_likelihood_ += lse;
    post.row(t) = (post.row(t).array() - lse).exp();
  }
  occupancy_ += post.colwise().sum().transpose();
  first_.noalias() += post.transpose() * frames;
  second_.noalias() += post.transpose() * frames.cwiseAbs2();
  num_frames_ += frames.rows();
}

void GmmAccumulator::merge(const GmmAccumulator &other) {
  occupancy_ += other.occupancy_;
  first_ += other.first_;
  second_ += other.second_;
  log_likelihood_ += other.log_likelihood_;
  num_frames_ += other.num_frames_;
}

GmmModel gmm_update(const GmmModel &model, const GmmAccumulator &acc,
                    const Vector &var_floor) {
  const Eigen::Index c_max = model.num_components();
  GmmModel out = model;
  const double total = acc.occupancy().sum();
  if (!(total > 0)) fail(ErrorCode::kEmptyInput, "no frames accumulated");
  std::vector<Eigen::Index> empty;
  for (Eigen::Index c = 0; c < c_max; ++c) {
    const double occ = acc.occupancy()(c);
    if (occ < kMinOccupancy) {
      empty.push_back(c);
      continue;
    }
    out.weights(c) = occ / total;
    out.means.row(c) = acc.first_order().row(c) / occ;
    out.variances.row(c) = (acc.second_order().row(c) / occ - out.means.row(c).cwiseAbs2())
                               .cwiseMax(var_floor.transpose());
  }
  for (Eigen::Index c : empty) {
    Eigen::Index donor = 0;
    double widest = -1.0;
    for (Eigen::Index k = 0; k < c_max; ++k) {
      if (std::find(empty.begin(), empty.end(), k) != empty.end()) continue;
      const double spread = out.variances.row(k).sum();
      if (spread > widest) {
        widest = spread;
        donor = k;
      }
    }
    spdlog::warn("GMM component {} has no responsibility mass; reseeding from component {}",
                 c, donor);
    const Eigen::RowVectorXd offset = 0.2 * out.variances.row(donor).cwiseSqrt();
    out.means.row(c) = out.means.row(donor) + offset;
    out.means.row(donor) -= offset;
    out.variances.row(c) = out.variances.row(donor);
    out.weights(donor) *= 0.5;
    out.weights(c) = out.weights(donor);
  }
  out.weights /= out.weights.sum();
  return out;
}

EmStepResult em_step(const GmmModel &model, const Matrix &pool) {
  if (pool.rows() == 0) fail(ErrorCode::kEmptyInput, "empty frame pool");
  GmmAccumulator acc(model.num_components(), model.dim());
  acc.accumulate(model, pool);
  return {gmm_update(model, acc, variance_floor(pool)), acc.log_likelihood()};
}

UbmTrainResult train_ubm(const Matrix &pool, const UbmTrainOptions &opts) {
  UbmTrainResult result;
  result.model = init_kmeans(pool, opts.num_components, opts.seed);
  const Vector floor = variance_floor(pool);
  for (int it = 0; it < opts.iters; ++it) {
    GmmAccumulator acc(result.model.num_components(), result.model.dim());
    acc.accumulate(result.model, pool);
    result.model = gmm_update(result.model, acc, floor);
    result.log_likelihoods.push_back(acc.log_likelihood());
    spdlog::debug("UBM iter {}: avg loglik {:.6f}", it,
                  acc.log_likelihood() / static_cast<double>(pool.rows()));
    const auto n = result.log_likelihoods.size();
    if (n >= 2) {
      const double prev = result.log_likelihoods[n - 2], cur = result.log_likelihoods[n - 1];
      if (std::abs(cur - prev) < opts.min_relative_gain * std::abs(prev)) break;
    }
  }
  return result;
}

PosteriorMatrix frame_posteriors(const GmmModel &model, const FeatureMatrix &features) {
  PosteriorMatrix post;
  post.gamma = component_log_likelihoods(model, features.frames);
  for (Eigen::Index t = 0; t < post.gamma.rows(); ++t) {
    const double lse = log_sum_exp(post.gamma.row(t).transpose());
    post.gamma.row(t) = (post.gamma.row(t).array() - lse).exp();
  }
  return post;
}

void write_gmm(const std::filesystem::path &path, const GmmModel &model) {
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    w.magic("SVKG");
    w.u8(kGmmVersion);
    w.u32(static_cast<std::uint32_t>(model.num_components()));
    w.u32(static_cast<std::uint32_t>(model.dim()));
    w.vector(model.weights);
    w.matrix(model.means);
    w.matrix(model.variances);
  });
}

GmmModel read_gmm(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  r.expect_magic("SVKG");
  if (r.u8() != kGmmVersion) fail(ErrorCode::kFormat, path.string() + ": unsupported version");
  const std::uint32_t c = r.u32(), d = r.u32();
  GmmModel model;
  model.weights = r.vector(c);
  model.means = r.matrix(c, d);
  model.variances = r.matrix(c, d);
  r.expect_eof();
  model.validate();
  return model;
}

}  // namespace svkit
