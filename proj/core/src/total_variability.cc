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

#include "svkit/total_variability.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <spdlog/spdlog.h>

#include "svkit/binary_io.h"

namespace svkit {
namespace {

constexpr std::uint8_t kTvVersion = 1;
constexpr std::uint8_t kIvectorVersion = 1;

Eigen::Map<const Vector> supervector(const Matrix &rows_by_class, Vector &storage) {
  // Row-major flatten of a C x D matrix into c * D + d order.
  storage.resize(rows_by_class.size());
  for (Eigen::Index c = 0; c < rows_by_class.rows(); ++c)
    storage.segment(c * rows_by_class.cols(), rows_by_class.cols()) = rows_by_class.row(c).transpose();
  return Eigen::Map<const Vector>(storage.data(), storage.size());
}

}  // namespace

void TvModel::validate() const {
  const Eigen::Index cd = num_classes() * dim();
  if (cd == 0 || t_matrix.rows() != cd || sigma.size() != cd)
    fail(ErrorCode::kModel, "total-variability model shapes disagree");
  if (rank() < 1 || rank() > cd) fail(ErrorCode::kModel, "i-vector rank out of range");
  if (!(sigma.array() > 0).all()) fail(ErrorCode::kModel, "residual covariance must be positive");
  if (!t_matrix.allFinite() || !ubm_means.allFinite())
    fail(ErrorCode::kModel, "non-finite total-variability parameters");
}

IvectorExtractor::IvectorExtractor(const TvModel &model) : model_(model) {
  model_.validate();
  t_sigma_inv_ = model_.sigma.cwiseInverse().asDiagonal() * model_.t_matrix;
  const Eigen::Index d = model_.dim();
  class_gram_.resize(model_.num_classes());
  for (Eigen::Index c = 0; c < model_.num_classes(); ++c) {
    class_gram_[c].noalias() =
        model_.t_matrix.middleRows(c * d, d).transpose() * t_sigma_inv_.middleRows(c * d, d);
  }
}

void IvectorExtractor::check(const SuffStats &stats) const {
  if (!stats.centered) fail(ErrorCode::kState, "i-vector extraction needs centered statistics");
  if (stats.num_classes() != model_.num_classes() || stats.dim() != model_.dim())
    fail(ErrorCode::kDimensionMismatch,
         "statistics are " + std::to_string(stats.num_classes()) + "x" +
             std::to_string(stats.dim()) + " but the model expects " +
             std::to_string(model_.num_classes()) + "x" + std::to_string(model_.dim()));
}

IvectorExtractor::Posterior IvectorExtractor::posterior(const SuffStats &centered) const {
  check(centered);
  const Eigen::Index r = model_.rank();
  Posterior post;
  post.precision = Matrix::Identity(r, r);
  for (Eigen::Index c = 0; c < model_.num_classes(); ++c)
    if (centered.n(c) != 0.0) post.precision.noalias() += centered.n(c) * class_gram_[c];
  Vector storage;
  const Vector linear = t_sigma_inv_.transpose() * supervector(centered.f, storage);
  post.mean = post.precision.llt().solve(linear);
  return post;
}

Vector IvectorExtractor::extract(const SuffStats &centered) const {
  return posterior(centered).mean;
}

IVector extract_ivector(const TvModel &model, const SuffStats &centered_stats,
                        double frame_shift) {
  IvectorExtractor extractor(model);
  IVector iv;
  iv.w = extractor.extract(centered_stats);
  iv.duration_active = centered_stats.n.sum() * frame_shift;
  return iv;
}

Matrix centered_second_order(const SuffStats &centered, const Matrix &means) {
  if (!centered.centered) fail(ErrorCode::kState, "expected centered statistics");
  // sum gamma (x - m)^2 = s - 2 m f_centered - n m^2
  return centered.s - 2.0 * means.cwiseProduct(centered.f) -
         means.cwiseAbs2().cwiseProduct(centered.n.replicate(1, centered.dim()));
}

double tv_objective(const TvModel &model, std::span<const SuffStats> centered_stats) {
  IvectorExtractor extractor(model);
  const Eigen::Index c_max = model.num_classes(), d = model.dim();
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  Vector log_sigma_sum(c_max);
  for (Eigen::Index c = 0; c < c_max; ++c)
    log_sigma_sum(c) = model.sigma.segment(c * d, d).array().log().sum();

  double total = 0.0;
  Vector storage;
  for (const SuffStats &stats : centered_stats) {
    const Matrix s2 = centered_second_order(stats, model.ubm_means);
    for (Eigen::Index c = 0; c < c_max; ++c) {
      total += -0.5 * stats.n(c) * (d * log_2pi + log_sigma_sum(c));
      total += -0.5 * (s2.row(c).transpose().array() / model.sigma.segment(c * d, d).array()).sum();
    }
    const auto post = extractor.posterior(stats);
    const Vector linear = post.precision * post.mean;
    Eigen::LLT<Matrix> llt(post.precision);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    total += 0.5 * linear.dot(post.mean) - 0.5 * log_det;
  }
  return total;
}

TvTrainResult train_tv(std::span<const SuffStats> centered_stats, const GmmModel &ubm,
                       const TvTrainOptions &opts) {
  const Eigen::Index c_max = ubm.num_components(), d = ubm.dim(), cd = c_max * d;
  const Eigen::Index r = opts.rank;
  if (r < 1 || r > cd)
    fail(ErrorCode::kConfiguration, "rank " + std::to_string(r) + " must lie in [1, " +
                                        std::to_string(cd) + "]");
  if (centered_stats.size() < 2) fail(ErrorCode::kConfiguration, "need at least two utterances");
  for (const SuffStats &s : centered_stats) {
    if (!s.centered) fail(ErrorCode::kState, "total-variability training needs centered statistics");
    if (s.num_classes() != c_max || s.dim() != d)
      fail(ErrorCode::kDimensionMismatch, "statistics do not match the UBM shape");
  }

  TvTrainResult result;
  TvModel &model = result.model;
  model.ubm_means = ubm.means;
  model.sigma.resize(cd);
  for (Eigen::Index c = 0; c < c_max; ++c)
    model.sigma.segment(c * d, d) = ubm.variances.row(c).transpose();
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 0.001 * model.sigma.cwiseSqrt().mean();
  model.t_matrix.resize(cd, r);
  for (Eigen::Index i = 0; i < cd; ++i)
    for (Eigen::Index j = 0; j < r; ++j) model.t_matrix(i, j) = scale * normal(rng);

  // Pooled centered second-order statistics and occupancies, for the Sigma
  // update and its floor.
  Matrix s2_total = Matrix::Zero(c_max, d);
  Vector n_total = Vector::Zero(c_max);
  for (const SuffStats &s : centered_stats) {
    s2_total += centered_second_order(s, model.ubm_means);
    n_total += s.n;
  }
  const double mass = n_total.sum();
  const Eigen::RowVectorXd floor =
      (opts.floor_factor * (s2_total.colwise().sum() / std::max(mass, 1e-300)))
          .cwiseMax(std::numeric_limits<double>::min());

  Vector storage;
  for (int it = 0; it < opts.iters; ++it) {
    IvectorExtractor extractor(model);
    std::vector<Matrix> a_acc(c_max, Matrix::Zero(r, r));
    Matrix c_acc = Matrix::Zero(cd, r);
    for (const SuffStats &s : centered_stats) {
      const auto post = extractor.posterior(s);
      const Matrix cov = post.precision.llt().solve(Matrix::Identity(r, r));
      const Matrix second = cov + post.mean * post.mean.transpose();
      for (Eigen::Index c = 0; c < c_max; ++c)
        if (s.n(c) != 0.0) a_acc[c].noalias() += s.n(c) * second;
      c_acc.noalias() += supervector(s.f, storage) * post.mean.transpose();
    }
    result.objective.push_back(tv_objective(model, centered_stats));
    for (Eigen::Index c = 0; c < c_max; ++c) {
      if (!(n_total(c) > 0)) continue;
      model.t_matrix.middleRows(c * d, d) =
          a_acc[c].llt().solve(c_acc.middleRows(c * d, d).transpose()).transpose();
      if (opts.update_sigma) {
        const Vector explained =
            (model.t_matrix.middleRows(c * d, d).cwiseProduct(c_acc.middleRows(c * d, d)))
                .rowwise()
                .sum();
        const Vector updated = (s2_total.row(c).transpose() - explained) / n_total(c);
        model.sigma.segment(c * d, d) = updated.cwiseMax(floor.transpose());
      }
    }
    spdlog::debug("TV iter {}: objective {:.6f}", it, result.objective.back());
  }
  return result;
}

void write_tv(const std::filesystem::path &path, const TvModel &model) {
  model.validate();
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    w.magic("SVKT");
    w.u8(kTvVersion);
    w.u32(static_cast<std::uint32_t>(model.num_classes()));
    w.u32(static_cast<std::uint32_t>(model.dim()));
    w.u32(static_cast<std::uint32_t>(model.rank()));
    w.matrix(model.t_matrix);
    w.vector(model.sigma);
    w.matrix(model.ubm_means);
  });
}

TvModel read_tv(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  r.expect_magic("SVKT");
  if (r.u8() != kTvVersion) fail(ErrorCode::kFormat, path.string() + ": unsupported version");
  const std::uint32_t c = r.u32(), d = r.u32(), rank = r.u32();
  TvModel model;
  model.t_matrix = r.matrix(static_cast<Eigen::Index>(c) * d, rank);
  model.sigma = r.vector(static_cast<Eigen::Index>(c) * d);
  model.ubm_means = r.matrix(c, d);
  r.expect_eof();
  model.validate();
  return model;
}

void write_ivectors(const std::filesystem::path &path, std::span<const IVector> ivectors) {
  const Eigen::Index r = ivectors.empty() ? 0 : ivectors.front().w.size();
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    w.magic("SVKI");
    w.u8(kIvectorVersion);
    w.u32(static_cast<std::uint32_t>(r));
    w.u32(static_cast<std::uint32_t>(ivectors.size()));
    for (const IVector &iv : ivectors) {
      if (iv.w.size() != r) fail(ErrorCode::kDimensionMismatch, "i-vectors of mixed dimension");
      w.str(iv.utterance_id);
      w.f64(iv.duration_active);
      w.vector(iv.w);
    }
  });
}

std::vector<IVector> read_ivectors(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  r.expect_magic("SVKI");
  if (r.u8() != kIvectorVersion) fail(ErrorCode::kFormat, path.string() + ": unsupported version");
  const std::uint32_t rank = r.u32(), count = r.u32();
  std::vector<IVector> out(count);
  for (IVector &iv : out) {
    iv.utterance_id = r.str();
    iv.duration_active = r.f64();
    iv.w = r.vector(rank);
    if (!iv.w.allFinite()) fail(ErrorCode::kFormat, path.string() + ": non-finite i-vector");
  }
  r.expect_eof();
  return out;
}

}  // namespace svkit
