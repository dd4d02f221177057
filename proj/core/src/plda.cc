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

#include "svkit/plda.h"

#include <cmath>
#include <map>
#include <numbers>

#include <spdlog/spdlog.h>

#include "svkit/binary_io.h"

namespace svkit {
namespace {

constexpr std::uint8_t kPldaVersion = 1;

Matrix symmetrize(const Matrix &m) { return 0.5 * (m + m.transpose()); }

double log_det_pd(const Matrix &m, const char *what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) fail(ErrorCode::kModel, std::string(what) + " is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double log_gaussian(const Vector &x, const Matrix &cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) fail(ErrorCode::kNumerical, "covariance not positive definite");
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const Vector z = llt.matrixL().solve(x);
  return -0.5 * (x.size() * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
}

Matrix floor_eigenvalues(const Matrix &m, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const Vector vals = es.eigenvalues().cwiseMax(floor);
  return symmetrize(es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose());
}

struct SpeakerGroup {
  std::vector<Vector> centered;
  Vector mean;   // mean of centered vectors
  Matrix scatter;  // sum of (x_i - mean)(x_i - mean)'
};

std::vector<SpeakerGroup> group_by_speaker(std::span<const Vector> vectors,
                                           std::span<const std::string> speakers,
                                           const Vector &mu) {
  std::map<std::string, std::size_t> index;
  std::vector<SpeakerGroup> groups;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto [it, inserted] = index.try_emplace(speakers[i], groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].centered.push_back(vectors[i] - mu);
  }
  const Eigen::Index r = mu.size();
  for (SpeakerGroup &g : groups) {
    g.mean = Vector::Zero(r);
    for (const Vector &x : g.centered) g.mean += x;
    g.mean /= static_cast<double>(g.centered.size());
    g.scatter = Matrix::Zero(r, r);
    for (const Vector &x : g.centered) g.scatter.noalias() += (x - g.mean) * (x - g.mean).transpose();
  }
  return groups;
}

double objective_for(const PldaModel &model, const std::vector<SpeakerGroup> &groups) {
  const Eigen::Index r = model.dim();
  Eigen::LLT<Matrix> wc_llt(model.wc);
  if (wc_llt.info() != Eigen::Success) fail(ErrorCode::kNumerical, "WC not positive definite");
  const double log_det_wc = 2.0 * wc_llt.matrixLLT().diagonal().array().log().sum();
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (const SpeakerGroup &g : groups) {
    const double n = static_cast<double>(g.centered.size());
    const double within = wc_llt.solve(g.scatter).trace();
    total += -0.5 * (n - 1.0) * (r * log_2pi + log_det_wc) - 0.5 * r * std::log(n) -
             0.5 * within + log_gaussian(g.mean, model.ac + model.wc / n);
  }
  return total;
}

}  // namespace

void PldaModel::validate() const {
  const Eigen::Index r = dim();
  if (r == 0 || ac.rows() != r || ac.cols() != r || wc.rows() != r || wc.cols() != r)
    fail(ErrorCode::kModel, "PLDA parameter shapes disagree");
  if (!mu.allFinite() || !ac.allFinite() || !wc.allFinite())
    fail(ErrorCode::kModel, "non-finite PLDA parameters");
}

std::string_view trial_label_name(TrialLabel label) {
  switch (label) {
    case TrialLabel::kTarget: return "target";
    case TrialLabel::kNontarget: return "nontarget";
    case TrialLabel::kUnknown: return "unknown";
  }
  return "unknown";
}

TrialLabel parse_trial_label(std::string_view text) {
  if (text == "target") return TrialLabel::kTarget;
  if (text == "nontarget") return TrialLabel::kNontarget;
  if (text == "unknown") return TrialLabel::kUnknown;
  fail(ErrorCode::kFormat, "unknown trial label '" + std::string(text) + "'");
}

Vector ivector_mean(std::span<const IVector> ivectors) {
  if (ivectors.empty()) fail(ErrorCode::kEmptyInput, "no i-vectors to average");
  Vector mean = Vector::Zero(ivectors.front().w.size());
  for (const IVector &iv : ivectors) mean += iv.w;
  return mean / static_cast<double>(ivectors.size());
}

Vector length_normalize(const Vector &w, const Vector &mean) {
  if (w.size() != mean.size()) fail(ErrorCode::kDimensionMismatch, "i-vector/mean dimension mismatch");
  const Vector centered = w - mean;
  const double norm = centered.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    fail(ErrorCode::kDegenerateIvector, "i-vector is zero after mean subtraction");
  return centered / norm;
}

std::vector<IVector> center_and_length_normalize(std::span<const IVector> ivectors,
                                                 const Vector &mean,
                                                 std::vector<std::string> *dropped) {
  std::vector<IVector> out;
  out.reserve(ivectors.size());
  for (const IVector &iv : ivectors) {
    try {
      IVector v = iv;
      v.w = length_normalize(iv.w, mean);
      out.push_back(std::move(v));
    } catch (const Error &e) {
      if (e.code() != ErrorCode::kDegenerateIvector) throw;
      spdlog::warn("dropping {}: {}", iv.utterance_id, e.what());
      if (dropped) dropped->push_back(iv.utterance_id);
    }
  }
  return out;
}

double gplda_objective(const PldaModel &model, std::span<const Vector> vectors,
                       std::span<const std::string> speaker_labels) {
  return objective_for(model, group_by_speaker(vectors, speaker_labels, model.mu));
}

PldaTrainResult train_gplda(std::span<const Vector> vectors,
                            std::span<const std::string> speaker_labels,
                            const PldaTrainOptions &opts) {
  if (vectors.empty() || vectors.size() != speaker_labels.size())
    fail(ErrorCode::kConfiguration, "PLDA training needs one speaker label per vector");
  const Eigen::Index r = vectors.front().size();
  PldaTrainResult result;
  PldaModel &model = result.model;
  model.mu = Vector::Zero(r);
  for (const Vector &v : vectors) {
    if (v.size() != r) fail(ErrorCode::kDimensionMismatch, "training vectors of mixed dimension");
    model.mu += v;
  }
  model.mu /= static_cast<double>(vectors.size());

  const auto groups = group_by_speaker(vectors, speaker_labels, model.mu);
  std::size_t multi_session = 0;
  double n_total = 0.0;
  Matrix total_cov = Matrix::Zero(r, r);
  for (const SpeakerGroup &g : groups) {
    if (g.centered.size() >= 2) ++multi_session;
    n_total += static_cast<double>(g.centered.size());
    for (const Vector &x : g.centered) total_cov.noalias() += x * x.transpose();
  }
  if (multi_session == 0)
    fail(ErrorCode::kTraining, "every speaker has a single session; within-class covariance is unidentifiable");
  total_cov /= n_total;

  auto wc_floor = [&](const Matrix &wc) {
    return floor_eigenvalues(wc, opts.wc_floor * wc.trace() / static_cast<double>(r));
  };

  if (opts.estimator == PldaEstimator::kScatter) {
    Matrix within = Matrix::Zero(r, r), between = Matrix::Zero(r, r);
    double n_within = 0.0;
    for (const SpeakerGroup &g : groups) {
      between.noalias() += g.mean * g.mean.transpose();
      if (g.centered.size() >= 2) {
        within += g.scatter;
        n_within += static_cast<double>(g.centered.size());
      }
    }
    model.wc = wc_floor(within / n_within);
    model.ac = floor_eigenvalues(between / static_cast<double>(groups.size()), 0.0);
    return result;
  }

  model.ac = 0.5 * total_cov;
  model.wc = wc_floor(0.5 * total_cov);
  const double n_speakers = static_cast<double>(groups.size());
  for (int it = 0; it < opts.iters; ++it) {
    result.objective.push_back(objective_for(model, groups));
    Matrix ac_acc = Matrix::Zero(r, r), wc_acc = Matrix::Zero(r, r);
    for (const SpeakerGroup &g : groups) {
      const double n = static_cast<double>(g.centered.size());
      Eigen::LLT<Matrix> llt(model.ac + model.wc / n);
      if (llt.info() != Eigen::Success) fail(ErrorCode::kNumerical, "PLDA E-step lost positive definiteness");
      // Posterior of the speaker variable: mean AC G xbar, cov AC - AC G AC.
      const Vector y = model.ac * llt.solve(g.mean);
      const Matrix cov = symmetrize(model.ac - model.ac * llt.solve(model.ac));
      ac_acc.noalias() += y * y.transpose() + cov;
      // sum_i (x_i - y)(x_i - y)' = scatter + n (xbar - y)(xbar - y)'
      const Vector dev = g.mean - y;
      wc_acc.noalias() += g.scatter + n * (dev * dev.transpose() + cov);
    }
    model.ac = floor_eigenvalues(ac_acc / n_speakers, 0.0);
    model.wc = wc_floor(wc_acc / n_total);
  }
  return result;
}

PldaScorer::PldaScorer(const PldaModel &model) : model_(model) {
  model_.validate();
  const Eigen::Index r = model_.dim();
  const Matrix total = model_.ac + model_.wc;
  Eigen::LLT<Matrix> total_llt(total);
  if (total_llt.info() != Eigen::Success) fail(ErrorCode::kModel, "AC + WC is not positive definite");
  const Matrix total_inv = total_llt.solve(Matrix::Identity(r, r));
  const Matrix schur = symmetrize(total - model_.ac * total_inv * model_.ac);
  Eigen::LLT<Matrix> schur_llt(schur);
  if (schur_llt.info() != Eigen::Success)
    fail(ErrorCode::kModel, "PLDA conditional covariance is not positive definite");
  const Matrix schur_inv = schur_llt.solve(Matrix::Identity(r, r));
  q_ = symmetrize(total_inv - schur_inv);
  p_ = total_inv * model_.ac * schur_inv;
  constant_ = 0.5 * log_det_pd(total, "AC + WC") - 0.5 * log_det_pd(schur, "PLDA conditional covariance");
}

double PldaScorer::score(const Vector &enrol, const Vector &test) const {
  if (enrol.size() != model_.dim() || test.size() != model_.dim())
    fail(ErrorCode::kDimensionMismatch, "trial vectors do not match the PLDA dimension");
  const Vector e = enrol - model_.mu, t = test - model_.mu;
  // Symmetric in (e, t): P is symmetric up to rounding, so use its average.
  return 0.5 * e.dot(q_ * e) + 0.5 * t.dot(q_ * t) +
         0.5 * (e.dot(p_ * t) + t.dot(p_ * e)) + constant_;
}

TrialScore score_trial(const PldaModel &model, const IVector &enrol, const IVector &test) {
  PldaScorer scorer(model);
  return {enrol.utterance_id, test.utterance_id, scorer.score(enrol.w, test.w),
          TrialLabel::kUnknown};
}

void write_plda(const std::filesystem::path &path, const PldaModel &model) {
  model.validate();
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    w.magic("SVKL");
    w.u8(kPldaVersion);
    w.u32(static_cast<std::uint32_t>(model.dim()));
    w.vector(model.mu);
    w.matrix(model.ac);
    w.matrix(model.wc);
  });
}

PldaModel read_plda(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  r.expect_magic("SVKL");
  if (r.u8() != kPldaVersion) fail(ErrorCode::kFormat, path.string() + ": unsupported version");
  const std::uint32_t dim = r.u32();
  PldaModel model;
  model.mu = r.vector(dim);
  model.ac = r.matrix(dim, dim);
  model.wc = r.matrix(dim, dim);
  r.expect_eof();
  PldaScorer check(model);  // load-time positive-definiteness check
  return model;
}

}  // namespace svkit
