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

#include <cmath>
#include <numbers>

#include <doctest.h>

#include "svkit/plda.h"
#include "test_util.h"

using namespace svkit;
using svkit::testing::randn;
using svkit::testing::randn_vec;
using svkit::testing::random_spd;

namespace {

struct Sample {
  std::vector<Vector> vectors;
  std::vector<std::string> speakers;
};

Matrix sqrt_of(const Matrix &spd) { return Eigen::LLT<Matrix>(spd).matrixL(); }

Sample generate(const PldaModel &m, int n_speakers, int sessions, std::uint64_t seed,
                std::vector<Vector> *speaker_means = nullptr) {
  Sample s;
  const Matrix la = sqrt_of(m.ac), lw = sqrt_of(m.wc);
  for (int k = 0; k < n_speakers; ++k) {
    const Vector y = m.mu + la * randn_vec(m.dim(), seed * 1000003 + k);
    if (speaker_means) speaker_means->push_back(y);
    for (int j = 0; j < sessions; ++j) {
      s.vectors.push_back(y + lw * randn_vec(m.dim(), seed * 7919 + k * 131 + j + 1));
      s.speakers.push_back("spk" + std::to_string(k));
    }
  }
  return s;
}

// Covariance of the realized draws, the best any estimator can see.
Matrix sample_cov(const std::vector<Vector> &v) {
  Vector mean = Vector::Zero(v.front().size());
  for (const auto &x : v) mean += x;
  mean /= static_cast<double>(v.size());
  Matrix c = Matrix::Zero(mean.size(), mean.size());
  for (const auto &x : v) c += (x - mean) * (x - mean).transpose();
  return c / static_cast<double>(v.size());
}

PldaModel random_model(Eigen::Index r, std::uint64_t seed) {
  return PldaModel{randn_vec(r, seed), random_spd(r, seed + 1, 0.3), random_spd(r, seed + 2, 0.2)};
}

double log_gauss(const Vector &x, const Vector &mean, const Matrix &cov) {
  const Vector d = x - mean;
  return -0.5 * (x.size() * std::log(2 * std::numbers::pi) + std::log(cov.determinant()) +
                 d.dot(cov.inverse() * d));
}

double rel_frobenius(const Matrix &a, const Matrix &b) { return (a - b).norm() / b.norm(); }

IVector iv(const std::string &id, const Vector &w) { return IVector{id, 10.0, w}; }

}  // namespace

TEST_CASE("length normalization of a 3-4-5 offset") {
  Vector w(4), mean = Vector::Zero(4);
  w << 3, 4, 0, 0;
  const Vector v = length_normalize(w, mean);
  CHECK(v(0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(v(1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(v(2) == 0.0);
}

TEST_CASE("a vector equal to the mean is degenerate") {
  const Vector m = randn_vec(5, 1);
  try {
    length_normalize(m, m);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kDegenerateIvector);
  }
  std::vector<IVector> batch{iv("a", m), iv("b", randn_vec(5, 2))};
  std::vector<std::string> dropped;
  const auto out = center_and_length_normalize(batch, m, &dropped);
  REQUIRE(out.size() == 1);
  CHECK(out[0].utterance_id == "b");
  CHECK(dropped == std::vector<std::string>{"a"});
}

TEST_CASE("property: normalized batch has unit norms and keeps direction") {
  std::vector<IVector> batch;
  for (std::uint64_t k = 0; k < 50; ++k) batch.push_back(iv("u" + std::to_string(k), randn_vec(7, 10 + k, 1.0 + k)));
  const Vector mean = ivector_mean(batch);
  const auto out = center_and_length_normalize(batch, mean);
  REQUIRE(out.size() == 50);
  for (std::size_t k = 0; k < 50; ++k) {
    CHECK(std::abs(out[k].w.norm() - 1.0) < 1e-12);
    const Vector d = batch[k].w - mean;
    CHECK(std::abs(out[k].w.dot(d) - d.norm()) < 1e-9 * d.norm());
  }
}

TEST_CASE("zero iterations return the initialization") {
  const Sample s = generate(random_model(3, 1), 10, 3, 2);
  const PldaTrainResult r = train_gplda(s.vectors, s.speakers, {.iters = 0});
  Vector mean = Vector::Zero(3);
  for (const auto &v : s.vectors) mean += v;
  mean /= static_cast<double>(s.vectors.size());
  Matrix cov = Matrix::Zero(3, 3);
  for (const auto &v : s.vectors) cov += (v - mean) * (v - mean).transpose();
  cov /= static_cast<double>(s.vectors.size());
  CHECK((r.model.mu - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.model.ac - 0.5 * cov).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.model.wc - 0.5 * cov).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.objective.empty());
}

TEST_CASE("training recovers known covariances") {
  const PldaModel truth = random_model(10, 3);
  std::vector<Vector> y;
  const Sample s = generate(truth, 200, 8, 4, &y);
  const PldaTrainResult r = train_gplda(s.vectors, s.speakers, {.iters = 20});
  // 200 draws of a 10-dim speaker variable already sit about 0.16 from the
  // population AC, so AC is judged against the realized speakers.
  CHECK(rel_frobenius(r.model.ac, sample_cov(y)) < 0.15);
  CHECK(rel_frobenius(r.model.wc, truth.wc) < 0.15);
  r.model.validate();
  const Eigen::SelfAdjointEigenSolver<Matrix> es(r.model.ac);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  CHECK((r.model.ac - r.model.ac.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.model.wc - r.model.wc.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scatter estimator is also close on abundant data") {
  const PldaModel truth = random_model(5, 5);
  const Sample s = generate(truth, 400, 10, 6);
  const PldaTrainResult r = train_gplda(s.vectors, s.speakers, {.estimator = PldaEstimator::kScatter});
  CHECK(rel_frobenius(r.model.wc, truth.wc) < 0.15);
  CHECK(rel_frobenius(r.model.ac, truth.ac) < 0.3);
}

TEST_CASE("a single speaker drives the speaker covariance to zero") {
  std::vector<Vector> v;
  for (std::uint64_t k = 0; k < 100; ++k) v.push_back(randn_vec(5, 100 + k, 0.3));
  const std::vector<std::string> spk(100, "only");
  const PldaTrainResult r = train_gplda(v, spk, {.iters = 3000});
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(r.model.ac).eigenvalues().maxCoeff() < 1e-6);
  Matrix cov = Matrix::Zero(5, 5);
  for (const auto &x : v) cov += (x - r.model.mu) * (x - r.model.mu).transpose();
  cov /= 100.0;
  CHECK(rel_frobenius(r.model.wc, cov) < 1e-3);
}

TEST_CASE("single-session speakers cannot train") {
  const Sample s = generate(random_model(3, 7), 20, 1, 8);
  try {
    train_gplda(s.vectors, s.speakers);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kTraining);
  }
}

TEST_CASE("EM objective never decreases") {
  const Sample s = generate(random_model(6, 9), 50, 4, 10);
  const PldaTrainResult r = train_gplda(s.vectors, s.speakers, {.iters = 20});
  std::vector<double> obj = r.objective;
  obj.push_back(gplda_objective(r.model, s.vectors, s.speakers));
  for (std::size_t k = 1; k < obj.size(); ++k) CHECK(obj[k] >= obj[k - 1] - 1e-8 * std::abs(obj[k - 1]));
}

TEST_CASE("zero speaker covariance gives zero scores") {
  PldaModel m = random_model(4, 11);
  m.ac.setZero();
  const PldaScorer scorer(m);
  for (std::uint64_t k = 0; k < 1000; ++k) CHECK(std::abs(scorer.score(randn_vec(4, 2 * k), randn_vec(4, 2 * k + 1))) < 1e-9);
}

TEST_CASE("scores are symmetric") {
  const PldaScorer scorer(random_model(6, 12));
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const Vector a = randn_vec(6, 5000 + 2 * k), b = randn_vec(6, 5001 + 2 * k);
    CHECK(std::abs(scorer.score(a, b) - scorer.score(b, a)) < 1e-10);
  }
}

TEST_CASE("score matches dense Gaussian log-densities") {
  const PldaModel m = random_model(2, 13);
  const Vector e = randn_vec(2, 14), t = randn_vec(2, 15);
  Vector joint(4), joint_mean(4);
  joint << e, t;
  joint_mean << m.mu, m.mu;
  Matrix joint_cov(4, 4);
  joint_cov << m.ac + m.wc, m.ac, m.ac, m.ac + m.wc;
  const double expect =
      log_gauss(joint, joint_mean, joint_cov) - log_gauss(e, m.mu, m.ac + m.wc) - log_gauss(t, m.mu, m.ac + m.wc);
  CHECK(std::abs(score_trial(m, iv("e", e), iv("t", t)).score - expect) < 1e-9);
}

TEST_CASE("target trials outscore nontarget trials") {
  const PldaModel truth = random_model(10, 16);
  const Sample train = generate(truth, 200, 6, 17);
  const PldaModel m = train_gplda(train.vectors, train.speakers).model;
  const Sample test = generate(truth, 200, 2, 18);
  const PldaScorer scorer(m);
  double tar = 0.0, non = 0.0;
  for (int k = 0; k < 200; ++k) {
    tar += scorer.score(test.vectors[2 * k], test.vectors[2 * k + 1]);
    non += scorer.score(test.vectors[2 * k], test.vectors[(2 * k + 3) % 400]);
  }
  CHECK(tar / 200 - non / 200 > 1.0);
}

TEST_CASE("affine transforms preserve score order") {
  const PldaModel truth = random_model(4, 19);
  const Sample s = generate(truth, 60, 4, 20);
  const Matrix a = randn(4, 4, 21) + 3.0 * Matrix::Identity(4, 4);
  const Vector b = randn_vec(4, 22, 5.0);
  Sample moved = s;
  for (auto &v : moved.vectors) v = a * v + b;

  const PldaScorer plain(train_gplda(s.vectors, s.speakers).model);
  const PldaScorer warped(train_gplda(moved.vectors, moved.speakers).model);
  std::vector<double> x, y;
  for (int k = 0; k < 100; ++k) {
    const int i = (k * 37) % 240, j = (k * 53 + 1) % 240;
    x.push_back(plain.score(s.vectors[i], s.vectors[j]));
    y.push_back(warped.score(moved.vectors[i], moved.vectors[j]));
  }
  long concordant = 0, discordant = 0;
  for (int i = 0; i < 100; ++i)
    for (int j = i + 1; j < 100; ++j) {
      const double p = (x[i] - x[j]) * (y[i] - y[j]);
      (p > 0 ? concordant : discordant) += 1;
    }
  CHECK(static_cast<double>(concordant - discordant) / (concordant + discordant) == 1.0);
}

TEST_CASE("models that are not positive definite are rejected") {
  PldaModel m = random_model(3, 23);
  m.wc = -m.wc;
  m.ac.setZero();
  CHECK_THROWS_AS(PldaScorer{m}, Error);
  const auto dir = svkit::testing::scratch_dir("plda_bad");
  const PldaModel good = random_model(3, 24);
  write_plda(dir / "good.plda", good);
  const PldaModel back = read_plda(dir / "good.plda");
  CHECK(back.ac == good.ac);
  CHECK(back.wc == good.wc);
  CHECK(back.mu == good.mu);
  try {
    write_plda(dir / "bad.plda", m);
    read_plda(dir / "bad.plda");
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kModel);
  }
}

TEST_CASE("trial labels parse") {
  CHECK(parse_trial_label("target") == TrialLabel::kTarget);
  CHECK(trial_label_name(TrialLabel::kNontarget) == "nontarget");
  CHECK_THROWS_AS(parse_trial_label("maybe"), Error);
}
