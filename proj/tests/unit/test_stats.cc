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

#include <doctest.h>

#include "svkit/senone_net.h"
#include "svkit/stats.h"
#include "test_util.h"

using namespace svkit;
using svkit::testing::randn;

namespace {

PosteriorMatrix random_posteriors(Eigen::Index t, Eigen::Index c, std::uint64_t seed) {
  PosteriorMatrix p;
  p.gamma = randn(t, c, seed, 2.0).array().exp().matrix();
  for (Eigen::Index i = 0; i < t; ++i) p.gamma.row(i) /= p.gamma.row(i).sum();
  return p;
}

FeatureMatrix features(const Matrix &m) {
  FeatureMatrix f;
  f.frames = m;
  return f;
}

VadMask mask(std::size_t t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VadMask v;
  for (std::size_t i = 0; i < t; ++i) v.voiced.push_back(rng() % 3 != 0);
  return v;
}

VadMask all_voiced(std::size_t t) {
  VadMask v;
  v.voiced.assign(t, 1);
  return v;
}

template <class F>
ErrorCode code_of(F &&f) {
  try {
    f();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kUsage;
}

}  // namespace

TEST_CASE("unvoiced utterance gives zero statistics") {
  VadMask v;
  v.voiced.assign(8, 0);
  const SuffStats s = accumulate_stats(random_posteriors(8, 3, 1), features(randn(8, 2, 2)), v);
  CHECK(s.n.isZero(0));
  CHECK(s.f.isZero(0));
  CHECK(s.s.isZero(0));
  CHECK_FALSE(s.centered);
}

TEST_CASE("single class sums the voiced frames") {
  PosteriorMatrix p;
  p.gamma = Matrix::Ones(3, 1);
  const Matrix x = randn(3, 4, 3);
  const SuffStats s = accumulate_stats(p, features(x), all_voiced(3));
  CHECK(s.n(0) == 3.0);
  CHECK((s.f.row(0) - x.colwise().sum()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("accumulation matches a per-frame loop") {
  const PosteriorMatrix p = random_posteriors(10, 4, 4);
  const Matrix x = randn(10, 3, 5);
  const VadMask v = mask(10, 6);
  const SuffStats s = accumulate_stats(p, features(x), v);
  Vector n = Vector::Zero(4);
  Matrix f = Matrix::Zero(4, 3), sq = Matrix::Zero(4, 3);
  for (int t = 0; t < 10; ++t) {
    if (!v.voiced[t]) continue;
    for (int c = 0; c < 4; ++c) {
      n(c) += p.gamma(t, c);
      for (int d = 0; d < 3; ++d) {
        f(c, d) += p.gamma(t, c) * x(t, d);
        sq(c, d) += p.gamma(t, c) * x(t, d) * x(t, d);
      }
    }
  }
  CHECK((s.n - n).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((s.f - f).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((s.s - sq).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("length mismatch is an alignment error") {
  CHECK(code_of([] { accumulate_stats(random_posteriors(9, 2, 1), features(randn(10, 2, 1)), all_voiced(10)); }) ==
        ErrorCode::kAlignment);
  CHECK(synchronized_length(100, 102) == 100);
  CHECK(code_of([] { synchronized_length(100, 103); }) == ErrorCode::kAlignment);
}

TEST_CASE("second order dominates first order squared") {
  const SuffStats s = accumulate_stats(random_posteriors(50, 5, 7), features(randn(50, 3, 8)), mask(50, 9));
  for (int c = 0; c < 5; ++c)
    if (s.n(c) > 0)
      for (int d = 0; d < 3; ++d) CHECK(s.s(c, d) + 1e-12 >= s.f(c, d) * s.f(c, d) / s.n(c));
}

TEST_CASE("centering with zero means leaves f unchanged") {
  const SuffStats s = accumulate_stats(random_posteriors(6, 2, 10), features(randn(6, 3, 11)), all_voiced(6));
  const SuffStats c = center_stats(s, Matrix::Zero(2, 3));
  CHECK(c.f == s.f);
  CHECK(c.centered);
  CHECK(c.n == s.n);
}

TEST_CASE("a frame at its component mean centers to zero") {
  Matrix means(2, 2);
  means << 1.5, -2.0, 3.0, 4.0;
  PosteriorMatrix p;
  p.gamma = Matrix::Zero(1, 2);
  p.gamma(0, 1) = 1.0;
  const SuffStats c = center_stats(accumulate_stats(p, features(means.row(1)), all_voiced(1)), means);
  CHECK(c.f.row(1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("centering matches a loop and inverts") {
  const SuffStats s = accumulate_stats(random_posteriors(12, 3, 12), features(randn(12, 4, 13)), mask(12, 14));
  const Matrix m = randn(3, 4, 15);
  const SuffStats c = center_stats(s, m);
  for (int k = 0; k < 3; ++k)
    for (int d = 0; d < 4; ++d) CHECK(std::abs(c.f(k, d) - (s.f(k, d) - s.n(k) * m(k, d))) < 1e-10);
  CHECK(c.s == s.s);
  CHECK((uncenter_stats(c, m).f - s.f).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(code_of([&] { center_stats(c, m); }) == ErrorCode::kState);
  CHECK(code_of([&] { uncenter_stats(s, m); }) == ErrorCode::kState);
}

TEST_CASE("property: centering is invertible for random shapes") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index c = 1 + seed % 7, d = 1 + seed % 5, t = 5 + seed;
    const SuffStats s = accumulate_stats(random_posteriors(t, c, seed), features(randn(t, d, seed + 100, 10.0)),
                                         mask(t, seed + 200));
    const Matrix m = randn(c, d, seed + 300, 5.0);
    CHECK((uncenter_stats(center_stats(s, m), m).f - s.f).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("property: accumulation is additive over a split utterance") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index t = 20 + seed, c = 2 + seed % 4, d = 3;
    const PosteriorMatrix p = random_posteriors(t, c, seed);
    const Matrix x = randn(t, d, seed + 50);
    const VadMask v = mask(t, seed + 60);
    const Eigen::Index cut = 1 + seed % (t - 1);

    PosteriorMatrix pa, pb;
    pa.gamma = p.gamma.topRows(cut);
    pb.gamma = p.gamma.bottomRows(t - cut);
    VadMask va, vb;
    va.voiced.assign(v.voiced.begin(), v.voiced.begin() + cut);
    vb.voiced.assign(v.voiced.begin() + cut, v.voiced.end());

    const SuffStats whole = accumulate_stats(p, features(x), v);
    SuffStats parts = accumulate_stats(pa, features(x.topRows(cut)), va);
    parts += accumulate_stats(pb, features(x.bottomRows(t - cut)), vb);
    CHECK((whole.n - parts.n).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((whole.f - parts.f).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((whole.s - parts.s).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("property: occupancy equals the voiced frame count for every source") {
  GmmModel g;
  g.weights = Vector::Constant(4, 0.25);
  g.means = randn(4, 3, 1, 3.0);
  g.variances = Matrix::Ones(4, 3);
  const TdnnModel net = init_tdnn(5, desk_topology(), 4, 2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::Index t = 30 + 7 * seed;
    FeatureMatrix spk = features(randn(t, 3, seed, 3.0));
    FeatureMatrix asr = features(randn(t, 5, seed + 1));
    asr.kind = FeatureKind::kAsr;
    SenoneLabels lab;
    for (Eigen::Index i = 0; i < t; ++i) lab.labels.push_back(static_cast<std::uint16_t>((i * 7 + seed) % 4));
    const VadMask v = mask(t, seed + 2);
    const double voiced = static_cast<double>(v.num_voiced());
    UtteranceStreams u{"u", &spk, &asr, &lab};
    for (const AlignmentSource &src :
         {AlignmentSource{GmmAlignment{&g}}, AlignmentSource{TdnnAlignment{&net}}, AlignmentSource{OracleAlignment{4}}}) {
      const SuffStats s = accumulate_stats(resolve_posteriors(src, u), spk, v);
      CHECK(std::abs(s.n.sum() - voiced) < 1e-6);
      CHECK(s.n.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("supervised UBM recovers class means and variances") {
  // Oracle alignment: each class is a fixed Gaussian.
  const Matrix true_means = randn(3, 2, 20, 5.0);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<SuffStats> parts;
  for (int u = 0; u < 4; ++u) {
    SenoneLabels lab;
    Matrix x(3000, 2);
    for (int t = 0; t < 3000; ++t) {
      const int c = t % 3;
      lab.labels.push_back(static_cast<std::uint16_t>(c));
      for (int d = 0; d < 2; ++d) x(t, d) = true_means(c, d) + (d + 1) * g(rng);
    }
    parts.push_back(accumulate_stats(one_hot_posteriors(lab, 3), features(x), all_voiced(3000)));
  }
  const GmmModel m = estimate_supervised_ubm(parts);
  CHECK((m.means - true_means).cwiseAbs().maxCoeff() < 0.1);
  CHECK(std::abs(m.variances(0, 0) - 1.0) < 0.1);
  CHECK(std::abs(m.variances(0, 1) - 4.0) < 0.3);
  CHECK(std::abs(m.weights.sum() - 1.0) < 1e-12);
  CHECK(code_of([&] { estimate_supervised_ubm(std::span<const SuffStats>{}); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("stats files and archives round trip") {
  const auto dir = svkit::testing::scratch_dir("stats_io");
  const SuffStats s = center_stats(
      accumulate_stats(random_posteriors(9, 3, 30), features(randn(9, 2, 31)), all_voiced(9)), randn(3, 2, 32));
  write_stats(dir / "a.stats", s);
  const SuffStats back = read_stats(dir / "a.stats");
  CHECK(back.n == s.n);
  CHECK(back.f == s.f);
  CHECK(back.s == s.s);
  CHECK(back.centered);

  StatsArchive ar{{"x", s}, {"y", SuffStats::zeros(3, 2)}};
  write_stats_archive(dir / "a.ark", ar);
  const StatsArchive ar2 = read_stats_archive(dir / "a.ark");
  REQUIRE(ar2.size() == 2);
  CHECK(ar2[1].first == "y");
  CHECK(ar2[0].second.f == s.f);
}
