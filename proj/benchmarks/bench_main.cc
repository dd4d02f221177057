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

#include <random>

#include <benchmark/benchmark.h>

#include "svkit/gmm.h"
#include "svkit/plda.h"
#include "svkit/senone_net.h"
#include "svkit/stats.h"
#include "svkit/total_variability.h"

namespace {

using namespace svkit;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

GmmModel random_gmm(int c, int d) {
  GmmModel m;
  m.weights = Vector::Constant(c, 1.0 / c);
  m.means = random_matrix(c, d, 1);
  m.variances = Matrix::Constant(c, d, 1.0);
  return m;
}

void BM_FramePosteriors(benchmark::State &state) {
  const int c = static_cast<int>(state.range(0));
  const GmmModel ubm = random_gmm(c, 60);
  FeatureMatrix f;
  f.frames = random_matrix(1000, 60, 2);
  for (auto _ : state) benchmark::DoNotOptimize(frame_posteriors(ubm, f));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_FramePosteriors)->Arg(64)->Arg(512);

void BM_ExtractIvector(benchmark::State &state) {
  const int c = 64, d = 60;
  const int r = static_cast<int>(state.range(0));
  TvModel tv;
  tv.t_matrix = random_matrix(c * d, r, 3) * 0.1;
  tv.sigma = Vector::Ones(c * d);
  tv.ubm_means = Matrix::Zero(c, d);
  const IvectorExtractor extractor(tv);
  SuffStats s = SuffStats::zeros(c, d);
  s.n = random_matrix(c, 1, 4).cwiseAbs().col(0) * 50.0;
  s.f = random_matrix(c, d, 5);
  s.centered = true;
  for (auto _ : state) benchmark::DoNotOptimize(extractor.extract(s));
}
BENCHMARK(BM_ExtractIvector)->Arg(20)->Arg(100);

void BM_TdnnForward(benchmark::State &state) {
  const TdnnModel model = init_tdnn(40, desk_topology(), 32, 6);
  FeatureMatrix f;
  f.kind = FeatureKind::kAsr;
  f.frames = random_matrix(1000, 40, 7);
  for (auto _ : state) benchmark::DoNotOptimize(tdnn_forward(model, f));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_TdnnForward);

void BM_PldaScore(benchmark::State &state) {
  const int r = static_cast<int>(state.range(0));
  PldaModel m;
  m.mu = Vector::Zero(r);
  const Matrix a = random_matrix(r, r, 8);
  m.ac = a * a.transpose() / r;
  m.wc = Matrix::Identity(r, r);
  const PldaScorer scorer(m);
  const Vector e = random_matrix(r, 1, 9).col(0), t = random_matrix(r, 1, 10).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(scorer.score(e, t));
}
BENCHMARK(BM_PldaScore)->Arg(20)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
