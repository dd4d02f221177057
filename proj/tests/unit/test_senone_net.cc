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

#include <doctest.h>

#include "svkit/senone_net.h"
#include "test_util.h"

using namespace svkit;
using svkit::testing::randn;

namespace {

FeatureMatrix asr_of(const Matrix &m) {
  FeatureMatrix f;
  f.frames = m;
  f.kind = FeatureKind::kAsr;
  return f;
}

// Hidden p-norm layer over {-1,0,1}, then a softmax layer over {-1,1}.
TdnnModel toy_net(std::uint64_t seed) {
  TdnnLayerSpec hidden{{-1, 0, 1}, 6, 2, 2.0};
  TdnnLayerSpec out{{-1, 1}, 0, 1, 2.0};
  TdnnModel m = init_tdnn(3, {hidden, out}, 4, seed);
  // Nonzero biases so every parameter is exercised.
  for (auto &layer : m.layers) layer.bias = svkit::testing::randn_vec(layer.bias.size(), seed + 99, 0.3);
  return m;
}

SenoneLabels labels_of(std::initializer_list<int> v) {
  SenoneLabels l;
  for (int x : v) l.labels.push_back(static_cast<std::uint16_t>(x));
  return l;
}

double loss_of(const TdnnModel &m, const FeatureMatrix &f, const SenoneLabels &l) {
  return tdnn_gradients(m, f, l).loss;
}

}  // namespace

TEST_CASE("splice with offset 0 is the identity") {
  const Matrix x = randn(7, 3, 1);
  const int off[] = {0};
  CHECK(splice_frames(x, off) == x);
}

TEST_CASE("splice replicates edge frames") {
  Matrix x(3, 1);
  x << 10, 20, 30;
  const int off[] = {-1, 0, 1};
  const Matrix s = splice_frames(x, off);
  CHECK(s.rows() == 3);
  CHECK(s.cols() == 3);
  CHECK(s(0, 0) == 10);
  CHECK(s(0, 1) == 10);
  CHECK(s(0, 2) == 20);
  CHECK(s(2, 2) == 30);
}

TEST_CASE("splice matches an explicit gather") {
  const Matrix x = randn(6, 2, 2);
  const int off[] = {-2, 0, 2};
  const Matrix s = splice_frames(x, off);
  REQUIRE(s.cols() == 6);
  for (int t = 0; t < 6; ++t)
    for (int k = 0; k < 3; ++k) {
      const int src = std::clamp(t + off[k], 0, 5);
      for (int d = 0; d < 2; ++d) CHECK(s(t, k * 2 + d) == x(src, d));
    }
}

TEST_CASE("p-norm of a 3-4 group is 5 and of zeros is 0") {
  Vector x(4);
  x << 3, 4, 0, 0;
  const Vector y = pnorm_activation(x, 2.0, 2);
  CHECK(y(0) == doctest::Approx(5.0));
  CHECK(y(1) == 0.0);
}

TEST_CASE("p-norm matches the direct formula and is positively homogeneous") {
  const Vector x = svkit::testing::randn_vec(8, 3);
  const Vector y = pnorm_activation(x, 2.0, 2);
  for (int g = 0; g < 4; ++g) CHECK(std::abs(y(g) - std::hypot(x(2 * g), x(2 * g + 1))) < 1e-12);
  for (double a : {-3.0, 0.5, 7.0})
    CHECK((pnorm_activation(a * x, 2.0, 2) - std::abs(a) * y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("p-norm rejects a group that does not divide the input") {
  try {
    pnorm_activation(Vector::Ones(5), 2.0, 2);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kConfiguration);
  }
}

TEST_CASE("equal logits give uniform posteriors") {
  TdnnModel m;
  TdnnLayer l;
  l.offsets = {0};
  l.weight = Matrix::Zero(2, 2);
  l.bias = Vector::Zero(2);
  l.activation = Activation::kSoftmax;
  m.layers.push_back(l);
  const PosteriorMatrix p = tdnn_forward(m, asr_of(randn(4, 2, 4)));
  CHECK((p.gamma.array() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("shifting every output bias leaves posteriors unchanged") {
  TdnnModel m = toy_net(5);
  const FeatureMatrix f = asr_of(randn(9, 3, 6));
  const PosteriorMatrix a = tdnn_forward(m, f);
  m.layers.back().bias.array() += 17.0;
  const PosteriorMatrix b = tdnn_forward(m, f);
  CHECK((a.gamma - b.gamma).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two-layer forward matches a matrix-multiply oracle") {
  const TdnnModel m = toy_net(7);
  const Matrix x = randn(5, 3, 8);
  const PosteriorMatrix p = tdnn_forward(m, asr_of(x));
  REQUIRE(p.gamma.rows() == 5);
  // Layer 1.
  Matrix h(5, 3);
  for (int t = 0; t < 5; ++t) {
    Vector in(9);
    for (int k = 0; k < 3; ++k) in.segment(3 * k, 3) = x.row(std::clamp(t - 1 + k, 0, 4)).transpose();
    const Vector pre = m.layers[0].weight * in + m.layers[0].bias;
    for (int g = 0; g < 3; ++g) h(t, g) = std::sqrt(pre(2 * g) * pre(2 * g) + pre(2 * g + 1) * pre(2 * g + 1));
  }
  // Layer 2.
  for (int t = 0; t < 5; ++t) {
    Vector in(6);
    in.head(3) = h.row(std::clamp(t - 1, 0, 4)).transpose();
    in.tail(3) = h.row(std::clamp(t + 1, 0, 4)).transpose();
    const Vector z = m.layers[1].weight * in + m.layers[1].bias;
    const Vector e = (z.array() - z.maxCoeff()).exp();
    const Vector q = e / e.sum();
    CHECK((p.gamma.row(t).transpose() - q).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("softmax rows stay normalized under huge logits") {
  TdnnModel m = toy_net(9);
  m.layers.back().weight *= 1e3;
  const PosteriorMatrix p = tdnn_forward(m, asr_of(randn(40, 3, 10, 10.0)));
  CHECK(p.gamma.allFinite());
  CHECK((p.gamma.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("width mismatch is an error") {
  try {
    tdnn_forward(toy_net(1), asr_of(Matrix::Zero(5, 4)));
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("analytic gradients match central differences") {
  const TdnnModel m = toy_net(11);
  const FeatureMatrix f = asr_of(randn(8, 3, 12));
  const SenoneLabels l = labels_of({0, 1, 2, 3, 3, 2, 1, 0});
  const TdnnGradients g = tdnn_gradients(m, f, l);
  const double eps = 1e-5;
  double worst = 0.0;
  auto rel = [](double a, double n) { return std::abs(a - n) / std::max(std::abs(a) + std::abs(n), 1e-10); };
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    for (Eigen::Index i = 0; i < m.layers[k].weight.size(); ++i) {
      TdnnModel plus = m, minus = m;
      plus.layers[k].weight.data()[i] += eps;
      minus.layers[k].weight.data()[i] -= eps;
      const double num = (loss_of(plus, f, l) - loss_of(minus, f, l)) / (2 * eps);
      worst = std::max(worst, rel(g.weight[k].data()[i], num));
    }
    for (Eigen::Index i = 0; i < m.layers[k].bias.size(); ++i) {
      TdnnModel plus = m, minus = m;
      plus.layers[k].bias(i) += eps;
      minus.layers[k].bias(i) -= eps;
      const double num = (loss_of(plus, f, l) - loss_of(minus, f, l)) / (2 * eps);
      worst = std::max(worst, rel(g.bias[k](i), num));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("ignored frames carry no loss") {
  const TdnnModel m = toy_net(13);
  const FeatureMatrix f = asr_of(randn(6, 3, 14));
  SenoneLabels a = labels_of({0, 1, 2, 3, 0, 1});
  SenoneLabels b = a;
  b.labels[5] = SenoneLabels::kIgnore;
  const PosteriorMatrix p = tdnn_forward(m, f);
  double expect = 0.0;
  for (int t = 0; t < 5; ++t) expect -= std::log(p.gamma(t, a.labels[t]));
  CHECK(tdnn_gradients(m, f, b).loss == doctest::Approx(expect / 5.0).epsilon(1e-12));
}

TEST_CASE("zero learning rate leaves the model bit-identical") {
  const TdnnModel m = toy_net(15);
  const TdnnStepResult r = tdnn_train_step(m, asr_of(randn(6, 3, 16)), labels_of({0, 1, 2, 3, 0, 1}), 0.0);
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    CHECK(r.model.layers[k].weight == m.layers[k].weight);
    CHECK(r.model.layers[k].bias == m.layers[k].bias);
  }
}

TEST_CASE("training on separable data keeps lowering the loss") {
  // Two classes split by the sign of the first feature.
  Matrix x = randn(64, 3, 17);
  SenoneLabels l;
  for (int t = 0; t < 64; ++t) {
    x(t, 0) += x(t, 0) > 0 ? 2.0 : -2.0;
    l.labels.push_back(x(t, 0) > 0 ? 1 : 0);
  }
  TdnnModel m = init_tdnn(3, {{{0}, 8, 2, 2.0}, {{0}, 0, 1, 2.0}}, 2, 18);
  std::vector<double> losses;
  for (int step = 0; step < 200; ++step) {
    const TdnnStepResult r = tdnn_train_step(m, asr_of(x), l, 0.05);
    losses.push_back(r.loss);
    m = r.model;
  }
  for (std::size_t k = 10; k < losses.size(); ++k) CHECK(losses[k] < losses[k - 10]);
}

TEST_CASE("topology strings") {
  CHECK(parse_topology("desk").size() == desk_topology().size());
  CHECK(parse_topology("full").size() == 6);
  const auto t = parse_topology("-2..2:40/4;-1,0,1:40/4;0");
  REQUIRE(t.size() == 3);
  CHECK(t[0].offsets == std::vector<int>{-2, -1, 0, 1, 2});
  CHECK(t[1].width == 40);
  CHECK(t[1].group_size == 4);
  CHECK_THROWS_AS(parse_topology("nonsense;;"), Error);
  init_tdnn(40, full_topology(), 64, 1).validate();
}

TEST_CASE("posterior files round trip, dense and sparse") {
  const auto dir = svkit::testing::scratch_dir("posteriors");
  const PosteriorMatrix p = tdnn_forward(toy_net(19), asr_of(randn(12, 3, 20)));
  write_posteriors(dir / "dense.post", p);
  CHECK(load_posteriors(dir / "dense.post").gamma == p.gamma);

  write_posteriors_sparse(dir / "sparse.post", p, 3);
  const PosteriorMatrix s = load_posteriors(dir / "sparse.post");
  REQUIRE(s.gamma.rows() == 12);
  for (Eigen::Index t = 0; t < 12; ++t) {
    CHECK((s.gamma.row(t).array() > 0).count() == 3);
    CHECK(std::abs(s.gamma.row(t).sum() - 1.0) < 1e-12);
    // The kept entries are the three largest, renormalized.
    Vector row = p.gamma.row(t).transpose();
    std::vector<double> v(row.data(), row.data() + row.size());
    std::sort(v.begin(), v.end(), std::greater<>());
    const double kept = v[0] + v[1] + v[2];
    for (Eigen::Index c = 0; c < 4; ++c)
      if (p.gamma(t, c) >= v[2]) CHECK(std::abs(s.gamma(t, c) - p.gamma(t, c) / kept) < 1e-12);
  }
}

TEST_CASE("posterior rows far from one are rejected") {
  const auto dir = svkit::testing::scratch_dir("posteriors_bad");
  PosteriorMatrix p;
  p.gamma = Matrix::Constant(2, 2, 0.5);
  p.gamma(1, 0) = 1.0;
  write_posteriors(dir / "bad.post", p);
  try {
    load_posteriors(dir / "bad.post");
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kFormat);
  }
}

TEST_CASE("resolve_posteriors delegates to each source") {
  const auto dir = svkit::testing::scratch_dir("resolve");
  const TdnnModel net = toy_net(21);
  FeatureMatrix asr = asr_of(randn(10, 3, 22));
  FeatureMatrix spk;
  spk.frames = randn(10, 2, 23);
  GmmModel g;
  g.weights = Vector::Constant(2, 0.5);
  g.means = randn(2, 2, 24);
  g.variances = Matrix::Ones(2, 2);
  const SenoneLabels labels = labels_of({0, 1, 2, 3, 0, 1, 2, 3, 0, 1});
  UtteranceStreams u{"utt1", &spk, &asr, &labels};

  CHECK(resolve_posteriors(GmmAlignment{&g}, u).gamma == frame_posteriors(g, spk).gamma);
  const PosteriorMatrix t = tdnn_forward(net, asr);
  CHECK(resolve_posteriors(TdnnAlignment{&net}, u).gamma == t.gamma);
  write_posteriors(dir / "utt1.post", t);
  CHECK(resolve_posteriors(FileAlignment{dir}, u).gamma == t.gamma);
  const PosteriorMatrix o = resolve_posteriors(OracleAlignment{4}, u);
  CHECK(o.gamma.sum() == 10.0);
  CHECK(o.gamma(5, 1) == 1.0);

  UtteranceStreams missing{"utt1", &spk, nullptr, nullptr};
  try {
    resolve_posteriors(TdnnAlignment{&net}, missing);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kConfiguration);
  }
}

TEST_CASE("model and label files round trip") {
  const auto dir = svkit::testing::scratch_dir("tdnn_io");
  const TdnnModel m = toy_net(25);
  write_tdnn(dir / "m.nnet", m);
  const TdnnModel back = read_tdnn(dir / "m.nnet");
  REQUIRE(back.layers.size() == m.layers.size());
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    CHECK(back.layers[k].weight == m.layers[k].weight);
    CHECK(back.layers[k].offsets == m.layers[k].offsets);
    CHECK(back.layers[k].activation == m.layers[k].activation);
  }
  const SenoneLabels l = labels_of({3, 1, 4, 1, 5});
  write_labels(dir / "a.lab", l);
  CHECK(read_labels(dir / "a.lab").labels == l.labels);
}
