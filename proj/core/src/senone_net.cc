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

#include "svkit/senone_net.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "svkit/binary_io.h"

namespace svkit {
namespace {

constexpr std::uint8_t kTdnnVersion = 1;
constexpr std::uint8_t kLabelsVersion = 1;

struct LayerCache {
  Matrix spliced;
  Matrix pre;
  Matrix out;
};

Matrix pnorm_rows(const Matrix &pre, double p, int group) {
  const Eigen::Index groups = pre.cols() / group;
  Matrix out(pre.rows(), groups);
  for (Eigen::Index g = 0; g < groups; ++g) {
    auto block = pre.middleCols(g * group, group);
    if (p == 2.0)
      out.col(g) = block.rowwise().norm();
    else
      out.col(g) = block.cwiseAbs().array().pow(p).rowwise().sum().pow(1.0 / p).matrix();
  }
  return out;
}

Matrix log_softmax_rows(const Matrix &logits) {
  Matrix out = logits;
  for (Eigen::Index t = 0; t < out.rows(); ++t) {
    const double lse = log_sum_exp(out.row(t).transpose());
    out.row(t).array() -= lse;
  }
  return out;
}

// Runs the network, keeping every intermediate. The last layer's `out` holds
// log-posteriors.
std::vector<LayerCache> forward_cached(const TdnnModel &model, const Matrix &input) {
  std::vector<LayerCache> caches(model.layers.size());
  const Matrix *current = &input;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const TdnnLayer &layer = model.layers[l];
    LayerCache &c = caches[l];
    c.spliced = splice_frames(*current, layer.offsets);
    c.pre.noalias() = c.spliced * layer.weight.transpose();
    c.pre.rowwise() += layer.bias.transpose();
    switch (layer.activation) {
      case Activation::kNone: c.out = c.pre; break;
      case Activation::kPnorm: c.out = pnorm_rows(c.pre, layer.p, layer.group_size); break;
      case Activation::kSoftmax: c.out = log_softmax_rows(c.pre); break;
    }
    current = &c.out;
  }
  return caches;
}

int left_context(const TdnnModel &model) {
  int total = 0;
  for (const auto &l : model.layers) total += std::max(0, -l.offsets.front());
  return total;
}

int right_context(const TdnnModel &model) {
  int total = 0;
  for (const auto &l : model.layers) total += std::max(0, l.offsets.back());
  return total;
}

void check_input(const TdnnModel &model, const FeatureMatrix &features) {
  if (model.layers.empty()) fail(ErrorCode::kConfiguration, "empty TDNN");
  if (features.dim() != model.input_dim())
    fail(ErrorCode::kDimensionMismatch, "ASR feature width " + std::to_string(features.dim()) +
                                            " does not match TDNN input width " +
                                            std::to_string(model.input_dim()));
}

std::vector<int> parse_offsets(const std::string &text) {
  std::vector<int> offsets;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const int lo = std::stoi(item.substr(0, dots)), hi = std::stoi(item.substr(dots + 2));
      for (int o = lo; o <= hi; ++o) offsets.push_back(o);
    } else {
      offsets.push_back(std::stoi(item));
    }
  }
  return offsets;
}

}  // namespace

Eigen::Index TdnnLayer::input_dim() const {
  return offsets.empty() ? 0 : weight.cols() / static_cast<Eigen::Index>(offsets.size());
}

Eigen::Index TdnnLayer::output_dim() const {
  return activation == Activation::kPnorm ? weight.rows() / group_size : weight.rows();
}

void TdnnModel::validate() const {
  if (layers.empty()) fail(ErrorCode::kConfiguration, "TDNN has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const TdnnLayer &layer = layers[l];
    if (layer.offsets.empty() || !std::is_sorted(layer.offsets.begin(), layer.offsets.end()))
      fail(ErrorCode::kConfiguration, "layer " + std::to_string(l) + ": offsets must be sorted and nonempty");
    if (layer.weight.cols() % static_cast<Eigen::Index>(layer.offsets.size()) != 0)
      fail(ErrorCode::kConfiguration, "layer " + std::to_string(l) + ": weight width is not a splice multiple");
    if (layer.bias.size() != layer.weight.rows())
      fail(ErrorCode::kConfiguration, "layer " + std::to_string(l) + ": bias length mismatch");
    if (layer.activation == Activation::kPnorm &&
        (layer.group_size < 1 || layer.weight.rows() % layer.group_size != 0))
      fail(ErrorCode::kConfiguration, "layer " + std::to_string(l) + ": p-norm group does not divide width");
    if (l > 0 && layer.input_dim() != layers[l - 1].output_dim())
      fail(ErrorCode::kConfiguration, "layer " + std::to_string(l) + ": input width does not chain");
  }
  if (layers.back().activation != Activation::kSoftmax)
    fail(ErrorCode::kConfiguration, "final TDNN layer must be softmax");
}

TdnnModel init_tdnn(Eigen::Index input_dim, const std::vector<TdnnLayerSpec> &topology,
                    int num_senones, std::uint64_t seed) {
  if (topology.empty()) fail(ErrorCode::kConfiguration, "empty TDNN topology");
  if (num_senones < 1) fail(ErrorCode::kConfiguration, "need at least one senone");
  std::mt19937_64 rng(seed);
  TdnnModel model;
  Eigen::Index in = input_dim;
  for (std::size_t l = 0; l < topology.size(); ++l) {
    const TdnnLayerSpec &spec = topology[l];
    const bool output = l + 1 == topology.size();
    TdnnLayer layer;
    layer.offsets = spec.offsets;
    layer.activation = output ? Activation::kSoftmax : Activation::kPnorm;
    layer.p = spec.p;
    layer.group_size = output ? 1 : spec.group_size;
    const Eigen::Index fan_in = in * static_cast<Eigen::Index>(spec.offsets.size());
    const Eigen::Index fan_out = output ? num_senones : spec.width;
    if (!output && (spec.group_size < 1 || spec.width % spec.group_size != 0))
      fail(ErrorCode::kConfiguration, "p-norm group size must divide the layer width");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    layer.weight.resize(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = u(rng);
    layer.bias = Vector::Zero(fan_out);
    in = layer.output_dim();
    model.layers.push_back(std::move(layer));
  }
  model.validate();
  return model;
}

std::vector<TdnnLayerSpec> desk_topology() {
  return {{{-2, -1, 0, 1, 2}, 80, 8, 2.0},
          {{-1, 0, 1}, 80, 8, 2.0},
          {{-2, 0, 2}, 80, 8, 2.0},
          {{0}, 0, 1, 2.0}};
}

std::vector<TdnnLayerSpec> full_topology() {
  return {{{-2, -1, 0, 1, 2}, 3500, 10, 2.0},
          {{-2, -1, 0, 1}, 3500, 10, 2.0},
          {{0}, 3500, 10, 2.0},
          {{-3, -2, -1, 0, 1, 2, 3}, 3500, 10, 2.0},
          {{-7, -6, -5, -4, -3, -2, -1, 0, 1, 2}, 3500, 10, 2.0},
          {{0}, 0, 1, 2.0}};
}

std::vector<TdnnLayerSpec> parse_topology(const std::string &text) {
  if (text == "desk") return desk_topology();
  if (text == "full") return full_topology();
  std::vector<TdnnLayerSpec> specs;
  std::stringstream ss(text);
  std::string entry;
  try {
    while (std::getline(ss, entry, ';')) {
      TdnnLayerSpec spec;
      const auto colon = entry.find(':');
      spec.offsets = parse_offsets(entry.substr(0, colon));
      if (colon != std::string::npos) {
        const std::string shape = entry.substr(colon + 1);
        const auto slash = shape.find('/');
        spec.width = std::stoi(shape.substr(0, slash));
        spec.group_size = slash == std::string::npos ? 1 : std::stoi(shape.substr(slash + 1));
      }
      std::sort(spec.offsets.begin(), spec.offsets.end());
      specs.push_back(std::move(spec));
    }
  } catch (const std::logic_error &) {
    fail(ErrorCode::kConfiguration, "cannot parse TDNN topology '" + text + "'");
  }
  if (specs.empty()) fail(ErrorCode::kConfiguration, "empty TDNN topology");
  return specs;
}

Matrix splice_frames(const Matrix &frames, std::span<const int> offsets) {
  const Eigen::Index t_max = frames.rows(), d = frames.cols();
  Matrix out(t_max, d * static_cast<Eigen::Index>(offsets.size()));
  if (t_max == 0) return out;
  for (std::size_t j = 0; j < offsets.size(); ++j) {
    for (Eigen::Index t = 0; t < t_max; ++t) {
      const Eigen::Index src = std::clamp<Eigen::Index>(t + offsets[j], 0, t_max - 1);
      out.block(t, static_cast<Eigen::Index>(j) * d, 1, d) = frames.row(src);
    }
  }
  return out;
}

FeatureMatrix splice(const FeatureMatrix &features, std::span<const int> offsets) {
  if (offsets.empty()) fail(ErrorCode::kConfiguration, "splice offsets must be nonempty");
  FeatureMatrix out = features;
  out.frames = splice_frames(features.frames, offsets);
  return out;
}

Vector pnorm_activation(const Eigen::Ref<const Vector> &x, double p, int group_size) {
  if (group_size < 1 || x.size() % group_size != 0)
    fail(ErrorCode::kConfiguration, "p-norm group size does not divide the input length");
  Vector out(x.size() / group_size);
  for (Eigen::Index g = 0; g < out.size(); ++g)
    out(g) = std::pow(x.segment(g * group_size, group_size).cwiseAbs().array().pow(p).sum(),
                      1.0 / p);
  return out;
}

PosteriorMatrix tdnn_forward(const TdnnModel &model, const FeatureMatrix &asr_features) {
  check_input(model, asr_features);
  auto caches = forward_cached(model, asr_features.frames);
  PosteriorMatrix post;
  post.gamma = caches.back().out.array().exp().matrix();
  // exp(log-softmax) sums to one up to rounding; renormalize to remove it.
  post.gamma.array().colwise() /= post.gamma.rowwise().sum().array();
  return post;
}

TdnnGradients tdnn_gradients(const TdnnModel &model, const FeatureMatrix &asr_features,
                             const SenoneLabels &labels) {
  check_input(model, asr_features);
  const Eigen::Index t_max = asr_features.num_frames();
  if (static_cast<Eigen::Index>(labels.size()) != t_max)
    fail(ErrorCode::kAlignment, "label count differs from frame count");
  std::size_t n_labelled = 0;
  for (auto l : labels.labels) {
    if (l == SenoneLabels::kIgnore) continue;
    if (l >= model.num_senones()) fail(ErrorCode::kFormat, "label index out of range");
    ++n_labelled;
  }
  if (t_max == 0 || n_labelled == 0) fail(ErrorCode::kEmptyInput, "empty training batch");

  auto caches = forward_cached(model, asr_features.frames);
  const double scale = 1.0 / static_cast<double>(n_labelled);

  TdnnGradients grads;
  grads.weight.resize(model.layers.size());
  grads.bias.resize(model.layers.size());

  // d(loss)/d(pre-softmax) = (p - y) / n over labelled frames.
  const Matrix &log_post = caches.back().out;
  Matrix d_pre = log_post.array().exp().matrix();
  for (Eigen::Index t = 0; t < t_max; ++t) {
    const auto l = labels.labels[t];
    if (l == SenoneLabels::kIgnore) {
      d_pre.row(t).setZero();
      continue;
    }
    grads.loss -= log_post(t, l);
    d_pre(t, l) -= 1.0;
  }
  grads.loss *= scale;
  d_pre *= scale;

  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const TdnnLayer &layer = model.layers[li];
    const LayerCache &c = caches[li];
    grads.weight[li].noalias() = d_pre.transpose() * c.spliced;
    grads.bias[li] = d_pre.colwise().sum().transpose();
    if (li == 0) break;

    const Matrix d_spliced = d_pre * layer.weight;
    const Eigen::Index in = layer.input_dim();
    Matrix d_out = Matrix::Zero(t_max, in);
    for (std::size_t j = 0; j < layer.offsets.size(); ++j) {
      for (Eigen::Index t = 0; t < t_max; ++t) {
        const Eigen::Index src = std::clamp<Eigen::Index>(t + layer.offsets[j], 0, t_max - 1);
        d_out.row(src) += d_spliced.block(t, static_cast<Eigen::Index>(j) * in, 1, in);
      }
    }

    const TdnnLayer &below = model.layers[li - 1];
    const LayerCache &cb = caches[li - 1];
    switch (below.activation) {
      case Activation::kNone:
        d_pre = d_out;
        break;
      case Activation::kPnorm: {
        d_pre.resize(t_max, cb.pre.cols());
        const int g = below.group_size;
        for (Eigen::Index t = 0; t < t_max; ++t) {
          for (Eigen::Index k = 0; k < cb.out.cols(); ++k) {
            const double y = cb.out(t, k);
            for (int i = 0; i < g; ++i) {
              const double z = cb.pre(t, k * g + i);
              double dz = 0.0;
              if (y > 0.0) {
                dz = below.p == 2.0 ? z / y
                                    : std::copysign(std::pow(std::abs(z), below.p - 1.0), z) /
                                          std::pow(y, below.p - 1.0);
              }
              d_pre(t, k * g + i) = d_out(t, k) * dz;
            }
          }
        }
        break;
      }
      case Activation::kSoftmax: {
        // Hidden softmax: Jacobian-vector product.
        const Matrix prob = cb.out.array().exp().matrix();
        d_pre.resize(t_max, prob.cols());
        for (Eigen::Index t = 0; t < t_max; ++t) {
          const double dot = d_out.row(t).dot(prob.row(t));
          d_pre.row(t) = prob.row(t).cwiseProduct(d_out.row(t)).array() - prob.row(t).array() * dot;
        }
        break;
      }
    }
  }
  return grads;
}

TdnnStepResult tdnn_train_step(const TdnnModel &model, const FeatureMatrix &asr_features,
                               const SenoneLabels &labels, double learning_rate) {
  if (!(learning_rate >= 0.0)) fail(ErrorCode::kConfiguration, "learning rate must be >= 0");
  const TdnnGradients grads = tdnn_gradients(model, asr_features, labels);
  TdnnStepResult result{model, grads.loss};
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    result.model.layers[l].weight -= learning_rate * grads.weight[l];
    result.model.layers[l].bias -= learning_rate * grads.bias[l];
  }
  return result;
}

TdnnTrainResult train_tdnn(TdnnModel model, std::span<const FeatureMatrix> features,
                           std::span<const SenoneLabels> labels,
                           const TdnnTrainOptions &opts) {
  if (features.empty() || features.size() != labels.size())
    fail(ErrorCode::kConfiguration, "TDNN training needs matching feature/label lists");
  model.validate();
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick_utt(0, features.size() - 1);
  const int left = left_context(model), right = right_context(model);
  double lr = opts.learning_rate;
  double window_sum = 0.0, prev_window = std::numeric_limits<double>::infinity();
  int window_count = 0;
  TdnnTrainResult result;

  for (int step = 0; step < opts.steps; ++step) {
    const std::size_t u = pick_utt(rng);
    const FeatureMatrix &feats = features[u];
    const Eigen::Index t_max = feats.num_frames();
    const Eigen::Index batch = std::min<Eigen::Index>(opts.batch_size, t_max);
    std::uniform_int_distribution<Eigen::Index> pick_start(0, t_max - batch);
    const Eigen::Index start = pick_start(rng);
    const Eigen::Index lo = std::max<Eigen::Index>(0, start - left);
    const Eigen::Index hi = std::min<Eigen::Index>(t_max, start + batch + right);

    FeatureMatrix chunk;
    chunk.frame_shift = feats.frame_shift;
    chunk.kind = feats.kind;
    chunk.frames = feats.frames.middleRows(lo, hi - lo);
    SenoneLabels chunk_labels;
    chunk_labels.labels.assign(hi - lo, SenoneLabels::kIgnore);
    for (Eigen::Index t = start; t < start + batch; ++t)
      chunk_labels.labels[t - lo] = labels[u].labels[t];
    if (std::all_of(chunk_labels.labels.begin(), chunk_labels.labels.end(),
                    [](auto l) { return l == SenoneLabels::kIgnore; }))
      continue;

    TdnnStepResult r = tdnn_train_step(model, chunk, chunk_labels, lr);
    model = std::move(r.model);
    window_sum += r.loss;
    if (++window_count == opts.plateau_window) {
      const double mean = window_sum / window_count;
      result.window_losses.push_back(mean);
      spdlog::debug("TDNN step {}: mean loss {:.5f}, lr {}", step + 1, mean, lr);
      if (mean > prev_window * (1.0 - opts.plateau_tolerance)) lr *= 0.5;
      prev_window = mean;
      window_sum = 0.0;
      window_count = 0;
    }
  }
  result.model = std::move(model);
  return result;
}

void write_tdnn(const std::filesystem::path &path, const TdnnModel &model) {
  model.validate();
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    w.magic("SVKN");
    w.u8(kTdnnVersion);
    w.u32(static_cast<std::uint32_t>(model.layers.size()));
    for (const TdnnLayer &layer : model.layers) {
      w.u32(static_cast<std::uint32_t>(layer.offsets.size()));
      for (int o : layer.offsets) w.i32(o);
      w.u8(static_cast<std::uint8_t>(layer.activation));
      w.f64(layer.p);
      w.u32(static_cast<std::uint32_t>(layer.group_size));
      w.u32(static_cast<std::uint32_t>(layer.weight.rows()));
      w.u32(static_cast<std::uint32_t>(layer.weight.cols()));
      w.matrix(layer.weight);
      w.vector(layer.bias);
    }
  });
}

TdnnModel read_tdnn(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  r.expect_magic("SVKN");
  if (r.u8() != kTdnnVersion) fail(ErrorCode::kFormat, path.string() + ": unsupported version");
  TdnnModel model;
  model.layers.resize(r.u32());
  for (TdnnLayer &layer : model.layers) {
    layer.offsets.resize(r.u32());
    for (int &o : layer.offsets) o = r.i32();
    const std::uint8_t act = r.u8();
    if (act > 2) fail(ErrorCode::kFormat, path.string() + ": unknown activation");
    layer.activation = static_cast<Activation>(act);
    layer.p = r.f64();
    layer.group_size = static_cast<int>(r.u32());
    const std::uint32_t rows = r.u32(), cols = r.u32();
    layer.weight = r.matrix(rows, cols);
    layer.bias = r.vector(rows);
  }
  r.expect_eof();
  model.validate();
  return model;
}

void write_labels(const std::filesystem::path &path, const SenoneLabels &labels) {
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    w.magic("SVKB");
    w.u8(kLabelsVersion);
    w.u32(static_cast<std::uint32_t>(labels.size()));
    for (auto l : labels.labels) w.u16(l);
  });
}

SenoneLabels read_labels(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  r.expect_magic("SVKB");
  if (r.u8() != kLabelsVersion) fail(ErrorCode::kFormat, path.string() + ": unsupported version");
  SenoneLabels labels;
  labels.labels.resize(r.u32());
  for (auto &l : labels.labels) l = r.u16();
  r.expect_eof();
  return labels;
}

PosteriorMatrix one_hot_posteriors(const SenoneLabels &labels, int num_classes) {
  PosteriorMatrix post;
  post.gamma = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels.labels[t] >= num_classes)
      fail(ErrorCode::kFormat, "label " + std::to_string(labels.labels[t]) + " out of range");
    post.gamma(static_cast<Eigen::Index>(t), labels.labels[t]) = 1.0;
  }
  return post;
}

PosteriorMatrix resolve_posteriors(const AlignmentSource &source, const UtteranceStreams &utt) {
  struct Visitor {
    const UtteranceStreams &utt;
    PosteriorMatrix operator()(const GmmAlignment &s) const {
      if (!utt.speaker)
        fail(ErrorCode::kConfiguration, utt.id + ": GMM alignment needs speaker features");
      return frame_posteriors(*s.model, *utt.speaker);
    }
    PosteriorMatrix operator()(const TdnnAlignment &s) const {
      if (!utt.asr) fail(ErrorCode::kConfiguration, utt.id + ": TDNN alignment needs ASR features");
      return tdnn_forward(*s.model, *utt.asr);
    }
    PosteriorMatrix operator()(const FileAlignment &s) const {
      return load_posteriors(s.dir / (utt.id + ".post"));
    }
    PosteriorMatrix operator()(const OracleAlignment &s) const {
      if (!utt.labels)
        fail(ErrorCode::kConfiguration, utt.id + ": oracle alignment needs ground-truth labels");
      return one_hot_posteriors(*utt.labels, s.num_classes);
    }
  };
  return std::visit(Visitor{utt}, source);
}

}  // namespace svkit
