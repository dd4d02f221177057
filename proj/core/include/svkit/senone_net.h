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

#ifndef SVKIT_SENONE_NET_H_
#define SVKIT_SENONE_NET_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "svkit/common.h"
#include "svkit/frontend.h"
#include "svkit/gmm.h"

namespace svkit {

enum class Activation : std::uint8_t { kNone = 0, kPnorm = 1, kSoftmax = 2 };

// One time-delay layer: splice the input at `offsets`, apply an affine map,
// then the activation. weight is out x (in * |offsets|).
struct TdnnLayer {
  std::vector<int> offsets;
  Matrix weight;
  Vector bias;
  Activation activation = Activation::kNone;
  double p = 2.0;      // p-norm order
  int group_size = 1;  // p-norm group size

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
};

struct TdnnModel {
  std::vector<TdnnLayer> layers;

  Eigen::Index input_dim() const { return layers.front().input_dim(); }
  Eigen::Index num_senones() const { return layers.back().output_dim(); }
  // Throws kConfiguration when widths do not chain or the last layer is not
  // a softmax.
  void validate() const;
};

struct TdnnLayerSpec {
  std::vector<int> offsets;
  int width = 80;  // pre-activation width; ignored for the output layer
  int group_size = 8;
  double p = 2.0;
};

// Hidden p-norm layers followed by a softmax over num_senones. The last spec
// entry describes the output layer (only its offsets are used).
TdnnModel init_tdnn(Eigen::Index input_dim, const std::vector<TdnnLayerSpec> &topology,
                    int num_senones, std::uint64_t seed);

// Desk topology: {-2..2}, {-1,0,1}, {-2,0,2}, {0}; hidden width 80, group 8.
std::vector<TdnnLayerSpec> desk_topology();
// Six-layer multisplice topology with 3500-wide p-norm inputs, group 10.
std::vector<TdnnLayerSpec> full_topology();
// "desk", "full", or "o,o,o:width/group;...;o,o" (last entry = output).
std::vector<TdnnLayerSpec> parse_topology(const std::string &text);

struct SenoneLabels {
  static constexpr std::uint16_t kIgnore = 0xFFFF;
  std::vector<std::uint16_t> labels;

  std::size_t size() const { return labels.size(); }
};

// Row t of the output concatenates rows t+o for each offset, with indices
// clamped to the utterance.
Matrix splice_frames(const Matrix &frames, std::span<const int> offsets);
FeatureMatrix splice(const FeatureMatrix &features, std::span<const int> offsets);

// (sum_{i in group} |x_i|^p)^(1/p) for consecutive groups.
Vector pnorm_activation(const Eigen::Ref<const Vector> &x, double p, int group_size);

PosteriorMatrix tdnn_forward(const TdnnModel &model, const FeatureMatrix &asr_features);

struct TdnnGradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
  double loss = 0.0;  // mean frame cross-entropy over labelled frames
};

// Frames labelled SenoneLabels::kIgnore still provide context but carry no
// loss.
TdnnGradients tdnn_gradients(const TdnnModel &model, const FeatureMatrix &asr_features,
                             const SenoneLabels &labels);

struct TdnnStepResult {
  TdnnModel model;
  double loss = 0.0;  // under the input model
};

TdnnStepResult tdnn_train_step(const TdnnModel &model, const FeatureMatrix &asr_features,
                               const SenoneLabels &labels, double learning_rate);

struct TdnnTrainOptions {
  int batch_size = 128;
  int steps = 3000;
  double learning_rate = 0.01;
  int plateau_window = 200;  // steps per loss average
  double plateau_tolerance = 1e-3;
  std::uint64_t seed = 7;
};

struct TdnnTrainResult {
  TdnnModel model;
  std::vector<double> window_losses;
};

// Plain minibatch SGD over random contiguous chunks; the learning rate halves
// whenever a window's mean loss fails to improve on the previous window.
TdnnTrainResult train_tdnn(TdnnModel model, std::span<const FeatureMatrix> features,
                           std::span<const SenoneLabels> labels,
                           const TdnnTrainOptions &opts);

void write_tdnn(const std::filesystem::path &path, const TdnnModel &model);
TdnnModel read_tdnn(const std::filesystem::path &path);

// Labels file: "SVKB", version, T (u32), T x u16.
void write_labels(const std::filesystem::path &path, const SenoneLabels &labels);
SenoneLabels read_labels(const std::filesystem::path &path);

// Posterior file: "SVKP", version, T, C, flag (0 dense, 1 sparse).
// Dense payload is T*C f64 row-major; sparse is, per frame, a u32 count then
// (u32 index, f64 value) pairs.
void write_posteriors(const std::filesystem::path &path, const PosteriorMatrix &post);
// Keeps the top_k entries per frame, renormalized to sum to one.
void write_posteriors_sparse(const std::filesystem::path &path, const PosteriorMatrix &post,
                             int top_k);
// Rows within 1e-6 of unity are renormalized; anything else is a format error.
PosteriorMatrix load_posteriors(const std::filesystem::path &path);

// One utterance as seen by the alignment sources. The asr stream and labels
// are optional; sources that need them fail if they are absent.
struct UtteranceStreams {
  std::string id;
  const FeatureMatrix *speaker = nullptr;
  const FeatureMatrix *asr = nullptr;
  const SenoneLabels *labels = nullptr;
};

struct GmmAlignment {
  const GmmModel *model = nullptr;
};
struct TdnnAlignment {
  const TdnnModel *model = nullptr;
};
// Reads <dir>/<utterance id>.post
struct FileAlignment {
  std::filesystem::path dir;
};
// Ground-truth labels as one-hot posteriors.
struct OracleAlignment {
  int num_classes = 0;
};
using AlignmentSource = std::variant<GmmAlignment, TdnnAlignment, FileAlignment, OracleAlignment>;

PosteriorMatrix resolve_posteriors(const AlignmentSource &source, const UtteranceStreams &utt);

PosteriorMatrix one_hot_posteriors(const SenoneLabels &labels, int num_classes);

}  // namespace svkit

#endif  // SVKIT_SENONE_NET_H_
