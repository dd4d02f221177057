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

#ifndef SVKIT_FRONTEND_H_
#define SVKIT_FRONTEND_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "svkit/common.h"

namespace svkit {

struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 8000;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class FeatureKind : std::uint8_t { kSpeaker = 0, kAsr = 1 };

// T x D, one frame per row.
struct FeatureMatrix {
  Matrix frames;
  double frame_shift = 0.01;
  FeatureKind kind = FeatureKind::kSpeaker;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

struct VadMask {
  std::vector<std::uint8_t> voiced;
  double frame_shift = 0.01;

  std::size_t size() const { return voiced.size(); }
  std::size_t num_voiced() const;
  double voiced_fraction() const;
};

struct MfccOptions {
  int num_mel_bins = 23;
  double preemph = 0.97;
  double low_freq = 20.0;
  double high_freq = 0.0;  // <= 0 means Nyquist
  bool remove_dc = true;
  // Replace C0 with the log frame energy (used by energy_vad).
  bool use_energy = true;
  FeatureKind kind = FeatureKind::kSpeaker;
};

// Standard telephone MFCC front-end: pre-emphasis, Hamming window, power
// spectrum, triangular mel filterbank, log, orthonormal DCT-II.
FeatureMatrix compute_mfcc(const AudioSignal &signal, int n_coeffs,
                           double frame_len, double frame_shift,
                           const MfccOptions &opts = {});

// Appends delta and delta-delta blocks computed by regression over
// +-context frames (edge frames replicated). Output width is 3x input.
FeatureMatrix append_deltas(const FeatureMatrix &features, int context = 2);

// Subtracts from each frame the mean of a centered window of
// round(window / frame_shift) frames, clipped at the utterance edges.
FeatureMatrix sliding_cmn(const FeatureMatrix &features, double window);

// A frame is voiced iff its log energy (column 0) exceeds the utterance
// mean log energy plus threshold_offset (given in dB).
VadMask energy_vad(const FeatureMatrix &features, double threshold_offset = -3.0);

enum class KeepMode {
  kRaw,     // keep seconds of signal, voiced or not
  kActive,  // extend until keep seconds of voiced frames are included
};

// Half-open span of the original signal selected by the truncation protocol.
struct TruncationSpan {
  double begin = 0.0;  // seconds
  double end = 0.0;
};

// Locates the point immediately after the frame where cumulative active
// speech reaches skip_active, then selects keep seconds from there. Throws
// kTooShortUtterance when the mask holds no more than skip_active seconds of
// active speech. The span is shorter than keep when the signal runs out.
TruncationSpan locate_truncation(const VadMask &vad, double skip_active,
                                 double keep, KeepMode mode = KeepMode::kRaw);

AudioSignal truncate_utterance(const AudioSignal &signal, const VadMask &vad,
                               double skip_active, double keep,
                               KeepMode mode = KeepMode::kRaw);

// Same protocol applied to frame-domain data (rows of the locating span).
FeatureMatrix truncate_features(const FeatureMatrix &features, const VadMask &vad,
                                double skip_active, double keep,
                                KeepMode mode = KeepMode::kRaw);

// Feature matrix file: "SVKF", version, kind, T, D (u32), T*D f64 row-major.
void write_features(const std::filesystem::path &path, const FeatureMatrix &features);
FeatureMatrix read_features(const std::filesystem::path &path);

// VAD mask file: "SVKV", version, T (u32), T bytes.
void write_vad(const std::filesystem::path &path, const VadMask &vad);
VadMask read_vad(const std::filesystem::path &path);

// 16-bit little-endian PCM mono RIFF/WAVE.
AudioSignal read_wav(const std::filesystem::path &path);
void write_wav(const std::filesystem::path &path, const AudioSignal &signal);

}  // namespace svkit

#endif  // SVKIT_FRONTEND_H_
