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

#include "svkit/frontend.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "svkit/binary_io.h"

namespace svkit {
namespace {

constexpr std::uint8_t kFeatureVersion = 1;
constexpr std::uint8_t kVadVersion = 1;
constexpr double kLogFloor = 1e-10;

double mel_scale(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// num_bins x (fft_size/2 + 1) triangular filters evenly spaced on the mel axis.
Matrix mel_filterbank(int num_bins, int fft_size, int sample_rate, double low,
                      double high) {
  const int n_fft_bins = fft_size / 2 + 1;
  const double mel_low = mel_scale(low), mel_high = mel_scale(high);
  const double delta = (mel_high - mel_low) / (num_bins + 1);
  Matrix fb = Matrix::Zero(num_bins, n_fft_bins);
  for (int b = 0; b < num_bins; ++b) {
    const double left = mel_low + b * delta;
    const double center = left + delta;
    const double right = center + delta;
    for (int k = 0; k < n_fft_bins; ++k) {
      const double mel = mel_scale(static_cast<double>(k) * sample_rate / fft_size);
      if (mel > left && mel < right) {
        fb(b, k) = mel <= center ? (mel - left) / (center - left)
                                 : (right - mel) / (right - center);
      }
    }
  }
  return fb;
}

// Orthonormal DCT-II, rows 0..n_coeffs-1.
Matrix dct_matrix(int n_coeffs, int n) {
  Matrix d(n_coeffs, n);
  for (int k = 0; k < n_coeffs; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int j = 0; j < n; ++j)
      d(k, j) = scale * std::cos(std::numbers::pi * k * (j + 0.5) / n);
  }
  return d;
}

Matrix regression_deltas(const Matrix &x, int context) {
  const Eigen::Index t_max = x.rows();
  double denom = 0.0;
  for (int n = 1; n <= context; ++n) denom += 2.0 * n * n;
  Matrix d = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < t_max; ++t) {
    for (int n = 1; n <= context; ++n) {
      const Eigen::Index fwd = std::min<Eigen::Index>(t + n, t_max - 1);
      const Eigen::Index bwd = std::max<Eigen::Index>(t - n, 0);
      d.row(t) += n * (x.row(fwd) - x.row(bwd));
    }
  }
  return d / denom;
}

}  // namespace

std::size_t VadMask::num_voiced() const {
  return static_cast<std::size_t>(std::count(voiced.begin(), voiced.end(), 1));
}

double VadMask::voiced_fraction() const {
  return voiced.empty() ? 0.0 : static_cast<double>(num_voiced()) / voiced.size();
}

FeatureMatrix compute_mfcc(const AudioSignal &signal, int n_coeffs,
                           double frame_len, double frame_shift,
                           const MfccOptions &opts) {
  if (signal.sample_rate <= 0) fail(ErrorCode::kConfiguration, "sample rate must be positive");
  if (n_coeffs < 1 || n_coeffs > opts.num_mel_bins)
    fail(ErrorCode::kConfiguration, "n_coeffs must be in [1, num_mel_bins]");
  const int len = static_cast<int>(std::lround(frame_len * signal.sample_rate));
  const int shift = static_cast<int>(std::lround(frame_shift * signal.sample_rate));
  if (len <= 0 || shift <= 0) fail(ErrorCode::kConfiguration, "frame length/shift must be positive");
  const auto n_samples = static_cast<long>(signal.samples.size());
  if (n_samples < len) fail(ErrorCode::kEmptyInput, "signal shorter than one frame");

  const long n_frames = (n_samples - len) / shift + 1;
  const int fft_size = next_pow2(len);
  const double high = opts.high_freq > 0 ? opts.high_freq : signal.sample_rate / 2.0;
  const Matrix fbank = mel_filterbank(opts.num_mel_bins, fft_size, signal.sample_rate,
                                      opts.low_freq, high);
  const Matrix dct = dct_matrix(n_coeffs, opts.num_mel_bins);

  std::vector<double> window(len);
  for (int i = 0; i < len; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (len - 1));

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(fft_size);
  std::vector<std::complex<double>> spectrum;
  Vector power(fft_size / 2 + 1);

  FeatureMatrix out;
  out.frames.resize(n_frames, n_coeffs);
  out.frame_shift = frame_shift;
  out.kind = opts.kind;
  for (long t = 0; t < n_frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    std::copy_n(signal.samples.begin() + t * shift, len, frame.begin());
    if (opts.remove_dc) {
      double mean = 0.0;
      for (int i = 0; i < len; ++i) mean += frame[i];
      mean /= len;
      for (int i = 0; i < len; ++i) frame[i] -= mean;
    }
    double energy = 0.0;
    for (int i = 0; i < len; ++i) energy += frame[i] * frame[i];
    for (int i = len - 1; i > 0; --i) frame[i] -= opts.preemph * frame[i - 1];
    frame[0] -= opts.preemph * frame[0];
    for (int i = 0; i < len; ++i) frame[i] *= window[i];

    fft.fwd(spectrum, frame);
    for (int k = 0; k < power.size(); ++k) power(k) = std::norm(spectrum[k]);
    Vector log_mel = (fbank * power).array().max(kLogFloor).log().matrix();
    out.frames.row(t) = (dct * log_mel).transpose();
    if (opts.use_energy) out.frames(t, 0) = std::log(std::max(energy, kLogFloor));
  }
  return out;
}

FeatureMatrix append_deltas(const FeatureMatrix &features, int context) {
  if (context < 1) fail(ErrorCode::kConfiguration, "delta context must be >= 1");
  if (features.num_frames() < 2 * context + 1)
    fail(ErrorCode::kInsufficientContext, "too few frames for delta context");
  const Matrix delta = regression_deltas(features.frames, context);
  const Matrix delta2 = regression_deltas(delta, context);
  FeatureMatrix out = features;
  const Eigen::Index d = features.dim();
  out.frames.resize(features.num_frames(), 3 * d);
  out.frames.leftCols(d) = features.frames;
  out.frames.middleCols(d, d) = delta;
  out.frames.rightCols(d) = delta2;
  return out;
}

FeatureMatrix sliding_cmn(const FeatureMatrix &features, double window) {
  if (features.num_frames() == 0) fail(ErrorCode::kEmptyInput, "no frames to normalize");
  const auto w = static_cast<Eigen::Index>(std::lround(window / features.frame_shift));
  if (w < 1) fail(ErrorCode::kConfiguration, "CMN window covers no frames");
  const Eigen::Index t_max = features.num_frames();
  // Prefix sums: row k holds the sum of rows [0, k).
  Matrix prefix = Matrix::Zero(t_max + 1, features.dim());
  for (Eigen::Index t = 0; t < t_max; ++t)
    prefix.row(t + 1) = prefix.row(t) + features.frames.row(t);
  FeatureMatrix out = features;
  for (Eigen::Index t = 0; t < t_max; ++t) {
    const Eigen::Index begin = std::max<Eigen::Index>(0, t - w / 2);
    const Eigen::Index end = std::min<Eigen::Index>(t_max, t - w / 2 + w);
    out.frames.row(t) -= (prefix.row(end) - prefix.row(begin)) / static_cast<double>(end - begin);
  }
  return out;
}

VadMask energy_vad(const FeatureMatrix &features, double threshold_offset) {
  VadMask mask;
  mask.frame_shift = features.frame_shift;
  mask.voiced.assign(features.num_frames(), 0);
  if (features.num_frames() == 0) return mask;
  const auto log_energy = features.frames.col(0);
  const double threshold =
      log_energy.mean() + threshold_offset * std::numbers::ln10 / 10.0;
  for (Eigen::Index t = 0; t < features.num_frames(); ++t)
    mask.voiced[t] = log_energy(t) > threshold ? 1 : 0;
  return mask;
}

TruncationSpan locate_truncation(const VadMask &vad, double skip_active,
                                 double keep, KeepMode mode) {
  const double shift = vad.frame_shift;
  const auto skip_frames = static_cast<std::size_t>(std::llround(skip_active / shift));
  const auto keep_frames = static_cast<std::size_t>(std::llround(keep / shift));
  if (vad.num_voiced() <= skip_frames)
    fail(ErrorCode::kTooShortUtterance, "utterance has too little active speech to skip");

  std::size_t cut = 0;
  if (skip_frames > 0) {
    std::size_t active = 0;
    for (std::size_t t = 0; t < vad.size(); ++t) {
      active += vad.voiced[t];
      if (active == skip_frames) {
        cut = t + 1;
        break;
      }
    }
  }
  std::size_t end = cut;
  if (mode == KeepMode::kRaw) {
    end = std::min(vad.size(), cut + keep_frames);
  } else {
    std::size_t active = 0;
    while (end < vad.size() && active < keep_frames) active += vad.voiced[end++];
  }
  return {cut * shift, end * shift};
}

AudioSignal truncate_utterance(const AudioSignal &signal, const VadMask &vad,
                               double skip_active, double keep, KeepMode mode) {
  const TruncationSpan span = locate_truncation(vad, skip_active, keep, mode);
  const auto n = static_cast<long>(signal.samples.size());
  const long begin = std::min(n, std::lround(span.begin * signal.sample_rate));
  long end = n;
  if (mode == KeepMode::kRaw)
    end = std::min(n, begin + std::lround(keep * signal.sample_rate));
  else
    end = std::min(n, std::lround(span.end * signal.sample_rate));
  AudioSignal out;
  out.sample_rate = signal.sample_rate;
  out.samples.assign(signal.samples.begin() + begin, signal.samples.begin() + end);
  return out;
}

FeatureMatrix truncate_features(const FeatureMatrix &features, const VadMask &vad,
                                double skip_active, double keep, KeepMode mode) {
  if (static_cast<Eigen::Index>(vad.size()) != features.num_frames())
    fail(ErrorCode::kAlignment, "VAD mask length differs from frame count");
  const TruncationSpan span = locate_truncation(vad, skip_active, keep, mode);
  const auto begin = static_cast<Eigen::Index>(std::llround(span.begin / vad.frame_shift));
  const auto end = static_cast<Eigen::Index>(std::llround(span.end / vad.frame_shift));
  FeatureMatrix out;
  out.frame_shift = features.frame_shift;
  out.kind = features.kind;
  out.frames = features.frames.middleRows(begin, end - begin);
  return out;
}

void write_features(const std::filesystem::path &path, const FeatureMatrix &features) {
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    w.magic("SVKF");
    w.u8(kFeatureVersion);
    w.u8(static_cast<std::uint8_t>(features.kind));
    w.u32(static_cast<std::uint32_t>(features.num_frames()));
    w.u32(static_cast<std::uint32_t>(features.dim()));
    w.matrix(features.frames);
  });
}

FeatureMatrix read_features(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  r.expect_magic("SVKF");
  if (r.u8() != kFeatureVersion) fail(ErrorCode::kFormat, path.string() + ": unsupported version");
  const std::uint8_t kind = r.u8();
  if (kind > 1) fail(ErrorCode::kFormat, path.string() + ": unknown feature kind");
  const std::uint32_t t = r.u32(), d = r.u32();
  FeatureMatrix f;
  f.kind = static_cast<FeatureKind>(kind);
  f.frames = r.matrix(t, d);
  r.expect_eof();
  if (!f.frames.allFinite()) fail(ErrorCode::kFormat, path.string() + ": non-finite feature values");
  return f;
}

void write_vad(const std::filesystem::path &path, const VadMask &vad) {
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    w.magic("SVKV");
    w.u8(kVadVersion);
    w.u32(static_cast<std::uint32_t>(vad.size()));
    for (auto v : vad.voiced) w.u8(v);
  });
}

VadMask read_vad(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  r.expect_magic("SVKV");
  if (r.u8() != kVadVersion) fail(ErrorCode::kFormat, path.string() + ": unsupported version");
  VadMask vad;
  vad.voiced.resize(r.u32());
  for (auto &v : vad.voiced) {
    v = r.u8();
    if (v > 1) fail(ErrorCode::kFormat, path.string() + ": VAD entries must be 0 or 1");
  }
  r.expect_eof();
  return vad;
}

}  // namespace svkit
