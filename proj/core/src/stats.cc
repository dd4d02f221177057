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

#include "svkit/stats.h"

#include <cmath>
#include <limits>

#include "svkit/binary_io.h"

namespace svkit {
namespace {

constexpr std::uint8_t kStatsVersion = 1;
constexpr std::uint8_t kArchiveVersion = 1;

void write_record(BinaryWriter &w, const SuffStats &stats) {
  w.magic("SVKS");
  w.u8(kStatsVersion);
  w.u32(static_cast<std::uint32_t>(stats.num_classes()));
  w.u32(static_cast<std::uint32_t>(stats.dim()));
  w.u8(stats.centered ? 1 : 0);
  w.vector(stats.n);
  w.matrix(stats.f);
  w.matrix(stats.s);
}

SuffStats read_record(BinaryReader &r) {
  r.expect_magic("SVKS");
  if (r.u8() != kStatsVersion) fail(ErrorCode::kFormat, r.source() + ": unsupported stats version");
  const std::uint32_t c = r.u32(), d = r.u32();
  const std::uint8_t centered = r.u8();
  if (centered > 1) fail(ErrorCode::kFormat, r.source() + ": bad centered flag");
  SuffStats stats;
  stats.centered = centered == 1;
  stats.n = r.vector(c);
  stats.f = r.matrix(c, d);
  stats.s = r.matrix(c, d);
  if ((stats.n.array() < 0).any() || !stats.f.allFinite() || !stats.s.allFinite())
    fail(ErrorCode::kFormat, r.source() + ": invalid statistics values");
  return stats;
}

}  // namespace

SuffStats SuffStats::zeros(Eigen::Index num_classes, Eigen::Index dim) {
  return {Vector::Zero(num_classes), Matrix::Zero(num_classes, dim),
          Matrix::Zero(num_classes, dim), false};
}

SuffStats &SuffStats::operator+=(const SuffStats &other) {
  if (other.num_classes() != num_classes() || other.dim() != dim() || other.centered != centered)
    fail(ErrorCode::kState, "cannot add statistics of different shape or centering");
  n += other.n;
  f += other.f;
  s += other.s;
  return *this;
}

SuffStats accumulate_stats(const PosteriorMatrix &posteriors,
                           const FeatureMatrix &speaker_features, const VadMask &vad) {
  const Eigen::Index t_max = speaker_features.num_frames();
  if (posteriors.num_frames() != t_max || static_cast<Eigen::Index>(vad.size()) != t_max)
    fail(ErrorCode::kAlignment,
         "stream lengths differ: posteriors " + std::to_string(posteriors.num_frames()) +
             ", features " + std::to_string(t_max) + ", VAD " + std::to_string(vad.size()));
  std::vector<Eigen::Index> voiced;
  voiced.reserve(vad.size());
  for (Eigen::Index t = 0; t < t_max; ++t)
    if (vad.voiced[t]) voiced.push_back(t);

  const Matrix gamma = posteriors.gamma(voiced, Eigen::all);
  const Matrix x = speaker_features.frames(voiced, Eigen::all);
  SuffStats stats;
  stats.n = gamma.colwise().sum().transpose();
  stats.f.noalias() = gamma.transpose() * x;
  stats.s.noalias() = gamma.transpose() * x.cwiseAbs2();
  return stats;
}

SuffStats center_stats(const SuffStats &stats, const Matrix &means) {
  if (stats.centered) fail(ErrorCode::kState, "statistics are already centered");
  if (means.rows() != stats.num_classes() || means.cols() != stats.dim())
    fail(ErrorCode::kDimensionMismatch, "centering means do not match statistics shape");
  SuffStats out = stats;
  out.f -= means.cwiseProduct(stats.n.replicate(1, stats.dim()));
  out.centered = true;
  return out;
}

SuffStats uncenter_stats(const SuffStats &stats, const Matrix &means) {
  if (!stats.centered) fail(ErrorCode::kState, "statistics are not centered");
  if (means.rows() != stats.num_classes() || means.cols() != stats.dim())
    fail(ErrorCode::kDimensionMismatch, "centering means do not match statistics shape");
  SuffStats out = stats;
  out.f += means.cwiseProduct(stats.n.replicate(1, stats.dim()));
  out.centered = false;
  return out;
}

Eigen::Index synchronized_length(Eigen::Index a, Eigen::Index b, Eigen::Index max_slack) {
  if (std::abs(a - b) > max_slack)
    fail(ErrorCode::kAlignment, "alignment and speaker streams differ by " +
                                    std::to_string(std::abs(a - b)) + " frames");
  return std::min(a, b);
}

GmmModel estimate_supervised_ubm(std::span<const SuffStats> stats, double floor_factor) {
  if (stats.empty()) fail(ErrorCode::kEmptyInput, "no statistics for supervised UBM");
  SuffStats total = SuffStats::zeros(stats.front().num_classes(), stats.front().dim());
  for (const SuffStats &s : stats) {
    if (s.centered) fail(ErrorCode::kState, "supervised UBM needs uncentered statistics");
    total += s;
  }
  const double mass = total.n.sum();
  if (!(mass > 0)) fail(ErrorCode::kEmptyInput, "statistics carry no occupancy");
  const Eigen::RowVectorXd global_mean = total.f.colwise().sum() / mass;
  const Eigen::RowVectorXd global_var =
      (total.s.colwise().sum() / mass - global_mean.cwiseAbs2()).cwiseMax(0.0);
  const Eigen::RowVectorXd floor =
      (floor_factor * global_var).cwiseMax(std::numeric_limits<double>::min());

  GmmModel model;
  const Eigen::Index c_max = total.num_classes();
  model.weights = total.n / mass;
  model.means.resize(c_max, total.dim());
  model.variances.resize(c_max, total.dim());
  for (Eigen::Index c = 0; c < c_max; ++c) {
    if (total.n(c) > 0) {
      model.means.row(c) = total.f.row(c) / total.n(c);
      model.variances.row(c) =
          (total.s.row(c) / total.n(c) - model.means.row(c).cwiseAbs2()).cwiseMax(floor);
    } else {
      model.means.row(c) = global_mean;
      model.variances.row(c) = global_var.cwiseMax(floor);
    }
  }
  return model;
}

void write_stats(const std::filesystem::path &path, const SuffStats &stats) {
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    write_record(w, stats);
  });
}

SuffStats read_stats(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  SuffStats stats = read_record(r);
  r.expect_eof();
  return stats;
}

void write_stats_archive(const std::filesystem::path &path, const StatsArchive &archive) {
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    w.magic("SVKA");
    w.u8(kArchiveVersion);
    w.u32(static_cast<std::uint32_t>(archive.size()));
    for (const auto &[id, stats] : archive) {
      w.str(id);
      write_record(w, stats);
    }
  });
}

StatsArchive read_stats_archive(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  r.expect_magic("SVKA");
  if (r.u8() != kArchiveVersion) fail(ErrorCode::kFormat, path.string() + ": unsupported version");
  StatsArchive archive(r.u32());
  for (auto &[id, stats] : archive) {
    id = r.str();
    stats = read_record(r);
  }
  r.expect_eof();
  return archive;
}

}  // namespace svkit
