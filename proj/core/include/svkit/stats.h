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

#ifndef SVKIT_STATS_H_
#define SVKIT_STATS_H_

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svkit/common.h"
#include "svkit/frontend.h"
#include "svkit/gmm.h"

namespace svkit {

// Baum-Welch statistics of one utterance against C alignment classes.
struct SuffStats {
  Vector n;  // zeroth order, C
  Matrix f;  // first order, C x D
  Matrix s;  // diagonal second order, C x D (never centered)
  bool centered = false;

  Eigen::Index num_classes() const { return n.size(); }
  Eigen::Index dim() const { return f.cols(); }

  static SuffStats zeros(Eigen::Index num_classes, Eigen::Index dim);
  // Elementwise sum; both operands must share shape and centering state.
  SuffStats &operator+=(const SuffStats &other);
};

// Sums over voiced frames only. Posterior, feature and mask lengths must be
// equal (see synchronized_length for trimming small mismatches first).
SuffStats accumulate_stats(const PosteriorMatrix &posteriors,
                           const FeatureMatrix &speaker_features, const VadMask &vad);

// f_c <- f_c - n_c m_c.
SuffStats center_stats(const SuffStats &stats, const Matrix &means);
// f_c <- f_c + n_c m_c.
SuffStats uncenter_stats(const SuffStats &stats, const Matrix &means);

// Common length of two 10 ms streams. A mismatch of up to max_slack frames
// resolves to the shorter length; more is an alignment error.
Eigen::Index synchronized_length(Eigen::Index a, Eigen::Index b, Eigen::Index max_slack = 2);

// Class means/variances from pooled uncentered statistics: the centering
// model for alignment sources that are not themselves a GMM.
GmmModel estimate_supervised_ubm(std::span<const SuffStats> stats, double floor_factor = 1e-4);

// Stats file: "SVKS", version, C, D, centered flag, then n, f, s (f64).
void write_stats(const std::filesystem::path &path, const SuffStats &stats);
SuffStats read_stats(const std::filesystem::path &path);

using StatsArchive = std::vector<std::pair<std::string, SuffStats>>;
// Archive: "SVKA", version, count, then per record an id string and one
// stats record in the single-file layout.
void write_stats_archive(const std::filesystem::path &path, const StatsArchive &archive);
StatsArchive read_stats_archive(const std::filesystem::path &path);

}  // namespace svkit

#endif  // SVKIT_STATS_H_
