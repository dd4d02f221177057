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

#ifndef SVKIT_EVAL_H_
#define SVKIT_EVAL_H_

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svkit/plda.h"

namespace svkit {

struct TrialRecord {
  std::string enrol_id;
  std::string test_id;
  TrialLabel label = TrialLabel::kUnknown;
};

struct TrialList {
  std::string condition;  // e.g. full-full, full-short, short-short
  std::vector<TrialRecord> trials;
};

struct DetPoint {
  double threshold = 0.0;  // accept iff score >= threshold
  double false_alarm = 0.0;
  double miss = 0.0;
};

// One point per distinct score plus a final +inf threshold. False alarms are
// nonincreasing and misses nondecreasing along the list. Tied scores move
// together.
std::vector<DetPoint> det_points(std::span<const TrialScore> scores);

// Rate where the miss and false-alarm curves cross, linearly interpolated
// between the bracketing operating points.
double compute_eer(std::span<const TrialScore> scores);

struct EvalReport {
  std::string condition;
  double eer = 0.0;
  std::size_t num_targets = 0;
  std::size_t num_nontargets = 0;
  std::vector<DetPoint> det;
  // (artifact name, content hash) for every upstream artifact.
  std::vector<std::pair<std::string, std::string>> provenance;
};

// Joins scores to trials by (enrol, test) pair; labels come from the trial
// list. Throws kCoverage naming the unscored trials.
EvalReport evaluate_condition(std::span<const TrialScore> scores, const TrialList &trials);

std::string format_report_text(const EvalReport &report);
std::string format_report_json(const EvalReport &report);

// "enrol_id test_id target|nontarget" per line; an optional first line
// "# condition <tag>".
void write_trials(const std::filesystem::path &path, const TrialList &trials);
TrialList read_trials(const std::filesystem::path &path);

// "enrol_id test_id score label" per line.
void write_scores(const std::filesystem::path &path, std::span<const TrialScore> scores);
std::vector<TrialScore> read_scores(const std::filesystem::path &path);

}  // namespace svkit

#endif  // SVKIT_EVAL_H_
