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

#include "svkit/eval.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "svkit/binary_io.h"

namespace svkit {
namespace {

void check_two_classes(std::size_t targets, std::size_t nontargets) {
  if (targets == 0 || nontargets == 0)
    fail(ErrorCode::kOneClass, "need at least one target and one nontarget trial");
}

}  // namespace

std::vector<DetPoint> det_points(std::span<const TrialScore> scores) {
  std::vector<std::pair<double, bool>> sorted;  // (score, is_target)
  sorted.reserve(scores.size());
  std::size_t n_tar = 0, n_non = 0;
  for (const TrialScore &s : scores) {
    if (s.label == TrialLabel::kUnknown) continue;
    if (!std::isfinite(s.score)) fail(ErrorCode::kNumerical, "non-finite trial score");
    const bool target = s.label == TrialLabel::kTarget;
    (target ? n_tar : n_non)++;
    sorted.emplace_back(s.score, target);
  }
  check_two_classes(n_tar, n_non);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto &a, const auto &b) { return a.first < b.first; });

  std::vector<DetPoint> points;
  std::size_t below_tar = 0, below_non = 0;  // trials with score < threshold
  for (std::size_t i = 0; i < sorted.size();) {
    const double threshold = sorted[i].first;
    points.push_back({threshold, static_cast<double>(n_non - below_non) / n_non,
                      static_cast<double>(below_tar) / n_tar});
    for (; i < sorted.size() && sorted[i].first == threshold; ++i)
      (sorted[i].second ? below_tar : below_non)++;
  }
  points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  return points;
}

double compute_eer(std::span<const TrialScore> scores) {
  const auto points = det_points(scores);
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double d0 = points[i].miss - points[i].false_alarm;
    const double d1 = points[i + 1].miss - points[i + 1].false_alarm;
    if (d0 == 0.0) return points[i].false_alarm;
    if (d0 < 0.0 && d1 >= 0.0) {
      const double alpha = -d0 / (d1 - d0);
      return points[i].false_alarm + alpha * (points[i + 1].false_alarm - points[i].false_alarm);
    }
  }
  return points.back().false_alarm;
}

EvalReport evaluate_condition(std::span<const TrialScore> scores, const TrialList &trials) {
  std::map<std::pair<std::string, std::string>, double> by_pair;
  for (const TrialScore &s : scores) by_pair[{s.enrol_id, s.test_id}] = s.score;

  std::vector<TrialScore> joined;
  joined.reserve(trials.trials.size());
  std::vector<std::string> missing;
  for (const TrialRecord &t : trials.trials) {
    auto it = by_pair.find({t.enrol_id, t.test_id});
    if (it == by_pair.end()) {
      missing.push_back(t.enrol_id + " " + t.test_id);
      continue;
    }
    joined.push_back({t.enrol_id, t.test_id, it->second, t.label});
  }
  if (!missing.empty()) {
    std::string msg = fmt::format("{} of {} trials have no score:", missing.size(), trials.trials.size());
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += "\n  " + missing[i];
    if (missing.size() > 20) msg += "\n  ...";
    fail(ErrorCode::kCoverage, msg);
  }

  EvalReport report;
  report.condition = trials.condition;
  for (const TrialScore &s : joined)
    (s.label == TrialLabel::kTarget ? report.num_targets : report.num_nontargets)++;
  report.det = det_points(joined);
  report.eer = compute_eer(joined);
  return report;
}

std::string format_report_text(const EvalReport &report) {
  std::string out;
  out += fmt::format("condition: {}\n", report.condition);
  out += fmt::format("eer: {}\n", report.eer);
  out += fmt::format("eer_percent: {:.2f}\n", 100.0 * report.eer);
  out += fmt::format("targets: {}\n", report.num_targets);
  out += fmt::format("nontargets: {}\n", report.num_nontargets);
  for (const auto &[name, hash] : report.provenance)
    out += fmt::format("provenance.{}: {}\n", name, hash);
  out += fmt::format("det_points: {}\n", report.det.size());
  out += "# threshold false_alarm miss\n";
  for (const DetPoint &p : report.det)
    out += fmt::format("{} {} {}\n", p.threshold, p.false_alarm, p.miss);
  return out;
}

std::string format_report_json(const EvalReport &report) {
  nlohmann::ordered_json j;
  j["condition"] = report.condition;
  j["eer"] = report.eer;
  j["targets"] = report.num_targets;
  j["nontargets"] = report.num_nontargets;
  nlohmann::ordered_json prov = nlohmann::ordered_json::object();
  for (const auto &[name, hash] : report.provenance) prov[name] = hash;
  j["provenance"] = prov;
  nlohmann::ordered_json det = nlohmann::ordered_json::array();
  for (const DetPoint &p : report.det) {
    // JSON has no infinity; the closing +inf threshold is written as null.
    nlohmann::ordered_json threshold =
        std::isfinite(p.threshold) ? nlohmann::ordered_json(p.threshold) : nlohmann::ordered_json();
    det.push_back({threshold, p.false_alarm, p.miss});
  }
  j["det"] = det;
  return j.dump(2) + "\n";
}

void write_trials(const std::filesystem::path &path, const TrialList &trials) {
  write_file_atomic(path, [&](std::ostream &os) {
    if (!trials.condition.empty()) os << "# condition " << trials.condition << '\n';
    for (const TrialRecord &t : trials.trials)
      os << t.enrol_id << ' ' << t.test_id << ' ' << trial_label_name(t.label) << '\n';
  });
}

TrialList read_trials(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::kIo, "cannot open " + path.string());
  TrialList list;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key, value;
      ls >> hash >> key >> value;
      if (key == "condition") list.condition = value;
      continue;
    }
    TrialRecord t;
    std::string label, extra;
    if (!(ls >> t.enrol_id >> t.test_id >> label) || (ls >> extra))
      fail(ErrorCode::kFormat, fmt::format("{}:{}: expected 'enrol test label'", path.string(), lineno));
    t.label = parse_trial_label(label);
    if (t.label == TrialLabel::kUnknown)
      fail(ErrorCode::kFormat, fmt::format("{}:{}: trial lists need target|nontarget", path.string(), lineno));
    list.trials.push_back(std::move(t));
  }
  return list;
}

void write_scores(const std::filesystem::path &path, std::span<const TrialScore> scores) {
  write_file_atomic(path, [&](std::ostream &os) {
    for (const TrialScore &s : scores)
      os << fmt::format("{} {} {} {}\n", s.enrol_id, s.test_id, s.score, trial_label_name(s.label));
  });
}

std::vector<TrialScore> read_scores(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<TrialScore> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    TrialScore s;
    std::string score, label = "unknown";
    if (!(ls >> s.enrol_id >> s.test_id >> score))
      fail(ErrorCode::kFormat, fmt::format("{}:{}: expected 'enrol test score [label]'", path.string(), lineno));
    ls >> label;
    try {
      s.score = std::stod(score);
    } catch (const std::exception &) {
      fail(ErrorCode::kFormat, fmt::format("{}:{}: bad score '{}'", path.string(), lineno, score));
    }
    s.label = parse_trial_label(label);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace svkit
