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

#include <algorithm>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "svkit/binary_io.h"
#include "svkit/pipeline.h"

namespace svkit {
namespace {

using json = nlohmann::ordered_json;

template <typename T>
void push_unique(std::vector<T> &v, const T &x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

std::string percent(std::optional<double> v) {
  return v ? fmt::format("{:.2f}", 100.0 * *v) : std::string("n/a");
}

json optional_json(std::optional<double> v) { return v ? json(*v) : json(); }

}  // namespace

std::optional<double> relative_improvement(double eer_a, double eer_b) {
  if (eer_a == 0.0) return std::nullopt;
  return (eer_a - eer_b) / eer_a;
}

GridTable run_grid(const ExperimentGrid &grid) {
  if (grid.cells.empty()) fail(ErrorCode::kConfiguration, "experiment grid has no cells");
  std::vector<std::string> sources, trainings, conditions;
  std::map<std::tuple<std::string, std::string, std::string>, double> eer;
  for (const auto &cell : grid.cells) {
    if (!std::filesystem::exists(cell.report))
      fail(ErrorCode::kIo, fmt::format("grid cell {}/{}/{}: missing report {}", cell.source,
                                       cell.plda_training, cell.condition, cell.report.string()));
    json report;
    try {
      auto in = open_for_read(cell.report);
      report = json::parse(in);
    } catch (const json::exception &e) {
      fail(ErrorCode::kFormat, fmt::format("{}: {}", cell.report.string(), e.what()));
    }
    if (!report.contains("eer") || !report["eer"].is_number())
      fail(ErrorCode::kFormat, fmt::format("{}: no eer field", cell.report.string()));
    push_unique(sources, cell.source);
    push_unique(trainings, cell.plda_training);
    push_unique(conditions, cell.condition);
    eer[{cell.source, cell.plda_training, cell.condition}] = report["eer"].get<double>();
  }
  auto lookup = [&](const std::string &s, const std::string &t,
                    const std::string &c) -> std::optional<double> {
    auto it = eer.find({s, t, c});
    return it == eer.end() ? std::nullopt : std::optional<double>(it->second);
  };
  auto improvement = [](std::optional<double> a, std::optional<double> b) -> std::optional<double> {
    if (!a || !b) return std::nullopt;
    return relative_improvement(*a, *b);
  };

  std::string text;
  json j;
  json cells = json::array();
  auto header = [&](const std::string &title) {
    text += fmt::format("{:<24}", title);
    for (const auto &c : conditions) text += fmt::format("{:>14}", c);
    text += '\n';
  };

  header("EER (%)");
  for (const auto &s : sources)
    for (const auto &t : trainings) {
      text += fmt::format("{:<24}", fmt::format("{} plda={}", s, t));
      for (const auto &c : conditions) {
        const auto v = lookup(s, t, c);
        text += fmt::format("{:>14}", percent(v));
        if (v) cells.push_back({{"source", s}, {"plda_training", t}, {"condition", c}, {"eer", *v}});
      }
      text += '\n';
    }
  j["cells"] = cells;

  json over_gmm = json::array();
  const bool has_gmm = std::find(sources.begin(), sources.end(), "gmm") != sources.end();
  if (has_gmm && sources.size() > 1) {
    text += '\n';
    header("vs gmm (%)");
    for (const auto &s : sources) {
      if (s == "gmm") continue;
      for (const auto &t : trainings) {
        text += fmt::format("{:<24}", fmt::format("{} plda={}", s, t));
        for (const auto &c : conditions) {
          const auto v = improvement(lookup("gmm", t, c), lookup(s, t, c));
          text += fmt::format("{:>14}", percent(v));
          over_gmm.push_back({{"source", s}, {"plda_training", t}, {"condition", c}, {"value", optional_json(v)}});
        }
        text += '\n';
      }
    }
  }
  j["improvement_over_gmm"] = over_gmm;

  json short_over_full = json::array();
  const bool has_both = std::find(trainings.begin(), trainings.end(), "full") != trainings.end() &&
                        std::find(trainings.begin(), trainings.end(), "short") != trainings.end();
  if (has_both) {
    text += '\n';
    header("short vs full plda (%)");
    for (const auto &s : sources) {
      text += fmt::format("{:<24}", s);
      for (const auto &c : conditions) {
        const auto v = improvement(lookup(s, "full", c), lookup(s, "short", c));
        text += fmt::format("{:>14}", percent(v));
        short_over_full.push_back({{"source", s}, {"condition", c}, {"value", optional_json(v)}});
      }
      text += '\n';
    }
  }
  j["improvement_short_over_full"] = short_over_full;
  return {text, j.dump(2) + "\n"};
}

}  // namespace svkit
