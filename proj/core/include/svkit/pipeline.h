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

#ifndef SVKIT_PIPELINE_H_
#define SVKIT_PIPELINE_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "svkit/eval.h"
#include "svkit/pipeline_config.h"

namespace svkit {

struct PipelineOptions {
  // Re-run stale or corrupted stages instead of failing.
  bool force = false;
};

// One (alignment source, PLDA training duration, trial condition) cell.
struct GridCell {
  std::string source;
  std::string plda_training;  // full | short
  std::string condition;
  std::filesystem::path report;  // JSON report
};

struct ExperimentGrid {
  std::vector<GridCell> cells;
};

struct PipelineResult {
  std::filesystem::path work_dir;
  ExperimentGrid grid;
  std::vector<std::string> executed_stages;
  std::vector<std::string> skipped_stages;
};

// Runs every stage whose artifacts are missing. Each stage records the hashes
// of its inputs and outputs under <work_dir>/meta; a later run skips stages
// whose record still matches and throws kHashMismatch, naming the stage, when
// an input changed or an artifact no longer matches its hash.
PipelineResult run_pipeline(const PipelineConfig &config, const PipelineOptions &opts = {});

// The cells a config produces, with their expected report paths.
ExperimentGrid experiment_grid(const PipelineConfig &config);

// (EER_a - EER_b) / EER_a; nullopt when EER_a is zero.
std::optional<double> relative_improvement(double eer_a, double eer_b);

struct GridTable {
  std::string text;
  std::string json;
};

// EER table (rows: source x PLDA training, columns: conditions) followed by
// relative improvements of each source over gmm and of short over full PLDA
// training. Throws kIo when a cell's report is missing.
GridTable run_grid(const ExperimentGrid &grid);

}  // namespace svkit

#endif  // SVKIT_PIPELINE_H_
