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

#ifndef SVKIT_PIPELINE_CONFIG_H_
#define SVKIT_PIPELINE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "svkit/plda.h"
#include "svkit/senone_net.h"
#include "svkit/synthgen.h"

namespace svkit {

struct FrontendConfig {
  int speaker_coeffs = 20;
  int speaker_mel_bins = 23;
  int asr_coeffs = 40;
  int asr_mel_bins = 40;
  double frame_length = 0.025;
  double frame_shift = 0.01;
  int delta_context = 2;
  double speaker_cmn_window = 3.0;
  double asr_cmn_window = 6.0;
  double vad_offset_db = -3.0;
};

// Active-speech seconds.
struct DurationConfig {
  double skip = 2.5;
  double short_keep = 7.5;
  double plda_short_keep = 15.0;
};

struct CorpusConfig {
  // Exactly one of the two is set. The synthetic spec's seed is replaced by
  // the pipeline seed.
  std::optional<CorpusSpec> synthetic;
  std::filesystem::path manifest;
  int dev_speakers = 60;  // first N speakers in id order; the rest evaluate
  int num_classes = 0;    // alignment classes for oracle/tdnn; 0 = from spec
};

struct UbmConfig {
  int components = 64;
  int iters = 20;
  int frame_stride = 4;  // subsampling of voiced frames in the training pool
};

struct TdnnConfig {
  std::string topology = "desk";
  int steps = 3000;
  int batch_size = 128;
  double learning_rate = 0.01;
  int train_utterances = 40;
};

struct TvConfig {
  int rank = 20;
  int iters = 10;
  bool update_sigma = true;
};

struct PldaConfig {
  int iters = 20;
  PldaEstimator estimator = PldaEstimator::kEm;
  std::vector<std::string> training{"full", "short"};
};

struct TrialsConfig {
  std::size_t n_target = 240;
  std::size_t n_nontarget = 4000;
  std::vector<TrialCondition> conditions{TrialCondition::kFullFull, TrialCondition::kFullShort,
                                         TrialCondition::kShortShort};
};

struct PipelineConfig {
  std::uint64_t seed = 7;
  int workers = 1;
  std::filesystem::path work_dir = "work";
  CorpusConfig corpus;
  FrontendConfig frontend;
  DurationConfig durations;
  std::vector<std::string> sources{"gmm", "tdnn", "oracle"};  // gmm|tdnn|oracle|file
  std::filesystem::path posterior_dir;                        // file source
  UbmConfig ubm;
  TdnnConfig tdnn;
  TvConfig tv;
  PldaConfig plda;
  TrialsConfig trials;

  // Static checks run before any compute: paths, names, dimensions.
  void validate() const;
  int num_classes() const;
  bool uses_source(std::string_view name) const;
};

// Desk-scale defaults over the synthetic corpus.
PipelineConfig default_pipeline_config();

// Missing keys keep their defaults. Relative paths resolve against the
// config file's directory. The result is validated.
PipelineConfig load_pipeline_config(const std::filesystem::path &path);

// Canonical YAML of one top-level section ("corpus", "frontend", ...), or
// of the whole config when section is empty. Used for stage hashing.
std::string dump_pipeline_config(const PipelineConfig &config, std::string_view section = {});

}  // namespace svkit

#endif  // SVKIT_PIPELINE_CONFIG_H_
