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

#include "svkit/pipeline_config.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "svkit/binary_io.h"

namespace svkit {
namespace {

constexpr std::string_view kSources[] = {"gmm", "tdnn", "oracle", "file"};

template <typename T>
void read_key(const YAML::Node &node, const char *key, T &field) {
  if (node && node[key]) field = node[key].as<T>();
}

void read_path(const YAML::Node &node, const char *key, std::filesystem::path &field,
               const std::filesystem::path &base) {
  if (!node || !node[key]) return;
  std::filesystem::path p(node[key].as<std::string>());
  field = p.empty() || p.is_absolute() ? p : base / p;
}

std::string estimator_name(PldaEstimator e) { return e == PldaEstimator::kEm ? "em" : "scatter"; }

YAML::Node to_node(const PipelineConfig &c) {
  YAML::Node root;
  root["seed"] = c.seed;
  root["workers"] = c.workers;
  root["work_dir"] = c.work_dir.string();

  YAML::Node corpus;
  if (c.corpus.synthetic) {
    CorpusSpec spec = *c.corpus.synthetic;
    spec.seed = c.seed;
    YAML::Node s = YAML::Load(corpus_spec_to_yaml(spec));
    s.remove("seed");
    corpus["synthetic"] = s;
  } else {
    corpus["manifest"] = c.corpus.manifest.string();
  }
  corpus["dev_speakers"] = c.corpus.dev_speakers;
  corpus["num_classes"] = c.corpus.num_classes;
  root["corpus"] = corpus;

  YAML::Node fe;
  fe["speaker_coeffs"] = c.frontend.speaker_coeffs;
  fe["speaker_mel_bins"] = c.frontend.speaker_mel_bins;
  fe["asr_coeffs"] = c.frontend.asr_coeffs;
  fe["asr_mel_bins"] = c.frontend.asr_mel_bins;
  fe["frame_length"] = c.frontend.frame_length;
  fe["frame_shift"] = c.frontend.frame_shift;
  fe["delta_context"] = c.frontend.delta_context;
  fe["speaker_cmn_window"] = c.frontend.speaker_cmn_window;
  fe["asr_cmn_window"] = c.frontend.asr_cmn_window;
  fe["vad_offset_db"] = c.frontend.vad_offset_db;
  root["frontend"] = fe;

  YAML::Node dur;
  dur["skip"] = c.durations.skip;
  dur["short_keep"] = c.durations.short_keep;
  dur["plda_short_keep"] = c.durations.plda_short_keep;
  root["durations"] = dur;

  YAML::Node align;
  for (const auto &s : c.sources) align["sources"].push_back(s);
  align["posterior_dir"] = c.posterior_dir.string();
  root["alignment"] = align;

  YAML::Node ubm;
  ubm["components"] = c.ubm.components;
  ubm["iters"] = c.ubm.iters;
  ubm["frame_stride"] = c.ubm.frame_stride;
  root["ubm"] = ubm;

  YAML::Node tdnn;
  tdnn["topology"] = c.tdnn.topology;
  tdnn["steps"] = c.tdnn.steps;
  tdnn["batch_size"] = c.tdnn.batch_size;
  tdnn["learning_rate"] = c.tdnn.learning_rate;
  tdnn["train_utterances"] = c.tdnn.train_utterances;
  root["tdnn"] = tdnn;

  YAML::Node tv;
  tv["rank"] = c.tv.rank;
  tv["iters"] = c.tv.iters;
  tv["update_sigma"] = c.tv.update_sigma;
  root["tv"] = tv;

  YAML::Node plda;
  plda["iters"] = c.plda.iters;
  plda["estimator"] = estimator_name(c.plda.estimator);
  for (const auto &t : c.plda.training) plda["training"].push_back(t);
  root["plda"] = plda;

  YAML::Node trials;
  trials["n_target"] = c.trials.n_target;
  trials["n_nontarget"] = c.trials.n_nontarget;
  for (auto cond : c.trials.conditions) trials["conditions"].push_back(std::string(condition_name(cond)));
  root["trials"] = trials;
  return root;
}

}  // namespace

int PipelineConfig::num_classes() const {
  if (corpus.num_classes > 0) return corpus.num_classes;
  if (corpus.synthetic) return corpus.synthetic->n_classes;
  return 0;
}

bool PipelineConfig::uses_source(std::string_view name) const {
  return std::find(sources.begin(), sources.end(), name) != sources.end();
}

void PipelineConfig::validate() const {
  auto bad = [](const std::string &msg) { fail(ErrorCode::kConfiguration, "config: " + msg); };
  if (workers < 1) bad("workers must be at least 1");
  if (work_dir.empty()) bad("work_dir is empty");
  if (corpus.synthetic.has_value() == !corpus.manifest.empty())
    bad("corpus needs exactly one of 'synthetic' or 'manifest'");
  if (corpus.synthetic) {
    corpus.synthetic->validate();
    if (corpus.dev_speakers < 2 || corpus.dev_speakers >= corpus.synthetic->n_speakers)
      bad("dev_speakers must leave at least one evaluation speaker and be >= 2");
    if (std::abs(corpus.synthetic->frame_shift - frontend.frame_shift) > 1e-12)
      bad("synthetic frame_shift differs from frontend frame_shift");
  } else {
    if (!std::filesystem::exists(corpus.manifest))
      bad(fmt::format("manifest {} does not exist", corpus.manifest.string()));
    if (corpus.dev_speakers < 2) bad("dev_speakers must be >= 2");
  }
  if (sources.empty()) bad("no alignment sources");
  for (const auto &s : sources) {
    if (std::find(std::begin(kSources), std::end(kSources), s) == std::end(kSources))
      bad(fmt::format("unknown alignment source '{}'", s));
    if (std::count(sources.begin(), sources.end(), s) > 1) bad(fmt::format("source '{}' listed twice", s));
  }
  if (uses_source("file") && !std::filesystem::is_directory(posterior_dir))
    bad("file source requires an existing posterior_dir");
  if ((uses_source("oracle") || uses_source("tdnn")) && num_classes() < 2)
    bad("oracle and tdnn sources need corpus.num_classes >= 2");
  if (frontend.speaker_coeffs < 2 || frontend.asr_coeffs < 2) bad("too few cepstral coefficients");
  if (frontend.speaker_mel_bins < frontend.speaker_coeffs || frontend.asr_mel_bins < frontend.asr_coeffs)
    bad("mel bins must be at least the number of coefficients");
  if (!(frontend.frame_shift > 0 && frontend.frame_length >= frontend.frame_shift))
    bad("frame_length must be >= frame_shift > 0");
  if (frontend.delta_context < 1) bad("delta_context must be positive");
  if (!(frontend.speaker_cmn_window > 0 && frontend.asr_cmn_window > 0)) bad("CMN windows must be positive");
  if (!(durations.skip >= 0 && durations.short_keep > 0 && durations.plda_short_keep > 0))
    bad("durations must be positive");
  if (ubm.components < 1 || ubm.iters < 0 || ubm.frame_stride < 1) bad("invalid ubm section");
  if (tdnn.steps < 0 || tdnn.batch_size < 1 || !(tdnn.learning_rate > 0) || tdnn.train_utterances < 1)
    bad("invalid tdnn section");
  parse_topology(tdnn.topology);
  if (tv.rank < 1 || tv.iters < 0) bad("invalid tv section");
  // R <= C * D for every source.
  const int feat_dim = corpus.synthetic ? corpus.synthetic->feature_dim * 3 : frontend.speaker_coeffs * 3;
  for (const auto &s : sources) {
    const int classes = s == "gmm" ? ubm.components : num_classes();
    if (classes > 0 && tv.rank > classes * feat_dim)
      bad(fmt::format("tv rank {} exceeds C*D = {} for source {}", tv.rank, classes * feat_dim, s));
  }
  if (plda.iters < 0) bad("plda iters must be non-negative");
  if (plda.training.empty()) bad("plda.training is empty");
  for (const auto &t : plda.training)
    if (t != "full" && t != "short") bad(fmt::format("plda training '{}' is not full or short", t));
  if (trials.n_target == 0 || trials.n_nontarget == 0) bad("trial counts must be positive");
  if (trials.conditions.empty()) bad("no trial conditions");
}

PipelineConfig default_pipeline_config() {
  PipelineConfig c;
  c.corpus.synthetic = CorpusSpec{};
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path &path) {
  const auto base = std::filesystem::absolute(path).parent_path();
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile &) {
    fail(ErrorCode::kIo, fmt::format("cannot open config {}", path.string()));
  } catch (const YAML::Exception &e) {
    fail(ErrorCode::kConfiguration, fmt::format("{}: {}", path.string(), e.what()));
  }
  PipelineConfig c;
  try {
    read_key(root, "seed", c.seed);
    read_key(root, "workers", c.workers);
    read_path(root, "work_dir", c.work_dir, base);

    const YAML::Node corpus = root["corpus"];
    if (corpus && corpus["synthetic"]) {
      c.corpus.synthetic = parse_corpus_spec(YAML::Dump(corpus["synthetic"]), path.string());
    } else if (corpus && corpus["manifest"]) {
      read_path(corpus, "manifest", c.corpus.manifest, base);
    } else {
      c.corpus.synthetic = CorpusSpec{};
    }
    read_key(corpus, "dev_speakers", c.corpus.dev_speakers);
    read_key(corpus, "num_classes", c.corpus.num_classes);

    const YAML::Node fe = root["frontend"];
    read_key(fe, "speaker_coeffs", c.frontend.speaker_coeffs);
    read_key(fe, "speaker_mel_bins", c.frontend.speaker_mel_bins);
    read_key(fe, "asr_coeffs", c.frontend.asr_coeffs);
    read_key(fe, "asr_mel_bins", c.frontend.asr_mel_bins);
    read_key(fe, "frame_length", c.frontend.frame_length);
    read_key(fe, "frame_shift", c.frontend.frame_shift);
    read_key(fe, "delta_context", c.frontend.delta_context);
    read_key(fe, "speaker_cmn_window", c.frontend.speaker_cmn_window);
    read_key(fe, "asr_cmn_window", c.frontend.asr_cmn_window);
    read_key(fe, "vad_offset_db", c.frontend.vad_offset_db);

    const YAML::Node dur = root["durations"];
    read_key(dur, "skip", c.durations.skip);
    read_key(dur, "short_keep", c.durations.short_keep);
    read_key(dur, "plda_short_keep", c.durations.plda_short_keep);

    const YAML::Node align = root["alignment"];
    read_key(align, "sources", c.sources);
    read_path(align, "posterior_dir", c.posterior_dir, base);

    const YAML::Node ubm = root["ubm"];
    read_key(ubm, "components", c.ubm.components);
    read_key(ubm, "iters", c.ubm.iters);
    read_key(ubm, "frame_stride", c.ubm.frame_stride);

    const YAML::Node tdnn = root["tdnn"];
    read_key(tdnn, "topology", c.tdnn.topology);
    read_key(tdnn, "steps", c.tdnn.steps);
    read_key(tdnn, "batch_size", c.tdnn.batch_size);
    read_key(tdnn, "learning_rate", c.tdnn.learning_rate);
    read_key(tdnn, "train_utterances", c.tdnn.train_utterances);

    const YAML::Node tv = root["tv"];
    read_key(tv, "rank", c.tv.rank);
    read_key(tv, "iters", c.tv.iters);
    read_key(tv, "update_sigma", c.tv.update_sigma);

    const YAML::Node plda = root["plda"];
    read_key(plda, "iters", c.plda.iters);
    read_key(plda, "training", c.plda.training);
    if (plda && plda["estimator"]) {
      const auto e = plda["estimator"].as<std::string>();
      if (e == "em") c.plda.estimator = PldaEstimator::kEm;
      else if (e == "scatter") c.plda.estimator = PldaEstimator::kScatter;
      else fail(ErrorCode::kConfiguration, "config: plda.estimator must be em or scatter");
    }

    const YAML::Node trials = root["trials"];
    read_key(trials, "n_target", c.trials.n_target);
    read_key(trials, "n_nontarget", c.trials.n_nontarget);
    if (trials && trials["conditions"]) {
      c.trials.conditions.clear();
      for (const auto &n : trials["conditions"]) c.trials.conditions.push_back(parse_condition(n.as<std::string>()));
    }
  } catch (const YAML::Exception &e) {
    fail(ErrorCode::kConfiguration, fmt::format("{}: {}", path.string(), e.what()));
  }
  c.validate();
  return c;
}

std::string dump_pipeline_config(const PipelineConfig &config, std::string_view section) {
  YAML::Node root = to_node(config);
  YAML::Emitter out;
  if (section.empty()) {
    out << root;
  } else {
    const std::string key(section);
    if (!root[key]) fail(ErrorCode::kUsage, fmt::format("unknown config section '{}'", key));
    out << root[key];
  }
  return std::string(out.c_str()) + "\n";
}

}  // namespace svkit
