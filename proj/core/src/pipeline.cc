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

#include "svkit/pipeline.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "svkit/binary_io.h"
#include "svkit/gmm.h"
#include "svkit/hash.h"
#include "svkit/plda.h"
#include "svkit/senone_net.h"
#include "svkit/stats.h"
#include "svkit/synthgen.h"
#include "svkit/total_variability.h"

namespace svkit {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Stage seeds derive from the pipeline seed so stages stay independent.
enum SeedTag : std::uint64_t { kUbmSeed = 11, kTdnnInitSeed, kTdnnTrainSeed, kTvSeed, kTrialSeed };

constexpr std::string_view kFull = "full";
constexpr std::string_view kShort = "short";
constexpr std::string_view kPldaShort = "plda-short";

std::string variant_id(const std::string &utt, std::string_view variant) {
  if (variant == kFull) return utt;
  if (variant == kShort) return short_variant_id(utt);
  return utt + "@plda-short";
}

// ---------------------------------------------------------------------------
// Stage bookkeeping

class StageRunner {
 public:
  using Inputs = std::map<std::string, std::string>;

  StageRunner(fs::path work, bool force) : work_(std::move(work)), force_(force) {
    fs::create_directories(work_ / "meta");
  }

  void run(const std::string &stage, const Inputs &inputs, const std::vector<fs::path> &outputs,
           const std::function<void()> &body) {
    const fs::path meta_path = work_ / "meta" / (stage + ".json");
    const bool have_outputs =
        std::all_of(outputs.begin(), outputs.end(), [](const fs::path &p) { return fs::exists(p); });
    if (have_outputs && fs::exists(meta_path)) {
      if (try_skip(stage, meta_path, inputs, outputs)) return;
    }
    spdlog::info("stage {}: running", stage);
    try {
      for (const auto &p : outputs) fs::create_directories(p.parent_path());
      body();
    } catch (const Error &e) {
      throw Error(e.code(), fmt::format("stage '{}' failed: {}", stage, e.what()));
    } catch (const std::exception &e) {
      throw Error(ErrorCode::kIo, fmt::format("stage '{}' failed: {}", stage, e.what()));
    }
    json meta;
    meta["stage"] = stage;
    meta["inputs"] = json(inputs);
    json outs = json::object();
    std::map<std::string, std::string> fresh;
    for (const auto &p : outputs) {
      if (!fs::exists(p))
        fail(ErrorCode::kIo, fmt::format("stage '{}' did not produce {}", stage, rel(p)));
      fresh[rel(p)] = sha256_file(p);
      outs[rel(p)] = fresh[rel(p)];
    }
    meta["outputs"] = outs;
    const std::string text = meta.dump(2) + "\n";
    write_file_atomic(meta_path, [&](std::ostream &os) { os << text; });
    std::lock_guard lock(mu_);
    for (const auto &[k, v] : fresh) hashes_[k] = v;
    executed_.push_back(stage);
  }

  std::string hash(const fs::path &output) const {
    std::lock_guard lock(mu_);
    auto it = hashes_.find(rel(output));
    if (it == hashes_.end()) fail(ErrorCode::kState, fmt::format("no recorded hash for {}", rel(output)));
    return it->second;
  }

  std::string rel(const fs::path &p) const { return p.lexically_relative(work_).generic_string(); }

  std::vector<std::string> executed() const { return executed_; }
  std::vector<std::string> skipped() const { return skipped_; }

 private:
  bool try_skip(const std::string &stage, const fs::path &meta_path, const Inputs &inputs,
                const std::vector<fs::path> &outputs) {
    json meta;
    try {
      auto in = open_for_read(meta_path);
      meta = json::parse(in);
    } catch (const std::exception &) {
      if (force_) return false;
      fail(ErrorCode::kHashMismatch,
           fmt::format("stage '{}': stage record {} is unreadable; re-run required (use --force)",
                       stage, rel(meta_path)));
    }
    if (!meta.contains("inputs") || meta["inputs"] != json(inputs)) {
      if (force_) return false;
      fail(ErrorCode::kHashMismatch,
           fmt::format("stage '{}': inputs changed since its artifacts were produced; re-run "
                       "required (use --force)",
                       stage));
    }
    std::map<std::string, std::string> recorded;
    for (const auto &p : outputs) {
      const std::string key = rel(p);
      const std::string actual = sha256_file(p);
      if (!meta["outputs"].contains(key) || meta["outputs"][key] != actual) {
        if (force_) return false;
        fail(ErrorCode::kHashMismatch,
             fmt::format("stage '{}': artifact {} does not match its recorded hash; re-run "
                         "required (use --force)",
                         stage, key));
      }
      recorded[key] = actual;
    }
    std::lock_guard lock(mu_);
    for (const auto &[k, v] : recorded) hashes_[k] = v;
    skipped_.push_back(stage);
    spdlog::debug("stage {}: up to date", stage);
    return true;
  }

  fs::path work_;
  bool force_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> hashes_;
  std::vector<std::string> executed_;
  std::vector<std::string> skipped_;
};

// ---------------------------------------------------------------------------
// Corpus access and per-utterance front end

struct UttInfo {
  std::string id;
  std::string speaker;
  bool dev = false;
  std::size_t index = 0;  // into the synthetic corpus or the manifest
};

struct RawUtterance {
  std::optional<AudioSignal> audio;
  FeatureMatrix speaker;  // static
  FeatureMatrix asr;      // static, may be empty
  std::optional<SenoneLabels> labels;
};

struct Processed {
  FeatureMatrix speaker;
  FeatureMatrix asr;
  VadMask vad;
  std::optional<SenoneLabels> labels;
  Eigen::Index row_offset = 0;  // first row within the full utterance
};

FeatureMatrix static_mfcc(const AudioSignal &sig, int coeffs, int bins, FeatureKind kind,
                          const FrontendConfig &fe) {
  MfccOptions o;
  o.num_mel_bins = bins;
  o.kind = kind;
  return compute_mfcc(sig, coeffs, fe.frame_length, fe.frame_shift, o);
}

class CorpusAccess {
 public:
  explicit CorpusAccess(const PipelineConfig &cfg) : cfg_(cfg) {
    std::vector<std::pair<std::string, std::string>> ids;  // (utt, speaker)
    if (cfg.corpus.synthetic) {
      CorpusSpec spec = *cfg.corpus.synthetic;
      spec.seed = cfg.seed;
      synth_.emplace(spec);
      for (std::size_t i = 0; i < synth_->num_utterances(); ++i)
        ids.emplace_back(synth_->utterance_id(i), synth_->speaker_id(i));
    } else {
      manifest_ = read_manifest(cfg.corpus.manifest);
      for (const auto &r : manifest_.records) ids.emplace_back(r.utterance_id, r.speaker_id);
    }
    std::set<std::string> speakers;
    for (const auto &p : ids) speakers.insert(p.second);
    if (static_cast<int>(speakers.size()) <= cfg.corpus.dev_speakers + 1)
      fail(ErrorCode::kConfiguration,
           fmt::format("corpus has {} speakers; dev_speakers = {} leaves fewer than two for "
                       "evaluation",
                       speakers.size(), cfg.corpus.dev_speakers));
    std::set<std::string> dev;
    for (const auto &s : speakers) {
      if (static_cast<int>(dev.size()) == cfg.corpus.dev_speakers) break;
      dev.insert(s);
    }
    for (std::size_t i = 0; i < ids.size(); ++i)
      utts_.push_back({ids[i].first, ids[i].second, dev.count(ids[i].second) > 0, i});
  }

  const std::vector<UttInfo> &utterances() const { return utts_; }

  std::vector<fs::path> referenced_files() const {
    std::vector<fs::path> out;
    for (const auto &r : manifest_.records)
      for (const auto &p : {r.path, r.asr_path, r.labels_path})
        if (!p.empty()) out.push_back(p);
    return out;
  }

  RawUtterance load(const UttInfo &u) const {
    RawUtterance raw;
    if (synth_) {
      SyntheticUtterance s = synth_->render(u.index);
      raw.speaker = std::move(s.speaker);
      raw.asr = std::move(s.asr);
      raw.labels = std::move(s.labels);
      return raw;
    }
    const ManifestRecord &r = manifest_.records[u.index];
    if (r.kind == SourceKind::kAudio) {
      raw.audio = read_wav(r.path);
      raw.speaker = static_mfcc(*raw.audio, cfg_.frontend.speaker_coeffs,
                                cfg_.frontend.speaker_mel_bins, FeatureKind::kSpeaker, cfg_.frontend);
      raw.asr = static_mfcc(*raw.audio, cfg_.frontend.asr_coeffs, cfg_.frontend.asr_mel_bins,
                            FeatureKind::kAsr, cfg_.frontend);
    } else {
      raw.speaker = read_features(r.path);
      if (!r.asr_path.empty()) raw.asr = read_features(r.asr_path);
    }
    if (!r.labels_path.empty()) raw.labels = read_labels(r.labels_path);
    return raw;
  }

 private:
  const PipelineConfig &cfg_;
  std::optional<SyntheticCorpus> synth_;
  CorpusManifest manifest_;
  std::vector<UttInfo> utts_;
};

Processed process(const RawUtterance &raw, const FrontendConfig &fe, Eigen::Index row_offset) {
  Processed p;
  p.vad = energy_vad(raw.speaker, fe.vad_offset_db);
  p.speaker = sliding_cmn(append_deltas(raw.speaker, fe.delta_context), fe.speaker_cmn_window);
  if (raw.asr.num_frames() > 0) p.asr = sliding_cmn(raw.asr, fe.asr_cmn_window);
  p.labels = raw.labels;
  p.row_offset = row_offset;
  return p;
}

// Truncation protocol applied to whichever representation the utterance has.
Processed truncated(const RawUtterance &raw, const VadMask &vad, double skip, double keep,
                    const PipelineConfig &cfg) {
  const FrontendConfig &fe = cfg.frontend;
  const TruncationSpan span = locate_truncation(vad, skip, keep, KeepMode::kActive);
  const auto begin = static_cast<Eigen::Index>(std::llround(span.begin / fe.frame_shift));
  auto end = static_cast<Eigen::Index>(std::llround(span.end / fe.frame_shift));
  RawUtterance cut;
  if (raw.audio) {
    cut.audio = truncate_utterance(*raw.audio, vad, skip, keep, KeepMode::kActive);
    cut.speaker = static_mfcc(*cut.audio, fe.speaker_coeffs, fe.speaker_mel_bins,
                              FeatureKind::kSpeaker, fe);
    cut.asr = static_mfcc(*cut.audio, fe.asr_coeffs, fe.asr_mel_bins, FeatureKind::kAsr, fe);
    end = begin + cut.speaker.num_frames();
  } else {
    end = std::min(end, raw.speaker.num_frames());
    cut.speaker = raw.speaker;
    cut.speaker.frames = raw.speaker.frames.middleRows(begin, end - begin);
    if (raw.asr.num_frames() > 0) {
      cut.asr = raw.asr;
      const Eigen::Index asr_end = std::min(end, raw.asr.num_frames());
      cut.asr.frames = raw.asr.frames.middleRows(begin, std::max<Eigen::Index>(asr_end - begin, 0));
    }
  }
  if (raw.labels) {
    SenoneLabels l;
    const auto n = static_cast<Eigen::Index>(raw.labels->size());
    for (Eigen::Index t = begin; t < std::min(end, n); ++t) l.labels.push_back(raw.labels->labels[t]);
    cut.labels = std::move(l);
  }
  return process(cut, fe, begin);
}

struct AlignmentModels {
  std::optional<GmmModel> ubm;
  std::optional<TdnnModel> tdnn;
};

PosteriorMatrix posteriors_for(const std::string &source, const AlignmentModels &models,
                               const Processed &p, const std::string &base_id,
                               const PipelineConfig &cfg) {
  if (source == "file") {
    PosteriorMatrix full = load_posteriors(cfg.posterior_dir / (base_id + ".post"));
    const Eigen::Index begin = std::min(p.row_offset, full.num_frames());
    const Eigen::Index n = std::min(p.speaker.num_frames() + 2, full.num_frames() - begin);
    PosteriorMatrix out;
    out.gamma = full.gamma.middleRows(begin, n);
    return out;
  }
  UtteranceStreams streams{base_id, &p.speaker, p.asr.num_frames() > 0 ? &p.asr : nullptr,
                           p.labels ? &*p.labels : nullptr};
  if (source == "gmm") return resolve_posteriors(GmmAlignment{&*models.ubm}, streams);
  if (source == "tdnn") return resolve_posteriors(TdnnAlignment{&*models.tdnn}, streams);
  return resolve_posteriors(OracleAlignment{cfg.num_classes()}, streams);
}

SuffStats stats_for(const std::string &source, const AlignmentModels &models, const Processed &p,
                    const std::string &base_id, const PipelineConfig &cfg) {
  PosteriorMatrix post = posteriors_for(source, models, p, base_id, cfg);
  const Eigen::Index n = synchronized_length(post.num_frames(), p.speaker.num_frames());
  if (post.num_frames() == n && p.speaker.num_frames() == n) return accumulate_stats(post, p.speaker, p.vad);
  post.gamma = post.gamma.topRows(n).eval();
  FeatureMatrix feats = p.speaker;
  feats.frames = p.speaker.frames.topRows(n);
  VadMask vad = p.vad;
  vad.voiced.resize(static_cast<std::size_t>(n));
  return accumulate_stats(post, feats, vad);
}

std::string section_hash(const PipelineConfig &cfg, std::string_view section) {
  return sha256_hex(dump_pipeline_config(cfg, section));
}

template <typename F>
void parallel_for(std::size_t n, int workers, F &&fn) {
  const std::size_t threads = std::min<std::size_t>(std::max(workers, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto &th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

ExperimentGrid experiment_grid(const PipelineConfig &config) {
  ExperimentGrid grid;
  for (const auto &source : config.sources)
    for (const auto &training : config.plda.training)
      for (auto cond : config.trials.conditions) {
        const std::string c(condition_name(cond));
        grid.cells.push_back({source, training, c,
                              config.work_dir / "reports" /
                                  fmt::format("{}.{}.{}.json", source, training, c)});
      }
  return grid;
}

PipelineResult run_pipeline(const PipelineConfig &cfg, const PipelineOptions &opts) {
  cfg.validate();
  const fs::path work = cfg.work_dir;
  fs::create_directories(work);
  StageRunner runner(work, opts.force);
  const std::string seed_str = std::to_string(cfg.seed);
  CorpusAccess corpus(cfg);
  const auto &utts = corpus.utterances();
  std::map<std::string, std::string> speaker_of;  // variant id -> speaker
  for (const auto &u : utts)
    for (auto v : {kFull, kShort, kPldaShort}) speaker_of[variant_id(u.id, v)] = u.speaker;

  // Corpus.
  const fs::path utt_list = work / "corpus" / "utterances.tsv";
  {
    StageRunner::Inputs in{{"config.corpus", section_hash(cfg, "corpus")}, {"seed", seed_str}};
    if (!cfg.corpus.synthetic) {
      std::string all;
      for (const auto &p : corpus.referenced_files()) all += sha256_file(p);
      in["manifest"] = sha256_file(cfg.corpus.manifest);
      in["manifest.files"] = sha256_hex(all);
    }
    runner.run("corpus", in, {utt_list}, [&] {
      write_file_atomic(utt_list, [&](std::ostream &os) {
        for (const auto &u : utts) os << u.id << '\t' << u.speaker << '\t' << (u.dev ? "dev" : "eval") << '\n';
      });
    });
  }
  const std::string corpus_hash = runner.hash(utt_list);

  // Trials over evaluation speakers.
  std::map<std::string, fs::path> trial_files;
  {
    std::vector<fs::path> outs;
    for (auto c : cfg.trials.conditions) {
      const std::string name(condition_name(c));
      trial_files[name] = work / "trials" / (name + ".trials");
      outs.push_back(trial_files[name]);
    }
    runner.run("trials",
               {{"corpus", corpus_hash}, {"config.trials", section_hash(cfg, "trials")}, {"seed", seed_str}},
               outs, [&] {
                 std::vector<ManifestRecord> eval;
                 for (const auto &u : utts)
                   if (!u.dev) eval.push_back({u.id, u.speaker, SourceKind::kFeatures, {}, {}, {}});
                 for (auto c : cfg.trials.conditions) {
                   const TrialList list = make_trials(eval, c, cfg.trials.n_target, cfg.trials.n_nontarget,
                                                      derive_seed(cfg.seed, kTrialSeed));
                   write_trials(trial_files[std::string(condition_name(c))], list);
                 }
               });
  }

  // Alignment models share one pass over development data.
  struct Prep {
    std::vector<double> pool;  // row-major voiced frames
    Eigen::Index dim = 0;
    std::vector<FeatureMatrix> asr;
    std::vector<SenoneLabels> labels;
  };
  std::optional<Prep> prep;
  auto get_prep = [&]() -> Prep & {
    if (prep) return *prep;
    prep.emplace();
    int kept = 0;
    for (const auto &u : utts) {
      if (!u.dev) continue;
      const RawUtterance raw = corpus.load(u);
      Processed p = process(raw, cfg.frontend, 0);
      prep->dim = p.speaker.dim();
      std::size_t voiced_seen = 0;
      for (Eigen::Index t = 0; t < p.speaker.num_frames(); ++t) {
        if (!p.vad.voiced[t]) continue;
        if (voiced_seen++ % cfg.ubm.frame_stride != 0) continue;
        for (Eigen::Index d = 0; d < p.speaker.dim(); ++d) prep->pool.push_back(p.speaker.frames(t, d));
      }
      if (cfg.uses_source("tdnn") && kept < cfg.tdnn.train_utterances) {
        if (p.asr.num_frames() == 0 || !p.labels)
          fail(ErrorCode::kConfiguration,
               fmt::format("tdnn training needs ASR features and labels; {} has none", u.id));
        const Eigen::Index n = synchronized_length(p.asr.num_frames(),
                                                   static_cast<Eigen::Index>(p.labels->size()));
        p.asr.frames.conservativeResize(n, Eigen::NoChange);
        p.labels->labels.resize(static_cast<std::size_t>(n));
        prep->asr.push_back(std::move(p.asr));
        prep->labels.push_back(std::move(*p.labels));
        ++kept;
      }
    }
    return *prep;
  };

  const fs::path ubm_path = work / "models" / "ubm.gmm";
  const fs::path tdnn_path = work / "models" / "tdnn.nnet";
  const std::string frontend_hash = section_hash(cfg, "frontend");
  if (cfg.uses_source("gmm")) {
    runner.run("ubm",
               {{"corpus", corpus_hash}, {"config.frontend", frontend_hash},
                {"config.ubm", section_hash(cfg, "ubm")}, {"seed", seed_str}},
               {ubm_path}, [&] {
                 Prep &pr = get_prep();
                 const Eigen::Index rows = static_cast<Eigen::Index>(pr.pool.size()) / pr.dim;
                 const Matrix pool = Eigen::Map<const RowMatrix>(pr.pool.data(), rows, pr.dim);
                 UbmTrainOptions o;
                 o.num_components = cfg.ubm.components;
                 o.iters = cfg.ubm.iters;
                 o.seed = derive_seed(cfg.seed, kUbmSeed);
                 const UbmTrainResult r = train_ubm(pool, o);
                 spdlog::info("ubm: {} frames, final log-likelihood/frame {:.4f}", rows,
                              r.log_likelihoods.empty() ? 0.0 : r.log_likelihoods.back() / rows);
                 write_gmm(ubm_path, r.model);
               });
  }
  if (cfg.uses_source("tdnn")) {
    runner.run("tdnn",
               {{"corpus", corpus_hash}, {"config.frontend", frontend_hash},
                {"config.tdnn", section_hash(cfg, "tdnn")}, {"seed", seed_str}},
               {tdnn_path}, [&] {
                 Prep &pr = get_prep();
                 TdnnModel init = init_tdnn(pr.asr.front().dim(), parse_topology(cfg.tdnn.topology),
                                            cfg.num_classes(), derive_seed(cfg.seed, kTdnnInitSeed));
                 TdnnTrainOptions o;
                 o.batch_size = cfg.tdnn.batch_size;
                 o.steps = cfg.tdnn.steps;
                 o.learning_rate = cfg.tdnn.learning_rate;
                 o.seed = derive_seed(cfg.seed, kTdnnTrainSeed);
                 const TdnnTrainResult r = train_tdnn(std::move(init), pr.asr, pr.labels, o);
                 spdlog::info("tdnn: final window loss {:.4f}",
                              r.window_losses.empty() ? 0.0 : r.window_losses.back());
                 write_tdnn(tdnn_path, r.model);
               });
  }
  prep.reset();

  // Statistics for every source and duration variant, plus centering models.
  auto stats_path = [&](const std::string &src, std::string_view variant) {
    return work / "stats" / fmt::format("{}.{}.ark", src, variant);
  };
  auto center_path = [&](const std::string &src) { return work / "models" / (src + ".center.gmm"); };
  {
    StageRunner::Inputs in{{"corpus", corpus_hash},
                           {"config.frontend", frontend_hash},
                           {"config.durations", section_hash(cfg, "durations")},
                           {"config.alignment", section_hash(cfg, "alignment")}};
    if (cfg.uses_source("gmm")) in["models/ubm.gmm"] = runner.hash(ubm_path);
    if (cfg.uses_source("tdnn")) in["models/tdnn.nnet"] = runner.hash(tdnn_path);
    if (cfg.uses_source("file")) {
      std::string all;
      for (const auto &u : utts) all += sha256_file(cfg.posterior_dir / (u.id + ".post"));
      in["posteriors"] = sha256_hex(all);
    }
    std::vector<fs::path> outs;
    for (const auto &src : cfg.sources) {
      for (auto v : {kFull, kShort, kPldaShort}) outs.push_back(stats_path(src, v));
      outs.push_back(center_path(src));
    }
    runner.run("stats", in, outs, [&] {
      AlignmentModels models;
      if (cfg.uses_source("gmm")) models.ubm = read_gmm(ubm_path);
      if (cfg.uses_source("tdnn")) models.tdnn = read_tdnn(tdnn_path);
      std::map<std::string, std::map<std::string_view, StatsArchive>> arch;
      for (const auto &u : utts) {
        const RawUtterance raw = corpus.load(u);
        const Processed full = process(raw, cfg.frontend, 0);
        const std::string_view second = u.dev ? kPldaShort : kShort;
        const Processed cut = truncated(raw, full.vad, cfg.durations.skip,
                                        u.dev ? cfg.durations.plda_short_keep : cfg.durations.short_keep, cfg);
        for (const auto &src : cfg.sources) {
          arch[src][kFull].emplace_back(u.id, stats_for(src, models, full, u.id, cfg));
          arch[src][second].emplace_back(variant_id(u.id, second), stats_for(src, models, cut, u.id, cfg));
        }
      }
      for (const auto &src : cfg.sources) {
        for (auto v : {kFull, kShort, kPldaShort}) write_stats_archive(stats_path(src, v), arch[src][v]);
        GmmModel center;
        if (src == "gmm") {
          center = *models.ubm;
        } else {
          std::vector<SuffStats> dev;
          for (std::size_t i = 0; i < utts.size(); ++i)
            if (utts[i].dev) dev.push_back(arch[src][kFull][i].second);
          center = estimate_supervised_ubm(dev);
        }
        write_gmm(center_path(src), center);
      }
    });
  }

  std::set<std::string> dev_ids;
  for (const auto &u : utts)
    if (u.dev) dev_ids.insert(u.id);

  // Total variability and i-vectors per source.
  auto tv_path = [&](const std::string &src) { return work / "models" / (src + ".tv"); };
  auto ivec_path = [&](const std::string &src, std::string_view variant) {
    return work / "ivectors" / fmt::format("{}.{}.ivec", src, variant);
  };
  const std::string tv_cfg_hash = section_hash(cfg, "tv");
  for (const auto &src : cfg.sources) {
    runner.run("tv-" + src,
               {{runner.rel(stats_path(src, kFull)), runner.hash(stats_path(src, kFull))},
                {runner.rel(center_path(src)), runner.hash(center_path(src))},
                {"config.tv", tv_cfg_hash},
                {"seed", seed_str}},
               {tv_path(src)}, [&] {
                 const GmmModel center = read_gmm(center_path(src));
                 std::vector<SuffStats> train;
                 for (const auto &[id, s] : read_stats_archive(stats_path(src, kFull)))
                   if (dev_ids.count(id)) train.push_back(center_stats(s, center.means));
                 TvTrainOptions o;
                 o.rank = cfg.tv.rank;
                 o.iters = cfg.tv.iters;
                 o.seed = derive_seed(cfg.seed, kTvSeed);
                 o.update_sigma = cfg.tv.update_sigma;
                 const TvTrainResult r = train_tv(train, center, o);
                 if (!r.objective.empty())
                   spdlog::info("tv-{}: objective {:.6g} -> {:.6g}", src, r.objective.front(),
                                r.objective.back());
                 write_tv(tv_path(src), r.model);
               });

    StageRunner::Inputs in{{runner.rel(tv_path(src)), runner.hash(tv_path(src))}};
    std::vector<fs::path> outs;
    for (auto v : {kFull, kShort, kPldaShort}) {
      in[runner.rel(stats_path(src, v))] = runner.hash(stats_path(src, v));
      outs.push_back(ivec_path(src, v));
    }
    runner.run("ivectors-" + src, in, outs, [&] {
      const TvModel tv = read_tv(tv_path(src));
      const IvectorExtractor extractor(tv);
      for (auto v : {kFull, kShort, kPldaShort}) {
        std::vector<IVector> out;
        for (const auto &[id, s] : read_stats_archive(stats_path(src, v))) {
          const SuffStats c = center_stats(s, tv.ubm_means);
          out.push_back({id, c.n.sum() * cfg.frontend.frame_shift, extractor.extract(c)});
        }
        write_ivectors(ivec_path(src, v), out);
      }
    });
  }

  // PLDA per source and training duration.
  auto plda_path = [&](const std::string &src, const std::string &training) {
    return work / "models" / fmt::format("{}.plda-{}.plda", src, training);
  };
  auto mean_path = [&](const std::string &src, const std::string &training) {
    return work / "models" / fmt::format("{}.plda-{}.mean", src, training);
  };
  const std::string plda_cfg_hash = section_hash(cfg, "plda");
  for (const auto &src : cfg.sources) {
    for (const auto &training : cfg.plda.training) {
      const fs::path source_ivecs = ivec_path(src, training == "full" ? kFull : kPldaShort);
      runner.run(fmt::format("plda-{}-{}", src, training),
                 {{runner.rel(source_ivecs), runner.hash(source_ivecs)}, {"config.plda", plda_cfg_hash}},
                 {plda_path(src, training), mean_path(src, training)}, [&] {
                   std::vector<IVector> dev;
                   for (auto &iv : read_ivectors(source_ivecs)) {
                     const auto at = iv.utterance_id.find('@');
                     if (dev_ids.count(iv.utterance_id.substr(0, at))) dev.push_back(std::move(iv));
                   }
                   const Vector mean = ivector_mean(dev);
                   const std::vector<IVector> norm = center_and_length_normalize(dev, mean);
                   std::vector<Vector> vectors;
                   std::vector<std::string> speakers;
                   for (const auto &iv : norm) {
                     vectors.push_back(iv.w);
                     speakers.push_back(speaker_of.at(iv.utterance_id));
                   }
                   PldaTrainOptions o;
                   o.iters = cfg.plda.iters;
                   o.estimator = cfg.plda.estimator;
                   const PldaTrainResult r = train_gplda(vectors, speakers, o);
                   write_plda(plda_path(src, training), r.model);
                   const IVector m{"mean", 0.0, mean};
                   write_ivectors(mean_path(src, training), std::span<const IVector>(&m, 1));
                 });
    }
  }

  // Scores and reports; cells are independent.
  PipelineResult result;
  result.work_dir = work;
  result.grid = experiment_grid(cfg);
  parallel_for(result.grid.cells.size(), cfg.workers, [&](std::size_t i) {
    const GridCell &cell = result.grid.cells[i];
    const std::string stem = fmt::format("{}.{}.{}", cell.source, cell.plda_training, cell.condition);
    const fs::path scores_path = work / "scores" / (stem + ".scores");
    const fs::path report_txt = work / "reports" / (stem + ".txt");
    const fs::path &trials_path = trial_files.at(cell.condition);
    const fs::path full_ivecs = ivec_path(cell.source, kFull);
    const fs::path short_ivecs = ivec_path(cell.source, kShort);
    const fs::path plda = plda_path(cell.source, cell.plda_training);
    const fs::path mean = mean_path(cell.source, cell.plda_training);

    std::vector<fs::path> upstream{utt_list, trials_path};
    if (cell.source == "gmm") upstream.push_back(ubm_path);
    if (cell.source == "tdnn") upstream.push_back(tdnn_path);
    for (auto v : {kFull, kShort, kPldaShort}) upstream.push_back(stats_path(cell.source, v));
    upstream.push_back(center_path(cell.source));
    upstream.push_back(tv_path(cell.source));
    for (auto v : {kFull, kShort, kPldaShort}) upstream.push_back(ivec_path(cell.source, v));
    upstream.push_back(plda);
    upstream.push_back(mean);
    StageRunner::Inputs in;
    for (const auto &p : upstream) in[runner.rel(p)] = runner.hash(p);

    runner.run("score-" + stem, in, {scores_path, report_txt, cell.report}, [&] {
      const TrialList trials = read_trials(trials_path);
      const PldaScorer scorer(read_plda(plda));
      const Vector mu = read_ivectors(mean).at(0).w;
      std::map<std::string, Vector> vecs;
      for (const auto &path : {full_ivecs, short_ivecs})
        for (const auto &iv : read_ivectors(path)) vecs[iv.utterance_id] = iv.w;
      std::map<std::string, Vector> normed;
      auto get = [&](const std::string &id) -> const Vector & {
        auto it = normed.find(id);
        if (it != normed.end()) return it->second;
        auto v = vecs.find(id);
        if (v == vecs.end()) fail(ErrorCode::kCoverage, fmt::format("no i-vector for {}", id));
        return normed.emplace(id, length_normalize(v->second, mu)).first->second;
      };
      std::vector<TrialScore> scores;
      scores.reserve(trials.trials.size());
      for (const auto &t : trials.trials)
        scores.push_back({t.enrol_id, t.test_id, scorer.score(get(t.enrol_id), get(t.test_id)), t.label});
      write_scores(scores_path, scores);
      EvalReport report = evaluate_condition(scores, trials);
      for (const auto &p : upstream) report.provenance.emplace_back(runner.rel(p), runner.hash(p));
      report.provenance.emplace_back(runner.rel(scores_path), sha256_file(scores_path));
      const std::string text = format_report_text(report);
      const std::string js = format_report_json(report);
      write_file_atomic(report_txt, [&](std::ostream &os) { os << text; });
      write_file_atomic(cell.report, [&](std::ostream &os) { os << js; });
    });
  });

  result.executed_stages = runner.executed();
  result.skipped_stages = runner.skipped();
  return result;
}

}  // namespace svkit
