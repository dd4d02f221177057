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

// Command-line front end. Exit codes: 0 success, 1 usage or configuration,
// 2 data error, 3 training or numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "svkit/binary_io.h"
#include "svkit/eval.h"
#include "svkit/frontend.h"
#include "svkit/gmm.h"
#include "svkit/pipeline.h"
#include "svkit/plda.h"
#include "svkit/senone_net.h"
#include "svkit/stats.h"
#include "svkit/synthgen.h"
#include "svkit/total_variability.h"

namespace fs = std::filesystem;
using namespace svkit;

namespace {

bool is_feature_file(const fs::path &p) { return p.extension() == ".feat"; }

// Archives keep their ids; single stats files are keyed by file stem.
StatsArchive load_stats(const std::vector<fs::path> &paths) {
  StatsArchive out;
  for (const auto &p : paths) {
    if (p.extension() == ".ark") {
      for (auto &rec : read_stats_archive(p)) out.push_back(std::move(rec));
    } else {
      out.emplace_back(p.stem().string(), read_stats(p));
    }
  }
  return out;
}

std::map<std::string, std::string> read_utt2spk(const fs::path &path) {
  auto in = open_for_read(path);
  std::map<std::string, std::string> m;
  std::string utt, spk;
  while (in >> utt >> spk) m[utt] = spk;
  return m;
}

std::string base_id(const std::string &id) { return id.substr(0, id.find('@')); }

void write_text(const fs::path &path, const std::string &text) {
  write_file_atomic(path, [&](std::ostream &os) { os << text; });
}

// Static features of one manifest record, computed from audio when needed.
FeatureMatrix record_features(const ManifestRecord &r, bool asr, const FrontendConfig &fe) {
  if (r.kind == SourceKind::kAudio) {
    MfccOptions o;
    o.kind = asr ? FeatureKind::kAsr : FeatureKind::kSpeaker;
    o.num_mel_bins = asr ? fe.asr_mel_bins : fe.speaker_mel_bins;
    return compute_mfcc(read_wav(r.path), asr ? fe.asr_coeffs : fe.speaker_coeffs, fe.frame_length,
                        fe.frame_shift, o);
  }
  if (asr && r.asr_path.empty()) fail(ErrorCode::kFormat, r.utterance_id + ": no ASR features");
  return read_features(asr ? r.asr_path : r.path);
}

// Same front end as run-grid: VAD on static features, deltas, sliding CMN.
void accumulate_manifest(const CorpusManifest &manifest, const std::string &source,
                         const fs::path &model, int classes, const fs::path &post_dir,
                         const fs::path &out_dir) {
  const FrontendConfig fe;
  std::optional<GmmModel> ubm;
  std::optional<TdnnModel> net;
  if (source == "gmm" || source == "tdnn") {
    if (model.empty()) fail(ErrorCode::kUsage, source + " source needs --model");
    if (source == "gmm") ubm = read_gmm(model);
    else net = read_tdnn(model);
  }
  if (source == "oracle" && classes < 1) fail(ErrorCode::kUsage, "oracle source needs --classes");
  if (source == "file" && post_dir.empty()) fail(ErrorCode::kUsage, "file source needs --posterior-dir");
  for (const auto &r : manifest.records) {
    const FeatureMatrix raw = record_features(r, false, fe);
    const VadMask vad = energy_vad(raw, fe.vad_offset_db);
    const FeatureMatrix spk = sliding_cmn(append_deltas(raw, fe.delta_context), fe.speaker_cmn_window);
    PosteriorMatrix post;
    if (source == "gmm") {
      post = frame_posteriors(*ubm, spk);
    } else if (source == "tdnn") {
      post = tdnn_forward(*net, sliding_cmn(record_features(r, true, fe), fe.asr_cmn_window));
    } else if (source == "oracle") {
      if (r.labels_path.empty()) fail(ErrorCode::kFormat, r.utterance_id + ": no labels");
      post = one_hot_posteriors(read_labels(r.labels_path), classes);
    } else {
      post = load_posteriors(post_dir / (r.utterance_id + ".post"));
    }
    const Eigen::Index n = synchronized_length(post.num_frames(), spk.num_frames());
    post.gamma.conservativeResize(n, Eigen::NoChange);
    FeatureMatrix f = spk;
    f.frames.conservativeResize(n, Eigen::NoChange);
    VadMask v = vad;
    v.voiced.resize(static_cast<std::size_t>(n));
    write_stats(out_dir / (r.utterance_id + ".stats"), accumulate_stats(post, f, v));
  }
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"svkit: i-vector speaker verification toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress");

  // synth-corpus
  auto *synth = app.add_subcommand("synth-corpus", "Generate a labelled synthetic corpus");
  fs::path spec_path, synth_out;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--spec", spec_path, "Corpus spec (YAML); defaults when omitted");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Override the spec seed");

  // features
  auto *features = app.add_subcommand("features", "MFCC front end for one file or a manifest");
  fs::path feat_in, feat_out, feat_vad, feat_manifest, feat_dir;
  std::string feat_kind = "speaker";
  int feat_coeffs = 0, feat_bins = 0;
  bool feat_deltas = false;
  double feat_cmn = 0.0, vad_offset = -3.0;
  features->add_option("--input", feat_in, "WAV input");
  features->add_option("--output", feat_out, "Feature output");
  features->add_option("--manifest", feat_manifest, "Process every record of a corpus manifest");
  features->add_option("--out", feat_dir, "Output directory for --manifest: <id>.<kind>.feat and <id>.vad");
  features->add_option("--kind", feat_kind, "speaker or asr")->check(CLI::IsMember({"speaker", "asr"}));
  features->add_option("--coeffs", feat_coeffs, "Cepstra (default 20 speaker, 40 asr)");
  features->add_option("--mel-bins", feat_bins, "Mel filters (default 23 speaker, 40 asr)");
  features->add_flag("--deltas", feat_deltas, "Append delta and delta-delta");
  features->add_option("--cmn-window", feat_cmn, "Sliding CMN window in seconds (0 = off)");
  features->add_option("--vad", feat_vad, "Also write the energy VAD mask here");
  features->add_option("--vad-offset", vad_offset, "VAD threshold offset in dB");

  // truncate
  auto *truncate = app.add_subcommand("truncate", "Skip initial speech and keep a fixed duration");
  fs::path trunc_in, trunc_out;
  double skip = 2.5, keep = 7.5;
  bool keep_active = false;
  truncate->add_option("--input", trunc_in, "WAV or static feature file")->required();
  truncate->add_option("--output", trunc_out, "Output of the same kind")->required();
  truncate->add_option("--skip,--skip-active", skip, "Active seconds to skip");
  truncate->add_option("--keep", keep, "Seconds to keep");
  truncate->add_flag("--active", keep_active, "Count kept seconds as active speech");
  truncate->add_option("--vad-offset", vad_offset, "VAD threshold offset in dB");

  // train-ubm
  auto *train_ubm_cmd = app.add_subcommand("train-ubm", "Train a diagonal GMM-UBM");
  std::vector<fs::path> ubm_feats;
  fs::path ubm_out;
  UbmTrainOptions ubm_opts;
  bool ubm_all_frames = false;
  int ubm_stride = 1;
  train_ubm_cmd->add_option("--features", ubm_feats, "Feature files")->required();
  train_ubm_cmd->add_option("--output", ubm_out, "Model output")->required();
  train_ubm_cmd->add_option("--components", ubm_opts.num_components, "Mixture components");
  train_ubm_cmd->add_option("--iters", ubm_opts.iters, "EM iterations");
  train_ubm_cmd->add_option("--seed", ubm_opts.seed, "k-means++ seed");
  train_ubm_cmd->add_option("--stride", ubm_stride, "Keep every n-th frame");
  train_ubm_cmd->add_flag("--all-frames", ubm_all_frames, "Skip energy VAD on column 0");

  // train-tdnn
  auto *train_tdnn_cmd = app.add_subcommand("train-tdnn", "Train a senone TDNN");
  std::vector<fs::path> tdnn_feats, tdnn_labels;
  fs::path tdnn_out;
  std::string topology = "desk";
  int senones = 0;
  std::uint64_t tdnn_seed = 7;
  TdnnTrainOptions tdnn_opts;
  train_tdnn_cmd->add_option("--features", tdnn_feats, "ASR feature files")->required();
  train_tdnn_cmd->add_option("--labels", tdnn_labels, "Label files, one per feature file")->required();
  train_tdnn_cmd->add_option("--output", tdnn_out, "Model output")->required();
  train_tdnn_cmd->add_option("--topology,--layers", topology, "desk, full, or a layer list");
  train_tdnn_cmd->add_option("--senones", senones, "Output classes (default: max label + 1)");
  train_tdnn_cmd->add_option("--steps", tdnn_opts.steps, "SGD steps");
  train_tdnn_cmd->add_option("--batch", tdnn_opts.batch_size, "Frames per minibatch");
  train_tdnn_cmd->add_option("--lr", tdnn_opts.learning_rate, "Initial learning rate");
  train_tdnn_cmd->add_option("--seed", tdnn_seed, "Initialization and sampling seed");

  // posteriors
  auto *post_cmd = app.add_subcommand("posteriors", "Frame alignment posteriors");
  std::string post_source = "gmm";
  fs::path post_model, post_feats, post_out, post_labels, post_in;
  int top_k = 0, oracle_classes = 0;
  post_cmd->add_option("--source", post_source, "gmm, tdnn, oracle or file")
      ->check(CLI::IsMember({"gmm", "tdnn", "oracle", "file"}));
  post_cmd->add_option("--input", post_in, "Existing posterior file (file source)");
  post_cmd->add_option("--model", post_model, "GMM or TDNN model");
  post_cmd->add_option("--features", post_feats, "Features (speaker for gmm, asr for tdnn)");
  post_cmd->add_option("--labels", post_labels, "Labels (oracle)");
  post_cmd->add_option("--classes", oracle_classes, "Classes (oracle)");
  post_cmd->add_option("--output", post_out, "Posterior output")->required();
  post_cmd->add_option("--top-k", top_k, "Sparse output keeping k entries per frame");

  // accumulate-stats
  auto *acc_cmd = app.add_subcommand("accumulate-stats", "Baum-Welch statistics");
  fs::path acc_post, acc_feats, acc_vad, acc_out, acc_manifest, acc_dir, acc_model, acc_post_dir;
  std::string acc_source;
  int acc_classes = 0;
  acc_cmd->add_option("--posteriors", acc_post, "Posterior file");
  acc_cmd->add_option("--features", acc_feats, "Speaker features");
  acc_cmd->add_option("--vad", acc_vad, "VAD mask (default: all frames voiced)");
  acc_cmd->add_option("--output", acc_out, "Stats output");
  acc_cmd->add_option("--manifest", acc_manifest, "Corpus manifest (batch mode)");
  acc_cmd->add_option("--posterior-source", acc_source, "gmm, tdnn, oracle or file (batch mode)")
      ->check(CLI::IsMember({"gmm", "tdnn", "oracle", "file"}));
  acc_cmd->add_option("--model", acc_model, "GMM or TDNN model (batch mode)");
  acc_cmd->add_option("--classes", acc_classes, "Classes (oracle source)");
  acc_cmd->add_option("--posterior-dir", acc_post_dir, "<id>.post files (file source)");
  acc_cmd->add_option("--out", acc_dir, "Output directory for batch mode: <id>.stats");

  // train-tv
  auto *tv_cmd = app.add_subcommand("train-tv", "Train the total-variability matrix");
  std::vector<fs::path> tv_stats;
  fs::path tv_ubm, tv_out;
  TvTrainOptions tv_opts;
  bool tv_fixed_sigma = false;
  tv_cmd->add_option("--stats", tv_stats, "Uncentered stats files or archives")->required();
  tv_cmd->add_option("--ubm", tv_ubm, "Centering model (UBM or supervised UBM)")->required();
  tv_cmd->add_option("--output", tv_out, "Model output")->required();
  tv_cmd->add_option("--rank", tv_opts.rank, "i-vector dimension");
  tv_cmd->add_option("--iters", tv_opts.iters, "EM iterations");
  tv_cmd->add_option("--seed", tv_opts.seed, "Initialization seed");
  tv_cmd->add_flag("--fixed-sigma", tv_fixed_sigma, "Keep the residual covariance at the UBM's");

  // extract-ivectors
  auto *ext_cmd = app.add_subcommand("extract-ivectors", "Extract i-vectors");
  std::vector<fs::path> ext_stats;
  fs::path ext_tv, ext_out;
  ext_cmd->add_option("--tv", ext_tv, "TV model")->required();
  ext_cmd->add_option("--stats", ext_stats, "Uncentered stats files or archives")->required();
  ext_cmd->add_option("--output", ext_out, "i-vector output")->required();

  // train-plda
  auto *plda_cmd = app.add_subcommand("train-plda", "Train GPLDA on development i-vectors");
  fs::path plda_ivecs, plda_utt2spk, plda_out;
  PldaTrainOptions plda_opts;
  std::string estimator = "em";
  plda_cmd->add_option("--ivectors", plda_ivecs, "Development i-vectors")->required();
  plda_cmd->add_option("--utt2spk", plda_utt2spk, "Lines 'utterance speaker'")->required();
  plda_cmd->add_option("--output", plda_out, "Model output; the centering mean goes to <output>.mean")
      ->required();
  plda_cmd->add_option("--iters", plda_opts.iters, "EM iterations");
  plda_cmd->add_option("--estimator", estimator, "em or scatter")->check(CLI::IsMember({"em", "scatter"}));

  // score
  auto *score_cmd = app.add_subcommand("score", "Score a trial list");
  fs::path score_plda, score_mean, score_trials, score_out;
  std::vector<fs::path> score_ivecs;
  score_cmd->add_option("--plda", score_plda, "PLDA model")->required();
  score_cmd->add_option("--mean", score_mean, "Centering mean (default <plda>.mean)");
  score_cmd->add_option("--ivectors", score_ivecs, "i-vector files")->required();
  score_cmd->add_option("--trials", score_trials, "Trial list")->required();
  score_cmd->add_option("--output", score_out, "Score output")->required();

  // evaluate
  auto *eval_cmd = app.add_subcommand("evaluate", "EER and DET of a scored trial list");
  fs::path eval_scores, eval_trials, eval_out, eval_json;
  eval_cmd->add_option("--scores", eval_scores, "Scores")->required();
  eval_cmd->add_option("--trials", eval_trials, "Trial list")->required();
  eval_cmd->add_option("--output", eval_out, "Text report (default stdout)");
  eval_cmd->add_option("--json", eval_json, "Machine-readable report");

  // run-grid
  auto *grid_cmd = app.add_subcommand("run-grid", "Run the full pipeline and the condition grid");
  fs::path grid_config, grid_work;
  bool force = false;
  std::optional<std::uint64_t> grid_seed;
  std::optional<int> grid_workers;
  grid_cmd->add_option("--config", grid_config, "Pipeline config (YAML); desk defaults when omitted");
  grid_cmd->add_option("--work-dir", grid_work, "Artifact directory (overrides the config)");
  grid_cmd->add_option("--seed", grid_seed, "Override the config seed");
  grid_cmd->add_option("--workers", grid_workers, "Concurrent grid cells");
  grid_cmd->add_flag("--force", force, "Re-run stale or corrupted stages");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (*synth) {
      CorpusSpec spec = spec_path.empty() ? CorpusSpec{} : read_corpus_spec(spec_path);
      if (synth_seed) spec.seed = *synth_seed;
      const CorpusManifest m = generate_corpus(spec, synth_out);
      fmt::print("{} utterances -> {}\n", m.records.size(), (synth_out / "manifest.tsv").string());
    } else if (*features) {
      const bool asr = feat_kind == "asr";
      MfccOptions o;
      o.kind = asr ? FeatureKind::kAsr : FeatureKind::kSpeaker;
      o.num_mel_bins = feat_bins > 0 ? feat_bins : (asr ? 40 : 23);
      const int coeffs = feat_coeffs > 0 ? feat_coeffs : (asr ? 40 : 20);
      auto finish = [&](FeatureMatrix f, const fs::path &out, const fs::path &vad) {
        if (!vad.empty()) write_vad(vad, energy_vad(f, vad_offset));
        if (feat_deltas) f = append_deltas(f);
        if (feat_cmn > 0) f = sliding_cmn(f, feat_cmn);
        write_features(out, f);
      };
      if (!feat_manifest.empty()) {
        if (feat_dir.empty()) fail(ErrorCode::kUsage, "--manifest needs --out");
        for (const auto &r : read_manifest(feat_manifest).records) {
          FeatureMatrix f;
          if (r.kind == SourceKind::kAudio) f = compute_mfcc(read_wav(r.path), coeffs, 0.025, 0.01, o);
          else if (asr && r.asr_path.empty()) fail(ErrorCode::kFormat, r.utterance_id + ": no ASR features");
          else f = read_features(asr ? r.asr_path : r.path);
          finish(std::move(f), feat_dir / (r.utterance_id + "." + feat_kind + ".feat"),
                 feat_dir / (r.utterance_id + ".vad"));
        }
      } else {
        if (feat_in.empty() || feat_out.empty())
          fail(ErrorCode::kUsage, "features needs --input and --output, or --manifest and --out");
        finish(compute_mfcc(read_wav(feat_in), coeffs, 0.025, 0.01, o), feat_out, feat_vad);
      }
    } else if (*truncate) {
      const KeepMode mode = keep_active ? KeepMode::kActive : KeepMode::kRaw;
      if (is_feature_file(trunc_in)) {
        const FeatureMatrix f = read_features(trunc_in);
        write_features(trunc_out, truncate_features(f, energy_vad(f, vad_offset), skip, keep, mode));
      } else {
        const AudioSignal sig = read_wav(trunc_in);
        const FeatureMatrix f = compute_mfcc(sig, 20, 0.025, 0.01);
        write_wav(trunc_out, truncate_utterance(sig, energy_vad(f, vad_offset), skip, keep, mode));
      }
    } else if (*train_ubm_cmd) {
      std::vector<double> rows;
      Eigen::Index dim = -1;
      for (const auto &p : ubm_feats) {
        const FeatureMatrix f = read_features(p);
        if (dim >= 0 && f.dim() != dim) fail(ErrorCode::kDimensionMismatch, p.string() + ": dimension differs");
        dim = f.dim();
        const VadMask vad = ubm_all_frames ? VadMask{} : energy_vad(f, vad_offset);
        std::size_t seen = 0;
        for (Eigen::Index t = 0; t < f.num_frames(); ++t) {
          if (!ubm_all_frames && !vad.voiced[t]) continue;
          if (seen++ % static_cast<std::size_t>(std::max(ubm_stride, 1)) != 0) continue;
          for (Eigen::Index d = 0; d < dim; ++d) rows.push_back(f.frames(t, d));
        }
      }
      const Eigen::Index n = dim > 0 ? static_cast<Eigen::Index>(rows.size()) / dim : 0;
      const Matrix pool = Eigen::Map<const RowMatrix>(rows.data(), n, std::max<Eigen::Index>(dim, 0));
      const UbmTrainResult r = train_ubm(pool, ubm_opts);
      write_gmm(ubm_out, r.model);
      for (std::size_t i = 0; i < r.log_likelihoods.size(); ++i)
        spdlog::info("iter {} log-likelihood/frame {:.6f}", i, r.log_likelihoods[i] / n);
    } else if (*train_tdnn_cmd) {
      if (tdnn_feats.size() != tdnn_labels.size())
        fail(ErrorCode::kUsage, "--features and --labels need the same number of files");
      std::vector<FeatureMatrix> feats;
      std::vector<SenoneLabels> labels;
      int max_label = -1;
      for (std::size_t i = 0; i < tdnn_feats.size(); ++i) {
        feats.push_back(read_features(tdnn_feats[i]));
        labels.push_back(read_labels(tdnn_labels[i]));
        const auto n = synchronized_length(feats.back().num_frames(),
                                           static_cast<Eigen::Index>(labels.back().size()));
        feats.back().frames.conservativeResize(n, Eigen::NoChange);
        labels.back().labels.resize(static_cast<std::size_t>(n));
        for (auto l : labels.back().labels)
          if (l != SenoneLabels::kIgnore) max_label = std::max<int>(max_label, l);
      }
      const int classes = senones > 0 ? senones : max_label + 1;
      tdnn_opts.seed = derive_seed(tdnn_seed, 1);
      TdnnModel init = init_tdnn(feats.front().dim(), parse_topology(topology), classes, tdnn_seed);
      const TdnnTrainResult r = train_tdnn(std::move(init), feats, labels, tdnn_opts);
      write_tdnn(tdnn_out, r.model);
      for (std::size_t i = 0; i < r.window_losses.size(); ++i)
        spdlog::info("window {} loss {:.6f}", i, r.window_losses[i]);
    } else if (*post_cmd) {
      PosteriorMatrix post;
      if (post_source == "file") {
        if (post_in.empty()) fail(ErrorCode::kUsage, "file posteriors need --input");
        post = load_posteriors(post_in);
      } else if (post_source == "oracle") {
        if (post_labels.empty() || oracle_classes < 1)
          fail(ErrorCode::kUsage, "oracle posteriors need --labels and --classes");
        post = one_hot_posteriors(read_labels(post_labels), oracle_classes);
      } else {
        if (post_model.empty() || post_feats.empty())
          fail(ErrorCode::kUsage, "gmm and tdnn posteriors need --model and --features");
        const FeatureMatrix f = read_features(post_feats);
        post = post_source == "gmm" ? frame_posteriors(read_gmm(post_model), f)
                                    : tdnn_forward(read_tdnn(post_model), f);
      }
      if (top_k > 0) write_posteriors_sparse(post_out, post, top_k);
      else write_posteriors(post_out, post);
    } else if (*acc_cmd && !acc_manifest.empty()) {
      if (acc_source.empty() || acc_dir.empty())
        fail(ErrorCode::kUsage, "--manifest needs --posterior-source and --out");
      accumulate_manifest(read_manifest(acc_manifest), acc_source, acc_model, acc_classes, acc_post_dir,
                          acc_dir);
    } else if (*acc_cmd) {
      if (acc_post.empty() || acc_feats.empty() || acc_out.empty())
        fail(ErrorCode::kUsage, "accumulate-stats needs --posteriors, --features and --output, or --manifest");
      const PosteriorMatrix post = load_posteriors(acc_post);
      const FeatureMatrix f = read_features(acc_feats);
      VadMask vad;
      if (acc_vad.empty()) vad.voiced.assign(static_cast<std::size_t>(f.num_frames()), 1);
      else vad = read_vad(acc_vad);
      write_stats(acc_out, accumulate_stats(post, f, vad));
    } else if (*tv_cmd) {
      const GmmModel ubm = read_gmm(tv_ubm);
      std::vector<SuffStats> centered;
      for (const auto &[id, s] : load_stats(tv_stats)) centered.push_back(center_stats(s, ubm.means));
      tv_opts.update_sigma = !tv_fixed_sigma;
      const TvTrainResult r = train_tv(centered, ubm, tv_opts);
      write_tv(tv_out, r.model);
      for (std::size_t i = 0; i < r.objective.size(); ++i)
        spdlog::info("iter {} objective {:.6f}", i, r.objective[i]);
    } else if (*ext_cmd) {
      const TvModel tv = read_tv(ext_tv);
      const IvectorExtractor extractor(tv);
      std::vector<IVector> out;
      for (const auto &[id, s] : load_stats(ext_stats)) {
        const SuffStats c = center_stats(s, tv.ubm_means);
        out.push_back({id, c.n.sum() * 0.01, extractor.extract(c)});
      }
      write_ivectors(ext_out, out);
    } else if (*plda_cmd) {
      const auto utt2spk = read_utt2spk(plda_utt2spk);
      const auto ivecs = read_ivectors(plda_ivecs);
      const Vector mean = ivector_mean(ivecs);
      std::vector<Vector> vectors;
      std::vector<std::string> speakers;
      for (const auto &iv : center_and_length_normalize(ivecs, mean)) {
        auto it = utt2spk.find(iv.utterance_id);
        if (it == utt2spk.end()) it = utt2spk.find(base_id(iv.utterance_id));
        if (it == utt2spk.end()) fail(ErrorCode::kFormat, "no speaker for " + iv.utterance_id);
        vectors.push_back(iv.w);
        speakers.push_back(it->second);
      }
      plda_opts.estimator = estimator == "em" ? PldaEstimator::kEm : PldaEstimator::kScatter;
      const PldaTrainResult r = train_gplda(vectors, speakers, plda_opts);
      write_plda(plda_out, r.model);
      const IVector m{"mean", 0.0, mean};
      write_ivectors(fs::path(plda_out.string() + ".mean"), std::span<const IVector>(&m, 1));
    } else if (*score_cmd) {
      const PldaScorer scorer(read_plda(score_plda));
      const fs::path mean_path = score_mean.empty() ? fs::path(score_plda.string() + ".mean") : score_mean;
      const Vector mean = read_ivectors(mean_path).at(0).w;
      std::map<std::string, Vector> vecs;
      for (const auto &p : score_ivecs)
        for (const auto &iv : read_ivectors(p)) vecs[iv.utterance_id] = length_normalize(iv.w, mean);
      const TrialList trials = read_trials(score_trials);
      std::vector<TrialScore> scores;
      for (const auto &t : trials.trials) {
        auto e = vecs.find(t.enrol_id), v = vecs.find(t.test_id);
        if (e == vecs.end() || v == vecs.end())
          fail(ErrorCode::kCoverage, fmt::format("no i-vector for trial {} {}", t.enrol_id, t.test_id));
        scores.push_back({t.enrol_id, t.test_id, scorer.score(e->second, v->second), t.label});
      }
      write_scores(score_out, scores);
    } else if (*eval_cmd) {
      const EvalReport report = evaluate_condition(read_scores(eval_scores), read_trials(eval_trials));
      const std::string text = format_report_text(report);
      if (eval_out.empty()) fmt::print("{}", text);
      else write_text(eval_out, text);
      if (!eval_json.empty()) write_text(eval_json, format_report_json(report));
    } else if (*grid_cmd) {
      PipelineConfig cfg = grid_config.empty() ? default_pipeline_config() : load_pipeline_config(grid_config);
      if (!grid_work.empty()) cfg.work_dir = grid_work;
      if (grid_seed) cfg.seed = *grid_seed;
      if (grid_workers) cfg.workers = *grid_workers;
      const PipelineResult r = run_pipeline(cfg, {force});
      const GridTable table = run_grid(r.grid);
      write_text(r.work_dir / "grid.txt", table.text);
      write_text(r.work_dir / "grid.json", table.json);
      fmt::print("{}", table.text);
      spdlog::info("{} stages run, {} up to date", r.executed_stages.size(), r.skipped_stages.size());
    }
  } catch (const Error &e) {
    std::fprintf(stderr, "svkit: %s error: %s\n", std::string(error_code_name(e.code())).c_str(), e.what());
    return e.exit_code();
  } catch (const std::exception &e) {
    std::fprintf(stderr, "svkit: %s\n", e.what());
    return 2;
  }
  return 0;
}
