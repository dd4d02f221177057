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

#include "svkit/synthgen.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include "svkit/binary_io.h"

namespace svkit {
namespace {

constexpr std::uint64_t kSpeakerStream = 0x5350454b;
constexpr std::uint64_t kUtteranceStream = 0x55545445;
constexpr int kSamplesPerShift = 80;  // 10 ms at 8 kHz
constexpr int kSamplesPerWindow = 200;

Matrix gaussian_matrix(std::mt19937_64 &rng, Eigen::Index rows, Eigen::Index cols,
                       double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

Vector gaussian_vector(std::mt19937_64 &rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

std::string speaker_name(std::size_t s) { return fmt::format("spk{:03d}", s); }

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void CorpusSpec::validate() const {
  auto positive = [](double v, const char *name) {
    if (!(v > 0)) fail(ErrorCode::kConfiguration, fmt::format("corpus spec: {} must be positive", name));
  };
  positive(n_speakers, "n_speakers");
  positive(sessions_per_speaker, "sessions_per_speaker");
  positive(active_seconds_per_session, "active_seconds_per_session");
  positive(feature_dim, "feature_dim");
  positive(asr_dim, "asr_dim");
  positive(frame_shift, "frame_shift");
  positive(mean_voiced_run, "mean_voiced_run");
  positive(frame_noise, "frame_noise");
  positive(asr_noise, "asr_noise");
  if (n_classes < 2) fail(ErrorCode::kConfiguration, "corpus spec: n_classes must be at least 2");
  if (n_classes >= SenoneLabels::kIgnore)
    fail(ErrorCode::kConfiguration, "corpus spec: n_classes exceeds the label range");
  if (feature_dim < 2 || asr_dim < 2)
    fail(ErrorCode::kConfiguration, "corpus spec: feature dimensions must be at least 2");
  if (speaker_subspace_dim < 0 || session_subspace_dim < 0)
    fail(ErrorCode::kConfiguration, "corpus spec: subspace dimensions must be non-negative");
  if (!(unvoiced_fraction >= 0.0 && unvoiced_fraction < 1.0))
    fail(ErrorCode::kConfiguration, "corpus spec: unvoiced_fraction must lie in [0, 1)");
  if (!(self_transition >= 0.0 && self_transition <= 1.0))
    fail(ErrorCode::kConfiguration, "corpus spec: self_transition must lie in [0, 1]");
  if (mode == SynthMode::kWaveform && std::abs(frame_shift - 0.01) > 1e-12)
    fail(ErrorCode::kConfiguration, "corpus spec: waveform mode requires a 10 ms frame shift");
}

CorpusSpec read_corpus_spec(const std::filesystem::path &path) {
  auto in = open_for_read(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_corpus_spec(ss.str(), path.string());
}

CorpusSpec parse_corpus_spec(std::string_view yaml_text, const std::string &source) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception &e) {
    fail(ErrorCode::kConfiguration, fmt::format("{}: {}", source, e.what()));
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) fail(ErrorCode::kConfiguration, source + ": corpus spec must be a mapping");
  CorpusSpec spec;
  auto get = [&](const char *key, auto &field) {
    if (root[key]) field = root[key].as<std::decay_t<decltype(field)>>();
  };
  try {
    get("n_speakers", spec.n_speakers);
    get("sessions_per_speaker", spec.sessions_per_speaker);
    get("active_seconds_per_session", spec.active_seconds_per_session);
    get("n_classes", spec.n_classes);
    get("feature_dim", spec.feature_dim);
    get("asr_dim", spec.asr_dim);
    get("speaker_subspace_dim", spec.speaker_subspace_dim);
    get("session_subspace_dim", spec.session_subspace_dim);
    get("seed", spec.seed);
    get("unvoiced_fraction", spec.unvoiced_fraction);
    get("frame_shift", spec.frame_shift);
    get("self_transition", spec.self_transition);
    get("mean_voiced_run", spec.mean_voiced_run);
    get("class_spread", spec.class_spread);
    get("frame_noise", spec.frame_noise);
    get("speaker_scale", spec.speaker_scale);
    get("session_scale", spec.session_scale);
    get("asr_spread", spec.asr_spread);
    get("asr_noise", spec.asr_noise);
    get("energy_gap", spec.energy_gap);
    if (root["mode"]) {
      const auto mode = root["mode"].as<std::string>();
      if (mode == "features") spec.mode = SynthMode::kFeatures;
      else if (mode == "waveform") spec.mode = SynthMode::kWaveform;
      else fail(ErrorCode::kConfiguration, "corpus spec: mode must be features or waveform");
    }
  } catch (const YAML::Exception &e) {
    fail(ErrorCode::kConfiguration, fmt::format("{}: {}", source, e.what()));
  }
  spec.validate();
  return spec;
}

std::string corpus_spec_to_yaml(const CorpusSpec &spec) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "n_speakers" << YAML::Value << spec.n_speakers;
  out << YAML::Key << "sessions_per_speaker" << YAML::Value << spec.sessions_per_speaker;
  out << YAML::Key << "active_seconds_per_session" << YAML::Value << spec.active_seconds_per_session;
  out << YAML::Key << "n_classes" << YAML::Value << spec.n_classes;
  out << YAML::Key << "feature_dim" << YAML::Value << spec.feature_dim;
  out << YAML::Key << "asr_dim" << YAML::Value << spec.asr_dim;
  out << YAML::Key << "speaker_subspace_dim" << YAML::Value << spec.speaker_subspace_dim;
  out << YAML::Key << "session_subspace_dim" << YAML::Value << spec.session_subspace_dim;
  out << YAML::Key << "seed" << YAML::Value << spec.seed;
  out << YAML::Key << "unvoiced_fraction" << YAML::Value << spec.unvoiced_fraction;
  out << YAML::Key << "mode" << YAML::Value
      << (spec.mode == SynthMode::kWaveform ? "waveform" : "features");
  out << YAML::Key << "frame_shift" << YAML::Value << spec.frame_shift;
  out << YAML::Key << "self_transition" << YAML::Value << spec.self_transition;
  out << YAML::Key << "mean_voiced_run" << YAML::Value << spec.mean_voiced_run;
  out << YAML::Key << "class_spread" << YAML::Value << spec.class_spread;
  out << YAML::Key << "frame_noise" << YAML::Value << spec.frame_noise;
  out << YAML::Key << "speaker_scale" << YAML::Value << spec.speaker_scale;
  out << YAML::Key << "session_scale" << YAML::Value << spec.session_scale;
  out << YAML::Key << "asr_spread" << YAML::Value << spec.asr_spread;
  out << YAML::Key << "asr_noise" << YAML::Value << spec.asr_noise;
  out << YAML::Key << "energy_gap" << YAML::Value << spec.energy_gap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void write_corpus_spec(const std::filesystem::path &path, const CorpusSpec &spec) {
  const std::string text = corpus_spec_to_yaml(spec);
  write_file_atomic(path, [&](std::ostream &os) { os << text; });
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::string manifest_path_field(const std::filesystem::path &p, const std::filesystem::path &base) {
  if (p.empty()) return "-";
  if (p.is_absolute()) {
    std::error_code ec;
    auto rel = std::filesystem::relative(p, base, ec);
    if (!ec && !rel.empty() && *rel.begin() != "..") return rel.generic_string();
  }
  return p.generic_string();
}

std::filesystem::path resolve_field(const std::string &field, const std::filesystem::path &base) {
  if (field == "-") return {};
  std::filesystem::path p(field);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

void write_manifest(const std::filesystem::path &path, const CorpusManifest &manifest) {
  const auto base = std::filesystem::absolute(path).parent_path();
  write_file_atomic(path, [&](std::ostream &os) {
    for (const auto &r : manifest.records) {
      os << r.utterance_id << '\t' << r.speaker_id << '\t'
         << (r.kind == SourceKind::kAudio ? "audio" : "features") << '\t'
         << manifest_path_field(r.path, base) << '\t' << manifest_path_field(r.asr_path, base)
         << '\t' << manifest_path_field(r.labels_path, base) << '\n';
    }
  });
}

CorpusManifest read_manifest(const std::filesystem::path &path) {
  auto in = open_for_read(path);
  const auto base = std::filesystem::absolute(path).parent_path();
  CorpusManifest manifest;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 6)
      fail(ErrorCode::kFormat,
           fmt::format("{}:{}: expected 6 tab-separated fields", path.string(), lineno));
    ManifestRecord r;
    r.utterance_id = fields[0];
    r.speaker_id = fields[1];
    if (fields[2] == "audio") r.kind = SourceKind::kAudio;
    else if (fields[2] == "features") r.kind = SourceKind::kFeatures;
    else fail(ErrorCode::kFormat, fmt::format("{}:{}: unknown kind '{}'", path.string(), lineno, fields[2]));
    r.path = resolve_field(fields[3], base);
    r.asr_path = resolve_field(fields[4], base);
    r.labels_path = resolve_field(fields[5], base);
    if (r.path.empty()) fail(ErrorCode::kFormat, fmt::format("{}:{}: missing path", path.string(), lineno));
    if (!seen.insert(r.utterance_id).second)
      fail(ErrorCode::kFormat, fmt::format("{}: duplicate utterance id {}", path.string(), r.utterance_id));
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// Renderer

SyntheticCorpus::SyntheticCorpus(CorpusSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(derive_seed(spec_.seed, 0));
  const int k = spec_.n_classes;
  const int d = spec_.feature_dim;
  class_means_ = gaussian_matrix(rng, k, d, spec_.class_spread);
  class_means_.col(0).setZero();
  std::uniform_real_distribution<double> u(0.7, 1.3);
  class_noise_.resize(k, d);
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j) class_noise_(c, j) = spec_.frame_noise * u(rng);
  class_noise_.col(0).setConstant(0.5);
  // Loadings are scaled so each dimension's offset has std speaker_scale
  // (resp. session_scale) whatever the subspace dimension.
  const int q = spec_.speaker_subspace_dim;
  const int qs = spec_.session_subspace_dim;
  for (int c = 0; c < k; ++c) {
    Matrix v = q > 0 ? gaussian_matrix(rng, d, q, spec_.speaker_scale / std::sqrt(q)) : Matrix(d, 0);
    Matrix w = qs > 0 ? gaussian_matrix(rng, d, qs, spec_.session_scale / std::sqrt(qs)) : Matrix(d, 0);
    v.row(0).setZero();
    w.row(0).setZero();
    if (c == 0) {
      v.setZero();
      w.setZero();
    }
    speaker_load_.push_back(std::move(v));
    session_load_.push_back(std::move(w));
  }
  asr_means_ = gaussian_matrix(rng, k, spec_.asr_dim, spec_.asr_spread);
  asr_means_.col(0).setZero();
  std::uniform_real_distribution<double> f(250.0, 3400.0);
  formants_.resize(k, 3);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < 3; ++j) formants_(c, j) = f(rng);
  }
}

std::size_t SyntheticCorpus::num_utterances() const {
  return static_cast<std::size_t>(spec_.n_speakers) * spec_.sessions_per_speaker;
}

std::string SyntheticCorpus::utterance_id(std::size_t index) const {
  return fmt::format("{}_s{}", speaker_id(index), index % spec_.sessions_per_speaker);
}

std::string SyntheticCorpus::speaker_id(std::size_t index) const {
  return speaker_name(index / spec_.sessions_per_speaker);
}

SyntheticCorpus::Plan SyntheticCorpus::plan(std::size_t index, std::uint64_t &stream_seed) const {
  if (index >= num_utterances()) fail(ErrorCode::kUsage, "synthetic utterance index out of range");
  Plan p;
  const std::size_t speaker = index / spec_.sessions_per_speaker;
  std::mt19937_64 srng(derive_seed(spec_.seed ^ kSpeakerStream, speaker));
  p.speaker = gaussian_vector(srng, spec_.speaker_subspace_dim);

  stream_seed = derive_seed(spec_.seed ^ kUtteranceStream, index);
  std::mt19937_64 rng(stream_seed);
  p.session = gaussian_vector(rng, spec_.session_subspace_dim);

  const auto active = static_cast<std::size_t>(
      std::llround(spec_.active_seconds_per_session / spec_.frame_shift));
  const double voiced_run = std::max(1.0, spec_.mean_voiced_run / spec_.frame_shift);
  const double f = spec_.unvoiced_fraction;
  const double unvoiced_run = voiced_run * f / (1.0 - f);
  std::geometric_distribution<int> vrun(1.0 / voiced_run);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int voiced_classes = spec_.n_classes - 1;
  std::uniform_int_distribution<int> pick(1, voiced_classes);

  // Pause lengths are uniform within +-50% of the mean so that the voiced
  // fraction of each utterance stays close to the target.
  auto silence = [&] {
    if (unvoiced_run <= 0.0) return;
    const double lo = std::max(1.0, 0.5 * unvoiced_run);
    std::uniform_real_distribution<double> urun(lo, std::max(lo, 1.5 * unvoiced_run));
    const auto len = static_cast<std::size_t>(std::llround(urun(rng)));
    p.labels.labels.insert(p.labels.labels.end(), len, 0);
  };

  int state = pick(rng);
  std::size_t voiced = 0;
  silence();
  while (voiced < active) {
    const auto len = std::min<std::size_t>(1 + vrun(rng), active - voiced);
    for (std::size_t i = 0; i < len; ++i) {
      if (voiced_classes > 1 && u(rng) >= spec_.self_transition) {
        int next = 1 + static_cast<int>(u(rng) * (voiced_classes - 1));
        if (next >= state) ++next;
        state = std::min(next, voiced_classes);
      }
      p.labels.labels.push_back(static_cast<std::uint16_t>(state));
    }
    voiced += len;
    silence();
  }
  return p;
}

SyntheticUtterance SyntheticCorpus::render(std::size_t index) const {
  std::uint64_t stream_seed = 0;
  const Plan p = plan(index, stream_seed);
  std::mt19937_64 rng(derive_seed(stream_seed, 1));
  std::normal_distribution<double> g(0.0, 1.0);

  const auto t_frames = static_cast<Eigen::Index>(p.labels.size());
  const int k = spec_.n_classes;
  const int d = spec_.feature_dim;
  Matrix shifted(k, d);
  for (int c = 0; c < k; ++c) {
    Vector m = class_means_.row(c).transpose();
    if (p.speaker.size() > 0) m += speaker_load_[c] * p.speaker;
    if (p.session.size() > 0) m += session_load_[c] * p.session;
    shifted.row(c) = m.transpose();
  }

  SyntheticUtterance out;
  out.labels = p.labels;
  out.speaker.kind = FeatureKind::kSpeaker;
  out.speaker.frame_shift = spec_.frame_shift;
  out.speaker.frames.resize(t_frames, d);
  out.asr.kind = FeatureKind::kAsr;
  out.asr.frame_shift = spec_.frame_shift;
  out.asr.frames.resize(t_frames, spec_.asr_dim);
  for (Eigen::Index t = 0; t < t_frames; ++t) {
    const int c = p.labels.labels[t];
    const double energy = (c == 0 ? -spec_.energy_gap : 0.0) + 0.5 * g(rng);
    out.speaker.frames(t, 0) = energy;
    for (int j = 1; j < d; ++j) out.speaker.frames(t, j) = shifted(c, j) + class_noise_(c, j) * g(rng);
    out.asr.frames(t, 0) = energy;
    for (int j = 1; j < spec_.asr_dim; ++j)
      out.asr.frames(t, j) = asr_means_(c, j) + spec_.asr_noise * g(rng);
  }
  return out;
}

AudioSignal SyntheticCorpus::render_waveform(std::size_t index, SenoneLabels *labels) const {
  std::uint64_t stream_seed = 0;
  const Plan p = plan(index, stream_seed);
  std::mt19937_64 rng(derive_seed(stream_seed, 2));
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  const auto t_frames = static_cast<std::int64_t>(p.labels.size());
  AudioSignal sig;
  sig.sample_rate = 8000;
  const std::int64_t n = kSamplesPerShift * (t_frames - 1) + kSamplesPerWindow;
  sig.samples.assign(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)), 0.0);

  // Per-class formant gains carry the speaker and session offsets.
  const int k = spec_.n_classes;
  Matrix gain(k, 3);
  for (int c = 0; c < k; ++c) {
    Vector off = Vector::Zero(spec_.feature_dim);
    if (p.speaker.size() > 0) off += speaker_load_[c] * p.speaker;
    if (p.session.size() > 0) off += session_load_[c] * p.session;
    for (int j = 0; j < 3; ++j) gain(c, j) = std::exp(off(1 + j % (spec_.feature_dim - 1)));
  }
  double ph[3] = {phase(rng), phase(rng), phase(rng)};
  for (std::int64_t s = 0; s < n; ++s) {
    const auto frame = std::clamp<std::int64_t>((s - kSamplesPerWindow / 2 + kSamplesPerShift / 2) /
                                                    kSamplesPerShift,
                                                0, t_frames - 1);
    const int c = p.labels.labels[static_cast<std::size_t>(frame)];
    double v = 0.0;
    if (c == 0) {
      v = 0.001 * g(rng);
    } else {
      for (int j = 0; j < 3; ++j) {
        ph[j] += 2.0 * std::numbers::pi * formants_(c, j) / sig.sample_rate;
        v += 0.08 * gain(c, j) * std::sin(ph[j]);
      }
      v += 0.01 * g(rng);
    }
    sig.samples[static_cast<std::size_t>(s)] = std::clamp(v, -0.99, 0.99);
  }
  if (labels) *labels = p.labels;
  return sig;
}

CorpusManifest generate_corpus(const CorpusSpec &spec, const std::filesystem::path &out_dir) {
  SyntheticCorpus corpus(spec);
  std::filesystem::create_directories(out_dir);
  CorpusManifest manifest;
  for (std::size_t i = 0; i < corpus.num_utterances(); ++i) {
    ManifestRecord r;
    r.utterance_id = corpus.utterance_id(i);
    r.speaker_id = corpus.speaker_id(i);
    r.labels_path = out_dir / (r.utterance_id + ".lab");
    if (spec.mode == SynthMode::kWaveform) {
      SenoneLabels labels;
      const AudioSignal sig = corpus.render_waveform(i, &labels);
      r.kind = SourceKind::kAudio;
      r.path = out_dir / (r.utterance_id + ".wav");
      write_wav(r.path, sig);
      write_labels(r.labels_path, labels);
    } else {
      const SyntheticUtterance u = corpus.render(i);
      r.kind = SourceKind::kFeatures;
      r.path = out_dir / (r.utterance_id + ".spk.feat");
      r.asr_path = out_dir / (r.utterance_id + ".asr.feat");
      write_features(r.path, u.speaker);
      write_features(r.asr_path, u.asr);
      write_labels(r.labels_path, u.labels);
    }
    manifest.records.push_back(std::move(r));
  }
  write_manifest(out_dir / "manifest.tsv", manifest);
  write_corpus_spec(out_dir / "corpus_spec.yaml", spec);
  spdlog::debug("generated {} utterances under {}", manifest.records.size(), out_dir.string());
  return manifest;
}

// ---------------------------------------------------------------------------
// Trials

std::string_view condition_name(TrialCondition condition) {
  switch (condition) {
    case TrialCondition::kFullFull: return "full-full";
    case TrialCondition::kFullShort: return "full-short";
    case TrialCondition::kShortShort: return "short-short";
  }
  return "?";
}

TrialCondition parse_condition(std::string_view text) {
  if (text == "full-full") return TrialCondition::kFullFull;
  if (text == "full-short") return TrialCondition::kFullShort;
  if (text == "short-short") return TrialCondition::kShortShort;
  fail(ErrorCode::kConfiguration, fmt::format("unknown trial condition '{}'", text));
}

std::string short_variant_id(const std::string &utterance_id) { return utterance_id + "@short"; }

TrialList make_trials(std::span<const ManifestRecord> records, TrialCondition condition,
                      std::size_t n_target, std::size_t n_nontarget, std::uint64_t seed) {
  const std::size_t n = records.size();
  const bool ordered = condition == TrialCondition::kFullShort;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> targets, nontargets;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = ordered ? 0 : i + 1; j < n; ++j) {
      if (i == j) continue;
      (records[i].speaker_id == records[j].speaker_id ? targets : nontargets).emplace_back(i, j);
    }
  }
  if (targets.size() < n_target || nontargets.size() < n_nontarget)
    fail(ErrorCode::kConfiguration,
         fmt::format("{}: requested {} target / {} nontarget trials but only {} / {} pairs exist",
                     condition_name(condition), n_target, n_nontarget, targets.size(),
                     nontargets.size()));
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(condition)));
  auto take = [&](auto &pairs, std::size_t count) {
    // Partial Fisher-Yates keeps the draw independent of how many pairs follow.
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pairs.size() - 1);
      std::swap(pairs[i], pairs[pick(rng)]);
    }
    pairs.resize(count);
  };
  take(targets, n_target);
  take(nontargets, n_nontarget);

  auto enrol_id = [&](std::uint32_t i) {
    return condition == TrialCondition::kShortShort ? short_variant_id(records[i].utterance_id)
                                                    : records[i].utterance_id;
  };
  auto test_id = [&](std::uint32_t j) {
    return condition == TrialCondition::kFullFull ? records[j].utterance_id
                                                  : short_variant_id(records[j].utterance_id);
  };
  TrialList list;
  list.condition = std::string(condition_name(condition));
  for (const auto &[i, j] : targets) list.trials.push_back({enrol_id(i), test_id(j), TrialLabel::kTarget});
  for (const auto &[i, j] : nontargets)
    list.trials.push_back({enrol_id(i), test_id(j), TrialLabel::kNontarget});
  std::sort(list.trials.begin(), list.trials.end(), [](const TrialRecord &a, const TrialRecord &b) {
    return std::tie(a.enrol_id, a.test_id) < std::tie(b.enrol_id, b.test_id);
  });
  return list;
}

}  // namespace svkit
