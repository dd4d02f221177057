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

#ifndef SVKIT_SYNTHGEN_H_
#define SVKIT_SYNTHGEN_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svkit/eval.h"
#include "svkit/frontend.h"
#include "svkit/senone_net.h"

namespace svkit {

enum class SynthMode { kFeatures, kWaveform };

// Generative model of a labelled corpus. Class 0 is the silence class used
// for unvoiced frames; classes 1..n_classes-1 are voiced "senones".
struct CorpusSpec {
  int n_speakers = 100;
  int sessions_per_speaker = 4;
  double active_seconds_per_session = 60.0;
  int n_classes = 64;
  int feature_dim = 20;  // static speaker features, column 0 = log energy
  int asr_dim = 40;
  int speaker_subspace_dim = 10;
  int session_subspace_dim = 5;
  std::uint64_t seed = 7;
  double unvoiced_fraction = 0.5;
  SynthMode mode = SynthMode::kFeatures;

  double frame_shift = 0.01;
  double self_transition = 0.9;  // sticky class Markov chain
  double mean_voiced_run = 0.5;  // seconds
  double class_spread = 1.0;     // std of speaker-feature class means
  double frame_noise = 1.0;      // std of per-frame speaker-feature noise
  double speaker_scale = 0.35;   // std of speaker offsets per dimension
  double session_scale = 0.2;    // std of session offsets per dimension
  double asr_spread = 1.0;
  double asr_noise = 0.6;
  double energy_gap = 8.0;       // voiced minus unvoiced log energy

  void validate() const;
};

CorpusSpec read_corpus_spec(const std::filesystem::path &path);
void write_corpus_spec(const std::filesystem::path &path, const CorpusSpec &spec);
CorpusSpec parse_corpus_spec(std::string_view yaml_text, const std::string &source = "<spec>");
std::string corpus_spec_to_yaml(const CorpusSpec &spec);

enum class SourceKind { kAudio, kFeatures };

struct ManifestRecord {
  std::string utterance_id;
  std::string speaker_id;
  SourceKind kind = SourceKind::kFeatures;
  std::filesystem::path path;         // wav, or static speaker features
  std::filesystem::path asr_path;     // static ASR features; empty for audio
  std::filesystem::path labels_path;  // ground-truth labels; may be empty
};

struct CorpusManifest {
  std::vector<ManifestRecord> records;
};

// Tab-separated: utt, speaker, audio|features, path, asr path, labels path.
// Relative paths resolve against the manifest's directory; "-" marks empty.
void write_manifest(const std::filesystem::path &path, const CorpusManifest &manifest);
CorpusManifest read_manifest(const std::filesystem::path &path);

struct SyntheticUtterance {
  FeatureMatrix speaker;  // static, T x feature_dim
  FeatureMatrix asr;      // static, T x asr_dim
  SenoneLabels labels;
};

// Deterministic renderer. Global parameters derive from spec.seed; each
// utterance draws from its own stream keyed by (seed, utterance index), so
// rendering order does not change the output.
class SyntheticCorpus {
 public:
  explicit SyntheticCorpus(CorpusSpec spec);

  const CorpusSpec &spec() const { return spec_; }
  std::size_t num_utterances() const;
  std::string utterance_id(std::size_t index) const;
  std::string speaker_id(std::size_t index) const;

  SyntheticUtterance render(std::size_t index) const;
  // Waveform whose 25 ms / 10 ms framing yields exactly one frame per label.
  AudioSignal render_waveform(std::size_t index, SenoneLabels *labels = nullptr) const;

  // Generator class means for the speaker stream (n_classes x feature_dim),
  // before speaker and session offsets.
  const Matrix &class_means() const { return class_means_; }

 private:
  struct Plan {
    SenoneLabels labels;
    Vector speaker;  // speaker latent
    Vector session;  // session latent
  };
  Plan plan(std::size_t index, std::uint64_t &stream_seed) const;

  CorpusSpec spec_;
  Matrix class_means_;                  // K x D
  std::vector<Matrix> speaker_load_;    // per class, D x q
  std::vector<Matrix> session_load_;    // per class, D x q_s
  Matrix class_noise_;                  // K x D stds
  Matrix asr_means_;                    // K x asr_dim
  Matrix formants_;                     // K x 3, Hz (waveform mode)
};

// Writes per-utterance files plus manifest.tsv under out_dir.
CorpusManifest generate_corpus(const CorpusSpec &spec, const std::filesystem::path &out_dir);

enum class TrialCondition { kFullFull, kFullShort, kShortShort };

std::string_view condition_name(TrialCondition condition);
TrialCondition parse_condition(std::string_view text);

// Id of the truncated variant of an utterance used by short conditions.
std::string short_variant_id(const std::string &utterance_id);

// Balanced seeded trial list. Target pairs share a speaker; no trial pairs an
// utterance with itself. Throws kConfiguration if the manifest cannot supply
// the requested counts.
TrialList make_trials(std::span<const ManifestRecord> records, TrialCondition condition,
                      std::size_t n_target, std::size_t n_nontarget, std::uint64_t seed);

// splitmix64 finalizer; used to derive independent per-item seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace svkit

#endif  // SVKIT_SYNTHGEN_H_
