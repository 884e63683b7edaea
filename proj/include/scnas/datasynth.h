// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace scnas {

inline constexpr int kNumCountClasses = 6;
inline constexpr float kMixturePeak = 0.9f;
inline constexpr double kMinF0 = 85.0;
inline constexpr double kMaxF0 = 255.0;

struct VoiceSpec {
  double f0_hz = 120.0;
  // Amplitude ratio between consecutive harmonics, in (0, 1).
  double rolloff = 0.7;
  // Syllables per second; 0 gives a steady, unmodulated tone.
  double syllable_rate_hz = 4.0;
  // Fraction of time spent in pauses; 1 is silence.
  double pause_density = 0.25;
};

void validate_voice(const VoiceSpec& v);
VoiceSpec random_voice(std::mt19937_64& rng);

struct SpeakerSource {
  std::string id;
  std::optional<VoiceSpec> voice;
  // Used when `voice` is empty: concatenated recordings at the dataset rate.
  std::vector<float> pool;
};

// Harmonic stack under a syllabic envelope with pauses and slow pitch drift.
// Output is bounded in [-1, 1]. With pause_density <= 0.5 at least half of
// the 20 ms frames carry nonzero samples.
std::vector<float> synth_speaker_signal(const VoiceSpec& spec, double duration_s, int sample_rate,
                                        std::mt19937_64& rng);

// Gaussian noise through a random one-pole filter with a slow level wobble.
std::vector<float> synth_colored_noise(double duration_s, int sample_rate, std::mt19937_64& rng);

struct MixtureExample {
  std::vector<float> samples;
  int sample_rate = 0;
  int label = 0;
  int true_speaker_count = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> speaker_ids;
};

inline int count_label(int k) { return k >= 5 ? 5 : k; }

// Trims each source at a random offset to `segment_len`, applies a gain drawn
// uniformly in [-3, +3] dB, sums and peak-normalizes to 0.9. With k = 0 the
// noise is used instead. `sources.size()` must equal k.
MixtureExample make_mixture(const std::vector<std::span<const float>>& sources,
                            std::span<const float> noise, int k, std::size_t segment_len,
                            int sample_rate, std::mt19937_64& rng);

struct DatasetConfig {
  std::uint64_t seed = 1;
  int sample_rate = 16000;
  double segment_seconds = 5.0;
  int train_per_class = 1000;
  int val_per_class = 100;
  int test_per_class = 300;
  int train_speakers = 60;
  int test_speakers = 24;
  // Directory of per-speaker subdirectories holding WAV files. Empty selects
  // the synthetic voice generator.
  std::string speaker_dir;
  // Directory of noise WAV files for class 0. Empty selects colored noise.
  std::string noise_dir;
  int workers = 0;
};

void validate_dataset_config(const DatasetConfig& cfg);

struct ManifestEntry {
  std::string path;  // relative to the dataset directory
  int label = 0;
  int speakers = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> speaker_ids;
};

struct Manifest {
  std::string split;
  std::vector<ManifestEntry> entries;
};

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names = {"train", "val", "test"};
  return names;
}

std::string manifest_filename(const std::string& split);

// Fields, tab separated: path, label, speakers, seed, speaker_ids (comma list).
// Lines starting with '#' are comments.
std::string manifest_to_text(const Manifest& m);
Manifest parse_manifest(const std::string& text, const std::string& split);
Manifest read_manifest(const std::string& dir, const std::string& split);

// Writes <dir>/<split>/<nnnnnn>.wav for every example, then the manifests.
// Manifests go through a temporary file and rename, so a failed build never
// leaves one behind.
std::vector<Manifest> build_dataset(const DatasetConfig& cfg, const std::string& dir);

struct LabeledSet {
  std::vector<std::vector<float>> inputs;
  std::vector<int> labels;
  int sample_rate = 0;
  std::size_t size() const { return labels.size(); }
};

LabeledSet load_split(const std::string& dir, const std::string& split);

}  // namespace scnas
