// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/datasynth.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "scnas/parallel.h"
#include "scnas/random.h"
#include "scnas/wav.h"

namespace scnas {

namespace fs = std::filesystem;

namespace {

constexpr int kMaxMixedSpeakers = 7;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Extra source audio beyond the segment so trimming has room to move.
constexpr double kSourceSlackSeconds = 0.5;

std::size_t sample_count(double seconds, int rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

}  // namespace

void validate_voice(const VoiceSpec& v) {
  if (!(v.f0_hz >= kMinF0 && v.f0_hz <= kMaxF0)) {
    throw std::invalid_argument("voice f0 " + std::to_string(v.f0_hz) + " Hz outside [85, 255]");
  }
  if (!(v.rolloff > 0 && v.rolloff < 1)) throw std::invalid_argument("voice rolloff must lie in (0, 1)");
  if (!(v.syllable_rate_hz >= 0 && std::isfinite(v.syllable_rate_hz))) {
    throw std::invalid_argument("voice syllable rate must be non-negative");
  }
  if (!(v.pause_density >= 0 && v.pause_density <= 1)) {
    throw std::invalid_argument("voice pause density must lie in [0, 1]");
  }
}

VoiceSpec random_voice(std::mt19937_64& rng) {
  VoiceSpec v;
  v.f0_hz = uniform(rng, kMinF0, kMaxF0);
  v.rolloff = uniform(rng, 0.55, 0.85);
  v.syllable_rate_hz = uniform(rng, 3.0, 6.0);
  v.pause_density = uniform(rng, 0.1, 0.4);
  return v;
}

std::vector<float> synth_speaker_signal(const VoiceSpec& spec, double duration_s, int sample_rate,
                                        std::mt19937_64& rng) {
  validate_voice(spec);
  if (!(duration_s > 0)) throw std::invalid_argument("synth_speaker_signal: duration must be positive");
  if (sample_rate <= 0) throw std::invalid_argument("synth_speaker_signal: sample rate must be positive");
  const std::size_t n = sample_count(duration_s, sample_rate);
  std::vector<float> out(n, 0.0f);
  if (spec.pause_density >= 1.0) return out;

  std::vector<double> env(n, 0.0);
  std::vector<double> pitch(n, 1.0);
  if (spec.syllable_rate_hz == 0) {
    std::fill(env.begin(), env.end(), 1.0);
  } else {
    // Pauses are capped at pause_density of the total length.
    const double budget = spec.pause_density * static_cast<double>(n);
    double silent = 0;
    std::size_t pos = 0;
    while (pos < n) {
      const double nominal = sample_rate / spec.syllable_rate_hz * uniform(rng, 0.7, 1.3);
      const std::size_t len =
          std::min(n - pos, std::max<std::size_t>(1, static_cast<std::size_t>(nominal)));
      const bool pause = uniform01(rng) < spec.pause_density && silent + len <= budget;
      if (pause) {
        silent += static_cast<double>(len);
      } else {
        const double tone = uniform(rng, 0.92, 1.08);
        for (std::size_t j = 0; j < len; ++j) {
          env[pos + j] = std::pow(std::sin(std::numbers::pi * (j + 0.5) / len), 0.6);
          pitch[pos + j] = tone;
        }
      }
      pos += len;
    }
    const double drift_hz = uniform(rng, 0.3, 1.0);
    const double drift_phase = uniform(rng, 0.0, kTwoPi);
    for (std::size_t i = 0; i < n; ++i) {
      pitch[i] *= 1.0 + 0.03 * std::sin(kTwoPi * drift_hz * i / sample_rate + drift_phase);
    }
  }

  const double top = spec.f0_hz * 1.12;
  const int harmonics = std::max(1, static_cast<int>(0.45 * sample_rate / top));
  std::vector<double> amp(static_cast<std::size_t>(harmonics));
  double norm = 0;
  for (int h = 0; h < harmonics; ++h) {
    amp[static_cast<std::size_t>(h)] = std::pow(spec.rolloff, h);
    norm += amp[static_cast<std::size_t>(h)];
  }
  double phase = spec.syllable_rate_hz == 0 ? 0.0 : uniform(rng, 0.0, kTwoPi);
  for (std::size_t i = 0; i < n; ++i) {
    if (env[i] != 0) {
      // sin(h*phase) by the Chebyshev recurrence.
      const double s1 = std::sin(phase);
      const double c2 = 2.0 * std::cos(phase);
      double prev = 0, cur = s1, acc = amp[0] * s1;
      for (int h = 1; h < harmonics; ++h) {
        const double next = c2 * cur - prev;
        prev = cur;
        cur = next;
        acc += amp[static_cast<std::size_t>(h)] * cur;
      }
      out[i] = static_cast<float>(std::clamp(env[i] * acc / norm, -1.0, 1.0));
    }
    phase += kTwoPi * spec.f0_hz * pitch[i] / sample_rate;
    if (phase > kTwoPi) phase -= kTwoPi;
  }
  return out;
}

std::vector<float> synth_colored_noise(double duration_s, int sample_rate, std::mt19937_64& rng) {
  if (!(duration_s > 0)) throw std::invalid_argument("synth_colored_noise: duration must be positive");
  if (sample_rate <= 0) throw std::invalid_argument("synth_colored_noise: sample rate must be positive");
  const std::size_t n = sample_count(duration_s, sample_rate);
  const double a = uniform(rng, -0.3, 0.97);
  const double b = std::sqrt(1.0 - a * a);
  const double wobble_hz = uniform(rng, 0.2, 2.0);
  const double wobble_phase = uniform(rng, 0.0, kTwoPi);
  std::vector<double> y(n);
  double state = 0, peak = 0;
  for (std::size_t i = 0; i < n; ++i) {
    state = a * state + b * normal(rng);
    y[i] = state * (1.0 + 0.3 * std::sin(kTwoPi * wobble_hz * i / sample_rate + wobble_phase));
    peak = std::max(peak, std::abs(y[i]));
  }
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(peak > 0 ? y[i] / peak : 0.0);
  return out;
}

MixtureExample make_mixture(const std::vector<std::span<const float>>& sources,
                            std::span<const float> noise, int k, std::size_t segment_len,
                            int sample_rate, std::mt19937_64& rng) {
  if (k < 0) throw std::invalid_argument("make_mixture: k must be non-negative");
  if (segment_len == 0) throw std::invalid_argument("make_mixture: segment length must be positive");
  if (static_cast<std::size_t>(k) != sources.size()) {
    throw std::invalid_argument("make_mixture: k=" + std::to_string(k) + " but " +
                                std::to_string(sources.size()) + " sources given");
  }
  std::vector<std::span<const float>> parts = sources;
  if (k == 0) {
    if (noise.empty()) throw std::invalid_argument("make_mixture: k=0 requires a noise source");
    parts.push_back(noise);
  }
  std::vector<double> mix(segment_len, 0.0);
  for (std::size_t s = 0; s < parts.size(); ++s) {
    const auto& src = parts[s];
    if (src.size() < segment_len) {
      throw std::invalid_argument("make_mixture: " + std::string(k == 0 ? "noise" : "source ") +
                                  (k == 0 ? "" : std::to_string(s)) + " has " +
                                  std::to_string(src.size()) + " samples, segment needs " +
                                  std::to_string(segment_len));
    }
    const std::size_t offset = uniform_index(rng, src.size() - segment_len + 1);
    const double gain = std::pow(10.0, uniform(rng, -3.0, 3.0) / 20.0);
    for (std::size_t i = 0; i < segment_len; ++i) {
      const float v = src[offset + i];
      if (!std::isfinite(v)) throw std::invalid_argument("make_mixture: non-finite source sample");
      mix[i] += gain * v;
    }
  }
  MixtureExample ex;
  ex.sample_rate = sample_rate;
  ex.true_speaker_count = k;
  ex.label = count_label(k);
  ex.samples.assign(segment_len, 0.0f);
  std::size_t at = 0;
  double peak = 0;
  for (std::size_t i = 0; i < segment_len; ++i) {
    if (std::abs(mix[i]) > peak) {
      peak = std::abs(mix[i]);
      at = i;
    }
  }
  if (peak > 0) {
    const double scale = kMixturePeak / peak;
    for (std::size_t i = 0; i < segment_len; ++i) {
      ex.samples[i] = std::clamp(static_cast<float>(mix[i] * scale), -kMixturePeak, kMixturePeak);
    }
    ex.samples[at] = mix[at] > 0 ? kMixturePeak : -kMixturePeak;
  }
  return ex;
}

void validate_dataset_config(const DatasetConfig& cfg) {
  if (cfg.sample_rate <= 0) throw std::invalid_argument("dataset sample_rate must be positive");
  if (!(cfg.segment_seconds > 0)) throw std::invalid_argument("dataset segment_seconds must be positive");
  if (sample_count(cfg.segment_seconds, cfg.sample_rate) == 0) {
    throw std::invalid_argument("dataset segment is shorter than one sample");
  }
  if (cfg.train_per_class < 0 || cfg.val_per_class < 0 || cfg.test_per_class < 0) {
    throw std::invalid_argument("dataset per-class counts must be non-negative");
  }
  if (cfg.train_speakers < 0 || cfg.test_speakers < 0) {
    throw std::invalid_argument("dataset speaker counts must be non-negative");
  }
}

std::string manifest_filename(const std::string& split) { return split + ".tsv"; }

std::string manifest_to_text(const Manifest& m) {
  std::ostringstream os;
  os << "# split " << m.split << '\n';
  os << "# path\tlabel\tspeakers\tseed\tspeaker_ids\n";
  for (const auto& e : m.entries) {
    os << e.path << '\t' << e.label << '\t' << e.speakers << '\t' << e.seed << '\t';
    for (std::size_t i = 0; i < e.speaker_ids.size(); ++i) {
      if (i) os << ',';
      os << e.speaker_ids[i];
    }
    os << '\n';
  }
  return os.str();
}

Manifest parse_manifest(const std::string& text, const std::string& split) {
  Manifest m;
  m.split = split;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    const auto where = "manifest " + split + " line " + std::to_string(lineno);
    if (f.size() != 4 && f.size() != 5) {
      throw std::runtime_error(where + ": expected 4 or 5 tab-separated fields, got " +
                               std::to_string(f.size()));
    }
    ManifestEntry e;
    e.path = f[0];
    try {
      std::size_t used = 0;
      e.label = std::stoi(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument(f[1]);
      e.speakers = std::stoi(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument(f[2]);
      e.seed = std::stoull(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument(f[3]);
    } catch (const std::logic_error&) {
      throw std::runtime_error(where + ": malformed number");
    }
    if (e.path.empty()) throw std::runtime_error(where + ": empty path");
    if (e.label < 0 || e.label >= kNumCountClasses || e.speakers < 0 ||
        e.label != count_label(e.speakers)) {
      throw std::runtime_error(where + ": label " + std::to_string(e.label) +
                               " inconsistent with speaker count " + std::to_string(e.speakers));
    }
    if (f.size() == 5 && !f[4].empty()) {
      std::stringstream ids(f[4]);
      std::string id;
      while (std::getline(ids, id, ',')) e.speaker_ids.push_back(id);
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest read_manifest(const std::string& dir, const std::string& split) {
  const fs::path p = fs::path(dir) / manifest_filename(split);
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open manifest '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), split);
}

namespace {

std::vector<SpeakerSource> load_speaker_dirs(const std::string& root, int rate) {
  if (!fs::is_directory(root)) throw std::runtime_error("speaker_dir '" + root + "' is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& d : fs::directory_iterator(root)) {
    if (d.is_directory()) dirs.push_back(d.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<SpeakerSource> out;
  for (const auto& d : dirs) {
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(d)) {
      if (f.is_regular_file() && f.path().extension() == ".wav") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) continue;
    SpeakerSource s;
    s.id = d.filename().string();
    for (const auto& f : files) {
      Waveform w = read_wav(f.string());
      if (w.sample_rate != rate) {
        throw std::runtime_error(f.string() + ": sample rate " + std::to_string(w.sample_rate) +
                                 " Hz differs from dataset rate " + std::to_string(rate) + " Hz");
      }
      s.pool.insert(s.pool.end(), w.samples.begin(), w.samples.end());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::vector<float>> load_noise_dir(const std::string& root, int rate) {
  if (!fs::is_directory(root)) throw std::runtime_error("noise_dir '" + root + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& f : fs::recursive_directory_iterator(root)) {
    if (f.is_regular_file() && f.path().extension() == ".wav") files.push_back(f.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::vector<float>> out;
  for (const auto& f : files) {
    Waveform w = read_wav(f.string());
    if (w.sample_rate != rate) {
      throw std::runtime_error(f.string() + ": sample rate " + std::to_string(w.sample_rate) +
                               " Hz differs from dataset rate " + std::to_string(rate) + " Hz");
    }
    out.push_back(std::move(w.samples));
  }
  if (out.empty()) throw std::runtime_error("noise_dir '" + root + "' holds no WAV files");
  return out;
}

void write_text_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

}  // namespace

std::vector<Manifest> build_dataset(const DatasetConfig& cfg, const std::string& dir) {
  validate_dataset_config(cfg);
  const std::size_t seg = sample_count(cfg.segment_seconds, cfg.sample_rate);
  const double source_seconds = cfg.segment_seconds + kSourceSlackSeconds;

  std::vector<SpeakerSource> train_pool, test_pool;
  if (cfg.speaker_dir.empty()) {
    for (int j = 0; j < cfg.train_speakers + cfg.test_speakers; ++j) {
      std::mt19937_64 rng(derive_seed(cfg.seed, 0x766f696365, static_cast<std::uint64_t>(j)));
      SpeakerSource s;
      const bool test = j >= cfg.train_speakers;
      std::ostringstream id;
      id << (test ? "test-spk-" : "train-spk-") << std::setw(3) << std::setfill('0')
         << (test ? j - cfg.train_speakers : j);
      s.id = id.str();
      s.voice = random_voice(rng);
      (test ? test_pool : train_pool).push_back(std::move(s));
    }
  } else {
    auto all = load_speaker_dirs(cfg.speaker_dir, cfg.sample_rate);
    const std::size_t n_test = static_cast<std::size_t>(cfg.test_speakers);
    if (all.size() <= n_test) {
      throw std::runtime_error("insufficient distinct sources: " + std::to_string(all.size()) +
                               " speakers found, " + std::to_string(n_test) +
                               " reserved for test leaves none for training");
    }
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (all[j].pool.size() < seg) {
        throw std::runtime_error("speaker '" + all[j].id + "' has " + std::to_string(all[j].pool.size()) +
                                 " samples, shorter than one segment");
      }
      (j + n_test >= all.size() ? test_pool : train_pool).push_back(std::move(all[j]));
    }
  }
  std::vector<std::vector<float>> noise_files;
  if (!cfg.noise_dir.empty()) noise_files = load_noise_dir(cfg.noise_dir, cfg.sample_rate);

  const int per_class[3] = {cfg.train_per_class, cfg.val_per_class, cfg.test_per_class};
  auto check_pool = [&](const std::vector<SpeakerSource>& pool, const char* name, int count) {
    if (count == 0) return;
    const auto have = static_cast<int>(pool.size());
    if (have < kMaxMixedSpeakers) {
      throw std::runtime_error(std::string("insufficient distinct sources: ") + name + " pool has " +
                               std::to_string(have) + " speakers, mixtures need up to " +
                               std::to_string(kMaxMixedSpeakers));
    }
  };
  check_pool(train_pool, "train", per_class[0] + per_class[1]);
  check_pool(test_pool, "test", per_class[2]);

  try {
    fs::create_directories(dir);
  } catch (const fs::filesystem_error& e) {
    throw std::runtime_error("cannot create output directory '" + dir + "': " + e.what());
  }
  const int workers = cfg.workers > 0 ? cfg.workers : default_workers();

  std::vector<Manifest> manifests;
  for (std::size_t si = 0; si < split_names().size(); ++si) {
    const std::string& split = split_names()[si];
    const auto& pool = split == "test" ? test_pool : train_pool;
    const std::size_t n = static_cast<std::size_t>(per_class[si]) * kNumCountClasses;
    Manifest m;
    m.split = split;
    m.entries.resize(n);
    if (n > 0) {
      try {
        fs::create_directories(fs::path(dir) / split);
      } catch (const fs::filesystem_error& e) {
        throw std::runtime_error("cannot create '" + (fs::path(dir) / split).string() + "': " + e.what());
      }
    }
    parallel_for(n, workers, [&](std::size_t i) {
      const std::uint64_t seed = derive_seed(cfg.seed, 0x6d6978 + si, i);
      std::mt19937_64 rng(seed);
      const int cls = static_cast<int>(i % kNumCountClasses);
      const int k = cls < 5 ? cls : 5 + static_cast<int>(uniform_index(rng, 3));
      std::vector<std::size_t> order(pool.size());
      std::iota(order.begin(), order.end(), 0);
      for (int j = 0; j < k; ++j) {
        const std::size_t pick = j + uniform_index(rng, order.size() - j);
        std::swap(order[static_cast<std::size_t>(j)], order[pick]);
      }
      std::vector<std::vector<float>> storage;
      std::vector<std::span<const float>> sources;
      std::vector<std::string> ids;
      storage.reserve(static_cast<std::size_t>(k) + 1);
      for (int j = 0; j < k; ++j) {
        const auto& spk = pool[order[static_cast<std::size_t>(j)]];
        ids.push_back(spk.id);
        if (spk.voice) {
          storage.push_back(synth_speaker_signal(*spk.voice, source_seconds, cfg.sample_rate, rng));
          sources.emplace_back(storage.back());
        } else {
          sources.emplace_back(spk.pool);
        }
      }
      std::span<const float> noise;
      if (k == 0) {
        if (noise_files.empty()) {
          storage.push_back(synth_colored_noise(source_seconds, cfg.sample_rate, rng));
          noise = storage.back();
        } else {
          noise = noise_files[uniform_index(rng, noise_files.size())];
        }
      }
      MixtureExample ex = make_mixture(sources, noise, k, seg, cfg.sample_rate, rng);
      std::ostringstream name;
      name << split << '/' << std::setw(6) << std::setfill('0') << i << ".wav";
      write_wav_pcm16((fs::path(dir) / name.str()).string(), ex.samples, cfg.sample_rate);
      auto& e = m.entries[i];
      e.path = name.str();
      e.label = ex.label;
      e.speakers = k;
      e.seed = seed;
      e.speaker_ids = std::move(ids);
    });
    manifests.push_back(std::move(m));
  }
  for (const auto& m : manifests) {
    write_text_atomically(fs::path(dir) / manifest_filename(m.split), manifest_to_text(m));
  }
  return manifests;
}

LabeledSet load_split(const std::string& dir, const std::string& split) {
  const Manifest m = read_manifest(dir, split);
  LabeledSet set;
  std::size_t length = 0;
  for (const auto& e : m.entries) {
    Waveform w = read_wav((fs::path(dir) / e.path).string());
    if (set.sample_rate == 0) {
      set.sample_rate = w.sample_rate;
      length = w.samples.size();
    } else if (w.sample_rate != set.sample_rate || w.samples.size() != length) {
      throw std::runtime_error(e.path + ": sample rate or length differs from the rest of split " +
                               split);
    }
    set.inputs.push_back(std::move(w.samples));
    set.labels.push_back(e.label);
  }
  return set;
}

}  // namespace scnas
