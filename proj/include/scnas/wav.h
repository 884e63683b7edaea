// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scnas {

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 0;
};

// Mono 16-bit little-endian PCM. Samples are clamped to [-1, 1] and scaled
// by 32767 with round-to-nearest.
std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate);
void write_wav_pcm16(const std::string& path, std::span<const float> samples, int sample_rate);

// Reads 16/24/32-bit PCM or 32-bit float WAV; multi-channel input is averaged
// down to mono. PCM is scaled by 1/2^(bits-1).
Waveform read_wav(const std::string& path);
Waveform decode_wav(std::span<const std::uint8_t> bytes);

}  // namespace scnas
