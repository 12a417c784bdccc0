/*
 * Copyright 2026 The DiffWorld Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DIFFWORLD_WAV_HPP_
#define DIFFWORLD_WAV_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "diffworld/error.hpp"

namespace diffworld {

struct Waveform {
  std::vector<Real> samples;
  std::uint32_t sample_rate = 22050;
};

enum class WavEncoding { kPcm16, kFloat32 };

// Mono 16-bit PCM or 32-bit float RIFF WAV. Multichannel and other codecs
// are rejected with FormatError; a sample rate different from
// `expected_rate` is a ValidationError.
Waveform read_wav(const std::filesystem::path& path,
                  std::optional<std::uint32_t> expected_rate = std::nullopt);

// Samples must be finite. PCM16 clips to [-1, 1).
void write_wav(const std::filesystem::path& path, const Waveform& wave,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace diffworld

#endif  // DIFFWORLD_WAV_HPP_
