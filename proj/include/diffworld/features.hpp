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

// WORLD acoustic feature containers and the WFEAT file format.
//
// WFEAT layout, all little-endian:
//   "WFEA" | u32 version (1) | u32 sample_rate | u32 hop | u32 fft_size |
//   u32 frames | u32 kind (0 raw, 1 compressed) | u32 width | u32 ap_width
// followed by float64 arrays in field order. Raw files store f0[T],
// sp[T x (N/2+1)], ap[T x (N/2+1)] with width = N/2+1 and ap_width = 0.
// Compressed files store f0[T], s[T x M], a[T x A] with width = M and
// ap_width = A. Matrices are row-major, one row per frame.

#ifndef DIFFWORLD_FEATURES_HPP_
#define DIFFWORLD_FEATURES_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "diffworld/error.hpp"

namespace diffworld {

inline constexpr std::uint32_t kWfeatVersion = 1;

struct FeatureMeta {
  std::uint32_t sample_rate = 22050;
  std::uint32_t hop = 256;
  std::uint32_t fft_size = 1024;

  std::size_t bins() const { return fft_size / 2 + 1; }
  bool operator==(const FeatureMeta&) const = default;
};

// Frame-rate f0 / spectral envelope / aperiodicity. f0 == 0 marks an
// unvoiced frame.
struct WorldFeatures {
  FeatureMeta meta;
  std::vector<Real> f0;  // T
  std::vector<Real> sp;  // T x bins, power spectrum
  std::vector<Real> ap;  // T x bins, in [0, 1]

  std::size_t frames() const { return f0.size(); }
  std::size_t bins() const { return meta.bins(); }

  // Checks shapes and value ranges (reporting frame and bin), then forces
  // ap to 1 across unvoiced frames.
  void validate();
};

// WORLD log Mel spectrogram s and linearly resampled aperiodicity a.
struct CompressedFeatures {
  FeatureMeta meta;
  std::size_t mel_bands = 80;
  std::size_t ap_bands = 16;
  std::vector<Real> f0;  // T
  std::vector<Real> s;   // T x mel_bands
  std::vector<Real> a;   // T x ap_bands, in [0, 1]

  std::size_t frames() const { return f0.size(); }

  // Same contract as WorldFeatures::validate, with a forced to 1 across
  // unvoiced frames.
  void validate();
};

using AnyFeatures = std::variant<WorldFeatures, CompressedFeatures>;

std::vector<std::uint8_t> encode_features(const WorldFeatures& features);
std::vector<std::uint8_t> encode_features(const CompressedFeatures& features);
AnyFeatures decode_features(std::span<const std::uint8_t> bytes);

// Throws FormatError on I/O and layout problems, ValidationError on value
// ranges. Loaded features are validated.
AnyFeatures read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path,
                    const WorldFeatures& features);
void write_features(const std::filesystem::path& path,
                    const CompressedFeatures& features);

const FeatureMeta& meta_of(const AnyFeatures& features);
const std::vector<Real>& f0_of(const AnyFeatures& features);

// Checks that a waveform of num_samples matches a T-frame feature track:
// (T - 1) * hop <= num_samples <= T * hop. Covers both the analysis framing
// (T = floor(L / hop) + 1) and synthesized output (L = T * hop).
void check_frame_alignment(std::size_t num_samples, std::size_t frames,
                           std::size_t hop);

}  // namespace diffworld

#endif  // DIFFWORLD_FEATURES_HPP_
