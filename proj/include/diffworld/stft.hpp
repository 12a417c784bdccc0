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

// Hann-windowed STFT and its overlap-add inverse as differentiable ops.
//
// Frame t is centred on sample t * hop and spans
// [t * hop - N/2, t * hop + N/2); samples outside the signal read as zero.
// The inverse divides the overlap-added frames by the overlap-added squared
// window, so istft(stft(x)) reproduces x wherever some window is nonzero.

#ifndef DIFFWORLD_STFT_HPP_
#define DIFFWORLD_STFT_HPP_

#include <cstddef>
#include <optional>
#include <vector>

#include "diffworld/tensor.hpp"

namespace diffworld {

struct StftConfig {
  std::size_t fft_size = 1024;
  std::size_t hop = 256;

  std::size_t bins() const { return fft_size / 2 + 1; }
  void validate() const;
};

// Frames produced for a signal of num_samples: floor(num_samples / hop) + 1.
std::size_t frame_count(std::size_t num_samples, std::size_t hop);

// Periodic Hann window of length n.
std::vector<Real> hann_window(std::size_t n);

// x: {L}. Returns {2, T, N/2+1}; T defaults to frame_count(L, hop).
Tensor stft(const Tensor& x, const StftConfig& cfg,
            std::optional<std::size_t> frames = std::nullopt);

// spectrum: {2, T, N/2+1}. Returns {length}.
Tensor istft(const Tensor& spectrum, const StftConfig& cfg, std::size_t length);

}  // namespace diffworld

#endif  // DIFFWORLD_STFT_HPP_
