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

// Compression of WORLD features to a WORLD log Mel spectrogram plus a coarse
// aperiodicity grid, and the matching decompression.
//
//   s    = log10(M sqrt(sp) + eps)
//   sp'  = [max(pinv(M), 0) (10^s - eps)]^2
//
// Both directions are differentiable tensor programs. Aperiodicity is
// resampled by linear interpolation between regular linear-frequency grids
// that include DC and Nyquist.

#ifndef DIFFWORLD_MELCODEC_HPP_
#define DIFFWORLD_MELCODEC_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "diffworld/features.hpp"
#include "diffworld/tensor.hpp"

namespace diffworld {

inline constexpr Real kMelEpsilon = Real(1e-5);
inline constexpr std::size_t kDefaultMelBands = 80;
inline constexpr std::size_t kDefaultApBands = 16;

Real hz_to_mel(Real hz);
Real mel_to_hz(Real mel);

// Triangular HTK-mel filterbank M (bands x bins) with unit-sum rows, and its
// clamped pseudo-inverse max(pinv(M), 0) (bins x bands). Immutable.
class MelBasis {
 public:
  // Band edges span [f_low, f_high]; f_high defaults to Nyquist. A band too
  // narrow to cover any bin centre gets unit weight on the nearest bin.
  MelBasis(std::uint32_t sample_rate, std::size_t fft_size, std::size_t bands,
           Real epsilon = kMelEpsilon, Real f_low = 0,
           std::optional<Real> f_high = std::nullopt);

  std::size_t bands() const { return bands_; }
  std::size_t bins() const { return bins_; }
  Real epsilon() const { return epsilon_; }
  // bands + 2 edge frequencies in Hz.
  const std::vector<Real>& band_edges() const { return edges_; }

  // Row-major M, bands x bins.
  std::span<const Real> matrix() const { return forward_.data(); }
  // Row-major max(pinv(M), 0), bins x bands.
  std::span<const Real> pinv_clamped() const { return pinv_.data(); }

  // Tensors laid out for frame-major features: M^T and max(pinv(M), 0)^T.
  const Tensor& forward_transposed() const { return forward_t_; }
  const Tensor& pinv_transposed() const { return pinv_t_; }

 private:
  std::size_t bands_;
  std::size_t bins_;
  Real epsilon_;
  std::vector<Real> edges_;
  Tensor forward_;
  Tensor pinv_;
  Tensor forward_t_;
  Tensor pinv_t_;
};

// sp: {T, bins}, >= 0. Returns s: {T, bands}.
Tensor compress_sp(const Tensor& sp, const MelBasis& basis);
// s: {T, bands}. Returns sqrt(sp'): max(pinv0 (10^s - eps), 0), {T, bins}.
Tensor decompress_amplitude(const Tensor& s, const MelBasis& basis);
// s: {T, bands}. Returns sp' = decompress_amplitude(s)^2.
Tensor decompress_sp(const Tensor& s, const MelBasis& basis);

// Linear-interpolation resampling matrix from `from` regularly spaced points
// to `to` regularly spaced points over the same closed interval; {to, from}.
std::vector<Real> interpolation_matrix(std::size_t from, std::size_t to);

class ApCodec {
 public:
  ApCodec(std::size_t bins, std::size_t bands);

  std::size_t bins() const { return bins_; }
  std::size_t bands() const { return bands_; }

  // ap: {T, bins} -> a: {T, bands}.
  Tensor compress(const Tensor& ap) const;
  // a: {T, bands} -> ap': {T, bins}.
  Tensor decompress(const Tensor& a) const;

 private:
  std::size_t bins_;
  std::size_t bands_;
  Tensor down_t_;  // {bins, bands}
  Tensor up_t_;    // {bands, bins}
};

Tensor compress_ap(const Tensor& ap, std::size_t bands = kDefaultApBands);
Tensor decompress_ap(const Tensor& a, std::size_t bins);

// Whole-container conversions (no gradient tracking).
CompressedFeatures compress_features(const WorldFeatures& features,
                                     std::size_t mel_bands = kDefaultMelBands,
                                     std::size_t ap_bands = kDefaultApBands);
WorldFeatures decompress_features(const CompressedFeatures& features);

}  // namespace diffworld

#endif  // DIFFWORLD_MELCODEC_HPP_
