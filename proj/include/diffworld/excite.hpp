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

// Source-excitation processing: divide a signal's STFT by its spectral
// envelope magnitude, optionally impose a different envelope, and resynthesize.
// With identical envelopes the round trip is the identity.

#ifndef DIFFWORLD_EXCITE_HPP_
#define DIFFWORLD_EXCITE_HPP_

#include <cstddef>

#include "diffworld/melcodec.hpp"
#include "diffworld/stft.hpp"
#include "diffworld/tensor.hpp"

namespace diffworld {

// Envelopes are floored here before any sqrt or division.
inline constexpr Real kEnvelopeFloor = Real(1e-10);
// Bounds on the target/source envelope ratio.
inline constexpr Real kMinEnvelopeRatio = Real(1e-6);
inline constexpr Real kMaxEnvelopeRatio = Real(1e6);

// E = stft(x) / sqrt(max(sp, floor)). x: {L}; sp: {T, N/2+1}.
Tensor extract_excitation(const Tensor& x, const Tensor& sp, const StftConfig& cfg);

// y = istft(sqrt(sp) . E), `length` samples.
Tensor reconstruct(const Tensor& excitation, const Tensor& sp, const StftConfig& cfg,
                   std::size_t length);

// y = istft(sqrt(clip(sp_tgt / sp_src)) . stft(x)). When `codec` is given
// both envelopes are replaced by their compress/decompress round trip first.
Tensor transform_formants(const Tensor& x, const Tensor& sp_src, const Tensor& sp_tgt,
                          const StftConfig& cfg, const MelBasis* codec = nullptr);

// Same transform with the target given as a WORLD log Mel spectrogram; the
// source envelope is round-tripped through the same codec. Differentiable in
// s_tgt.
Tensor transform_formants_compressed(const Tensor& x, const Tensor& sp_src,
                                     const Tensor& s_tgt, const MelBasis& codec,
                                     const StftConfig& cfg);

// Resamples each envelope frame onto a frequency grid scaled by `factor`:
// out(f) = sp(f / factor), linearly interpolated and held past the last bin.
// factor > 1 moves formants up.
Tensor warp_envelope(const Tensor& sp, Real factor);

}  // namespace diffworld

#endif  // DIFFWORLD_EXCITE_HPP_
