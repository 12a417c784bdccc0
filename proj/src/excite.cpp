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

#include "diffworld/excite.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffworld/features.hpp"

namespace diffworld {
namespace {

void require_envelope(const Tensor& sp, const StftConfig& cfg, const char* what) {
  if (sp.rank() != 2 || sp.dim(1) != cfg.bins()) {
    throw ValidationError(std::string(what) + " expects shape (T, " +
                          std::to_string(cfg.bins()) + "), got " +
                          shape_string(sp.shape()));
  }
}

Tensor apply_ratio(const Tensor& x, const Tensor& src, const Tensor& tgt,
                   const StftConfig& cfg) {
  cfg.validate();
  require_envelope(src, cfg, "source envelope");
  require_envelope(tgt, cfg, "target envelope");
  if (x.rank() != 1) throw ValidationError("expected a 1-D signal");
  if (src.dim(0) != tgt.dim(0)) {
    throw ValidationError("source and target envelopes have different frame counts");
  }
  check_frame_alignment(x.size(), src.dim(0), cfg.hop);
  const Tensor ratio = clamp(clamp_min(tgt, kEnvelopeFloor) / clamp_min(src, kEnvelopeFloor),
                             kMinEnvelopeRatio, kMaxEnvelopeRatio);
  return istft(stft(x, cfg, src.dim(0)) * sqrt(ratio), cfg, x.size());
}

}  // namespace

Tensor extract_excitation(const Tensor& x, const Tensor& sp, const StftConfig& cfg) {
  cfg.validate();
  require_envelope(sp, cfg, "extract_excitation");
  if (x.rank() != 1) throw ValidationError("extract_excitation expects a 1-D signal");
  check_frame_alignment(x.size(), sp.dim(0), cfg.hop);
  return stft(x, cfg, sp.dim(0)) / sqrt(clamp_min(sp, kEnvelopeFloor));
}

Tensor reconstruct(const Tensor& excitation, const Tensor& sp, const StftConfig& cfg,
                   std::size_t length) {
  require_envelope(sp, cfg, "reconstruct");
  if (excitation.rank() != 3 || excitation.dim(1) != sp.dim(0)) {
    throw ValidationError("excitation frames do not match the envelope");
  }
  return istft(excitation * sqrt(sp), cfg, length);
}

Tensor transform_formants(const Tensor& x, const Tensor& sp_src, const Tensor& sp_tgt,
                          const StftConfig& cfg, const MelBasis* codec) {
  if (codec == nullptr) return apply_ratio(x, sp_src, sp_tgt, cfg);
  return apply_ratio(x, decompress_sp(compress_sp(sp_src, *codec), *codec),
                     decompress_sp(compress_sp(sp_tgt, *codec), *codec), cfg);
}

Tensor transform_formants_compressed(const Tensor& x, const Tensor& sp_src,
                                     const Tensor& s_tgt, const MelBasis& codec,
                                     const StftConfig& cfg) {
  const Tensor src = decompress_sp(compress_sp(sp_src, codec), codec);
  return apply_ratio(x, src, decompress_sp(s_tgt, codec), cfg);
}

Tensor warp_envelope(const Tensor& sp, Real factor) {
  if (sp.rank() != 2) throw ValidationError("warp_envelope expects (T, bins)");
  if (!(factor > 0)) throw ValidationError("warp factor must be positive");
  const std::size_t bins = sp.dim(1);
  // out[k] = sum_i W[k, i] sp[i]; stored transposed for the frame-major product.
  std::vector<Real> wt(bins * bins, 0);
  for (std::size_t k = 0; k < bins; ++k) {
    const Real pos = std::min(static_cast<Real>(k) / factor, static_cast<Real>(bins - 1));
    const std::size_t i0 = std::min(static_cast<std::size_t>(pos), bins > 1 ? bins - 2 : 0);
    const Real frac = bins > 1 ? pos - static_cast<Real>(i0) : 0;
    wt[i0 * bins + k] += 1 - frac;
    if (bins > 1) wt[(i0 + 1) * bins + k] += frac;
  }
  return matmul(sp, Tensor::constant({bins, bins}, std::move(wt)));
}

}  // namespace diffworld
