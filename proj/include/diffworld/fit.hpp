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

// Analysis-by-synthesis: recover compressed features (and optionally FIR
// post-filter taps) for a target waveform by Adam on the multi-spectrogram
// loss through the differentiable synthesizer.

#ifndef DIFFWORLD_FIT_HPP_
#define DIFFWORLD_FIT_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "diffworld/features.hpp"
#include "diffworld/losses.hpp"
#include "diffworld/wav.hpp"

namespace diffworld {

struct AdamConfig {
  Real learning_rate = Real(1e-3);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real epsilon = Real(1e-8);
};

struct AdamState {
  explicit AdamState(std::size_t n = 0) : m(n, 0), v(n, 0) {}
  std::vector<Real> m;
  std::vector<Real> v;
  std::size_t step = 0;
};

// One bias-corrected Adam update of params in place.
void adam_step(std::span<Real> params, std::span<const Real> grads, AdamState& state,
               const AdamConfig& cfg);

struct FitConfig {
  std::size_t steps = 1000;
  AdamConfig adam{Real(2e-2)};  // tuned for 1 s clips at 500 steps
  MslConfig msl;
  // Weight of the feature MSE against a reference (0 disables it).
  Real feature_weight = 0;
  std::uint64_t seed = 0;
  std::size_t mel_bands = 80;
  std::size_t ap_bands = 16;
  bool fit_fir = false;
  std::size_t fir_length = 1024;

  void validate() const;
};

struct FitResult {
  CompressedFeatures features;
  // Loss before each update; one entry per step.
  std::vector<Real> trace;
  // Learned FIR response (tap 0 first) when fit_fir is set.
  std::vector<Real> fir_response;
};

using FitProgress = std::function<void(std::size_t step, Real loss)>;

// Starting point when none is supplied: a flat envelope at the target's RMS
// level and a = 0.5 everywhere.
CompressedFeatures default_fit_init(const Waveform& target, std::span<const Real> f0,
                                    const FeatureMeta& meta, const FitConfig& cfg);

// f0 is held fixed. `init` and `reference` must use cfg's band counts and
// f0's frame count. Throws std::runtime_error (with the step index) if the
// loss becomes non-finite.
FitResult fit(const Waveform& target, std::span<const Real> f0, const FeatureMeta& meta,
              const FitConfig& cfg, const CompressedFeatures* init = nullptr,
              const CompressedFeatures* reference = nullptr,
              const FitProgress& progress = {});

// Trailing moving average over `window` steps.
std::vector<Real> smooth_trace(std::span<const Real> trace, std::size_t window);

}  // namespace diffworld

#endif  // DIFFWORLD_FIT_HPP_
