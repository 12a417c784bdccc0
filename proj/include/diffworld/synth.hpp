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

// Differentiable WORLD-style synthesis: a phase-locked, alias-free pulse
// train and a Gaussian noise source, each shaped in the STFT domain by the
// spectral envelope and aperiodicity, summed with user gains and optionally
// post-filtered by a residual post-processor and a learned causal FIR.

#ifndef DIFFWORLD_SYNTH_HPP_
#define DIFFWORLD_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "diffworld/features.hpp"
#include "diffworld/melcodec.hpp"
#include "diffworld/stft.hpp"
#include "diffworld/tensor.hpp"
#include "diffworld/wav.hpp"

namespace diffworld {

enum class PulseNormalization {
  // Harmonic amplitude sqrt(2 f0 / (K_act fs)): every pitch period carries
  // unit energy.
  kUnitPulseEnergy,
  // Every unmasked harmonic has amplitude 1.
  kUnitAmplitude,
};

struct SynthConfig {
  std::uint32_t sample_rate = 22050;
  std::size_t fft_size = 1024;
  std::size_t hop = 256;
  Real f_min = 71;
  PulseNormalization normalization = PulseNormalization::kUnitPulseEnergy;

  Real gain_harmonic = 1;  // g_h
  Real gain_noise = 1;     // g_n
  Real gain_dry = 1;       // g_0, weight of y0 inside the post stage
  Real gain_postnet = 1;   // g_P
  Real gain_direct = 1;    // g_d, weight of the FIR input
  Real gain_fir = 1;       // g_w

  std::uint64_t noise_seed = 0;

  // floor((fs / 2) / f_min); 155 at the defaults.
  std::size_t harmonic_count() const;
  StftConfig stft() const { return {fft_size, hop}; }
  // Throws ValidationError on a non-power-of-two N, a hop that does not
  // divide N, or a non-positive f_min.
  void validate() const;

  static SynthConfig for_features(const FeatureMeta& meta);
};

// Audio-rate f0 and amplitude gate.
struct AudioRateF0 {
  std::vector<Real> f0;
  std::vector<Real> voicing;
};

// Linear interpolation between frame centres (frame t at sample t * hop).
// Between a voiced and an unvoiced frame the voiced frequency is held and the
// gate ramps linearly over that hop. Past the last centre the last frame is
// held.
AudioRateF0 interpolate_f0(std::span<const Real> f0_frames, std::size_t hop,
                           std::size_t length);

// Number of harmonics k <= K with k * f0 < fs / 2.
std::size_t active_harmonics(Real f0, const SynthConfig& cfg);

// e_h(t) = sum_k c_k(t) sin(k phi(t)), phi the running phase of f0.
std::vector<Real> pulse_train(const AudioRateF0& f0, const SynthConfig& cfg);

// Standard normal noise from a seeded generator.
std::vector<Real> noise_excitation(std::size_t length, std::uint64_t seed);

// h = istft((1 - ap) . sqrt(sp) . stft(e_h)). sp, ap: {T, N/2+1}.
Tensor synth_harmonic(const Tensor& pulses, const Tensor& sp, const Tensor& ap,
                      const SynthConfig& cfg);
// n = istft(ap . sqrt(sp) . stft(e_n)) with e_n drawn from `seed`; the output
// has T * hop samples.
Tensor synth_noise(const Tensor& sp, const Tensor& ap, const SynthConfig& cfg,
                   std::uint64_t seed);

// Residual post-processor P in y_d = g_0 y0 + g_P P(y0). Implementations must
// return a tensor shaped like the input and keep it on the input's graph.
class PostProcessor {
 public:
  virtual ~PostProcessor() = default;
  virtual Tensor operator()(const Tensor& y0) const = 0;
};

// P(y0) = 0.
class ZeroResidual final : public PostProcessor {
 public:
  Tensor operator()(const Tensor& y0) const override;
};

// Learned causal impulse response with w(0) = 0. Only taps 1..L-1 are free.
class FirPostFilter {
 public:
  explicit FirPostFilter(std::size_t length = 1024, bool trainable = false);
  // Full response including tap 0, which must be exactly zero.
  static FirPostFilter from_response(std::span<const Real> response,
                                     bool trainable = false);

  std::size_t length() const { return free_taps_.size() + 1; }
  // Taps 1..L-1 as a {L-1} tensor (a parameter when trainable).
  const Tensor& taps() const { return free_taps_; }
  std::vector<Real> response() const;
  // y_d * w.
  Tensor apply(const Tensor& signal) const;

 private:
  Tensor free_taps_;
};

// Per-clip source signals: everything that depends only on f0 and the seed.
// Built once, reused across renders (e.g. across optimizer steps).
class SourceExcitation {
 public:
  SourceExcitation(std::span<const Real> f0_frames, const SynthConfig& cfg);

  std::size_t frames() const { return frames_; }
  std::size_t length() const { return length_; }
  const std::vector<Real>& pulses() const { return pulses_; }
  const std::vector<Real>& noise() const { return noise_; }
  const Tensor& pulse_spectrum() const { return pulse_spectrum_; }
  const Tensor& noise_spectrum() const { return noise_spectrum_; }
  // {T, 1}: 1 for voiced frames, 0 for unvoiced.
  const Tensor& frame_voicing() const { return frame_voicing_; }

 private:
  std::size_t frames_;
  std::size_t length_;
  std::vector<Real> pulses_;
  std::vector<Real> noise_;
  Tensor pulse_spectrum_;
  Tensor noise_spectrum_;
  Tensor frame_voicing_;
};

struct PostChain {
  const PostProcessor* postnet = nullptr;
  const FirPostFilter* fir = nullptr;
};

struct SynthesisParts {
  Tensor harmonic;  // h
  Tensor noise;     // n
  Tensor output;    // y (y0 when no post stage)
};

// Core renderer on the envelope magnitude sqrt(sp). Aperiodicity is forced
// to 1 on unvoiced frames before shaping.
SynthesisParts render_parts(const SourceExcitation& source, const Tensor& amplitude,
                            const Tensor& ap, const SynthConfig& cfg,
                            const PostChain& post = {});
Tensor render(const SourceExcitation& source, const Tensor& amplitude,
              const Tensor& ap, const SynthConfig& cfg, const PostChain& post = {});

// Raw power-spectrum envelope.
Tensor synthesize_raw(const SourceExcitation& source, const Tensor& sp,
                      const Tensor& ap, const SynthConfig& cfg,
                      const PostChain& post = {});
// Compressed features through the codec.
Tensor synthesize_compressed(const SourceExcitation& source, const Tensor& s,
                             const Tensor& a, const MelBasis& basis,
                             const SynthConfig& cfg, const PostChain& post = {});

// File-level entry point. cfg must agree with the features' sample rate, hop
// and FFT size. Output length is T * hop.
Waveform synthesize(const AnyFeatures& features, const SynthConfig& cfg,
                    const PostChain& post = {});

// Constrained-manifold training target: baseline synthesis of oracle
// features at unit gains and a fixed seed, with no post stage.
Waveform oracle_target(const WorldFeatures& features, const SynthConfig& cfg);

}  // namespace diffworld

#endif  // DIFFWORLD_SYNTH_HPP_
