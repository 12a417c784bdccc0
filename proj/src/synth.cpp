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

#include "diffworld/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "diffworld/fft.hpp"

namespace diffworld {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_envelope(const Tensor& m, std::size_t bins, const char* what) {
  if (m.rank() != 2 || m.dim(1) != bins) {
    throw ValidationError(std::string(what) + " expects shape (T, " +
                          std::to_string(bins) + "), got " +
                          shape_string(m.shape()));
  }
}

Tensor shape_spectrum(const Tensor& spectrum, const Tensor& gain,
                      const SynthConfig& cfg, std::size_t length) {
  return istft(spectrum * gain, cfg.stft(), length);
}

}  // namespace

std::size_t SynthConfig::harmonic_count() const {
  return static_cast<std::size_t>(
      std::floor(static_cast<double>(sample_rate) / 2.0 / static_cast<double>(f_min)));
}

void SynthConfig::validate() const {
  stft().validate();
  if (fft_size % hop != 0) {
    throw ValidationError("hop " + std::to_string(hop) + " must divide fft_size " +
                          std::to_string(fft_size));
  }
  if (sample_rate == 0) throw ValidationError("sample_rate must be positive");
  if (!(f_min > 0)) throw ValidationError("f_min must be positive");
}

SynthConfig SynthConfig::for_features(const FeatureMeta& meta) {
  SynthConfig cfg;
  cfg.sample_rate = meta.sample_rate;
  cfg.fft_size = meta.fft_size;
  cfg.hop = meta.hop;
  return cfg;
}

AudioRateF0 interpolate_f0(std::span<const Real> f0_frames, std::size_t hop,
                           std::size_t length) {
  if (hop == 0) throw ValidationError("hop must be positive");
  AudioRateF0 out;
  out.f0.assign(length, 0);
  out.voicing.assign(length, 0);
  const std::size_t frames = f0_frames.size();
  if (frames == 0) return out;
  for (std::size_t n = 0; n < length; ++n) {
    const std::size_t t0 = n / hop;
    if (t0 + 1 >= frames) {
      const Real last = f0_frames[frames - 1];
      out.f0[n] = last;
      out.voicing[n] = last > 0 ? 1 : 0;
      continue;
    }
    const Real frac = static_cast<Real>(n - t0 * hop) / static_cast<Real>(hop);
    const Real a = f0_frames[t0];
    const Real b = f0_frames[t0 + 1];
    const bool va = a > 0, vb = b > 0;
    if (va && vb) {
      out.f0[n] = a + (b - a) * frac;
      out.voicing[n] = 1;
    } else if (va) {
      out.f0[n] = a;
      out.voicing[n] = 1 - frac;
    } else if (vb) {
      out.f0[n] = b;
      out.voicing[n] = frac;
    }
  }
  return out;
}

std::size_t active_harmonics(Real f0, const SynthConfig& cfg) {
  if (!(f0 > 0)) return 0;
  const double nyquist = static_cast<double>(cfg.sample_rate) / 2.0;
  // Largest k with k * f0 < nyquist.
  auto k = static_cast<std::size_t>(std::ceil(nyquist / static_cast<double>(f0)));
  if (k > 0) --k;
  while (k > 0 && static_cast<double>(k) * f0 >= nyquist) --k;
  return std::min(k, cfg.harmonic_count());
}

std::vector<Real> pulse_train(const AudioRateF0& f0, const SynthConfig& cfg) {
  const std::size_t length = f0.f0.size();
  const double fs = static_cast<double>(cfg.sample_rate);
  std::vector<Real> out(length, 0);
  double phase = 0;
  for (std::size_t n = 0; n < length; ++n) {
    const double f = static_cast<double>(f0.f0[n]);
    phase += kTwoPi * f / fs;
    if (phase >= kTwoPi) phase = std::fmod(phase, kTwoPi);
    const std::size_t active = active_harmonics(f0.f0[n], cfg);
    if (active == 0 || f0.voicing[n] == 0) continue;
    const double amplitude =
        cfg.normalization == PulseNormalization::kUnitPulseEnergy
            ? std::sqrt(2.0 * f / (static_cast<double>(active) * fs))
            : 1.0;
    // sin(k phi) by the Chebyshev recurrence.
    const double s1 = std::sin(phase);
    const double c2 = 2.0 * std::cos(phase);
    double prev = 0, cur = s1, acc = s1;
    for (std::size_t k = 2; k <= active; ++k) {
      const double next = c2 * cur - prev;
      prev = cur;
      cur = next;
      acc += cur;
    }
    out[n] = static_cast<Real>(static_cast<double>(f0.voicing[n]) * amplitude * acc);
  }
  return out;
}

std::vector<Real> noise_excitation(std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Real> out(length);
  for (auto& v : out) v = static_cast<Real>(normal(rng));
  return out;
}

Tensor synth_harmonic(const Tensor& pulses, const Tensor& sp, const Tensor& ap,
                      const SynthConfig& cfg) {
  cfg.validate();
  require_envelope(sp, cfg.stft().bins(), "synth_harmonic sp");
  require_envelope(ap, cfg.stft().bins(), "synth_harmonic ap");
  if (sp.dim(0) != ap.dim(0)) throw ValidationError("sp and ap frame counts differ");
  const std::size_t frames = sp.dim(0);
  check_frame_alignment(pulses.size(), frames, cfg.hop);
  const Tensor spectrum = stft(pulses, cfg.stft(), frames);
  return shape_spectrum(spectrum, (1 - ap) * sqrt(sp), cfg, pulses.size());
}

Tensor synth_noise(const Tensor& sp, const Tensor& ap, const SynthConfig& cfg,
                   std::uint64_t seed) {
  cfg.validate();
  require_envelope(sp, cfg.stft().bins(), "synth_noise sp");
  require_envelope(ap, cfg.stft().bins(), "synth_noise ap");
  if (sp.dim(0) != ap.dim(0)) throw ValidationError("sp and ap frame counts differ");
  const std::size_t frames = sp.dim(0);
  const std::size_t length = frames * cfg.hop;
  const Tensor noise = Tensor::vector(noise_excitation(length, seed));
  const Tensor spectrum = stft(noise, cfg.stft(), frames);
  return shape_spectrum(spectrum, ap * sqrt(sp), cfg, length);
}

Tensor ZeroResidual::operator()(const Tensor& y0) const {
  return Tensor::zeros(y0.shape());
}

FirPostFilter::FirPostFilter(std::size_t length, bool trainable) {
  if (length < 1) throw ValidationError("FIR length must be >= 1");
  std::vector<Real> zeros(length - 1, 0);
  free_taps_ = trainable ? Tensor::parameter({length - 1}, std::move(zeros))
                         : Tensor::constant({length - 1}, std::move(zeros));
}

FirPostFilter FirPostFilter::from_response(std::span<const Real> response,
                                           bool trainable) {
  if (response.empty()) throw ValidationError("FIR response is empty");
  if (response[0] != 0) {
    throw ValidationError("FIR tap 0 must be exactly 0 (causal with w(0) = 0), got " +
                          std::to_string(response[0]));
  }
  for (std::size_t i = 0; i < response.size(); ++i) {
    if (!std::isfinite(response[i])) {
      throw ValidationError("FIR tap " + std::to_string(i) + " is not finite");
    }
  }
  FirPostFilter f(response.size(), trainable);
  const Shape shape{response.size() - 1};
  std::vector<Real> taps(response.begin() + 1, response.end());
  f.free_taps_ = trainable ? Tensor::parameter(shape, std::move(taps))
                           : Tensor::constant(shape, std::move(taps));
  return f;
}

std::vector<Real> FirPostFilter::response() const {
  std::vector<Real> r{0};
  r.insert(r.end(), free_taps_.data().begin(), free_taps_.data().end());
  return r;
}

Tensor FirPostFilter::apply(const Tensor& signal) const {
  if (free_taps_.size() == 0) return Tensor::zeros(signal.shape());
  // sum_{k>=1} w_k x[t-k] = (x delayed by one) * (w_1, w_2, ...).
  return causal_conv(delay(signal, 1), free_taps_);
}

SourceExcitation::SourceExcitation(std::span<const Real> f0_frames,
                                   const SynthConfig& cfg)
    : frames_(f0_frames.size()), length_(f0_frames.size() * cfg.hop) {
  cfg.validate();
  if (frames_ == 0) throw ValidationError("f0 track has no frames");
  for (std::size_t t = 0; t < frames_; ++t) {
    if (!std::isfinite(f0_frames[t]) || f0_frames[t] < 0) {
      throw ValidationError("f0 must be finite and >= 0 at frame " + std::to_string(t));
    }
  }
  pulses_ = pulse_train(interpolate_f0(f0_frames, cfg.hop, length_), cfg);
  noise_ = noise_excitation(length_, cfg.noise_seed);
  pulse_spectrum_ = stft(Tensor::vector(pulses_), cfg.stft(), frames_);
  noise_spectrum_ = stft(Tensor::vector(noise_), cfg.stft(), frames_);
  std::vector<Real> voiced(frames_);
  for (std::size_t t = 0; t < frames_; ++t) voiced[t] = f0_frames[t] > 0 ? 1 : 0;
  frame_voicing_ = Tensor::constant({frames_, 1}, std::move(voiced));
}

SynthesisParts render_parts(const SourceExcitation& source, const Tensor& amplitude,
                            const Tensor& ap, const SynthConfig& cfg,
                            const PostChain& post) {
  const std::size_t bins = cfg.stft().bins();
  require_envelope(amplitude, bins, "render amplitude");
  require_envelope(ap, bins, "render ap");
  if (amplitude.dim(0) != source.frames() || ap.dim(0) != source.frames()) {
    throw ValidationError("envelope has " + std::to_string(amplitude.dim(0)) +
                          " frames but the source has " +
                          std::to_string(source.frames()));
  }
  const Tensor& voiced = source.frame_voicing();
  // Unvoiced frames: ap = 1.
  const Tensor ap_eff = ap * voiced + (1 - voiced);

  SynthesisParts parts;
  parts.harmonic =
      shape_spectrum(source.pulse_spectrum(), (1 - ap_eff) * amplitude, cfg, source.length());
  if (cfg.gain_noise != 0) {
    parts.noise =
        shape_spectrum(source.noise_spectrum(), ap_eff * amplitude, cfg, source.length());
  } else {
    parts.noise = Tensor::zeros({source.length()});
  }
  Tensor y = cfg.gain_harmonic == 1 ? parts.harmonic : parts.harmonic * cfg.gain_harmonic;
  if (cfg.gain_noise != 0) y = y + parts.noise * cfg.gain_noise;

  if (post.postnet || post.fir) {
    const ZeroResidual zero;
    const PostProcessor& p = post.postnet ? *post.postnet : zero;
    const Tensor residual = p(y);
    if (residual.shape() != y.shape()) {
      throw ValidationError("post-processor changed the signal shape");
    }
    y = y * cfg.gain_dry + residual * cfg.gain_postnet;
    if (post.fir) y = y * cfg.gain_direct + post.fir->apply(y) * cfg.gain_fir;
  }
  parts.output = y;
  return parts;
}

Tensor render(const SourceExcitation& source, const Tensor& amplitude,
              const Tensor& ap, const SynthConfig& cfg, const PostChain& post) {
  return render_parts(source, amplitude, ap, cfg, post).output;
}

Tensor synthesize_raw(const SourceExcitation& source, const Tensor& sp,
                      const Tensor& ap, const SynthConfig& cfg,
                      const PostChain& post) {
  return render(source, sqrt(sp), ap, cfg, post);
}

Tensor synthesize_compressed(const SourceExcitation& source, const Tensor& s,
                             const Tensor& a, const MelBasis& basis,
                             const SynthConfig& cfg, const PostChain& post) {
  const ApCodec codec(cfg.stft().bins(), a.rank() == 2 ? a.dim(1) : 0);
  return render(source, decompress_amplitude(s, basis), codec.decompress(a), cfg, post);
}

namespace {

void check_meta(const FeatureMeta& meta, const SynthConfig& cfg) {
  if (meta.sample_rate != cfg.sample_rate || meta.hop != cfg.hop ||
      meta.fft_size != cfg.fft_size) {
    throw ValidationError(
        "feature framing (rate " + std::to_string(meta.sample_rate) + ", hop " +
        std::to_string(meta.hop) + ", fft " + std::to_string(meta.fft_size) +
        ") does not match the synthesizer (rate " + std::to_string(cfg.sample_rate) +
        ", hop " + std::to_string(cfg.hop) + ", fft " + std::to_string(cfg.fft_size) + ")");
  }
}

}  // namespace

Waveform synthesize(const AnyFeatures& features, const SynthConfig& cfg,
                    const PostChain& post) {
  check_meta(meta_of(features), cfg);
  const SourceExcitation source(f0_of(features), cfg);
  const std::size_t frames = source.frames();
  Tensor y;
  if (const auto* raw = std::get_if<WorldFeatures>(&features)) {
    const std::size_t bins = raw->bins();
    y = synthesize_raw(source, Tensor::constant({frames, bins}, raw->sp),
                       Tensor::constant({frames, bins}, raw->ap), cfg, post);
  } else {
    const auto& comp = std::get<CompressedFeatures>(features);
    const MelBasis basis(comp.meta.sample_rate, comp.meta.fft_size, comp.mel_bands);
    y = synthesize_compressed(source, Tensor::constant({frames, comp.mel_bands}, comp.s),
                              Tensor::constant({frames, comp.ap_bands}, comp.a), basis,
                              cfg, post);
  }
  return Waveform{y.to_vector(), cfg.sample_rate};
}

Waveform oracle_target(const WorldFeatures& features, const SynthConfig& cfg) {
  SynthConfig unit = cfg;
  unit.gain_harmonic = unit.gain_noise = 1;
  unit.gain_dry = unit.gain_postnet = unit.gain_direct = unit.gain_fir = 1;
  return synthesize(AnyFeatures(features), unit);
}

}  // namespace diffworld
