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

#include "diffworld/fit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "diffworld/melcodec.hpp"
#include "diffworld/synth.hpp"

namespace diffworld {
namespace {

constexpr Real kLogitClip = Real(1e-6);

Real logit(Real p) {
  p = std::clamp(p, kLogitClip, 1 - kLogitClip);
  return std::log(p / (1 - p));
}

void check_compressed(const CompressedFeatures& f, std::size_t frames, const FitConfig& cfg,
                      const char* what) {
  if (f.frames() != frames || f.mel_bands != cfg.mel_bands || f.ap_bands != cfg.ap_bands) {
    throw ValidationError(std::string(what) + " features do not match the fit layout (" +
                          std::to_string(frames) + " frames, " +
                          std::to_string(cfg.mel_bands) + " mel bands, " +
                          std::to_string(cfg.ap_bands) + " ap bands)");
  }
}

}  // namespace

void adam_step(std::span<Real> params, std::span<const Real> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ValidationError("adam_step: parameter, gradient and state sizes differ");
  }
  ++state.step;
  const Real t = static_cast<Real>(state.step);
  const Real c1 = 1 - std::pow(cfg.beta1, t);
  const Real c2 = 1 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1 - cfg.beta2) * grads[i] * grads[i];
    const Real m_hat = state.m[i] / c1;
    const Real v_hat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

void FitConfig::validate() const {
  if (steps < 1) throw ValidationError("fit needs at least one step");
  if (!(adam.learning_rate >= 0) || !std::isfinite(adam.learning_rate)) {
    throw ValidationError("learning rate must be finite and >= 0");
  }
  if (mel_bands == 0 || ap_bands < 2) throw ValidationError("bad band counts for fit");
  if (fit_fir && fir_length < 2) throw ValidationError("FIR length must be >= 2");
  msl.validate();
}

CompressedFeatures default_fit_init(const Waveform& target, std::span<const Real> f0,
                                    const FeatureMeta& meta, const FitConfig& cfg) {
  double power = 0;
  for (Real v : target.samples) power += static_cast<double>(v) * v;
  if (!target.samples.empty()) power /= static_cast<double>(target.samples.size());
  const std::size_t frames = f0.size();
  const std::size_t bins = meta.bins();
  const MelBasis basis(meta.sample_rate, meta.fft_size, cfg.mel_bands);
  CompressedFeatures init;
  init.meta = meta;
  init.mel_bands = cfg.mel_bands;
  init.ap_bands = cfg.ap_bands;
  init.f0.assign(f0.begin(), f0.end());
  init.s = compress_sp(Tensor::full({frames, bins}, static_cast<Real>(power)), basis).to_vector();
  init.a.assign(frames * cfg.ap_bands, Real(0.5));
  init.validate();
  return init;
}

FitResult fit(const Waveform& target, std::span<const Real> f0, const FeatureMeta& meta,
              const FitConfig& cfg, const CompressedFeatures* init,
              const CompressedFeatures* reference, const FitProgress& progress) {
  cfg.validate();
  if (target.samples.empty()) throw ValidationError("fit target is empty");
  if (target.sample_rate != meta.sample_rate) {
    throw ValidationError("target sample rate " + std::to_string(target.sample_rate) +
                          " does not match features (" + std::to_string(meta.sample_rate) +
                          ")");
  }
  const std::size_t frames = f0.size();
  check_frame_alignment(target.samples.size(), frames, meta.hop);

  SynthConfig synth_cfg = SynthConfig::for_features(meta);
  synth_cfg.noise_seed = cfg.seed;
  const SourceExcitation source(f0, synth_cfg);
  const MelBasis basis(meta.sample_rate, meta.fft_size, cfg.mel_bands);
  const ApCodec ap_codec(meta.bins(), cfg.ap_bands);
  const SpectrogramLoss loss_fn(Tensor::vector(target.samples), cfg.msl);

  const CompressedFeatures start =
      init ? *init : default_fit_init(target, f0, meta, cfg);
  check_compressed(start, frames, cfg, "initial");
  if (reference) check_compressed(*reference, frames, cfg, "reference");

  std::vector<Real> s = start.s;
  std::vector<Real> a_logits(start.a.size());
  std::transform(start.a.begin(), start.a.end(), a_logits.begin(), logit);
  std::vector<Real> fir_taps(cfg.fit_fir ? cfg.fir_length - 1 : 0, 0);
  AdamState s_state(s.size()), a_state(a_logits.size()), fir_state(fir_taps.size());

  Tensor ref_s, ref_a;
  if (reference) {
    ref_s = Tensor::constant({frames, cfg.mel_bands}, reference->s);
    ref_a = Tensor::constant({frames, cfg.ap_bands}, reference->a);
  }

  FitResult result;
  result.trace.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Tensor s_param = Tensor::parameter({frames, cfg.mel_bands}, s);
    const Tensor a_param = Tensor::parameter({frames, cfg.ap_bands}, a_logits);
    const Tensor a = sigmoid(a_param);
    FirPostFilter fir(cfg.fit_fir ? cfg.fir_length : 1, false);
    if (cfg.fit_fir) {
      std::vector<Real> response{0};
      response.insert(response.end(), fir_taps.begin(), fir_taps.end());
      fir = FirPostFilter::from_response(response, true);
    }
    PostChain post;
    if (cfg.fit_fir) post.fir = &fir;

    Tensor y = render(source, decompress_amplitude(s_param, basis), ap_codec.decompress(a),
                      synth_cfg, post);
    if (y.size() != loss_fn.length()) y = resize(y, loss_fn.length());
    Tensor loss = loss_fn(y);
    if (reference && cfg.feature_weight != 0) {
      const Real count = static_cast<Real>(ref_s.size() + ref_a.size());
      loss = loss + (sum(square(s_param - ref_s)) + sum(square(a - ref_a))) *
                        (cfg.feature_weight / count);
    }
    const Real value = loss.item();
    if (!std::isfinite(value)) {
      throw std::runtime_error("fit diverged: non-finite loss at step " + std::to_string(step));
    }
    result.trace.push_back(value);
    if (progress) progress(step, value);

    const Gradients grads = backward(loss);
    adam_step(s, grads.wrt(s_param), s_state, cfg.adam);
    adam_step(a_logits, grads.wrt(a_param), a_state, cfg.adam);
    if (cfg.fit_fir) adam_step(fir_taps, grads.wrt(fir.taps()), fir_state, cfg.adam);
  }

  result.features.meta = meta;
  result.features.mel_bands = cfg.mel_bands;
  result.features.ap_bands = cfg.ap_bands;
  result.features.f0.assign(f0.begin(), f0.end());
  result.features.s = s;
  result.features.a =
      sigmoid(Tensor::constant({frames, cfg.ap_bands}, a_logits)).to_vector();
  result.features.validate();
  if (cfg.fit_fir) {
    result.fir_response.push_back(0);
    result.fir_response.insert(result.fir_response.end(), fir_taps.begin(), fir_taps.end());
  }
  return result;
}

std::vector<Real> smooth_trace(std::span<const Real> trace, std::size_t window) {
  if (window == 0) throw ValidationError("smoothing window must be positive");
  std::vector<Real> out(trace.size());
  Real acc = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    acc += trace[i];
    if (i >= window) acc -= trace[i - window];
    out[i] = acc / static_cast<Real>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace diffworld
