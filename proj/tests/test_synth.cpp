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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "diffworld/losses.hpp"
#include "diffworld/stft.hpp"
#include "diffworld/synth.hpp"
#include "test_util.hpp"

using namespace diffworld;
using diffworld::testing::random_normal;
using diffworld::testing::random_vector;
using diffworld::testing::relative_l2;

namespace {

// Power spectrum of a signal segment through the direct DFT oracle.
std::vector<double> power_spectrum(std::span<const Real> x, std::size_t n) {
  const auto X = diffworld::testing::naive_rdft(x, n);
  std::vector<double> p(X.size());
  for (std::size_t k = 0; k < X.size(); ++k) p[k] = std::norm(X[k]);
  return p;
}

Tensor flat(std::size_t frames, std::size_t bins, Real v) {
  return Tensor::full({frames, bins}, v);
}

}  // namespace

TEST_CASE("config defaults") {
  const SynthConfig cfg;
  CHECK(cfg.harmonic_count() == 155);
  CHECK(cfg.stft().bins() == 513);
  CHECK_NOTHROW(cfg.validate());
  SynthConfig bad = cfg;
  bad.hop = 300;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.fft_size = 1000;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("f0 interpolation") {
  SUBCASE("constant voiced") {
    const std::vector<Real> f0(5, 220);
    const auto r = interpolate_f0(f0, 256, 5 * 256);
    for (Real v : r.f0) CHECK(v == 220);
    for (Real v : r.voicing) CHECK(v == 1);
  }
  SUBCASE("all unvoiced") {
    const std::vector<Real> f0(4, 0);
    const auto r = interpolate_f0(f0, 256, 4 * 256);
    for (Real v : r.voicing) CHECK(v == 0);
  }
  SUBCASE("linear between frame centres") {
    const std::vector<Real> f0{200, 300};
    const auto r = interpolate_f0(f0, 256, 512);
    for (std::size_t n = 0; n <= 256; ++n) {
      CHECK(r.f0[n] == doctest::Approx(200 + 100.0 * n / 256));
    }
  }
  SUBCASE("voicing boundary holds frequency and ramps the gate") {
    const std::vector<Real> f0{150, 0};
    const auto r = interpolate_f0(f0, 4, 8);
    for (std::size_t n = 0; n < 4; ++n) {
      CHECK(r.f0[n] == 150);
      CHECK(r.voicing[n] == doctest::Approx(1 - n / 4.0));
    }
    for (std::size_t n = 4; n < 8; ++n) CHECK(r.voicing[n] == 0);
  }
}

TEST_CASE("pulse train edge cases") {
  const SynthConfig cfg;
  auto train = [&](Real f) {
    AudioRateF0 a;
    a.f0.assign(2048, f);
    a.voicing.assign(2048, 1);
    return pulse_train(a, cfg);
  };
  for (Real v : train(0)) CHECK(v == 0);
  for (Real v : train(11025)) CHECK(v == 0);
  CHECK(active_harmonics(11025, cfg) == 0);
  CHECK(active_harmonics(11024, cfg) == 1);
  CHECK(active_harmonics(5512.5, cfg) == 1);
  CHECK(active_harmonics(71, cfg) == 155);
  CHECK(active_harmonics(50, cfg) == 155);
}

TEST_CASE("pulse train at 220.5 Hz") {
  const SynthConfig cfg;
  AudioRateF0 a;
  const std::size_t len = 22050;
  a.f0.assign(len, 220.5);
  a.voicing.assign(len, 1);
  const auto e = pulse_train(a, cfg);

  // One period is exactly 100 samples.
  for (std::size_t start : {1000u, 5000u, 12345u}) {
    double energy = 0;
    for (std::size_t n = start; n < start + 100; ++n) energy += e[n] * e[n];
    CHECK(energy == doctest::Approx(1).epsilon(0.02));
  }

  // 44 whole periods: harmonics of 220.5 land exactly on every 44th bin.
  const std::span<const Real> seg(e.data() + 2000, 4400);
  const auto p = power_spectrum(seg, 4400);
  double on = 0, off = 0;
  for (std::size_t k = 0; k < p.size(); ++k) (k % 44 == 0 && k > 0 ? on : off) += p[k];
  CHECK(off / on < 1e-12);
}

TEST_CASE("STFT") {
  const StftConfig cfg;
  SUBCASE("zeros") {
    const Tensor X = stft(Tensor::zeros({4096}), cfg);
    CHECK(X.shape() == Shape{2, 17, 513});
    for (Real v : X.data()) CHECK(v == 0);
  }
  SUBCASE("roundtrip on 1 s of noise") {
    const auto x = random_normal(22050, 81);
    const Tensor back = istft(stft(Tensor::vector(x), cfg), cfg, x.size());
    CHECK(relative_l2(back.data(), x, 1024, x.size() - 1024) < 1e-10);
  }
  SUBCASE("bin-centred sine stays in the Hann main lobe") {
    const std::size_t k0 = 40;
    std::vector<Real> x(1024);
    for (std::size_t n = 0; n < x.size(); ++n) {
      x[n] = std::sin(2 * std::numbers::pi * k0 * n / 1024.0);
    }
    // Frame 2 is centred on sample 512 and lies entirely inside x.
    const Tensor X = stft(Tensor::vector(x), cfg);
    const std::size_t T = X.dim(1);
    auto pw = [&](std::size_t k) {
      const Real re = X[2 * 513 + k], im = X[T * 513 + 2 * 513 + k];
      return re * re + im * im;
    };
    double total = 0;
    for (std::size_t k = 0; k < 513; ++k) total += pw(k);
    CHECK((pw(k0 - 1) + pw(k0) + pw(k0 + 1)) / total == doctest::Approx(1).epsilon(1e-12));
    CHECK(pw(k0 + 1) / pw(k0) == doctest::Approx(0.25));
  }
  SUBCASE("Hann first sidelobe") {
    // 16x zero-padded spectrum of the window itself.
    const auto w = hann_window(64);
    const auto p = power_spectrum(w, 1024);
    std::size_t k = 1;
    while (p[k + 1] < p[k]) ++k;          // first null
    while (p[k + 1] > p[k]) ++k;          // first sidelobe peak
    CHECK(10 * std::log10(p[k] / p[0]) == doctest::Approx(-31.5).epsilon(0.01));
  }
  SUBCASE("explicit frame count") {
    const Tensor X = stft(Tensor::zeros({1024}), cfg, 9);
    CHECK(X.dim(1) == 9);
  }
}

TEST_CASE("harmonic and noise branches") {
  const SynthConfig cfg;
  const std::size_t T = 40, B = 513, L = T * 256;
  const std::vector<Real> f0(T, 220.5);
  const auto e = pulse_train(interpolate_f0(f0, 256, L), cfg);
  const Tensor pulses = Tensor::vector(e);

  SUBCASE("ap = 1 silences the harmonic branch") {
    const Tensor h = synth_harmonic(pulses, flat(T, B, 2), flat(T, B, 1), cfg);
    for (Real v : h.data()) CHECK(v == 0);
  }
  SUBCASE("flat envelope is all-pass") {
    const Tensor h = synth_harmonic(pulses, flat(T, B, 1), flat(T, B, 0), cfg);
    CHECK(relative_l2(h.data(), e, 1024, L - 1024) < 1e-10);
  }
  SUBCASE("one-bin envelope is narrowband") {
    const std::size_t k0 = 41;  // about 883 Hz, the 4th harmonic
    std::vector<Real> sp(T * B, 0);
    for (std::size_t t = 0; t < T; ++t) sp[t * B + k0] = 1;
    const Tensor h = synth_harmonic(pulses, Tensor::constant({T, B}, sp), flat(T, B, 0), cfg);
    const std::span<const Real> seg(h.data().data() + 2048, 4096);
    const auto p = power_spectrum(seg, 4096);
    double near = 0, total = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      total += p[k];
      if (k + 8 >= 4 * k0 && k <= 4 * k0 + 8) near += p[k];
    }
    CHECK(near / total > 0.99);
  }
  SUBCASE("ap = 0 silences the noise branch") {
    const Tensor n = synth_noise(flat(T, B, 1), flat(T, B, 0), cfg, 3);
    for (Real v : n.data()) CHECK(v == 0);
  }
  SUBCASE("unit noise has unit variance") {
    const std::size_t frames = 100;
    const Tensor n = synth_noise(flat(frames, B, 1), flat(frames, B, 1), cfg, 5);
    double acc = 0;
    const std::size_t lo = 1024, hi = n.size() - 1024;
    for (std::size_t i = lo; i < hi; ++i) acc += n[i] * n[i];
    CHECK(acc / (hi - lo) == doctest::Approx(1).epsilon(0.1));
  }
  SUBCASE("seeded noise is bit-identical") {
    const Tensor a = synth_noise(flat(T, B, 0.5), flat(T, B, 0.3), cfg, 77);
    const Tensor b = synth_noise(flat(T, B, 0.5), flat(T, B, 0.3), cfg, 77);
    const Tensor c = synth_noise(flat(T, B, 0.5), flat(T, B, 0.3), cfg, 78);
    CHECK(a.to_vector() == b.to_vector());
    CHECK(a.to_vector() != c.to_vector());
  }
  SUBCASE("frame-count mismatch") {
    CHECK_THROWS_AS(synth_harmonic(pulses, flat(T + 5, B, 1), flat(T + 5, B, 0), cfg),
                    ValidationError);
    CHECK_THROWS_AS(synth_harmonic(pulses, flat(T, B, 1), flat(T - 1, B, 0), cfg),
                    ValidationError);
  }
}

TEST_CASE("synthesis mixing and post stage") {
  SynthConfig cfg;
  const std::size_t T = 20, B = 513;
  std::vector<Real> f0(T, 180);
  f0[7] = f0[8] = 0;
  const SourceExcitation source(f0, cfg);
  const Tensor sp = Tensor::constant({T, B}, random_vector(T * B, 91, 0.1, 1));
  const Tensor ap = Tensor::constant({T, B}, random_vector(T * B, 92, 0, 1));
  const auto parts = render_parts(source, sqrt(sp), ap, cfg);

  SUBCASE("no post stage gives y0") {
    const Tensor y0 = parts.harmonic + parts.noise;
    CHECK(parts.output.to_vector() == y0.to_vector());
  }
  SUBCASE("gain routing") {
    SynthConfig c = cfg;
    c.gain_noise = 0;
    const Tensor y = synthesize_raw(source, sp, flat(T, B, 0), c);
    const Tensor h = render_parts(source, sqrt(sp), flat(T, B, 0), cfg).harmonic;
    CHECK(y.to_vector() == h.to_vector());
    c = cfg;
    c.gain_harmonic = 0.5;
    c.gain_noise = 2;
    const Tensor mixed = synthesize_raw(source, sp, ap, c);
    CHECK(diffworld::testing::max_abs_diff(
              mixed.data(), (parts.harmonic * 0.5 + parts.noise * 2).data()) < 1e-14);
  }
  SUBCASE("zero residual and zero FIR leave y0") {
    const FirPostFilter fir(16);
    const ZeroResidual zero;
    const Tensor y = render(source, sqrt(sp), ap, cfg, {&zero, &fir});
    CHECK(diffworld::testing::max_abs_diff(y.data(), parts.output.data()) == 0);
  }
  SUBCASE("impulse FIR delays the signal") {
    for (std::size_t d : {1u, 5u}) {
      std::vector<Real> w(8, 0);
      w[d] = 1;
      const auto fir = FirPostFilter::from_response(w);
      SynthConfig c = cfg;
      c.gain_direct = 0;
      const Tensor y = render(source, sqrt(sp), ap, c, {nullptr, &fir});
      const auto& y0 = parts.output;
      for (std::size_t i = 0; i < d; ++i) CHECK(y[i] == 0);
      for (std::size_t i = d; i < y.size(); ++i) REQUIRE(y[i] == y0[i - d]);
    }
  }
  SUBCASE("FIR tap 0 is structurally zero") {
    CHECK_THROWS_AS(FirPostFilter::from_response(std::vector<Real>{0.5, 1}), ValidationError);
    CHECK(FirPostFilter(32, true).taps().size() == 31);
    CHECK(FirPostFilter(32, true).taps().requires_grad());
  }
  SUBCASE("unvoiced frames carry no harmonic energy") {
    const std::vector<Real> all_unvoiced(T, 0);
    const SourceExcitation silent(all_unvoiced, cfg);
    const auto none = render_parts(silent, sqrt(sp), ap, cfg);
    for (Real v : none.harmonic.data()) REQUIRE(v == 0);
  }
}

TEST_CASE("file-level synthesis") {
  WorldFeatures f;
  f.meta = {22050, 256, 1024};
  const std::size_t T = 12, B = 513;
  f.f0.assign(T, 200);
  f.f0[0] = 0;
  f.sp = random_vector(T * B, 101, 0.01, 1);
  f.ap = random_vector(T * B, 102, 0, 1);
  f.validate();
  const SynthConfig cfg = SynthConfig::for_features(f.meta);

  const Waveform target = oracle_target(f, cfg);
  const Waveform again = synthesize(AnyFeatures(f), cfg);
  CHECK(target.samples.size() == T * 256);
  CHECK(target.samples == again.samples);

  const SpectrogramLoss loss(Tensor::vector(target.samples), MslConfig{});
  CHECK(loss(Tensor::vector(again.samples)).item() == 0);

  WorldFeatures g = f;
  g.sp[5 * B + 30] *= 4;
  CHECK(synthesize(AnyFeatures(g), cfg).samples != target.samples);

  SynthConfig other = cfg;
  other.hop = 128;
  CHECK_THROWS_AS(synthesize(AnyFeatures(f), other), ValidationError);

  const CompressedFeatures c = compress_features(f);
  const Waveform yc = synthesize(AnyFeatures(c), cfg);
  CHECK(yc.samples.size() == T * 256);
}

TEST_CASE("pitch is preserved") {
  SynthConfig cfg;
  cfg.gain_noise = 0;
  const std::size_t T = 60, B = 513;
  for (Real pitch : {110.0, 220.5, 347.0}) {
    const std::vector<Real> f0(T, pitch);
    const SourceExcitation source(f0, cfg);
    std::vector<Real> sp(T * B);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < B; ++k) {
        const double hz = 22050.0 * k / 1024;
        sp[t * B + k] = 1 / (1 + std::pow(hz / 400, 2));
      }
    const Tensor y = synthesize_raw(source, Tensor::constant({T, B}, sp), flat(T, B, 0), cfg);
    const std::size_t n = 8192;
    const std::span<const Real> seg(y.data().data() + 2048, n);
    const auto p = power_spectrum(seg, n);
    const auto peak = std::max_element(p.begin() + 1, p.end()) - p.begin();
    const double bin_hz = 22050.0 / n;
    CHECK(std::abs(peak * bin_hz - pitch) <= bin_hz);
  }
}

TEST_CASE("synthesis gradients match finite differences") {
  SynthConfig cfg;
  cfg.fft_size = 64;
  cfg.hop = 16;
  cfg.sample_rate = 8000;
  const std::size_t T = 8, B = 33;
  std::vector<Real> f0{0, 300, 310, 320, 330, 0, 250, 260};
  const SourceExcitation source(f0, cfg);
  const Tensor weights = Tensor::vector(random_vector(T * 16, 111));
  const Tensor ap0 = Tensor::constant({T, B}, random_vector(T * B, 112, 0.1, 0.9));
  const Tensor sp0 = Tensor::constant({T, B}, random_vector(T * B, 113, 0.2, 1.5));
  auto wrt_sp = [&](const Tensor& sp) {
    return sum(synthesize_raw(source, sp, ap0, cfg) * weights);
  };
  auto wrt_ap = [&](const Tensor& ap) {
    return sum(square(synthesize_raw(source, sp0, ap, cfg)) * weights);
  };
  CHECK(diffworld::testing::check_gradient(wrt_sp, {T, B}, sp0.to_vector()).max_relative_error <
        1e-4);
  CHECK(diffworld::testing::check_gradient(wrt_ap, {T, B}, ap0.to_vector()).max_relative_error <
        1e-4);

  std::vector<Real> w(6, 0);
  w[2] = 0.3;
  const auto fir = FirPostFilter::from_response(w, true);
  const Tensor y = render(source, sqrt(sp0), ap0, cfg, {nullptr, &fir});
  const auto g = backward(sum(y * weights)).wrt(fir.taps());
  CHECK(g.size() == 5);
  CHECK(std::any_of(g.begin(), g.end(), [](Real v) { return v != 0; }));
}
