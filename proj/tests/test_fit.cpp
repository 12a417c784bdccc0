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

#include <cmath>

#include "diffworld/fit.hpp"
#include "diffworld/melcodec.hpp"
#include "diffworld/synth.hpp"
#include "test_util.hpp"

using namespace diffworld;
using diffworld::testing::random_vector;

namespace {

struct Problem {
  FeatureMeta meta{16000, 64, 256};
  CompressedFeatures truth;
  Waveform target;
};

Problem small_problem() {
  Problem p;
  const std::size_t T = 24, B = p.meta.bins();
  WorldFeatures raw;
  raw.meta = p.meta;
  for (std::size_t t = 0; t < T; ++t) raw.f0.push_back(t == 10 ? 0 : 190 + 4.0 * t);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < B; ++k) {
      const double hz = 16000.0 * k / 256;
      const double a = 0.02 + std::exp(-std::pow((hz - 700) / 300, 2)) +
                       0.4 * std::exp(-std::pow((hz - 2400) / 500, 2));
      raw.sp.push_back(0.01 * a * a);
      raw.ap.push_back(std::min(1.0, 0.1 + hz / 8000));
    }
  raw.validate();
  p.truth = compress_features(raw, 20, 6);
  p.target = synthesize(AnyFeatures(p.truth), SynthConfig::for_features(p.meta));
  return p;
}

FitConfig small_config(std::size_t steps) {
  FitConfig cfg;
  cfg.steps = steps;
  cfg.mel_bands = 20;
  cfg.ap_bands = 6;
  cfg.msl.scales = 3;
  return cfg;
}

}  // namespace

TEST_CASE("Adam") {
  SUBCASE("zero gradient leaves parameters") {
    std::vector<Real> p{1, -2, 3};
    AdamState st(3);
    adam_step(p, std::vector<Real>{0, 0, 0}, st, {});
    CHECK(p == std::vector<Real>{1, -2, 3});
  }
  SUBCASE("first step moves by about the learning rate") {
    // m_hat = g, v_hat = g^2: step = lr * g / (|g| + eps).
    std::vector<Real> p{0.5, 0.5};
    AdamState st(2);
    const AdamConfig cfg{0.01};
    adam_step(p, std::vector<Real>{3, -0.2}, st, cfg);
    CHECK(p[0] == doctest::Approx(0.5 - 0.01 * 3 / (3 + 1e-8)).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.5 + 0.01 * 0.2 / (0.2 + 1e-8)).epsilon(1e-14));
  }
  SUBCASE("two steps against a direct reimplementation") {
    const auto g1 = random_vector(5, 1), g2 = random_vector(5, 2);
    std::vector<Real> p = random_vector(5, 3);
    std::vector<Real> q = p;
    AdamState st(5);
    const AdamConfig cfg{0.05, 0.8, 0.99, 1e-6};
    adam_step(p, g1, st, cfg);
    adam_step(p, g2, st, cfg);
    for (std::size_t i = 0; i < 5; ++i) {
      double m = 0, v = 0;
      const double g[2] = {g1[i], g2[i]};
      for (int t = 1; t <= 2; ++t) {
        m = 0.8 * m + 0.2 * g[t - 1];
        v = 0.99 * v + 0.01 * g[t - 1] * g[t - 1];
        const double mh = m / (1 - std::pow(0.8, t)), vh = v / (1 - std::pow(0.99, t));
        q[i] -= 0.05 * mh / (std::sqrt(vh) + 1e-6);
      }
      CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-14));
    }
    CHECK(st.step == 2);
  }
  SUBCASE("size mismatch") {
    std::vector<Real> p{1};
    AdamState st(2);
    CHECK_THROWS_AS(adam_step(p, std::vector<Real>{1}, st, {}), ValidationError);
  }
}

TEST_CASE("fit input checks") {
  const Problem p = small_problem();
  FitConfig cfg = small_config(1);
  Waveform empty{{}, 16000};
  CHECK_THROWS_AS(fit(empty, p.truth.f0, p.meta, cfg), ValidationError);
  std::vector<Real> short_f0(p.truth.f0.begin(), p.truth.f0.end() - 5);
  CHECK_THROWS_AS(fit(p.target, short_f0, p.meta, cfg), ValidationError);
  cfg.steps = 0;
  CHECK_THROWS_AS(fit(p.target, p.truth.f0, p.meta, cfg), ValidationError);
  cfg = small_config(1);
  cfg.adam.learning_rate = -1;
  CHECK_THROWS_AS(fit(p.target, p.truth.f0, p.meta, cfg), ValidationError);
}

TEST_CASE("zero learning rate keeps the initial features") {
  const Problem p = small_problem();
  FitConfig cfg = small_config(5);
  cfg.adam.learning_rate = 0;
  const CompressedFeatures init = default_fit_init(p.target, p.truth.f0, p.meta, cfg);
  const FitResult r = fit(p.target, p.truth.f0, p.meta, cfg, &init);
  CHECK(r.features.s == init.s);
  for (std::size_t i = 0; i < init.a.size(); ++i) {
    CHECK(r.features.a[i] == doctest::Approx(init.a[i]).epsilon(1e-12));
  }
  REQUIRE(r.trace.size() == 5);
  for (Real v : r.trace) CHECK(v == r.trace[0]);
}

TEST_CASE("self-consistency fit") {
  const Problem p = small_problem();
  const FitConfig cfg = small_config(150);
  const FitResult r = fit(p.target, p.truth.f0, p.meta, cfg);
  REQUIRE(r.trace.size() == 150);
  const auto smooth = smooth_trace(r.trace, 20);
  for (std::size_t i = 20; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1]);
  CHECK(r.trace.back() <= 0.1 * r.trace.front());
  for (Real v : r.features.a) {
    CHECK(v >= 0);
    CHECK(v <= 1);
  }

  const FitResult again = fit(p.target, p.truth.f0, p.meta, cfg);
  CHECK(again.trace == r.trace);
  CHECK(again.features.s == r.features.s);
}

TEST_CASE("fit with a reference and a trainable FIR") {
  const Problem p = small_problem();
  FitConfig cfg = small_config(3);
  cfg.fit_fir = true;
  cfg.fir_length = 16;
  cfg.feature_weight = 1;
  const FitResult r = fit(p.target, p.truth.f0, p.meta, cfg, nullptr, &p.truth);
  REQUIRE(r.fir_response.size() == 16);
  CHECK(r.fir_response[0] == 0);
  CHECK(r.trace[2] < r.trace[0]);
}

TEST_CASE("trace smoothing") {
  const std::vector<Real> t{4, 2, 6, 0};
  CHECK(smooth_trace(t, 2) == std::vector<Real>{4, 3, 4, 3});
  CHECK_THROWS_AS(smooth_trace(t, 0), ValidationError);
}
