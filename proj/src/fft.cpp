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

#include "diffworld/fft.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace diffworld {
namespace {

std::vector<std::size_t> bit_reversal(std::size_t n) {
  std::vector<std::size_t> rev(n, 0);
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    }
    rev[i] = r;
  }
  return rev;
}

std::vector<std::complex<Real>> twiddles(std::size_t n, std::size_t count) {
  std::vector<std::complex<Real>> w(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(n);
    w[k] = {static_cast<Real>(std::cos(angle)),
            static_cast<Real>(std::sin(angle))};
  }
  return w;
}

void radix2(std::span<std::complex<Real>> data,
            const std::vector<std::size_t>& rev,
            const std::vector<std::complex<Real>>& w, bool inverse) {
  const std::size_t n = data.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i < rev[i]) std::swap(data[i], data[rev[i]]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        std::complex<Real> tw = w[k * step];
        if (inverse) tw = std::conj(tw);
        const std::complex<Real> u = data[start + k];
        const std::complex<Real> v = data[start + k + half] * tw;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) {
    throw ValidationError("FFT size must be a power of two, got " +
                          std::to_string(n));
  }
  full_bitrev_ = bit_reversal(n);
  full_twiddle_ = twiddles(n, n / 2);
  if (n >= 2) {
    const std::size_t m = n / 2;
    bitrev_ = bit_reversal(m);
    twiddle_ = twiddles(m, m / 2);
    real_twiddle_ = twiddles(n, m + 1);
  }
}

void FftPlan::transform(std::span<std::complex<Real>> data,
                        bool inverse) const {
  if (data.size() != n_) throw ValidationError("FFT buffer size mismatch");
  radix2(data, full_bitrev_, full_twiddle_, inverse);
}

void FftPlan::transform_half(std::span<std::complex<Real>> data,
                             bool inverse) const {
  radix2(data, bitrev_, twiddle_, inverse);
}

void FftPlan::forward_real(std::span<const Real> x, std::span<Real> re,
                           std::span<Real> im) const {
  if (x.size() > n_) throw ValidationError("real FFT input longer than n");
  if (n_ == 1) {
    re[0] = x.empty() ? 0 : x[0];
    im[0] = 0;
    return;
  }
  const std::size_t m = n_ / 2;
  std::vector<std::complex<Real>> z(m);
  for (std::size_t j = 0; j < m; ++j) {
    const Real even = 2 * j < x.size() ? x[2 * j] : 0;
    const Real odd = 2 * j + 1 < x.size() ? x[2 * j + 1] : 0;
    z[j] = {even, odd};
  }
  transform_half(z, false);
  for (std::size_t k = 0; k <= m; ++k) {
    const std::complex<Real> zk = z[k % m];
    const std::complex<Real> zc = std::conj(z[(m - k) % m]);
    const std::complex<Real> even = (zk + zc) * Real(0.5);
    const std::complex<Real> odd =
        (zk - zc) * std::complex<Real>(0, Real(-0.5));
    const std::complex<Real> bin = even + real_twiddle_[k] * odd;
    re[k] = bin.real();
    im[k] = bin.imag();
  }
}

void FftPlan::inverse_real(std::span<const Real> re, std::span<const Real> im,
                           std::span<Real> x) const {
  if (n_ == 1) {
    x[0] = re[0];
    return;
  }
  const std::size_t m = n_ / 2;
  auto bin = [&](std::size_t k) {
    // DC and Nyquist are treated as real.
    return std::complex<Real>(re[k], (k == 0 || k == m) ? Real(0) : im[k]);
  };
  std::vector<std::complex<Real>> z(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::complex<Real> xk = bin(k);
    const std::complex<Real> xc = std::conj(bin(m - k));
    const std::complex<Real> even = (xk + xc) * Real(0.5);
    const std::complex<Real> odd =
        (xk - xc) * std::conj(real_twiddle_[k]) * Real(0.5);
    z[k] = even + std::complex<Real>(0, 1) * odd;
  }
  transform_half(z, true);
  const Real scale = Real(1) / static_cast<Real>(m);
  for (std::size_t j = 0; j < m; ++j) {
    x[2 * j] = z[j].real() * scale;
    x[2 * j + 1] = z[j].imag() * scale;
  }
}

const FftPlan& fft_plan(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<FftPlan>> plans;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = plans.find(n);
  if (it == plans.end()) {
    it = plans.emplace(n, std::make_unique<FftPlan>(n)).first;
  }
  return *it->second;
}

}  // namespace diffworld
