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

// Radix-2 FFT kernels on plain buffers. The tensor ops and the STFT build on
// these; nothing here participates in differentiation.

#ifndef DIFFWORLD_FFT_HPP_
#define DIFFWORLD_FFT_HPP_

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "diffworld/error.hpp"

namespace diffworld {

bool is_power_of_two(std::size_t n);

class FftPlan {
 public:
  // Throws ValidationError unless n is a power of two.
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // In-place complex DFT of length n. inverse=true uses e^{+i...} without
  // scaling.
  void transform(std::span<std::complex<Real>> data, bool inverse) const;

  // X[k] = sum_j x[j] e^{-2 pi i jk/n} for k in [0, n/2]. `x` may be shorter
  // than n (implicitly zero-padded).
  void forward_real(std::span<const Real> x, std::span<Real> re,
                    std::span<Real> im) const;

  // x[j] = (1/n) [Re X0 + Re X_{n/2} (-1)^j + 2 sum_{0<k<n/2} Re(X_k e^{...})].
  // Imaginary parts of the DC and Nyquist bins do not contribute.
  void inverse_real(std::span<const Real> re, std::span<const Real> im,
                    std::span<Real> x) const;

 private:
  void transform_half(std::span<std::complex<Real>> data, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> bitrev_;       // size n/2 (half-length transform)
  std::vector<std::complex<Real>> twiddle_;      // e^{-2 pi i k/(n/2)}, k < n/4
  std::vector<std::complex<Real>> real_twiddle_;  // e^{-2 pi i k/n}, k <= n/2
  std::vector<std::size_t> full_bitrev_;
  std::vector<std::complex<Real>> full_twiddle_;
};

// Shared plan for size n; thread-safe.
const FftPlan& fft_plan(std::size_t n);

}  // namespace diffworld

#endif  // DIFFWORLD_FFT_HPP_
