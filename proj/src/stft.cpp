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

#include "diffworld/stft.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "diffworld/fft.hpp"
#include "diffworld/parallel.hpp"

namespace diffworld {
namespace {

constexpr Real kMinWindowSum = Real(1e-10);

std::ptrdiff_t frame_start(std::size_t t, const StftConfig& cfg) {
  return static_cast<std::ptrdiff_t>(t * cfg.hop) -
         static_cast<std::ptrdiff_t>(cfg.fft_size / 2);
}

// Reciprocal of the overlap-added squared window, zero where no window
// reaches.
std::vector<Real> inverse_window_sum(std::size_t frames, std::size_t length,
                                     const StftConfig& cfg,
                                     const std::vector<Real>& window) {
  std::vector<Real> acc(length, 0);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = frame_start(t, cfg);
    for (std::size_t j = 0; j < cfg.fft_size; ++j) {
      const std::ptrdiff_t n = start + static_cast<std::ptrdiff_t>(j);
      if (n < 0 || n >= static_cast<std::ptrdiff_t>(length)) continue;
      acc[static_cast<std::size_t>(n)] += window[j] * window[j];
    }
  }
  for (Real& v : acc) v = v > kMinWindowSum ? Real(1) / v : Real(0);
  return acc;
}

}  // namespace

void StftConfig::validate() const {
  if (!is_power_of_two(fft_size)) {
    throw ValidationError("STFT size must be a power of two, got " +
                          std::to_string(fft_size));
  }
  if (hop == 0 || hop > fft_size) {
    throw ValidationError("STFT hop must be in [1, " +
                          std::to_string(fft_size) + "], got " +
                          std::to_string(hop));
  }
}

std::size_t frame_count(std::size_t num_samples, std::size_t hop) {
  if (hop == 0) throw ValidationError("hop must be positive");
  return num_samples / hop + 1;
}

std::vector<Real> hann_window(std::size_t n) {
  std::vector<Real> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = static_cast<Real>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                             static_cast<double>(n)));
  }
  return w;
}

Tensor stft(const Tensor& x, const StftConfig& cfg,
            std::optional<std::size_t> frames) {
  cfg.validate();
  if (x.rank() != 1) {
    throw ValidationError("stft expects a 1-D signal, got " +
                          shape_string(x.shape()));
  }
  const std::size_t length = x.size();
  const std::size_t num_frames = frames.value_or(frame_count(length, cfg.hop));
  const std::size_t n = cfg.fft_size;
  const std::size_t bins = cfg.bins();
  auto window = std::make_shared<const std::vector<Real>>(hann_window(n));
  const FftPlan& plan = fft_plan(n);

  std::vector<Real> out(2 * num_frames * bins);
  const auto xv = x.data();
  const std::size_t plane = num_frames * bins;
  parallel_for(num_frames, [&](std::size_t begin, std::size_t end) {
    std::vector<Real> segment(n);
    for (std::size_t t = begin; t < end; ++t) {
      const std::ptrdiff_t start = frame_start(t, cfg);
      for (std::size_t j = 0; j < n; ++j) {
        const std::ptrdiff_t i = start + static_cast<std::ptrdiff_t>(j);
        segment[j] = (i >= 0 && i < static_cast<std::ptrdiff_t>(length))
                         ? xv[static_cast<std::size_t>(i)] * (*window)[j]
                         : Real(0);
      }
      plan.forward_real(segment, std::span<Real>(out).subspan(t * bins, bins),
                        std::span<Real>(out).subspan(plane + t * bins, bins));
    }
  });

  return Tensor::from_op(
      {2, num_frames, bins}, std::move(out), {x},
      [cfg, window, num_frames, length](const detail::Node&,
                                        std::span<const Real> g,
                                        detail::GradSlots slots) {
        const std::size_t n = cfg.fft_size;
        const std::size_t bins = cfg.bins();
        const std::size_t plane = num_frames * bins;
        const FftPlan& plan = fft_plan(n);
        // Per-frame adjoint of the real DFT, then a serial scatter so the
        // accumulation order is fixed.
        std::vector<Real> segments(num_frames * n);
        parallel_for(num_frames, [&](std::size_t begin, std::size_t end) {
          std::vector<Real> re(bins), im(bins);
          for (std::size_t t = begin; t < end; ++t) {
            for (std::size_t k = 0; k < bins; ++k) {
              const Real half = (k == 0 || k + 1 == bins) ? Real(1) : Real(0.5);
              re[k] = g[t * bins + k] * half;
              im[k] = g[plane + t * bins + k] * half;
            }
            plan.inverse_real(re, im,
                              std::span<Real>(segments).subspan(t * n, n));
          }
        });
        auto& gx = *slots[0];
        const Real scale = static_cast<Real>(n);
        for (std::size_t t = 0; t < num_frames; ++t) {
          const std::ptrdiff_t start = frame_start(t, cfg);
          for (std::size_t j = 0; j < n; ++j) {
            const std::ptrdiff_t i = start + static_cast<std::ptrdiff_t>(j);
            if (i < 0 || i >= static_cast<std::ptrdiff_t>(length)) continue;
            gx[static_cast<std::size_t>(i)] +=
                segments[t * n + j] * scale * (*window)[j];
          }
        }
      });
}

Tensor istft(const Tensor& spectrum, const StftConfig& cfg,
             std::size_t length) {
  cfg.validate();
  const std::size_t bins = cfg.bins();
  if (spectrum.rank() != 3 || spectrum.dim(0) != 2 || spectrum.dim(2) != bins) {
    throw ValidationError("istft expects shape (2, T, " + std::to_string(bins) +
                          "), got " + shape_string(spectrum.shape()));
  }
  const std::size_t num_frames = spectrum.dim(1);
  const std::size_t n = cfg.fft_size;
  auto window = std::make_shared<const std::vector<Real>>(hann_window(n));
  auto inv_sum = std::make_shared<const std::vector<Real>>(
      inverse_window_sum(num_frames, length, cfg, *window));
  const FftPlan& plan = fft_plan(n);
  const std::size_t plane = num_frames * bins;
  const auto sv = spectrum.data();

  std::vector<Real> segments(num_frames * n);
  parallel_for(num_frames, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      plan.inverse_real(sv.subspan(t * bins, bins),
                        sv.subspan(plane + t * bins, bins),
                        std::span<Real>(segments).subspan(t * n, n));
    }
  });
  std::vector<Real> out(length, 0);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const std::ptrdiff_t start = frame_start(t, cfg);
    for (std::size_t j = 0; j < n; ++j) {
      const std::ptrdiff_t i = start + static_cast<std::ptrdiff_t>(j);
      if (i < 0 || i >= static_cast<std::ptrdiff_t>(length)) continue;
      out[static_cast<std::size_t>(i)] += segments[t * n + j] * (*window)[j];
    }
  }
  for (std::size_t i = 0; i < length; ++i) out[i] *= (*inv_sum)[i];

  return Tensor::from_op(
      {length}, std::move(out), {spectrum},
      [cfg, window, inv_sum, num_frames, length](const detail::Node&,
                                                 std::span<const Real> g,
                                                 detail::GradSlots slots) {
        const std::size_t n = cfg.fft_size;
        const std::size_t bins = cfg.bins();
        const std::size_t plane = num_frames * bins;
        const FftPlan& plan = fft_plan(n);
        auto& gs = *slots[0];
        const Real edge = Real(1) / static_cast<Real>(n);
        const Real mid = Real(2) / static_cast<Real>(n);
        parallel_for(num_frames, [&](std::size_t begin, std::size_t end) {
          std::vector<Real> segment(n), re(bins), im(bins);
          for (std::size_t t = begin; t < end; ++t) {
            const std::ptrdiff_t start = frame_start(t, cfg);
            for (std::size_t j = 0; j < n; ++j) {
              const std::ptrdiff_t i = start + static_cast<std::ptrdiff_t>(j);
              segment[j] =
                  (i >= 0 && i < static_cast<std::ptrdiff_t>(length))
                      ? g[static_cast<std::size_t>(i)] *
                            (*inv_sum)[static_cast<std::size_t>(i)] *
                            (*window)[j]
                      : Real(0);
            }
            plan.forward_real(segment, re, im);
            for (std::size_t k = 0; k < bins; ++k) {
              const bool end_bin = k == 0 || k + 1 == bins;
              gs[t * bins + k] += re[k] * (end_bin ? edge : mid);
              if (!end_bin) gs[plane + t * bins + k] += im[k] * mid;
            }
          }
        });
      });
}

}  // namespace diffworld
