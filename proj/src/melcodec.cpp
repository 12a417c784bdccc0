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

#include "diffworld/melcodec.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

namespace diffworld {
namespace {

// Singular values below this fraction of the largest are treated as zero.
constexpr double kPinvTolerance = 1e-10;

std::vector<Real> transpose_data(std::span<const Real> m, std::size_t rows,
                                 std::size_t cols) {
  std::vector<Real> t(m.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = m[i * cols + j];
  return t;
}

void require_matrix(const Tensor& x, std::size_t cols, const char* what) {
  if (x.rank() != 2 || x.dim(1) != cols) {
    throw ValidationError(std::string(what) + " expects shape (T, " +
                          std::to_string(cols) + "), got " +
                          shape_string(x.shape()));
  }
}

}  // namespace

Real hz_to_mel(Real hz) { return Real(2595) * std::log10(Real(1) + hz / Real(700)); }

Real mel_to_hz(Real mel) {
  return Real(700) * (std::pow(Real(10), mel / Real(2595)) - Real(1));
}

MelBasis::MelBasis(std::uint32_t sample_rate, std::size_t fft_size,
                   std::size_t bands, Real epsilon, Real f_low,
                   std::optional<Real> f_high)
    : bands_(bands), bins_(fft_size / 2 + 1), epsilon_(epsilon) {
  if (bands == 0) throw ValidationError("mel basis needs at least one band");
  if (fft_size < 2) throw ValidationError("mel basis needs fft_size >= 2");
  if (epsilon < 0) throw ValidationError("mel epsilon must be >= 0");
  const Real nyquist = static_cast<Real>(sample_rate) / 2;
  const Real hi = f_high.value_or(nyquist);
  if (!(f_low >= 0 && f_low < hi && hi <= nyquist)) {
    throw ValidationError("mel band range must satisfy 0 <= f_low < f_high <= Nyquist");
  }

  const Real mel_lo = hz_to_mel(f_low);
  const Real mel_hi = hz_to_mel(hi);
  edges_.resize(bands + 2);
  for (std::size_t i = 0; i < bands + 2; ++i) {
    edges_[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<Real>(i) /
                                       static_cast<Real>(bands + 1));
  }
  edges_.front() = f_low;
  edges_.back() = hi;

  const Real bin_hz = static_cast<Real>(sample_rate) / static_cast<Real>(fft_size);
  std::vector<Real> m(bands * bins_, 0);
  for (std::size_t b = 0; b < bands; ++b) {
    const Real left = edges_[b], centre = edges_[b + 1], right = edges_[b + 2];
    Real row_sum = 0;
    for (std::size_t k = 0; k < bins_; ++k) {
      const Real f = static_cast<Real>(k) * bin_hz;
      Real w = 0;
      if (f > left && f < centre) {
        w = (f - left) / (centre - left);
      } else if (f >= centre && f < right) {
        w = (right - f) / (right - centre);
      }
      m[b * bins_ + k] = w;
      row_sum += w;
    }
    if (row_sum == 0) {
      const auto nearest = static_cast<std::size_t>(
          std::clamp<Real>(std::round(centre / bin_hz), 0, static_cast<Real>(bins_ - 1)));
      m[b * bins_ + nearest] = 1;
      row_sum = 1;
    }
    for (std::size_t k = 0; k < bins_; ++k) m[b * bins_ + k] /= row_sum;
  }

  Eigen::MatrixXd mat(bands, bins_);
  for (std::size_t b = 0; b < bands; ++b)
    for (std::size_t k = 0; k < bins_; ++k)
      mat(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) =
          static_cast<double>(m[b * bins_ + k]);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sigma = svd.singularValues();
  const double cutoff = kPinvTolerance * (sigma.size() ? sigma(0) : 0.0);
  Eigen::VectorXd inv_sigma(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    inv_sigma(i) = sigma(i) > cutoff ? 1.0 / sigma(i) : 0.0;
  const Eigen::MatrixXd pinv =
      svd.matrixV() * inv_sigma.asDiagonal() * svd.matrixU().transpose();

  std::vector<Real> p(bins_ * bands);
  for (std::size_t k = 0; k < bins_; ++k)
    for (std::size_t b = 0; b < bands; ++b)
      p[k * bands + b] = static_cast<Real>(
          std::max(0.0, pinv(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b))));

  forward_t_ = Tensor::constant({bins_, bands}, transpose_data(m, bands, bins_));
  pinv_t_ = Tensor::constant({bands, bins_}, transpose_data(p, bins_, bands));
  forward_ = Tensor::constant({bands, bins_}, std::move(m));
  pinv_ = Tensor::constant({bins_, bands}, std::move(p));
}

Tensor compress_sp(const Tensor& sp, const MelBasis& basis) {
  require_matrix(sp, basis.bins(), "compress_sp");
  const auto v = sp.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0) {
      throw DomainError("compress_sp: negative spectral envelope value (frame " +
                            std::to_string(i / basis.bins()) + ", bin " +
                            std::to_string(i % basis.bins()) + ")",
                        i);
    }
  }
  return log10(matmul(sqrt(sp), basis.forward_transposed()) + basis.epsilon());
}

Tensor decompress_amplitude(const Tensor& s, const MelBasis& basis) {
  require_matrix(s, basis.bands(), "decompress_amplitude");
  const Tensor linear = pow(Tensor::scalar(10), s) - basis.epsilon();
  return clamp_min(matmul(linear, basis.pinv_transposed()), 0);
}

Tensor decompress_sp(const Tensor& s, const MelBasis& basis) {
  return square(decompress_amplitude(s, basis));
}

std::vector<Real> interpolation_matrix(std::size_t from, std::size_t to) {
  if (from < 2 || to < 2) {
    throw ValidationError("interpolation grids need at least two points");
  }
  std::vector<Real> w(to * from, 0);
  for (std::size_t j = 0; j < to; ++j) {
    // Position of output point j in input-grid units.
    const Real pos = static_cast<Real>(j) * static_cast<Real>(from - 1) /
                     static_cast<Real>(to - 1);
    const std::size_t i0 = std::min(static_cast<std::size_t>(pos), from - 2);
    const Real frac = pos - static_cast<Real>(i0);
    w[j * from + i0] += Real(1) - frac;
    w[j * from + i0 + 1] += frac;
  }
  return w;
}

ApCodec::ApCodec(std::size_t bins, std::size_t bands)
    : bins_(bins), bands_(bands) {
  down_t_ = Tensor::constant({bins, bands},
                             transpose_data(interpolation_matrix(bins, bands), bands, bins));
  up_t_ = Tensor::constant({bands, bins},
                           transpose_data(interpolation_matrix(bands, bins), bins, bands));
}

Tensor ApCodec::compress(const Tensor& ap) const {
  require_matrix(ap, bins_, "compress_ap");
  return matmul(ap, down_t_);
}

Tensor ApCodec::decompress(const Tensor& a) const {
  require_matrix(a, bands_, "decompress_ap");
  return matmul(a, up_t_);
}

Tensor compress_ap(const Tensor& ap, std::size_t bands) {
  if (ap.rank() != 2) throw ValidationError("compress_ap expects (T, bins)");
  return ApCodec(ap.dim(1), bands).compress(ap);
}

Tensor decompress_ap(const Tensor& a, std::size_t bins) {
  if (a.rank() != 2) throw ValidationError("decompress_ap expects (T, bands)");
  return ApCodec(bins, a.dim(1)).decompress(a);
}

CompressedFeatures compress_features(const WorldFeatures& features,
                                     std::size_t mel_bands,
                                     std::size_t ap_bands) {
  const std::size_t frames = features.frames();
  const std::size_t bins = features.bins();
  const MelBasis basis(features.meta.sample_rate, features.meta.fft_size, mel_bands);
  CompressedFeatures out;
  out.meta = features.meta;
  out.mel_bands = mel_bands;
  out.ap_bands = ap_bands;
  out.f0 = features.f0;
  if (frames > 0) {
    out.s = compress_sp(Tensor::constant({frames, bins}, features.sp), basis).to_vector();
    out.a = ApCodec(bins, ap_bands)
                .compress(Tensor::constant({frames, bins}, features.ap))
                .to_vector();
  }
  out.validate();
  return out;
}

WorldFeatures decompress_features(const CompressedFeatures& features) {
  const std::size_t frames = features.frames();
  const std::size_t bins = features.meta.bins();
  const MelBasis basis(features.meta.sample_rate, features.meta.fft_size,
                       features.mel_bands);
  WorldFeatures out;
  out.meta = features.meta;
  out.f0 = features.f0;
  if (frames > 0) {
    out.sp = decompress_sp(Tensor::constant({frames, features.mel_bands}, features.s),
                           basis)
                 .to_vector();
    out.ap = ApCodec(bins, features.ap_bands)
                 .decompress(Tensor::constant({frames, features.ap_bands}, features.a))
                 .to_vector();
    // Interpolation weights sum to one; clip rounding so the result stays a
    // valid ratio.
    for (Real& v : out.ap) v = std::clamp<Real>(v, 0, 1);
  }
  out.validate();
  return out;
}

}  // namespace diffworld
