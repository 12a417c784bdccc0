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

// Training objectives: feature MSE, the multi-resolution spectrogram loss,
// and the hinge / feature-matching adversarial terms evaluated on
// caller-supplied discriminator outputs.

#ifndef DIFFWORLD_LOSSES_HPP_
#define DIFFWORLD_LOSSES_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "diffworld/stft.hpp"
#include "diffworld/tensor.hpp"

namespace diffworld {

struct MslConfig {
  std::size_t scales = 6;     // S; window of scale s is 2^(5+s)
  Real kappa = 1;             // weight of the log-magnitude term
  Real log_floor = Real(1e-7);  // magnitudes are floored here before log

  // Window sizes 64, 128, ..., 2^(5+S).
  std::vector<std::size_t> window_sizes() const;
  // Hann STFT with 75% overlap at the given window.
  static StftConfig scale_stft(std::size_t window) { return {window, window / 4}; }
  void validate() const;
};

// mean((x - x_hat)^2) over all elements.
Tensor mse_features(const Tensor& x, const Tensor& x_hat);

// sum_s mean|F_s(x) - F_s(x_hat)| + kappa mean|log F_s(x) - log F_s(x_hat)|.
Tensor msl(const Tensor& x, const Tensor& x_hat, const MslConfig& cfg = {});

// Multi-spectrogram loss against a fixed reference whose spectrograms are
// computed once.
class SpectrogramLoss {
 public:
  SpectrogramLoss(const Tensor& target, MslConfig cfg = {});
  Tensor operator()(const Tensor& estimate) const;
  std::size_t length() const { return length_; }

 private:
  MslConfig cfg_;
  std::size_t length_;
  std::vector<Tensor> magnitudes_;
  std::vector<Tensor> log_magnitudes_;
};

// alpha * mse_features(X, X_hat) + beta * msl(x, x_hat).
Tensor nll_loss(const Tensor& features, const Tensor& features_hat, const Tensor& x,
                const Tensor& x_hat, Real alpha = 1, Real beta = 1,
                const MslConfig& cfg = {});

// mu * sum_k mean(-D_k(x_hat)).
Tensor hinge_generator(std::span<const Tensor> fake_scores, Real mu = 1);

// Per discriminator k, per layer i: a {N_i, ...} tensor whose leading axis
// enumerates the layer's N_i feature maps.
using FeatureMaps = std::vector<std::vector<Tensor>>;

// lambda * sum_k sum_i (1 / N_i) mean|D_k^i(x) - D_k^i(x_hat)|.
Tensor feature_matching(const FeatureMaps& real, const FeatureMaps& fake, Real lambda = 10);

enum class HingeSign {
  // mean min(0, 1 - D(x)) + mean min(0, 1 + D(x_hat)). Non-positive.
  kAsPrinted,
  // mean max(0, 1 - D(x)) + mean max(0, 1 + D(x_hat)).
  kConventional,
};

// mu * sum_k [hinge(real_k) + hinge(fake_k)].
Tensor hinge_discriminator(std::span<const Tensor> real_scores,
                           std::span<const Tensor> fake_scores, Real mu = 1,
                           HingeSign sign = HingeSign::kAsPrinted);

// mu * hinge_generator + lambda * feature_matching.
Tensor adversarial_generator(std::span<const Tensor> fake_scores, const FeatureMaps& real,
                             const FeatureMaps& fake, Real mu = 1, Real lambda = 10);

// Input for discriminator k (1-based): x average-pooled k - 1 times with
// kernel 4, stride 2, padding 1, i.e. downsampled by 2^(k-1).
Tensor discriminator_input(const Tensor& x, std::size_t k);

}  // namespace diffworld

#endif  // DIFFWORLD_LOSSES_HPP_
