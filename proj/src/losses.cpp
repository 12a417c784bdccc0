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

#include "diffworld/losses.hpp"

#include <string>

namespace diffworld {
namespace {

Tensor magnitude(const Tensor& x, std::size_t window) {
  return complex_abs(stft(x, MslConfig::scale_stft(window)));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(what) + ": shapes " + shape_string(a.shape()) +
                          " and " + shape_string(b.shape()) + " differ");
  }
}

}  // namespace

std::vector<std::size_t> MslConfig::window_sizes() const {
  std::vector<std::size_t> w;
  for (std::size_t s = 1; s <= scales; ++s) w.push_back(std::size_t{1} << (5 + s));
  return w;
}

void MslConfig::validate() const {
  if (scales == 0 || scales > 20) throw ValidationError("MSL needs 1..20 scales");
  if (!(log_floor > 0)) throw ValidationError("MSL log floor must be positive");
}

Tensor mse_features(const Tensor& x, const Tensor& x_hat) {
  require_same_shape(x, x_hat, "mse_features");
  return mean(square(x - x_hat));
}

SpectrogramLoss::SpectrogramLoss(const Tensor& target, MslConfig cfg)
    : cfg_(cfg), length_(target.size()) {
  cfg_.validate();
  if (target.rank() != 1) throw ValidationError("MSL expects 1-D signals");
  for (std::size_t window : cfg_.window_sizes()) {
    const Tensor m = magnitude(target, window);
    magnitudes_.push_back(m);
    log_magnitudes_.push_back(log(clamp_min(m, cfg_.log_floor)));
  }
}

Tensor SpectrogramLoss::operator()(const Tensor& estimate) const {
  if (estimate.rank() != 1 || estimate.size() != length_) {
    throw ValidationError("MSL length mismatch: " + std::to_string(length_) + " vs " +
                          shape_string(estimate.shape()));
  }
  const auto windows = cfg_.window_sizes();
  Tensor total = Tensor::scalar(0);
  for (std::size_t s = 0; s < windows.size(); ++s) {
    const Tensor m = magnitude(estimate, windows[s]);
    const Tensor linear = mean(abs(magnitudes_[s] - m));
    const Tensor logs = mean(abs(log_magnitudes_[s] - log(clamp_min(m, cfg_.log_floor))));
    total = total + linear + logs * cfg_.kappa;
  }
  return total;
}

Tensor msl(const Tensor& x, const Tensor& x_hat, const MslConfig& cfg) {
  require_same_shape(x, x_hat, "msl");
  if (!x.requires_grad()) return SpectrogramLoss(x, cfg)(x_hat);
  cfg.validate();
  Tensor total = Tensor::scalar(0);
  for (std::size_t window : cfg.window_sizes()) {
    const Tensor a = magnitude(x, window);
    const Tensor b = magnitude(x_hat, window);
    total = total + mean(abs(a - b)) +
            mean(abs(log(clamp_min(a, cfg.log_floor)) - log(clamp_min(b, cfg.log_floor)))) *
                cfg.kappa;
  }
  return total;
}

Tensor nll_loss(const Tensor& features, const Tensor& features_hat, const Tensor& x,
                const Tensor& x_hat, Real alpha, Real beta, const MslConfig& cfg) {
  return mse_features(features, features_hat) * alpha + msl(x, x_hat, cfg) * beta;
}

Tensor hinge_generator(std::span<const Tensor> fake_scores, Real mu) {
  Tensor total = Tensor::scalar(0);
  for (const Tensor& d : fake_scores) total = total + mean(-d);
  return total * mu;
}

Tensor feature_matching(const FeatureMaps& real, const FeatureMaps& fake, Real lambda) {
  if (real.size() != fake.size()) {
    throw ValidationError("feature matching: discriminator counts differ");
  }
  Tensor total = Tensor::scalar(0);
  for (std::size_t k = 0; k < real.size(); ++k) {
    if (real[k].size() != fake[k].size()) {
      throw ValidationError("feature matching: layer counts differ for discriminator " +
                            std::to_string(k));
    }
    for (std::size_t i = 0; i < real[k].size(); ++i) {
      require_same_shape(real[k][i], fake[k][i], "feature matching");
      const std::size_t maps = real[k][i].rank() ? real[k][i].dim(0) : 1;
      if (maps == 0) continue;
      total = total + mean(abs(real[k][i] - fake[k][i])) * (Real(1) / static_cast<Real>(maps));
    }
  }
  return total * lambda;
}

Tensor hinge_discriminator(std::span<const Tensor> real_scores,
                           std::span<const Tensor> fake_scores, Real mu, HingeSign sign) {
  if (real_scores.size() != fake_scores.size()) {
    throw ValidationError("hinge: real and fake discriminator counts differ");
  }
  auto hinge = [sign](const Tensor& v) {
    return sign == HingeSign::kAsPrinted ? clamp_max(v, 0) : clamp_min(v, 0);
  };
  Tensor total = Tensor::scalar(0);
  for (std::size_t k = 0; k < real_scores.size(); ++k) {
    total = total + mean(hinge(1 - real_scores[k])) + mean(hinge(1 + fake_scores[k]));
  }
  return total * mu;
}

Tensor adversarial_generator(std::span<const Tensor> fake_scores, const FeatureMaps& real,
                             const FeatureMaps& fake, Real mu, Real lambda) {
  return hinge_generator(fake_scores, mu) + feature_matching(real, fake, lambda);
}

Tensor discriminator_input(const Tensor& x, std::size_t k) {
  if (k == 0) throw ValidationError("discriminator index is 1-based");
  Tensor y = x;
  for (std::size_t i = 1; i < k; ++i) y = avg_pool1d(y, 4, 2, 1);
  return y;
}

}  // namespace diffworld
