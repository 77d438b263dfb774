// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "med3d/error.hpp"
#include "med3d/tensor.hpp"

namespace med3d::optim {

struct SgdOptions {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.001;
};

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// g = grad + wd * p; buf = momentum * buf + g; p -= lr * buf
template <typename T>
void sgd_update(std::span<T> param, std::span<const T> grad, std::span<T> buf, const SgdOptions& o) {
  require(param.size() == grad.size() && param.size() == buf.size(), ErrorCode::kShapeMismatch,
          "sgd_update: parameter, gradient and buffer sizes differ");
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i] + static_cast<T>(o.weight_decay) * param[i];
    buf[i] = static_cast<T>(o.momentum) * buf[i] + g;
    param[i] -= static_cast<T>(o.lr) * buf[i];
  }
}

/// One bias-corrected Adam step; `step` is the 1-based count after this update.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::int64_t step, const AdamOptions& o) {
  require(param.size() == grad.size() && param.size() == m.size() && param.size() == v.size(),
          ErrorCode::kShapeMismatch, "adam_update: parameter, gradient and moment sizes differ");
  require(step >= 1, ErrorCode::kInvalidArgument, "adam_update: step counts from 1");
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = static_cast<double>(grad[i]) + o.weight_decay * static_cast<double>(param[i]);
    const double mi = o.beta1 * static_cast<double>(m[i]) + (1.0 - o.beta1) * g;
    const double vi = o.beta2 * static_cast<double>(v[i]) + (1.0 - o.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double mhat = mi / c1;
    const double vhat = vi / c2;
    param[i] = static_cast<T>(static_cast<double>(param[i]) - o.lr * mhat / (std::sqrt(vhat) + o.eps));
  }
}

/// Parameters whose gradient is absent are skipped entirely: no decay, no
/// momentum decay, no step count. This is what keeps unrouted branches
/// byte-identical.
template <typename T>
class Sgd {
 public:
  Sgd(std::vector<tensor::Tensor<T>> params, SgdOptions opts) : params_(std::move(params)), opts_(opts) {
    for (const auto& p : params_) buffers_.emplace_back(p.numel(), T{0});
  }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      sgd_update<T>(p.values(), std::as_const(p).grad(), buffers_[i], opts_);
    }
  }
  void zero_grad() {
    for (auto& p : params_) p.clear_grad();
  }
  const SgdOptions& options() const noexcept { return opts_; }

 private:
  std::vector<tensor::Tensor<T>> params_;
  std::vector<std::vector<T>> buffers_;
  SgdOptions opts_;
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<tensor::Tensor<T>> params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
    for (const auto& p : params_) {
      m_.emplace_back(p.numel(), T{0});
      v_.emplace_back(p.numel(), T{0});
    }
    steps_.assign(params_.size(), 0);
  }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      ++steps_[i];
      adam_update<T>(p.values(), std::as_const(p).grad(), m_[i], v_[i], steps_[i], opts_);
    }
  }
  void zero_grad() {
    for (auto& p : params_) p.clear_grad();
  }
  std::int64_t step_count(std::size_t i) const { return steps_.at(i); }
  const AdamOptions& options() const noexcept { return opts_; }

 private:
  std::vector<tensor::Tensor<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  std::vector<std::int64_t> steps_;
  AdamOptions opts_;
};

}  // namespace med3d::optim
