// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "med3d/error.hpp"

namespace med3d::tensor {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

std::string shape_string(const Shape& s);

/// Dense array with an optional gradient buffer. Copies alias the same
/// storage; use clone() for an independent value copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false)
      : impl_(std::make_shared<Storage>(Storage{std::move(shape), {}, {}, requires_grad})) {
    for (int d : impl_->shape) {
      require(d >= 1, ErrorCode::kShapeMismatch, "tensor extents must be positive");
    }
    impl_->values.assign(tensor::numel(impl_->shape), T{0});
  }
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
      : impl_(std::make_shared<Storage>(
            Storage{std::move(shape), std::move(values), {}, requires_grad})) {
    require(impl_->values.size() == tensor::numel(impl_->shape), ErrorCode::kShapeMismatch,
            "value count does not match shape " + shape_string(impl_->shape));
  }

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const noexcept { return impl_->shape; }
  int dim(std::size_t i) const noexcept { return impl_->shape[i]; }
  std::size_t rank() const noexcept { return impl_->shape.size(); }
  std::size_t numel() const noexcept { return impl_->values.size(); }

  std::span<T> values() noexcept { return impl_->values; }
  std::span<const T> values() const noexcept { return impl_->values; }
  T item() const { return impl_->values.at(0); }

  bool requires_grad() const noexcept { return impl_->requires_grad; }
  void set_requires_grad(bool v) const noexcept { impl_->requires_grad = v; }

  /// Absent until something accumulates into it; absent gradients are
  /// skipped by the optimizers.
  bool has_grad() const noexcept { return !impl_->grad.empty(); }
  std::span<T> grad() noexcept { return impl_->grad; }
  std::span<const T> grad() const noexcept { return impl_->grad; }
  // Gradient buffers are mutable through const handles: a handle's
  // constness covers its values, not its accumulated gradient.
  std::span<T> ensure_grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), T{0});
    return impl_->grad;
  }
  /// Releases the gradient buffer.
  void clear_grad() const noexcept { impl_->grad = {}; }

  Tensor clone() const { return Tensor(impl_->shape, impl_->values, impl_->requires_grad); }
  bool same(const Tensor& o) const noexcept { return impl_ == o.impl_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad;
  };
  std::shared_ptr<Storage> impl_;
};

template <typename T>
void accumulate_grad(const Tensor<T>& t, std::span<const T> g) {
  auto dst = t.ensure_grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

struct BackwardReport {
  /// Indices into the parameter list passed to backward() that the loss
  /// does not reach. Their gradients stay absent (read as zero).
  std::vector<std::size_t> disconnected;
};

/// Records differentiable ops in execution order, which is a topological
/// order of the graph. backward() replays the records in reverse.
template <typename T>
class Tape {
 public:
  struct Record {
    std::string op;
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    std::function<void()> backward;
  };

  explicit Tape(bool enabled = true) : enabled_(enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool enabled() const noexcept { return enabled_; }

  /// True when an op with these inputs must be recorded.
  bool should_record(std::initializer_list<const Tensor<T>*> inputs) const noexcept {
    if (!enabled_) return false;
    for (const Tensor<T>* t : inputs)
      if (t != nullptr && t->defined() && t->requires_grad()) return true;
    return false;
  }

  void record(std::string op, std::vector<Tensor<T>> inputs, Tensor<T>& output,
              std::function<void()> backward) {
    output.set_requires_grad(true);
    records_.push_back(Record{std::move(op), std::move(inputs), output, std::move(backward)});
  }

  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<Record>& records() const noexcept { return records_; }
  void clear() noexcept { records_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  /// reachable tensor that requires them. Gradients add to whatever is
  /// already stored, so callers clear between steps.
  BackwardReport backward(Tensor<T> loss, std::span<const Tensor<T>> params = {}) {
    require(loss.defined() && loss.numel() == 1, ErrorCode::kNotScalar,
            "backward() needs a scalar loss");
    std::vector<bool> had_grad;
    had_grad.reserve(params.size());
    for (const auto& p : params) had_grad.push_back(p.has_grad());

    if (loss.requires_grad()) {
      loss.ensure_grad()[0] += T{1};
      for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        if (!it->output.has_grad()) continue;
        it->backward();
      }
    }

    BackwardReport report;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].has_grad() && !had_grad[i]) report.disconnected.push_back(i);
    }
    return report;
  }

 private:
  bool enabled_;
  std::vector<Record> records_;
};

}  // namespace med3d::tensor
