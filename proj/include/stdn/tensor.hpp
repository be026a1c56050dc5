// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stdn {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One value in the recorded graph. Leaves have no inputs and no backward.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily; empty until a gradient arrives
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major array of doubles with reverse-mode differentiation.
///
/// Tensor is a cheap handle: copies share the same storage. Operations in
/// ops.hpp record a backward closure whenever any input requires a
/// gradient; calling backward() on a scalar result walks the recorded
/// graph once in reverse topological order and accumulates into every
/// reachable leaf's grad.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }

  std::span<double> data() { return node_->value; }
  std::span<const double> data() const { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }

  // Gradient buffer. Empty span when no gradient has been accumulated.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  void zero_grad();

  double item() const;
  double at(std::initializer_list<int64_t> index) const;

  /// Backpropagate from this scalar. Leaves accumulate (+=) into grad.
  void backward() const;

  /// Same values, cut from the graph (stop-gradient).
  Tensor detach() const;
  /// Deep copy of the values as a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  // Used by op implementations.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Max over elements of |analytic - central difference| / max(1, |central
/// difference|) for a scalar-valued f at x. Throws NumericError on
/// non-finite values.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double eps = 1e-4);

/// Keeps large freed blocks in the heap instead of returning them to the
/// OS. Tensor buffers of a few MB churn every op; without this each one
/// costs fresh page faults. No-op outside glibc.
void configure_allocator();

}  // namespace stdn
