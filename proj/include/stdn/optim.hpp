// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "stdn/tensor.hpp"

namespace stdn {

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of a flat parameter block; t is the
/// 1-based step count after this update.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, int64_t t, double lr, const AdamConfig& cfg);

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  /// Updates every parameter from its accumulated grad (a parameter
  /// without a grad counts as zero). Throws NumericError before touching
  /// any state if a gradient is non-finite.
  void step(double lr);
  void zero_grad();

  int64_t steps() const { return t_; }
  /// Learning rate passed to the most recent step, 0 before the first.
  double last_lr() const { return last_lr_; }
  const std::vector<Tensor>& params() const { return params_; }

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
  double last_lr_ = 0.0;
};

}  // namespace stdn
