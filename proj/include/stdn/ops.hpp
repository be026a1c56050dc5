// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "stdn/tensor.hpp"

namespace stdn {

// Elementwise arithmetic. Operands must have equal rank; each dimension is
// either equal or 1 in one of them (broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);
Tensor neg(const Tensor& x);

Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);

// Full reductions to shape {1}.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int64_t begin, int64_t end);
/// Rows of axis 0 in the given order (duplicates allowed).
Tensor gather_batch(const Tensor& x, const std::vector<int64_t>& rows);

enum class Padding { kSame, kValid };

/// NHWC cross-correlation. x: [B,H,W,Cin], k: [kh,kw,Cin,Cout]. `same`
/// zero-pads so the output is ceil(H/stride); the extra pixel of an odd
/// total padding goes after.
Tensor conv2d(const Tensor& x, const Tensor& k, int stride, Padding pad);

/// Adjoint of conv2d(., k, stride, same) for an input of spatial size
/// H*stride. x: [B,H,W,Cout], k: [kh,kw,Cin,Cout] -> [B,H*stride,W*stride,Cin].
Tensor transpose_conv2d(const Tensor& x, const Tensor& k, int stride);

/// x: [..., C], bias: [C].
Tensor bias_add(const Tensor& x, const Tensor& bias);

struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  explicit BatchNormStats(int64_t channels = 0)
      : running_mean(static_cast<size_t>(channels), 0.0),
        running_var(static_cast<size_t>(channels), 1.0) {}
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Per-channel normalization over every axis but the last. In training mode
/// the batch statistics are used and folded into `stats` as
/// running = momentum * running + (1 - momentum) * batch.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                 bool training, double momentum = kBatchNormMomentum, double eps = kBatchNormEps);

/// Align-corners bilinear resampling of [B,H,W,C].
Tensor resize_bilinear(const Tensor& x, int64_t out_h, int64_t out_w);

/// [B,H,W,C] -> [B,1,1,C].
Tensor global_avg_pool(const Tensor& x);

/// a: [B,K], w: [K,M] -> [B,M].
Tensor matmul(const Tensor& a, const Tensor& w);

/// Mean softmax cross-entropy of logits [B,K] against integer labels.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace stdn
