// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "stdn/errors.hpp"
#include "stdn/ops.hpp"

namespace stdn {

using detail::Node;

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                 bool training, double momentum, double eps) {
  const int64_t c = x.dim(-1);
  if (gamma.numel() != c || beta.numel() != c)
    throw DimensionError("batchnorm: gamma/beta need " + std::to_string(c) + " values");
  if (static_cast<int64_t>(stats.running_mean.size()) != c)
    throw DimensionError("batchnorm: running statistics sized for a different channel count");
  const int64_t m = x.numel() / c;
  if (training && m < 2) throw StatisticsError("batchnorm: need at least 2 values per channel in training");

  const auto& xv = x.values();
  std::vector<double> mu(static_cast<size_t>(c), 0.0), inv(static_cast<size_t>(c), 0.0);
  if (training) {
    std::vector<double> var(static_cast<size_t>(c), 0.0);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t k = 0; k < c; ++k) mu[k] += xv[i * c + k];
    for (auto& v : mu) v /= static_cast<double>(m);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t k = 0; k < c; ++k) {
        double d = xv[i * c + k] - mu[k];
        var[k] += d * d;
      }
    for (int64_t k = 0; k < c; ++k) {
      var[k] /= static_cast<double>(m);
      inv[k] = 1.0 / std::sqrt(var[k] + eps);
      double unbiased = var[k] * static_cast<double>(m) / static_cast<double>(m - 1);
      stats.running_mean[k] = momentum * stats.running_mean[k] + (1.0 - momentum) * mu[k];
      stats.running_var[k] = momentum * stats.running_var[k] + (1.0 - momentum) * unbiased;
    }
  } else {
    for (int64_t k = 0; k < c; ++k) {
      mu[k] = stats.running_mean[k];
      inv[k] = 1.0 / std::sqrt(stats.running_var[k] + eps);
    }
  }

  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  std::vector<double> xhat(xv.size()), out(xv.size());
  for (int64_t i = 0; i < m; ++i)
    for (int64_t k = 0; k < c; ++k) {
      double h = (xv[i * c + k] - mu[k]) * inv[k];
      xhat[i * c + k] = h;
      out[i * c + k] = gv[k] * h + bv[k];
    }

  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), inv = std::move(inv), training, m, c](Node& self) {
        Node& nx = *self.inputs[0];
        Node& ng = *self.inputs[1];
        Node& nb = *self.inputs[2];
        const auto& dy = self.grad;
        std::vector<double> sum_dy(static_cast<size_t>(c), 0.0), sum_dy_xhat(static_cast<size_t>(c), 0.0);
        for (int64_t i = 0; i < m; ++i)
          for (int64_t k = 0; k < c; ++k) {
            sum_dy[k] += dy[i * c + k];
            sum_dy_xhat[k] += dy[i * c + k] * xhat[i * c + k];
          }
        if (ng.requires_grad) {
          auto& gg = ng.ensure_grad();
          for (int64_t k = 0; k < c; ++k) gg[k] += sum_dy_xhat[k];
        }
        if (nb.requires_grad) {
          auto& gb = nb.ensure_grad();
          for (int64_t k = 0; k < c; ++k) gb[k] += sum_dy[k];
        }
        if (nx.requires_grad) {
          auto& gx = nx.ensure_grad();
          const auto& gam = ng.value;
          if (training) {
            const double md = static_cast<double>(m);
            for (int64_t i = 0; i < m; ++i)
              for (int64_t k = 0; k < c; ++k) {
                double g = gam[k];
                gx[i * c + k] += g * inv[k] / md *
                                 (md * dy[i * c + k] - sum_dy[k] - xhat[i * c + k] * sum_dy_xhat[k]);
              }
          } else {
            for (int64_t i = 0; i < m; ++i)
              for (int64_t k = 0; k < c; ++k) gx[i * c + k] += dy[i * c + k] * gam[k] * inv[k];
          }
        }
      });
}

}  // namespace stdn
