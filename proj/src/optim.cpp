// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdn/optim.hpp"

#include <cmath>

#include "binio.hpp"
#include "stdn/errors.hpp"

namespace stdn {

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, int64_t t, double lr, const AdamConfig& cfg) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    v_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
  }
}

void Adam::step(double lr) {
  for (size_t i = 0; i < params_.size(); ++i)
    for (double g : params_[i].grad())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + std::to_string(i));
  ++t_;
  last_lr_ = lr;
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor p = params_[i];
    adam_update(p.data(), p.grad(), m_[i], v_[i], t_, lr, cfg_);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::save(std::ostream& os) const {
  binio::put<int64_t>(os, t_);
  binio::put<double>(os, last_lr_);
  binio::put<uint64_t>(os, params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    binio::put_doubles(os, m_[i]);
    binio::put_doubles(os, v_[i]);
  }
}

void Adam::load(std::istream& is) {
  const auto t = binio::get<int64_t>(is);
  const auto lr = binio::get<double>(is);
  if (binio::get<uint64_t>(is) != params_.size()) throw std::runtime_error("optimizer state: parameter count mismatch");
  std::vector<std::vector<double>> m, v;
  for (size_t i = 0; i < params_.size(); ++i) {
    m.push_back(binio::get_doubles(is));
    v.push_back(binio::get_doubles(is));
    if (m.back().size() != m_[i].size() || v.back().size() != v_[i].size())
      throw std::runtime_error("optimizer state: moment size mismatch");
  }
  t_ = t;
  last_lr_ = lr;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace stdn
