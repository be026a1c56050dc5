// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdn/losses.hpp"

#include <cmath>

#include "stdn/errors.hpp"
#include "stdn/models.hpp"
#include "stdn/ops.hpp"

namespace stdn {

void LossWeights::validate() const {
  for (double w : {alpha0, alpha1, alpha2, alpha3, alpha4, alpha5, beta})
    if (!std::isfinite(w) || w < 0.0) throw DomainError("loss weights must be finite and non-negative");
  if (!(beta > 1.0)) throw DomainError("beta must exceed 1");
}

Tensor esr_loss(const Tensor& maps, const std::vector<Label>& labels) {
  if (!maps.defined() || labels.empty()) throw DomainError("esr_loss: empty batch");
  if (maps.rank() != 4 || maps.dim(3) != 1 || maps.dim(0) != static_cast<int64_t>(labels.size()))
    throw DimensionError("esr_loss: maps " + shape_str(maps.shape()) + " vs " + std::to_string(labels.size()) +
                         " labels");
  std::vector<int64_t> live, spoof;
  for (size_t i = 0; i < labels.size(); ++i)
    (labels[i] == Label::kLive ? live : spoof).push_back(static_cast<int64_t>(i));

  Tensor loss = Tensor::scalar(0.0);
  if (!live.empty()) loss = add(loss, mean(abs(gather_batch(maps, live))));
  if (!spoof.empty()) loss = add(loss, mean(abs(add_scalar(gather_batch(maps, spoof), -1.0))));
  return loss;
}

Tensor patch_mse(const Tensor& map, int channel, double target) {
  if (map.rank() != 4 || channel >= map.dim(3))
    throw DimensionError("discriminator map must be [B,h,w,2], got " + shape_str(map.shape()));
  return mean(square(add_scalar(slice(map, 3, channel, channel + 1), -target)));
}

namespace {

void check_scales(const std::vector<Tensor>& maps, const char* stream) {
  if (maps.size() != static_cast<size_t>(kDiscriminatorScales))
    throw DimensionError(std::string("adversarial loss: stream ") + stream + " has " +
                         std::to_string(maps.size()) + " scales, expected " + std::to_string(kDiscriminatorScales));
  for (const auto& m : maps)
    if (!m.defined()) throw DimensionError(std::string("adversarial loss: stream ") + stream + " missing a scale");
}

}  // namespace

Tensor gen_adv_loss(const std::vector<Tensor>& d_recon_live, const std::vector<Tensor>& d_synth_spoof) {
  check_scales(d_recon_live, "recon_live");
  check_scales(d_synth_spoof, "synth_spoof");
  Tensor loss = Tensor::scalar(0.0);
  for (int s = 0; s < kDiscriminatorScales; ++s) {
    loss = add(loss, patch_mse(d_recon_live[s], 0, 1.0));
    loss = add(loss, patch_mse(d_synth_spoof[s], 1, 1.0));
  }
  return loss;
}

Tensor disc_adv_loss(const std::vector<Tensor>& d_real_live, const std::vector<Tensor>& d_real_spoof,
                     const std::vector<Tensor>& d_recon_live, const std::vector<Tensor>& d_synth_spoof) {
  check_scales(d_real_live, "real_live");
  check_scales(d_real_spoof, "real_spoof");
  check_scales(d_recon_live, "recon_live");
  check_scales(d_synth_spoof, "synth_spoof");
  Tensor loss = Tensor::scalar(0.0);
  for (int s = 0; s < kDiscriminatorScales; ++s) {
    loss = add(loss, patch_mse(d_real_live[s], 0, 1.0));
    loss = add(loss, patch_mse(d_real_spoof[s], 1, 1.0));
    loss = add(loss, patch_mse(d_recon_live[s], 0, 0.0));
    loss = add(loss, patch_mse(d_synth_spoof[s], 1, 0.0));
  }
  return loss;
}

namespace {

Tensor mean_sq_norm(const Tensor& traces, SquaredNorm norm) {
  if (traces.rank() != 4) throw DimensionError("regularizer: traces must be [B,N,N,3]");
  Tensor sq = square(traces);
  return norm == SquaredNorm::kMean ? mean(sq) : mul_scalar(sum(sq), 1.0 / static_cast<double>(traces.dim(0)));
}

}  // namespace

Tensor regularizer_loss(const Tensor& trace_live, const Tensor& trace_spoof, double beta, SquaredNorm norm) {
  Tensor loss = Tensor::scalar(0.0);
  if (trace_live.defined()) loss = add(loss, mul_scalar(mean_sq_norm(trace_live, norm), beta));
  if (trace_spoof.defined()) loss = add(loss, mean_sq_norm(trace_spoof, norm));
  return loss;
}

Tensor pixel_loss(const Tensor& recovered, const Tensor& target) {
  if (recovered.shape() != target.shape())
    throw DimensionError("pixel_loss: " + shape_str(recovered.shape()) + " vs " + shape_str(target.shape()));
  return mean(abs(sub(recovered, target.detach())));
}

double total_generator_loss(double l_g, double l_esr, double l_r, const LossWeights& w) {
  return w.alpha1 * l_g + w.alpha2 * l_esr + w.alpha3 * l_r;
}

Tensor total_generator_loss(const Tensor& l_g, const Tensor& l_esr, const Tensor& l_r, const LossWeights& w) {
  return add(add(mul_scalar(l_g, w.alpha1), mul_scalar(l_esr, w.alpha2)), mul_scalar(l_r, w.alpha3));
}

double total_supervision_loss(double l_esr, double l_p, const LossWeights& w) {
  return w.alpha4 * l_esr + w.alpha5 * l_p;
}

Tensor total_supervision_loss(const Tensor& l_esr, const Tensor& l_p, const LossWeights& w) {
  return add(mul_scalar(l_esr, w.alpha4), mul_scalar(l_p, w.alpha5));
}

}  // namespace stdn
