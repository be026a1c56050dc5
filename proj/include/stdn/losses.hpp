// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "stdn/labels.hpp"
#include "stdn/tensor.hpp"

namespace stdn {

struct LossWeights {
  double alpha0 = 1.0;  // scoring weight, replaced by calibration
  double alpha1 = 1.0;
  double alpha2 = 100.0;
  double alpha3 = 1e-3;
  double alpha4 = 50.0;
  double alpha5 = 1.0;
  double beta = 1e4;

  /// DomainError unless beta > 1 and every weight is finite and >= 0.
  void validate() const;
};

/// Spoof maps [B,K,K,1]. Mean |M| over live rows plus mean |M-1| over the
/// remaining rows; a domain absent from the batch contributes nothing.
Tensor esr_loss(const Tensor& maps, const std::vector<Label>& labels);

/// Per-scale discriminator outputs, each [B,h,w,2]. Channel 0 scores the
/// live domain, channel 1 the spoof domain.
Tensor gen_adv_loss(const std::vector<Tensor>& d_recon_live, const std::vector<Tensor>& d_synth_spoof);
Tensor disc_adv_loss(const std::vector<Tensor>& d_real_live, const std::vector<Tensor>& d_real_spoof,
                     const std::vector<Tensor>& d_recon_live, const std::vector<Tensor>& d_synth_spoof);

/// mean over patches of (map[..., channel] - target)^2. Both adversarial
/// losses reduce through this.
Tensor patch_mse(const Tensor& map, int channel, double target);

enum class SquaredNorm {
  kMean,  // ||G||^2 / (3 N^2) per sample
  kSum,   // plain sum of squares per sample
};

/// beta * mean_live ||G||^2 + mean_spoof ||G||^2 over composed traces
/// [B,N,N,3]. Either batch may be an undefined Tensor.
Tensor regularizer_loss(const Tensor& trace_live, const Tensor& trace_spoof, double beta,
                        SquaredNorm norm = SquaredNorm::kMean);

/// Mean absolute error against a target that never receives gradient.
Tensor pixel_loss(const Tensor& recovered, const Tensor& target);

double total_generator_loss(double l_g, double l_esr, double l_r, const LossWeights& w);
Tensor total_generator_loss(const Tensor& l_g, const Tensor& l_esr, const Tensor& l_r, const LossWeights& w);
double total_supervision_loss(double l_esr, double l_p, const LossWeights& w);
Tensor total_supervision_loss(const Tensor& l_esr, const Tensor& l_p, const LossWeights& w);

}  // namespace stdn
