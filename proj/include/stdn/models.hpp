// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <memory>
#include <random>
#include <vector>

#include "stdn/ops.hpp"
#include "stdn/trace.hpp"

namespace stdn {

/// Std of the zero-mean normal used for every conv kernel.
inline constexpr double kInitStd = 0.02;
inline constexpr double kLeakySlope = 0.2;

/// Fills each tensor with Normal(0, kInitStd) samples drawn in order.
void init_weights(std::span<Tensor> kernels, std::mt19937_64& rng);

struct ConvLayer {
  Tensor kernel;  // [k,k,Cin,Cout]
  Tensor bias;    // [Cout]
  int stride = 1;

  ConvLayer() = default;
  ConvLayer(int k, int64_t in_c, int64_t out_c, int stride);
  Tensor forward(const Tensor& x) const;
};

struct TransposeConvLayer {
  Tensor kernel;  // [k,k,Cout,Cin]: adjoint layout of a conv from Cout to Cin
  Tensor bias;    // [Cout]
  int stride = 2;

  TransposeConvLayer() = default;
  TransposeConvLayer(int k, int64_t in_c, int64_t out_c, int stride);
  Tensor forward(const Tensor& x) const;
};

struct BatchNormLayer {
  Tensor gamma;
  Tensor beta;
  BatchNormStats stats;

  BatchNormLayer() = default;
  explicit BatchNormLayer(int64_t channels);
  Tensor forward(const Tensor& x, bool training);
};

struct GeneratorConfig {
  int64_t image_size = 64;
  std::array<int64_t, 3> encoder_widths{32, 64, 96};
  std::array<int64_t, 3> decoder_widths{64, 32, 16};
};

struct GeneratorOutput {
  TraceElements elems;
  Tensor spoof_map;  // [B,K,K,1], K = N/16, values in (0,1)
};

/// Encoder-decoder disentanglement network. The encoder downsamples
/// N -> N/8 in three stages; the early spoof regressor reads the bottleneck
/// only; the decoder emits s/b at its entry, C at N/4 and T at N, with
/// channel-concatenated shortcuts from the encoder.
class Generator {
 public:
  Generator(GeneratorConfig config, std::mt19937_64& rng);

  /// img: [B,N,N,3]. Training mode uses batch statistics and updates the
  /// running averages.
  GeneratorOutput forward(const Tensor& img, bool training);

  const GeneratorConfig& config() const { return config_; }

  std::vector<Tensor> parameters() const;
  std::vector<Tensor> encoder_parameters() const;
  std::vector<Tensor> decoder_parameters() const;
  std::vector<Tensor> esr_parameters() const;
  std::vector<BatchNormStats*> batchnorm_stats();

 private:
  struct Block {
    ConvLayer conv;
    BatchNormLayer bn;
  };
  struct UpBlock {
    TransposeConvLayer conv;
    BatchNormLayer bn;
  };

  GeneratorConfig config_;
  std::array<Block, 6> encoder_;
  std::array<Block, 2> esr_;
  ConvLayer esr_head_;
  ConvLayer sb_head_;
  std::array<UpBlock, 3> decoder_;
  ConvLayer content_head_;
  ConvLayer texture_head_;
};

struct DiscriminatorConfig {
  int64_t image_size = 64;
  std::array<int64_t, 3> widths{16, 32, 64};
};

inline constexpr int kDiscriminatorScales = 3;

/// One fully convolutional PatchGAN: 7 convs, 3 of them stride 2, ending in
/// a 2-channel map (channel 0 live domain, channel 1 spoof domain). The five
/// interior convs are followed by LeakyReLU and batchnorm.
class PatchDiscriminator {
 public:
  PatchDiscriminator(const std::array<int64_t, 3>& widths, std::mt19937_64& rng);
  Tensor forward(const Tensor& img, bool training);
  std::vector<Tensor> parameters() const;
  std::vector<BatchNormStats*> batchnorm_stats();

 private:
  std::array<ConvLayer, 7> layers_;
  std::array<BatchNormLayer, 5> norms_;
};

/// D1, D2, D3 on the image at full, 1/2 and 1/4 resolution.
class MultiScaleDiscriminator {
 public:
  MultiScaleDiscriminator(DiscriminatorConfig config, std::mt19937_64& rng);
  /// Training mode normalizes with the statistics of this call's batch.
  std::vector<Tensor> forward(const Tensor& img, bool training = true);
  std::vector<Tensor> parameters() const;
  std::vector<BatchNormStats*> batchnorm_stats();
  const DiscriminatorConfig& config() const { return config_; }

 private:
  DiscriminatorConfig config_;
  std::vector<PatchDiscriminator> nets_;
};

int64_t parameter_count(const std::vector<Tensor>& params);
void set_requires_grad(const std::vector<Tensor>& params, bool on);

}  // namespace stdn
