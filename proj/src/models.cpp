// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdn/models.hpp"

#include "stdn/errors.hpp"

namespace stdn {

void init_weights(std::span<Tensor> kernels, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, kInitStd);
  for (auto& k : kernels)
    for (auto& v : k.data()) v = normal(rng);
}

ConvLayer::ConvLayer(int k, int64_t in_c, int64_t out_c, int stride_)
    : kernel(Tensor::zeros({k, k, in_c, out_c}, true)), bias(Tensor::zeros({out_c}, true)), stride(stride_) {}

Tensor ConvLayer::forward(const Tensor& x) const { return bias_add(conv2d(x, kernel, stride, Padding::kSame), bias); }

TransposeConvLayer::TransposeConvLayer(int k, int64_t in_c, int64_t out_c, int stride_)
    : kernel(Tensor::zeros({k, k, out_c, in_c}, true)), bias(Tensor::zeros({out_c}, true)), stride(stride_) {}

Tensor TransposeConvLayer::forward(const Tensor& x) const {
  return bias_add(transpose_conv2d(x, kernel, stride), bias);
}

BatchNormLayer::BatchNormLayer(int64_t channels)
    : gamma(Tensor::full({channels}, 1.0, true)), beta(Tensor::zeros({channels}, true)), stats(channels) {}

Tensor BatchNormLayer::forward(const Tensor& x, bool training) { return batchnorm(x, gamma, beta, stats, training); }

namespace {

void append(std::vector<Tensor>& out, const ConvLayer& c) {
  out.push_back(c.kernel);
  out.push_back(c.bias);
}
void append(std::vector<Tensor>& out, const TransposeConvLayer& c) {
  out.push_back(c.kernel);
  out.push_back(c.bias);
}
void append(std::vector<Tensor>& out, const BatchNormLayer& bn) {
  out.push_back(bn.gamma);
  out.push_back(bn.beta);
}

void init_kernels(const std::vector<Tensor>& params, std::mt19937_64& rng) {
  std::vector<Tensor> kernels;
  for (const auto& p : params)
    if (p.rank() == 4) kernels.push_back(p);
  init_weights(kernels, rng);
}

}  // namespace

Generator::Generator(GeneratorConfig config, std::mt19937_64& rng) : config_(config) {
  const int64_t n = config_.image_size;
  if (n % 16 != 0 || n < 16) throw DimensionError("generator: image size must be a positive multiple of 16");
  const auto [w0, w1, w2] = config_.encoder_widths;
  const auto [d0, d1, d2] = config_.decoder_widths;

  const int64_t enc_in[6] = {3, w0, w0, w1, w1, w2};
  const int64_t enc_out[6] = {w0, w0, w1, w1, w2, w2};
  for (int i = 0; i < 6; ++i)
    encoder_[static_cast<size_t>(i)] = {ConvLayer(3, enc_in[i], enc_out[i], i % 2 == 1 ? 2 : 1),
                                        BatchNormLayer(enc_out[i])};

  const int64_t esr_w = std::max<int64_t>(w2 / 2, 1);
  esr_[0] = {ConvLayer(3, w2, esr_w, 2), BatchNormLayer(esr_w)};
  esr_[1] = {ConvLayer(3, esr_w, esr_w, 1), BatchNormLayer(esr_w)};
  esr_head_ = ConvLayer(1, esr_w, 1, 1);

  sb_head_ = ConvLayer(1, w2, 6, 1);
  decoder_[0] = {TransposeConvLayer(3, w2, d0, 2), BatchNormLayer(d0)};
  content_head_ = ConvLayer(3, d0 + w2, 3, 1);
  decoder_[1] = {TransposeConvLayer(3, d0 + w2, d1, 2), BatchNormLayer(d1)};
  decoder_[2] = {TransposeConvLayer(3, d1 + w1, d2, 2), BatchNormLayer(d2)};
  texture_head_ = ConvLayer(3, d2 + w0, 3, 1);

  init_kernels(parameters(), rng);
}

GeneratorOutput Generator::forward(const Tensor& img, bool training) {
  const int64_t n = config_.image_size;
  if (img.rank() != 4 || img.dim(1) != n || img.dim(2) != n || img.dim(3) != 3)
    throw DimensionError("generator: expected [B," + std::to_string(n) + "," + std::to_string(n) + ",3], got " +
                         shape_str(img.shape()));

  std::array<Tensor, 6> enc;
  Tensor x = img;
  for (size_t i = 0; i < encoder_.size(); ++i) {
    x = encoder_[i].bn.forward(leaky_relu(encoder_[i].conv.forward(x), kLeakySlope), training);
    enc[i] = x;
  }
  const Tensor& features = enc[5];

  Tensor m = features;
  for (auto& blk : esr_) m = blk.bn.forward(leaky_relu(blk.conv.forward(m), kLeakySlope), training);
  Tensor spoof_map = sigmoid(esr_head_.forward(m));

  Tensor sb = tanh(sb_head_.forward(global_avg_pool(features)));

  Tensor up = decoder_[0].bn.forward(leaky_relu(decoder_[0].conv.forward(features), kLeakySlope), training);
  up = concat({up, enc[4]}, 3);
  Tensor content = mul_scalar(tanh(content_head_.forward(up)), 0.5);
  up = decoder_[1].bn.forward(leaky_relu(decoder_[1].conv.forward(up), kLeakySlope), training);
  up = concat({up, enc[2]}, 3);
  up = decoder_[2].bn.forward(leaky_relu(decoder_[2].conv.forward(up), kLeakySlope), training);
  up = concat({up, enc[0]}, 3);
  Tensor texture = mul_scalar(tanh(texture_head_.forward(up)), 0.5);

  GeneratorOutput out;
  out.elems = {slice(sb, 3, 0, 3), slice(sb, 3, 3, 6), content, texture};
  out.spoof_map = spoof_map;
  return out;
}

std::vector<Tensor> Generator::encoder_parameters() const {
  std::vector<Tensor> out;
  for (const auto& blk : encoder_) {
    append(out, blk.conv);
    append(out, blk.bn);
  }
  return out;
}

std::vector<Tensor> Generator::esr_parameters() const {
  std::vector<Tensor> out;
  for (const auto& blk : esr_) {
    append(out, blk.conv);
    append(out, blk.bn);
  }
  append(out, esr_head_);
  return out;
}

std::vector<Tensor> Generator::decoder_parameters() const {
  std::vector<Tensor> out;
  append(out, sb_head_);
  append(out, decoder_[0].conv);
  append(out, decoder_[0].bn);
  append(out, content_head_);
  for (size_t i = 1; i < decoder_.size(); ++i) {
    append(out, decoder_[i].conv);
    append(out, decoder_[i].bn);
  }
  append(out, texture_head_);
  return out;
}

std::vector<Tensor> Generator::parameters() const {
  std::vector<Tensor> out = encoder_parameters();
  for (auto& t : esr_parameters()) out.push_back(t);
  for (auto& t : decoder_parameters()) out.push_back(t);
  return out;
}

std::vector<BatchNormStats*> Generator::batchnorm_stats() {
  std::vector<BatchNormStats*> out;
  for (auto& blk : encoder_) out.push_back(&blk.bn.stats);
  for (auto& blk : esr_) out.push_back(&blk.bn.stats);
  for (auto& blk : decoder_) out.push_back(&blk.bn.stats);
  return out;
}

PatchDiscriminator::PatchDiscriminator(const std::array<int64_t, 3>& widths, std::mt19937_64& rng) {
  const auto [w0, w1, w2] = widths;
  const int64_t in[7] = {3, w0, w0, w1, w1, w2, w2};
  const int64_t out[7] = {w0, w0, w1, w1, w2, w2, 2};
  const int stride[7] = {1, 2, 1, 2, 1, 2, 1};
  for (size_t i = 0; i < layers_.size(); ++i) layers_[i] = ConvLayer(3, in[i], out[i], stride[i]);
  for (size_t i = 0; i < norms_.size(); ++i) norms_[i] = BatchNormLayer(out[i + 1]);
  init_kernels(parameters(), rng);
}

Tensor PatchDiscriminator::forward(const Tensor& img, bool training) {
  Tensor x = leaky_relu(layers_[0].forward(img), kLeakySlope);
  for (size_t i = 1; i + 1 < layers_.size(); ++i)
    x = norms_[i - 1].forward(leaky_relu(layers_[i].forward(x), kLeakySlope), training);
  return layers_.back().forward(x);
}

std::vector<Tensor> PatchDiscriminator::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers_) append(out, l);
  for (const auto& n : norms_) append(out, n);
  return out;
}

std::vector<BatchNormStats*> PatchDiscriminator::batchnorm_stats() {
  std::vector<BatchNormStats*> out;
  for (auto& n : norms_) out.push_back(&n.stats);
  return out;
}

MultiScaleDiscriminator::MultiScaleDiscriminator(DiscriminatorConfig config, std::mt19937_64& rng)
    : config_(config) {
  if (config_.image_size % 16 != 0 || config_.image_size < 16)
    throw DimensionError("discriminator: image size must be a positive multiple of 16");
  for (int i = 0; i < kDiscriminatorScales; ++i) nets_.emplace_back(config_.widths, rng);
}

std::vector<Tensor> MultiScaleDiscriminator::forward(const Tensor& img, bool training) {
  const int64_t n = config_.image_size;
  if (img.rank() != 4 || img.dim(1) != n || img.dim(2) != n || img.dim(3) != 3)
    throw DimensionError("discriminator: expected [B," + std::to_string(n) + "," + std::to_string(n) +
                         ",3], got " + shape_str(img.shape()));
  std::vector<Tensor> maps;
  maps.push_back(nets_[0].forward(img, training));
  maps.push_back(nets_[1].forward(resize_bilinear(img, n / 2, n / 2), training));
  maps.push_back(nets_[2].forward(resize_bilinear(img, n / 4, n / 4), training));
  return maps;
}

std::vector<Tensor> MultiScaleDiscriminator::parameters() const {
  std::vector<Tensor> out;
  for (const auto& d : nets_)
    for (auto& t : d.parameters()) out.push_back(t);
  return out;
}

std::vector<BatchNormStats*> MultiScaleDiscriminator::batchnorm_stats() {
  std::vector<BatchNormStats*> out;
  for (auto& d : nets_)
    for (auto* s : d.batchnorm_stats()) out.push_back(s);
  return out;
}

int64_t parameter_count(const std::vector<Tensor>& params) {
  int64_t n = 0;
  for (const auto& p : params) n += p.numel();
  return n;
}

void set_requires_grad(const std::vector<Tensor>& params, bool on) {
  for (auto p : params) p.set_requires_grad(on);
}

}  // namespace stdn
