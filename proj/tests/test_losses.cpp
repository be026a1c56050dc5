// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "grad_suite.hpp"
#include "stdn/errors.hpp"
#include "stdn/losses.hpp"

using namespace stdn;
using stdn::testing::random_tensor;

namespace {

std::vector<Tensor> constant_maps(int64_t batch, double value, int64_t first = 8) {
  std::vector<Tensor> out;
  for (int64_t s = first; out.size() < 3; s /= 2) out.push_back(Tensor::full({batch, s, s, 2}, value));
  return out;
}

// Perfect discriminator outputs: channel `hot` is 1, the other is 0.
std::vector<Tensor> one_hot_maps(int64_t batch, int hot) {
  std::vector<Tensor> out;
  for (int64_t s : {8, 4, 2}) {
    std::vector<double> v(static_cast<size_t>(batch * s * s * 2), 0.0);
    for (size_t i = static_cast<size_t>(hot); i < v.size(); i += 2) v[i] = 1.0;
    out.push_back(Tensor::from({batch, s, s, 2}, v));
  }
  return out;
}

}  // namespace

TEST_CASE("default weights") {
  LossWeights w;
  CHECK(w.alpha1 == 1.0);
  CHECK(w.alpha2 == 100.0);
  CHECK(w.alpha3 == 1e-3);
  CHECK(w.alpha4 == 50.0);
  CHECK(w.alpha5 == 1.0);
  CHECK(w.beta == 1e4);
  CHECK_NOTHROW(w.validate());
  w.beta = 1.0;
  CHECK_THROWS_AS(w.validate(), DomainError);
  w.beta = 10.0;
  w.alpha2 = -1.0;
  CHECK_THROWS_AS(w.validate(), DomainError);
}

TEST_CASE("esr_loss examples") {
  CHECK(esr_loss(Tensor::zeros({3, 4, 4, 1}), {Label::kLive, Label::kLive, Label::kLive}).item() == 0.0);
  CHECK(esr_loss(Tensor::full({1, 4, 4, 1}, 0.5), {Label::kSpoof}).item() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(esr_loss(Tensor::full({1, 4, 4, 1}, 1.0), {Label::kSpoof}).item() == 0.0);
  CHECK(esr_loss(Tensor::full({1, 4, 4, 1}, 1.0), {Label::kLive}).item() == doctest::Approx(1.0).epsilon(1e-15));
  // Live and spoof terms are separate means.
  Tensor maps = Tensor::from({3, 1, 1, 1}, {0.2, 0.4, 0.9});
  CHECK(esr_loss(maps, {Label::kLive, Label::kLive, Label::kSpoof}).item() ==
        doctest::Approx(0.3 + 0.1).epsilon(1e-14));
  CHECK_THROWS_AS(esr_loss(Tensor::zeros({1, 4, 4, 1}), {}), DomainError);
  CHECK_THROWS_AS(esr_loss(Tensor::zeros({2, 4, 4, 1}), {Label::kLive}), DimensionError);
}

TEST_CASE("gen_adv_loss examples") {
  CHECK(gen_adv_loss(constant_maps(2, 1.0), constant_maps(2, 1.0)).item() == 0.0);
  CHECK(gen_adv_loss(constant_maps(2, 0.0), constant_maps(2, 0.0)).item() == doctest::Approx(6.0).epsilon(1e-15));
  for (int64_t first : {4, 16, 32})
    CHECK(gen_adv_loss(constant_maps(1, 0.3, first), constant_maps(3, -0.2, first)).item() ==
          doctest::Approx(gen_adv_loss(constant_maps(2, 0.3), constant_maps(2, -0.2)).item()).epsilon(1e-14));
  auto two = constant_maps(1, 0.0);
  two.pop_back();
  CHECK_THROWS_AS(gen_adv_loss(two, constant_maps(1, 0.0)), DimensionError);
}

TEST_CASE("disc_adv_loss examples") {
  auto live = one_hot_maps(2, 0), spoof = one_hot_maps(2, 1), fake = constant_maps(2, 0.0);
  CHECK(disc_adv_loss(live, spoof, fake, fake).item() == 0.0);
  auto half = constant_maps(2, 0.5);
  CHECK(disc_adv_loss(half, half, half, half).item() == doctest::Approx(3.0).epsilon(1e-15));
  // Feeding the fakes where the reals belong and vice versa.
  const double swapped = disc_adv_loss(fake, fake, live, spoof).item();
  CHECK(swapped == doctest::Approx(12.0).epsilon(1e-15));
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<Tensor>> st(4);
    for (auto& s : st)
      for (int64_t k : {8, 4, 2}) s.push_back(random_tensor(rng, {2, k, k, 2}, 0.0, 1.0));
    CHECK(disc_adv_loss(st[0], st[1], st[2], st[3]).item() <= swapped);
  }
  auto two = constant_maps(1, 0.0);
  two.pop_back();
  CHECK_THROWS_AS(disc_adv_loss(two, fake, fake, fake), DimensionError);
}

TEST_CASE("adversarial losses share their reduction") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Tensor> recon, synth;
    for (int64_t k : {8, 4, 2}) {
      recon.push_back(random_tensor(rng, {3, k, k, 2}));
      synth.push_back(random_tensor(rng, {3, k, k, 2}));
    }
    auto zero = constant_maps(3, 0.0);
    // With zero fakes the discriminator loss is the generator loss evaluated
    // on the same maps placed in the real slots.
    CHECK(disc_adv_loss(recon, synth, zero, zero).item() ==
          doctest::Approx(gen_adv_loss(recon, synth).item()).epsilon(1e-14));
  }
}

TEST_CASE("regularizer_loss examples") {
  const int64_t n = 8;
  const double c = 0.3;
  CHECK(regularizer_loss(Tensor::zeros({2, n, n, 3}), Tensor::zeros({2, n, n, 3}), 1e4).item() == 0.0);
  Tensor live = Tensor::full({1, n, n, 3}, c);
  CHECK(regularizer_loss(live, Tensor(), 1e4, SquaredNorm::kSum).item() ==
        doctest::Approx(1e4 * 3 * n * n * c * c).epsilon(1e-13));
  CHECK(regularizer_loss(live, Tensor(), 1e4, SquaredNorm::kMean).item() ==
        doctest::Approx(1e4 * c * c).epsilon(1e-13));
  for (SquaredNorm norm : {SquaredNorm::kMean, SquaredNorm::kSum}) {
    const double as_live = regularizer_loss(live, Tensor(), 37.0, norm).item();
    const double as_spoof = regularizer_loss(Tensor(), live, 37.0, norm).item();
    CHECK(as_live == doctest::Approx(37.0 * as_spoof).epsilon(1e-14));
  }
}

TEST_CASE("pixel_loss examples") {
  Tensor t = Tensor::full({1, 4, 4, 3}, 0.2);
  CHECK(pixel_loss(t, t).item() == 0.0);
  CHECK(pixel_loss(Tensor::zeros({1, 4, 4, 3}), t).item() == doctest::Approx(0.2).epsilon(1e-15));
  CHECK_THROWS_AS(pixel_loss(t, Tensor::zeros({1, 4, 4, 2})), DimensionError);

  std::mt19937_64 rng(3);
  Tensor rec = random_tensor(rng, {2, 4, 4, 3}).clone(true);
  Tensor target = random_tensor(rng, {2, 4, 4, 3}).clone(true);
  pixel_loss(rec, target).backward();
  for (double g : target.grad()) CHECK(g == 0.0);
  double total = 0;
  for (double g : rec.grad()) total += std::abs(g);
  CHECK(total > 0.0);
}

TEST_CASE("losses are nonnegative") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<Tensor>> st(4);
    for (auto& s : st)
      for (int64_t k : {4, 2, 1}) s.push_back(random_tensor(rng, {2, k, k, 2}, -2.0, 2.0));
    CHECK(gen_adv_loss(st[0], st[1]).item() >= 0.0);
    CHECK(disc_adv_loss(st[0], st[1], st[2], st[3]).item() >= 0.0);
    CHECK(esr_loss(random_tensor(rng, {2, 2, 2, 1}, 0.0, 1.0), {Label::kLive, Label::kSpoof}).item() >= 0.0);
    CHECK(regularizer_loss(random_tensor(rng, {1, 4, 4, 3}), random_tensor(rng, {1, 4, 4, 3}), 1e4).item() >= 0.0);
    CHECK(pixel_loss(random_tensor(rng, {1, 4, 4, 3}), random_tensor(rng, {1, 4, 4, 3})).item() >= 0.0);
  }
}

TEST_CASE("step totals") {
  LossWeights w;
  CHECK(total_generator_loss(6, 0.5, 3, w) == doctest::Approx(56.003).epsilon(1e-15));
  CHECK(total_generator_loss(0, 0, 0, w) == 0.0);
  LossWeights w2 = w;
  w2.alpha2 *= 2;
  CHECK(total_generator_loss(6, 0.5, 3, w2) - total_generator_loss(6, 0.5, 3, w) ==
        doctest::Approx(100 * 0.5).epsilon(1e-14));
  CHECK(total_supervision_loss(0.1, 0.2, w) == doctest::Approx(5.2).epsilon(1e-15));
  CHECK(total_supervision_loss(0, 0, w) == 0.0);
  CHECK(total_supervision_loss(0.3, 0.2, w) - total_supervision_loss(0.1, 0.2, w) ==
        doctest::Approx(50 * 0.2).epsilon(1e-13));
  CHECK(total_supervision_loss(0.1, 0.7, w) - total_supervision_loss(0.1, 0.2, w) ==
        doctest::Approx(0.5).epsilon(1e-13));
  // Tensor overloads agree with the scalar ones.
  CHECK(total_generator_loss(Tensor::scalar(6), Tensor::scalar(0.5), Tensor::scalar(3), w).item() ==
        doctest::Approx(56.003).epsilon(1e-15));
  CHECK(total_supervision_loss(Tensor::scalar(0.1), Tensor::scalar(0.2), w).item() ==
        doctest::Approx(5.2).epsilon(1e-15));
}
