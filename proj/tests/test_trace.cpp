// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <random>

#include "grad_suite.hpp"
#include "stdn/errors.hpp"
#include "stdn/ops.hpp"
#include "stdn/trace.hpp"

using namespace stdn;
using stdn::testing::random_landmarks;
using stdn::testing::random_tensor;

namespace {

TraceElements random_elems(std::mt19937_64& rng, int64_t b, int64_t n) {
  return {random_tensor(rng, {b, 1, 1, 3}), random_tensor(rng, {b, 1, 1, 3}), random_tensor(rng, {b, n / 4, n / 4, 3}),
          random_tensor(rng, {b, n, n, 3})};
}

// Align-corners bilinear upsampling of one L x L x 3 pattern.
double upsample_at(const Tensor& c, int64_t row, int64_t n, int64_t y, int64_t x, int64_t ch) {
  const int64_t l = c.dim(1);
  const double fy = static_cast<double>(y) * (l - 1) / (n - 1), fx = static_cast<double>(x) * (l - 1) / (n - 1);
  const auto y0 = static_cast<int64_t>(std::floor(fy)), x0 = static_cast<int64_t>(std::floor(fx));
  const int64_t y1 = std::min(y0 + 1, l - 1), x1 = std::min(x0 + 1, l - 1);
  const double wy = fy - y0, wx = fx - x0;
  return (1 - wy) * ((1 - wx) * c.at({row, y0, x0, ch}) + wx * c.at({row, y0, x1, ch})) +
         wy * ((1 - wx) * c.at({row, y1, x0, ch}) + wx * c.at({row, y1, x1, ch}));
}

double l2(const Tensor& t) {
  double s = 0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("compose examples") {
  std::mt19937_64 rng(1);
  Tensor img = random_tensor(rng, {1, 8, 8, 3}, 0.0, 1.0);
  for (double v : compose(TraceElements::zeros(1, 8), img).values()) CHECK(v == 0.0);

  TraceElements red = TraceElements::zeros(1, 8);
  red.b = Tensor::from({1, 1, 1, 3}, {0.1, 0, 0});
  Tensor t = compose(red, img);
  for (int64_t y = 0; y < 8; ++y)
    for (int64_t x = 0; x < 8; ++x) {
      CHECK(t.at({0, y, x, 0}) == doctest::Approx(0.1).epsilon(1e-15));
      CHECK(t.at({0, y, x, 1}) == 0.0);
      CHECK(t.at({0, y, x, 2}) == 0.0);
    }
}

TEST_CASE("compose matches the element-wise formula") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const int64_t n = 8;
    Tensor img = random_tensor(rng, {2, n, n, 3}, 0.0, 1.0);
    TraceElements e = random_elems(rng, 2, n);
    Tensor g = compose(e, img);
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t y = 0; y < n; ++y)
        for (int64_t x = 0; x < n; ++x)
          for (int64_t c = 0; c < 3; ++c) {
            const double want = e.s_color.at({b, 0, 0, c}) * img.at({b, y, x, c}) + e.b.at({b, 0, 0, c}) +
                                upsample_at(e.C, b, n, y, x, c) + e.T.at({b, y, x, c});
            CHECK(std::abs(g.at({b, y, x, c}) - want) < 1e-12);
          }
  }
}

TEST_CASE("compose is linear in b, C, T and affine in s") {
  std::mt19937_64 rng(3);
  const int64_t n = 8;
  Tensor img = random_tensor(rng, {1, n, n, 3}, 0.0, 1.0);
  TraceElements e1 = random_elems(rng, 1, n), e2 = random_elems(rng, 1, n);
  const double a = 0.6, c = -1.7;
  TraceElements mixed{add(mul_scalar(e1.s_color, a), mul_scalar(e2.s_color, c)),
                      add(mul_scalar(e1.b, a), mul_scalar(e2.b, c)), add(mul_scalar(e1.C, a), mul_scalar(e2.C, c)),
                      add(mul_scalar(e1.T, a), mul_scalar(e2.T, c))};
  Tensor lhs = compose(mixed, img);
  Tensor rhs = add(mul_scalar(compose(e1, img), a), mul_scalar(compose(e2, img), c));
  for (size_t i = 0; i < lhs.values().size(); ++i) CHECK(std::abs(lhs.values()[i] - rhs.values()[i]) < 1e-12);
}

TEST_CASE("compose rejects mismatched sizes") {
  CHECK_THROWS_AS(compose(TraceElements::zeros(1, 8), Tensor::zeros({1, 16, 16, 3})), DimensionError);
  CHECK_THROWS_AS(compose(TraceElements::zeros(2, 8), Tensor::zeros({1, 8, 8, 3})), DimensionError);
}

TEST_CASE("reconstruct_live") {
  std::mt19937_64 rng(4);
  const int64_t n = 16;
  Tensor img = random_tensor(rng, {1, n, n, 3}, 0.0, 1.0);
  CHECK(reconstruct_live(img, TraceElements::zeros(1, n)).values() == img.values());

  for (int trial = 0; trial < 10; ++trial) {
    TraceElements e = random_elems(rng, 1, n);
    Tensor rec = reconstruct_live(img, e);
    Tensor g = compose(e, img);
    Tensor back = add(rec, g);
    for (size_t i = 0; i < back.values().size(); ++i) CHECK(std::abs(back.values()[i] - img.values()[i]) < 1e-14);
    for (int64_t y = 0; y < n; ++y)
      for (int64_t x = 0; x < n; ++x)
        for (int64_t c = 0; c < 3; ++c) {
          const double want = (1 - e.s_color.at({0, 0, 0, c})) * img.at({0, y, x, c}) - e.b.at({0, 0, 0, c}) -
                              upsample_at(e.C, 0, n, y, x, c) - e.T.at({0, y, x, c});
          CHECK(std::abs(rec.at({0, y, x, c}) - want) < 1e-12);
        }
  }
}

TEST_CASE("synthesize_spoof examples") {
  std::mt19937_64 rng(5);
  const int64_t n = 32;
  Tensor live = random_tensor(rng, {1, n, n, 3}, 0.0, 1.0);
  LandmarkSet a = random_landmarks(rng, 30, n), b = random_landmarks(rng, 30, n);
  CHECK(synthesize_spoof(live, a, Tensor::zeros({1, n, n, 3}), b).values() == live.values());

  Tensor trace = random_tensor(rng, {1, n, n, 3}, -0.3, 0.3);
  CHECK(synthesize_spoof(live, a, trace, a).values() == add(live, trace).values());

  for (int trial = 0; trial < 10; ++trial) {
    LandmarkSet dst = random_landmarks(rng, 40, n), src = random_landmarks(rng, 40, n);
    Tensor out = synthesize_spoof(live, dst, Tensor::full({1, n, n, 3}, 0.2), src);
    MeshInterpolator m(dst, n);
    for (int64_t y = 0; y < n; ++y)
      for (int64_t x = 0; x < n; ++x) {
        if (m.triangle_at(x, y) < 0) continue;
        for (int64_t c = 0; c < 3; ++c) CHECK(std::abs(out.at({0, y, x, c}) - live.at({0, y, x, c}) - 0.2) < 1e-9);
      }
  }
}

TEST_CASE("harden zeroes exactly one element, uniformly") {
  std::mt19937_64 rng(6);
  const int64_t n = 8;
  TraceElements e = random_elems(rng, 1, n);
  std::array<int, 4> counts{};
  std::mt19937_64 draw(123);
  for (int i = 0; i < 4000; ++i) {
    HardenResult h = harden(e, draw);
    REQUIRE(h.zeroed.size() == 1);
    const int k = static_cast<int>(h.zeroed[0]);
    ++counts[static_cast<size_t>(k)];
    const std::array<std::pair<Tensor, Tensor>, 4> pairs{
        {{e.s_color, h.elems.s_color}, {e.b, h.elems.b}, {e.C, h.elems.C}, {e.T, h.elems.T}}};
    int changed = 0;
    for (int j = 0; j < 4; ++j) {
      const auto& [before, after] = pairs[static_cast<size_t>(j)];
      if (after.values() != before.values()) {
        ++changed;
        CHECK(j == k);
        for (double v : after.values()) CHECK(v == 0.0);
      }
    }
    CHECK(changed == 1);
  }
  for (int c : counts) CHECK(std::abs(c / 4000.0 - 0.25) <= 0.02);
}

TEST_CASE("harden is seeded and works per batch row") {
  std::mt19937_64 rng(7);
  TraceElements e = random_elems(rng, 6, 8);
  std::mt19937_64 r1(9), r2(9);
  HardenResult a = harden(e, r1), b = harden(e, r2);
  CHECK(a.zeroed == b.zeroed);
  CHECK(a.elems.T.values() == b.elems.T.values());
  REQUIRE(a.zeroed.size() == 6);
  for (int64_t row = 0; row < 6; ++row) {
    const bool t_zero = a.zeroed[static_cast<size_t>(row)] == TraceElement::kTexture;
    Tensor t_row = slice(a.elems.T, 0, row, row + 1), orig = slice(e.T, 0, row, row + 1);
    CHECK((t_row.values() == orig.values()) == !t_zero);
  }
}

TEST_CASE("hardened traces never grow for disjoint supports") {
  std::mt19937_64 rng(8);
  const int64_t n = 16;
  Tensor img = random_tensor(rng, {1, n, n, 3}, 0.0, 1.0);
  // C lives in the top-left quarter, T in the bottom-right; s and b are zero.
  TraceElements e = TraceElements::zeros(1, n);
  std::vector<double> c(static_cast<size_t>(4 * 4 * 3), 0.0), t(static_cast<size_t>(n * n * 3), 0.0);
  for (int64_t y = 0; y < 2; ++y)
    for (int64_t x = 0; x < 2; ++x)
      for (int64_t ch = 0; ch < 3; ++ch) c[static_cast<size_t>((y * 4 + x) * 3 + ch)] = 0.3;
  for (int64_t y = 12; y < n; ++y)
    for (int64_t x = 12; x < n; ++x)
      for (int64_t ch = 0; ch < 3; ++ch) t[static_cast<size_t>((y * n + x) * 3 + ch)] = -0.2;
  e.C = Tensor::from({1, 4, 4, 3}, c);
  e.T = Tensor::from({1, n, n, 3}, t);
  const double full = l2(compose(e, img));
  std::mt19937_64 draw(1);
  for (int i = 0; i < 50; ++i) CHECK(l2(compose(harden(e, draw).elems, img)) <= full + 1e-15);
}

TEST_CASE("trace elements round-trip through files") {
  std::mt19937_64 rng(10);
  TraceElements e = random_elems(rng, 1, 16);
  const auto path = std::filesystem::temp_directory_path() / "stdn_trace_roundtrip.bin";
  write_trace_elements(path.string(), e);
  TraceElements back = read_trace_elements(path.string());
  CHECK(back.s_color.values() == e.s_color.values());
  CHECK(back.b.values() == e.b.values());
  CHECK(back.C.values() == e.C.values());
  CHECK(back.T.values() == e.T.values());
  CHECK(back.C.shape() == e.C.shape());
  std::filesystem::remove(path);
}
