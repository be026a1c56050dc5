// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "stdn/errors.hpp"
#include "stdn/ops.hpp"

namespace stdn {
namespace {

// Align-corners source coordinate split into a base index and a weight.
struct Tap {
  int64_t lo, hi;
  double w;  // weight of hi
};

std::vector<Tap> taps(int64_t in, int64_t out) {
  std::vector<Tap> t(static_cast<size_t>(out));
  double scale = out > 1 ? static_cast<double>(in - 1) / static_cast<double>(out - 1) : 0.0;
  for (int64_t o = 0; o < out; ++o) {
    double src = static_cast<double>(o) * scale;
    auto lo = static_cast<int64_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    int64_t hi = std::min(lo + 1, in - 1);
    t[static_cast<size_t>(o)] = {lo, hi, src - static_cast<double>(lo)};
  }
  return t;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, int64_t out_h, int64_t out_w) {
  if (x.rank() != 4) throw DimensionError("resize_bilinear expects [B,H,W,C], got " + shape_str(x.shape()));
  if (out_h < 1 || out_w < 1) throw DimensionError("resize_bilinear target must be >= 1");
  const int64_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  auto ty = taps(h, out_h);
  auto tx = taps(w, out_w);
  const auto& v = x.values();
  std::vector<double> out(static_cast<size_t>(b * out_h * out_w * c));
  for (int64_t n = 0; n < b; ++n)
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[static_cast<size_t>(oy)];
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const Tap& e = tx[static_cast<size_t>(ox)];
        const double* p00 = &v[((n * h + a.lo) * w + e.lo) * c];
        const double* p01 = &v[((n * h + a.lo) * w + e.hi) * c];
        const double* p10 = &v[((n * h + a.hi) * w + e.lo) * c];
        const double* p11 = &v[((n * h + a.hi) * w + e.hi) * c];
        double* o = &out[((n * out_h + oy) * out_w + ox) * c];
        for (int64_t k = 0; k < c; ++k) {
          double top = p00[k] + e.w * (p01[k] - p00[k]);
          double bot = p10[k] + e.w * (p11[k] - p10[k]);
          o[k] = top + a.w * (bot - top);
        }
      }
    }
  return Tensor::make_result({b, out_h, out_w, c}, std::move(out), {x},
                             [ty, tx, b, h, w, c, out_h, out_w](detail::Node& self) {
                               auto& gi = self.inputs[0]->ensure_grad();
                               for (int64_t n = 0; n < b; ++n)
                                 for (int64_t oy = 0; oy < out_h; ++oy) {
                                   const Tap& a = ty[static_cast<size_t>(oy)];
                                   for (int64_t ox = 0; ox < out_w; ++ox) {
                                     const Tap& e = tx[static_cast<size_t>(ox)];
                                     const double* g = &self.grad[((n * out_h + oy) * out_w + ox) * c];
                                     double w00 = (1 - a.w) * (1 - e.w), w01 = (1 - a.w) * e.w;
                                     double w10 = a.w * (1 - e.w), w11 = a.w * e.w;
                                     for (int64_t k = 0; k < c; ++k) {
                                       gi[((n * h + a.lo) * w + e.lo) * c + k] += w00 * g[k];
                                       gi[((n * h + a.lo) * w + e.hi) * c + k] += w01 * g[k];
                                       gi[((n * h + a.hi) * w + e.lo) * c + k] += w10 * g[k];
                                       gi[((n * h + a.hi) * w + e.hi) * c + k] += w11 * g[k];
                                     }
                                   }
                                 }
                             });
}

}  // namespace stdn
