// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Core>
#include <algorithm>
#include <memory>

#include "stdn/errors.hpp"
#include "stdn/ops.hpp"

namespace stdn {
namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Geometry of a forward cross-correlation from an input of size H x W.
struct ConvGeom {
  int64_t batch, in_h, in_w, in_c;
  int64_t k_h, k_w, out_c;
  int64_t stride;
  int64_t out_h, out_w;
  int64_t pad_top, pad_left;

  int64_t rows() const { return batch * out_h * out_w; }
  int64_t patch() const { return k_h * k_w * in_c; }
  bool is_pointwise() const { return k_h == 1 && k_w == 1 && stride == 1 && pad_top == 0 && pad_left == 0; }
};

ConvGeom make_geom(int64_t batch, int64_t h, int64_t w, const Shape& kshape, int stride, Padding pad) {
  if (stride < 1) throw DimensionError("conv stride must be >= 1");
  ConvGeom g{};
  g.batch = batch;
  g.in_h = h;
  g.in_w = w;
  g.k_h = kshape[0];
  g.k_w = kshape[1];
  g.in_c = kshape[2];
  g.out_c = kshape[3];
  g.stride = stride;
  if (pad == Padding::kSame) {
    g.out_h = (h + stride - 1) / stride;
    g.out_w = (w + stride - 1) / stride;
    int64_t ph = std::max<int64_t>((g.out_h - 1) * stride + g.k_h - h, 0);
    int64_t pw = std::max<int64_t>((g.out_w - 1) * stride + g.k_w - w, 0);
    g.pad_top = ph / 2;
    g.pad_left = pw / 2;
  } else {
    if (g.k_h > h || g.k_w > w) throw DimensionError("valid conv kernel larger than input");
    g.out_h = (h - g.k_h) / stride + 1;
    g.out_w = (w - g.k_w) / stride + 1;
    g.pad_top = g.pad_left = 0;
  }
  return g;
}

void check_kernel(const Tensor& k) {
  if (k.rank() != 4) throw DimensionError("conv kernel must be [kh,kw,Cin,Cout], got " + shape_str(k.shape()));
}

// cols[(b,oy,ox), (ky,kx,c)] = x[b, oy*s+ky-pt, ox*s+kx-pl, c] (zero outside),
// for flattened output rows [r0, r1).
void im2col(const double* x, const ConvGeom& g, int64_t r0, int64_t r1, double* cols) {
  const int64_t patch = g.patch();
  const int64_t plane = g.out_h * g.out_w;
  for (int64_t r = r0; r < r1; ++r) {
    const int64_t b = r / plane, oy = (r % plane) / g.out_w, ox = r % g.out_w;
    double* row = cols + (r - r0) * patch;
    for (int64_t ky = 0; ky < g.k_h; ++ky) {
      const int64_t iy = oy * g.stride + ky - g.pad_top;
      for (int64_t kx = 0; kx < g.k_w; ++kx) {
        const int64_t ix = ox * g.stride + kx - g.pad_left;
        double* dst = row + (ky * g.k_w + kx) * g.in_c;
        if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) {
          std::fill_n(dst, g.in_c, 0.0);
        } else {
          std::copy_n(x + ((b * g.in_h + iy) * g.in_w + ix) * g.in_c, g.in_c, dst);
        }
      }
    }
  }
}

// Adjoint of im2col over the same row range: scatter-add patches into x.
void col2im(const double* cols, const ConvGeom& g, int64_t r0, int64_t r1, double* x) {
  const int64_t patch = g.patch();
  const int64_t plane = g.out_h * g.out_w;
  for (int64_t r = r0; r < r1; ++r) {
    const int64_t b = r / plane, oy = (r % plane) / g.out_w, ox = r % g.out_w;
    const double* row = cols + (r - r0) * patch;
    for (int64_t ky = 0; ky < g.k_h; ++ky) {
      const int64_t iy = oy * g.stride + ky - g.pad_top;
      if (iy < 0 || iy >= g.in_h) continue;
      for (int64_t kx = 0; kx < g.k_w; ++kx) {
        const int64_t ix = ox * g.stride + kx - g.pad_left;
        if (ix < 0 || ix >= g.in_w) continue;
        const double* src = row + (ky * g.k_w + kx) * g.in_c;
        double* dst = x + ((b * g.in_h + iy) * g.in_w + ix) * g.in_c;
        for (int64_t c = 0; c < g.in_c; ++c) dst[c] += src[c];
      }
    }
  }
}

// Patch blocks are processed a few hundred rows at a time so the im2col
// buffer stays cache resident.
int64_t chunk_rows(const ConvGeom& g) { return std::max<int64_t>(32, (int64_t{1} << 15) / g.patch()); }

// fn(r0, r1, P) for consecutive row ranges, P the [r1-r0, patch] patches of x.
template <class Fn>
void for_each_patch_block(const double* x, const ConvGeom& g, Fn&& fn) {
  if (g.is_pointwise()) {
    fn(int64_t{0}, g.rows(), ConstMapMat(x, g.rows(), g.patch()));
    return;
  }
  const int64_t step = chunk_rows(g);
  std::unique_ptr<double[]> buf(new double[static_cast<size_t>(step * g.patch())]);
  for (int64_t r0 = 0; r0 < g.rows(); r0 += step) {
    const int64_t r1 = std::min(r0 + step, g.rows());
    im2col(x, g, r0, r1, buf.get());
    fn(r0, r1, ConstMapMat(buf.get(), r1 - r0, g.patch()));
  }
}

// fn(r0, r1, D) fills D, a [r1-r0, patch] block of patch gradients, which is
// then scatter-added into x.
template <class Fn>
void scatter_patch_blocks(double* x, const ConvGeom& g, Fn&& fn) {
  const int64_t step = chunk_rows(g);
  std::unique_ptr<double[]> buf(new double[static_cast<size_t>(step * g.patch())]);
  for (int64_t r0 = 0; r0 < g.rows(); r0 += step) {
    const int64_t r1 = std::min(r0 + step, g.rows());
    MapMat block(buf.get(), r1 - r0, g.patch());
    fn(r0, r1, block);
    if (g.is_pointwise()) {
      MapMat(x + r0 * g.patch(), r1 - r0, g.patch()) += block;
    } else {
      col2im(buf.get(), g, r0, r1, x);
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& k, int stride, Padding pad) {
  check_kernel(k);
  if (x.rank() != 4) throw DimensionError("conv2d input must be [B,H,W,C], got " + shape_str(x.shape()));
  if (x.dim(3) != k.dim(2))
    throw DimensionError("conv2d channel mismatch: input " + shape_str(x.shape()) + ", kernel " +
                         shape_str(k.shape()));
  ConvGeom g = make_geom(x.dim(0), x.dim(1), x.dim(2), k.shape(), stride, pad);

  std::vector<double> out(static_cast<size_t>(g.rows() * g.out_c));
  {
    ConstMapMat kmat(k.values().data(), g.patch(), g.out_c);
    for_each_patch_block(x.values().data(), g, [&](int64_t r0, int64_t r1, ConstMapMat cols) {
      MapMat(out.data() + r0 * g.out_c, r1 - r0, g.out_c).noalias() = cols * kmat;
    });
  }
  Shape out_shape{g.batch, g.out_h, g.out_w, g.out_c};
  return Tensor::make_result(out_shape, std::move(out), {x, k}, [g](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nk = *self.inputs[1];
    const double* dy = self.grad.data();
    if (nk.requires_grad) {
      MapMat dk(nk.ensure_grad().data(), g.patch(), g.out_c);
      for_each_patch_block(nx.value.data(), g, [&](int64_t r0, int64_t r1, ConstMapMat cols) {
        dk.noalias() += cols.transpose() * ConstMapMat(dy + r0 * g.out_c, r1 - r0, g.out_c);
      });
    }
    if (nx.requires_grad) {
      ConstMapMat kmat(nk.value.data(), g.patch(), g.out_c);
      scatter_patch_blocks(nx.ensure_grad().data(), g, [&](int64_t r0, int64_t r1, MapMat& block) {
        block.noalias() = ConstMapMat(dy + r0 * g.out_c, r1 - r0, g.out_c) * kmat.transpose();
      });
    }
  });
}

Tensor transpose_conv2d(const Tensor& x, const Tensor& k, int stride) {
  check_kernel(k);
  if (stride != 1 && stride != 2) throw DimensionError("transpose_conv2d supports stride 1 or 2");
  if (x.rank() != 4) throw DimensionError("transpose_conv2d input must be [B,H,W,C]");
  if (x.dim(3) != k.dim(3))
    throw DimensionError("transpose_conv2d channel mismatch: input " + shape_str(x.shape()) +
                         ", kernel " + shape_str(k.shape()));
  // The conv this is the adjoint of maps [B,H*s,W*s,Cin] -> [B,H,W,Cout].
  ConvGeom g = make_geom(x.dim(0), x.dim(1) * stride, x.dim(2) * stride, k.shape(), stride, Padding::kSame);

  std::vector<double> out(static_cast<size_t>(g.batch * g.in_h * g.in_w * g.in_c), 0.0);
  {
    const double* xv = x.values().data();
    ConstMapMat kmat(k.values().data(), g.patch(), g.out_c);
    scatter_patch_blocks(out.data(), g, [&](int64_t r0, int64_t r1, MapMat& block) {
      block.noalias() = ConstMapMat(xv + r0 * g.out_c, r1 - r0, g.out_c) * kmat.transpose();
    });
  }
  Shape out_shape{g.batch, g.in_h, g.in_w, g.in_c};
  return Tensor::make_result(out_shape, std::move(out), {x, k}, [g](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nk = *self.inputs[1];
    const bool want_x = nx.requires_grad, want_k = nk.requires_grad;
    double* dx = want_x ? nx.ensure_grad().data() : nullptr;
    double* dk = want_k ? nk.ensure_grad().data() : nullptr;
    ConstMapMat kmat(nk.value.data(), g.patch(), g.out_c);
    for_each_patch_block(self.grad.data(), g, [&](int64_t r0, int64_t r1, ConstMapMat dcols) {
      if (want_x) MapMat(dx + r0 * g.out_c, r1 - r0, g.out_c).noalias() += dcols * kmat;
      if (want_k)
        MapMat(dk, g.patch(), g.out_c).noalias() +=
            dcols.transpose() * ConstMapMat(nx.value.data() + r0 * g.out_c, r1 - r0, g.out_c);
    });
  });
}

}  // namespace stdn
