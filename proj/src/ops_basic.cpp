// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "stdn/errors.hpp"
#include "stdn/ops.hpp"

namespace stdn {
namespace {

using detail::Node;

// Broadcast bookkeeping for a binary op of equal-rank operands.
struct Broadcast {
  Shape out;
  std::vector<int64_t> stride_a, stride_b;  // 0 along broadcast axes
  bool same = false;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b) {
  if (a.size() != b.size())
    throw DimensionError("broadcast needs equal rank: " + shape_str(a) + " vs " + shape_str(b));
  Broadcast p;
  p.same = (a == b);
  size_t r = a.size();
  p.out.resize(r);
  for (size_t i = 0; i < r; ++i) {
    if (a[i] != b[i] && a[i] != 1 && b[i] != 1)
      throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    p.out[i] = std::max(a[i], b[i]);
  }
  p.stride_a.assign(r, 0);
  p.stride_b.assign(r, 0);
  int64_t sa = 1, sb = 1;
  for (size_t i = r; i-- > 0;) {
    p.stride_a[i] = a[i] == 1 ? 0 : sa;
    p.stride_b[i] = b[i] == 1 ? 0 : sb;
    sa *= a[i];
    sb *= b[i];
  }
  return p;
}

// Calls fn(out_index, a_index, b_index) for every output element.
template <typename Fn>
void for_each_broadcast(const Broadcast& p, Fn&& fn) {
  int64_t n = shape_numel(p.out);
  if (p.same) {
    for (int64_t i = 0; i < n; ++i) fn(i, i, i);
    return;
  }
  size_t r = p.out.size();
  std::vector<int64_t> idx(r, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t i = 0; i < n; ++i) {
    fn(i, ia, ib);
    for (size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      ia += p.stride_a[ax];
      ib += p.stride_b[ax];
      if (idx[ax] < p.out[ax]) break;
      ia -= p.stride_a[ax] * p.out[ax];
      ib -= p.stride_b[ax] * p.out[ax];
      idx[ax] = 0;
    }
  }
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  Broadcast p = plan_broadcast(a.shape(), b.shape());
  std::vector<double> out(static_cast<size_t>(shape_numel(p.out)));
  const auto& av = a.values();
  const auto& bv = b.values();
  for_each_broadcast(p, [&](int64_t o, int64_t i, int64_t j) { out[o] = fwd(av[i], bv[j]); });
  return Tensor::make_result(p.out, std::move(out), {a, b}, [p, da, db](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto& g = self.grad;
    if (na.requires_grad) {
      auto& ga = na.ensure_grad();
      for_each_broadcast(p, [&](int64_t o, int64_t i, int64_t j) {
        ga[i] += g[o] * da(na.value[i], nb.value[j]);
      });
    }
    if (nb.requires_grad) {
      auto& gb = nb.ensure_grad();
      for_each_broadcast(p, [&](int64_t o, int64_t i, int64_t j) {
        gb[j] += g[o] * db(na.value[i], nb.value[j]);
      });
    }
  });
}

// y = f(x) elementwise with dy/dx expressed through (x, y).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
    Node& in = *self.inputs[0];
    auto& gi = in.ensure_grad();
    for (size_t i = 0; i < gi.size(); ++i) gi[i] += self.grad[i] * deriv(in.value[i], self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double c) {
  return unary(x, [c](double v) { return v * c; }, [c](double, double) { return c; });
}

Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0); }

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor abs(const Tensor& x) {
  // Subgradient 0 at the kink.
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::make_result({1}, {s}, {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    auto& gi = in.ensure_grad();
    double g = self.grad[0];
    for (auto& v : gi) v += g;
  });
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  return Tensor::make_result(std::move(shape), x.values(), {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    auto& gi = in.ensure_grad();
    for (size_t i = 0; i < gi.size(); ++i) gi[i] += self.grad[i];
  });
}

namespace {

// View of a tensor as [outer, axis, inner].
struct AxisSplit {
  int64_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit a;
  for (int i = 0; i < axis; ++i) a.outer *= s[static_cast<size_t>(i)];
  a.len = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

int normalize_axis(int axis, int rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw DimensionError("axis out of range");
  return axis;
}

}  // namespace

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  const Shape& s0 = parts[0].shape();
  axis = normalize_axis(axis, static_cast<int>(s0.size()));
  Shape out_shape = s0;
  out_shape[static_cast<size_t>(axis)] = 0;
  std::vector<int64_t> offsets;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size()) throw DimensionError("concat rank mismatch");
    for (size_t i = 0; i < s.size(); ++i)
      if (static_cast<int>(i) != axis && s[i] != s0[i])
        throw DimensionError("concat shape mismatch " + shape_str(s) + " vs " + shape_str(s0));
    offsets.push_back(out_shape[static_cast<size_t>(axis)]);
    out_shape[static_cast<size_t>(axis)] += s[static_cast<size_t>(axis)];
  }
  AxisSplit o = split_at(out_shape, axis);
  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  for (size_t k = 0; k < parts.size(); ++k) {
    AxisSplit pk = split_at(parts[k].shape(), axis);
    const auto& v = parts[k].values();
    int64_t chunk = pk.len * pk.inner;
    for (int64_t a = 0; a < o.outer; ++a)
      std::copy_n(v.begin() + a * chunk, chunk, out.begin() + (a * o.len + offsets[k]) * o.inner);
  }
  return Tensor::make_result(out_shape, std::move(out), parts, [o, offsets](Node& self) {
    for (size_t k = 0; k < self.inputs.size(); ++k) {
      Node& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      auto& gi = in.ensure_grad();
      int64_t chunk = static_cast<int64_t>(gi.size()) / o.outer;
      for (int64_t a = 0; a < o.outer; ++a) {
        const double* src = self.grad.data() + (a * o.len + offsets[k]) * o.inner;
        double* dst = gi.data() + a * chunk;
        for (int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor slice(const Tensor& x, int axis, int64_t begin, int64_t end) {
  axis = normalize_axis(axis, x.rank());
  AxisSplit s = split_at(x.shape(), axis);
  if (begin < 0 || end > s.len || begin >= end)
    throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                         shape_str(x.shape()));
  Shape out_shape = x.shape();
  out_shape[static_cast<size_t>(axis)] = end - begin;
  int64_t chunk = (end - begin) * s.inner;
  const auto& v = x.values();
  std::vector<double> out(static_cast<size_t>(s.outer * chunk));
  for (int64_t a = 0; a < s.outer; ++a)
    std::copy_n(v.begin() + (a * s.len + begin) * s.inner, chunk, out.begin() + a * chunk);
  return Tensor::make_result(out_shape, std::move(out), {x}, [s, begin, chunk](Node& self) {
    auto& gi = self.inputs[0]->ensure_grad();
    for (int64_t a = 0; a < s.outer; ++a) {
      double* dst = gi.data() + (a * s.len + begin) * s.inner;
      const double* src = self.grad.data() + a * chunk;
      for (int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
    }
  });
}

Tensor gather_batch(const Tensor& x, const std::vector<int64_t>& rows) {
  if (rows.empty()) throw DimensionError("gather_batch with no rows");
  int64_t n = x.dim(0);
  int64_t row = x.numel() / n;
  Shape out_shape = x.shape();
  out_shape[0] = static_cast<int64_t>(rows.size());
  std::vector<double> out(rows.size() * static_cast<size_t>(row));
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= n) throw DimensionError("gather_batch row out of range");
    std::copy_n(x.values().begin() + rows[r] * row, row, out.begin() + static_cast<int64_t>(r) * row);
  }
  return Tensor::make_result(out_shape, std::move(out), {x}, [rows, row](Node& self) {
    auto& gi = self.inputs[0]->ensure_grad();
    for (size_t r = 0; r < rows.size(); ++r) {
      const double* src = self.grad.data() + static_cast<int64_t>(r) * row;
      double* dst = gi.data() + rows[r] * row;
      for (int64_t i = 0; i < row; ++i) dst[i] += src[i];
    }
  });
}

Tensor bias_add(const Tensor& x, const Tensor& bias) {
  int64_t c = x.dim(-1);
  if (bias.numel() != c) throw DimensionError("bias_add: bias has " + std::to_string(bias.numel()) +
                                              " values for " + std::to_string(c) + " channels");
  std::vector<double> out(x.values());
  const auto& bv = bias.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i % static_cast<size_t>(c)];
  return Tensor::make_result(x.shape(), std::move(out), {x, bias}, [c](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (nx.requires_grad) {
      auto& gx = nx.ensure_grad();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    }
    if (nb.requires_grad) {
      auto& gb = nb.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) gb[i % static_cast<size_t>(c)] += self.grad[i];
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 4) throw DimensionError("global_avg_pool expects [B,H,W,C]");
  int64_t b = x.dim(0), hw = x.dim(1) * x.dim(2), c = x.dim(3);
  std::vector<double> out(static_cast<size_t>(b * c), 0.0);
  const auto& v = x.values();
  for (int64_t n = 0; n < b; ++n)
    for (int64_t p = 0; p < hw; ++p)
      for (int64_t k = 0; k < c; ++k) out[n * c + k] += v[(n * hw + p) * c + k];
  for (auto& o : out) o /= static_cast<double>(hw);
  return Tensor::make_result({b, 1, 1, c}, std::move(out), {x}, [b, hw, c](Node& self) {
    auto& gi = self.inputs[0]->ensure_grad();
    double inv = 1.0 / static_cast<double>(hw);
    for (int64_t n = 0; n < b; ++n)
      for (int64_t p = 0; p < hw; ++p)
        for (int64_t k = 0; k < c; ++k) gi[(n * hw + p) * c + k] += self.grad[n * c + k] * inv;
  });
}

Tensor matmul(const Tensor& a, const Tensor& w) {
  if (a.rank() != 2 || w.rank() != 2 || a.dim(1) != w.dim(0))
    throw DimensionError("matmul " + shape_str(a.shape()) + " x " + shape_str(w.shape()));
  int64_t n = a.dim(0), k = a.dim(1), m = w.dim(1);
  std::vector<double> out(static_cast<size_t>(n * m), 0.0);
  const auto& av = a.values();
  const auto& wv = w.values();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t p = 0; p < k; ++p)
      for (int64_t j = 0; j < m; ++j) out[i * m + j] += av[i * k + p] * wv[p * m + j];
  return Tensor::make_result({n, m}, std::move(out), {a, w}, [n, k, m](Node& self) {
    Node& na = *self.inputs[0];
    Node& nw = *self.inputs[1];
    const auto& g = self.grad;
    if (na.requires_grad) {
      auto& ga = na.ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t p = 0; p < k; ++p)
          for (int64_t j = 0; j < m; ++j) ga[i * k + p] += g[i * m + j] * nw.value[p * m + j];
    }
    if (nw.requires_grad) {
      auto& gw = nw.ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t p = 0; p < k; ++p)
          for (int64_t j = 0; j < m; ++j) gw[p * m + j] += g[i * m + j] * na.value[i * k + p];
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.dim(0) != static_cast<int64_t>(labels.size()))
    throw DimensionError("softmax_cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  int64_t n = logits.dim(0), k = logits.dim(1);
  const auto& v = logits.values();
  std::vector<double> prob(v.size());
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= k)
      throw DimensionError("label out of range");
    double mx = *std::max_element(v.begin() + i * k, v.begin() + (i + 1) * k);
    double z = 0.0;
    for (int64_t j = 0; j < k; ++j) z += std::exp(v[i * k + j] - mx);
    for (int64_t j = 0; j < k; ++j) prob[i * k + j] = std::exp(v[i * k + j] - mx) / z;
    loss -= v[i * k + labels[static_cast<size_t>(i)]] - mx - std::log(z);
  }
  loss /= static_cast<double>(n);
  return Tensor::make_result({1}, {loss}, {logits}, [prob, labels, n, k](Node& self) {
    auto& gi = self.inputs[0]->ensure_grad();
    double g = self.grad[0] / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < k; ++j)
        gi[i * k + j] += g * (prob[i * k + j] - (j == labels[static_cast<size_t>(i)] ? 1.0 : 0.0));
  });
}

}  // namespace stdn
