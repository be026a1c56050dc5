// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdn/warp3d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "stdn/errors.hpp"
#include "stdn/ops.hpp"

namespace stdn {
namespace {

double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// > 0 when d lies strictly inside the circumcircle of CCW (a, b, c).
double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  double adx = a.x - d.x, ady = a.y - d.y;
  double bdx = b.x - d.x, bdy = b.y - d.y;
  double cdx = c.x - d.x, cdy = c.y - d.y;
  double ad = adx * adx + ady * ady;
  double bd = bdx * bdx + bdy * bdy;
  double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

// Triangulation with per-edge adjacency. nbr[t][k] is the triangle across
// the edge opposite vertex k of t, or -1 on the hull.
class Triangulator {
 public:
  explicit Triangulator(std::span<const Point2> pts) : pts_(pts) {
    double min_x = pts[0].x, max_x = pts[0].x, min_y = pts[0].y, max_y = pts[0].y;
    for (const auto& p : pts) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
    extent_ = std::max({max_x - min_x, max_y - min_y, 1e-300});
  }

  TriangleMesh run() {
    std::vector<int> hull = convex_hull();
    std::vector<bool> placed(pts_.size(), false);
    for (int h : hull) placed[static_cast<size_t>(h)] = true;
    for (size_t i = 1; i + 1 < hull.size(); ++i) add_triangle({hull[0], hull[i], hull[i + 1]});
    link_neighbors();
    for (size_t i = 0; i < pts_.size(); ++i)
      if (!placed[i]) insert(static_cast<int>(i));
    legalize_all();
    TriangleMesh mesh;
    mesh.triangles = tris_;
    return mesh;
  }

 private:
  // Andrew's monotone chain; collinear boundary points are left for insert().
  std::vector<int> convex_hull() const {
    std::vector<int> idx(pts_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      const auto& p = pts_[static_cast<size_t>(a)];
      const auto& q = pts_[static_cast<size_t>(b)];
      return p.x < q.x || (p.x == q.x && p.y < q.y);
    });
    for (size_t i = 1; i < idx.size(); ++i)
      if (pts_[static_cast<size_t>(idx[i])] == pts_[static_cast<size_t>(idx[i - 1])])
        throw DegenerateGeometryError("delaunay: duplicate points");
    std::vector<int> hull(2 * idx.size());
    size_t k = 0;
    auto turn = [&](int a, int b, int c) {
      return orient(pts_[static_cast<size_t>(a)], pts_[static_cast<size_t>(b)], pts_[static_cast<size_t>(c)]);
    };
    const double tol = 1e-12 * extent_ * extent_;
    for (int i : idx) {
      while (k >= 2 && turn(hull[k - 2], hull[k - 1], i) <= tol) --k;
      hull[k++] = i;
    }
    for (size_t j = idx.size() - 1, lower = k + 1; j-- > 0;) {
      int i = idx[j];
      while (k >= lower && turn(hull[k - 2], hull[k - 1], i) <= tol) --k;
      hull[k++] = i;
    }
    hull.resize(k - 1);
    if (hull.size() < 3) throw DegenerateGeometryError("delaunay: all points are collinear");
    return hull;
  }

  int add_triangle(std::array<int, 3> v) {
    tris_.push_back(v);
    nbr_.push_back({-1, -1, -1});
    return static_cast<int>(tris_.size()) - 1;
  }

  void link_neighbors() {
    std::map<std::pair<int, int>, std::pair<int, int>> edges;
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
      for (int k = 0; k < 3; ++k) {
        int a = tris_[t][(k + 1) % 3], b = tris_[t][(k + 2) % 3];
        auto it = edges.find({b, a});
        if (it != edges.end()) {
          nbr_[t][k] = it->second.first;
          nbr_[it->second.first][it->second.second] = t;
        } else {
          edges[{a, b}] = {t, k};
        }
      }
  }

  const Point2& P(int i) const { return pts_[static_cast<size_t>(i)]; }

  int slot_of(int t, int vertex) const {
    for (int k = 0; k < 3; ++k)
      if (tris_[t][k] == vertex) return k;
    return -1;
  }

  void replace_neighbor(int t, int old_nbr, int new_nbr) {
    if (t < 0) return;
    for (int k = 0; k < 3; ++k)
      if (nbr_[t][k] == old_nbr) {
        nbr_[t][k] = new_nbr;
        return;
      }
  }

  // Rotate t in place so that vertex slot k becomes slot 0.
  void rotate_to(int t, int k) {
    std::rotate(tris_[t].begin(), tris_[t].begin() + k, tris_[t].end());
    std::rotate(nbr_[t].begin(), nbr_[t].begin() + k, nbr_[t].end());
  }

  void insert(int p) {
    const Point2& q = P(p);
    // Most-inside triangle by minimum signed distance to its edges.
    int best = -1, best_edge = -1;
    double best_dist = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
      double worst = std::numeric_limits<double>::infinity();
      int worst_k = -1;
      for (int k = 0; k < 3; ++k) {
        const Point2& a = P(tris_[t][(k + 1) % 3]);
        const Point2& b = P(tris_[t][(k + 2) % 3]);
        double len = std::hypot(b.x - a.x, b.y - a.y);
        double d = orient(a, b, q) / len;
        if (d < worst) {
          worst = d;
          worst_k = k;
        }
      }
      if (worst > best_dist) {
        best_dist = worst;
        best = t;
        best_edge = worst_k;
      }
    }
    if (best < 0 || best_dist < -1e-9 * extent_)
      throw DegenerateGeometryError("delaunay: failed to locate point " + std::to_string(p));
    if (best_dist <= 1e-12 * extent_) {
      split_edge(best, best_edge, p);
    } else {
      split_interior(best, p);
    }
  }

  void split_interior(int t, int p) {
    auto [a, b, c] = tris_[t];
    auto [n0, n1, n2] = nbr_[t];
    int t1 = add_triangle({p, c, a});
    int t2 = add_triangle({p, a, b});
    tris_[t] = {p, b, c};
    nbr_[t] = {n0, t1, t2};
    nbr_[t1] = {n1, t2, t};
    nbr_[t2] = {n2, t, t1};
    replace_neighbor(n1, t, t1);
    replace_neighbor(n2, t, t2);
  }

  // p lies on the edge opposite slot k of t.
  void split_edge(int t, int k, int p) {
    rotate_to(t, k);
    auto [a, b, c] = tris_[t];
    int n_ca = nbr_[t][1], n_ab = nbr_[t][2];
    int u = nbr_[t][0];
    int tb = add_triangle({a, p, c});
    tris_[t] = {a, b, p};
    if (u < 0) {
      nbr_[t] = {-1, tb, n_ab};
      nbr_[tb] = {-1, n_ca, t};
      replace_neighbor(n_ca, t, tb);
      return;
    }
    rotate_to(u, slot_of(u, opposite_vertex(u, b, c)));
    int d = tris_[u][0];  // u = (d, c, b)
    int n_bd = nbr_[u][1], n_dc = nbr_[u][2];
    int ub = add_triangle({d, p, b});
    tris_[u] = {d, c, p};
    nbr_[t] = {ub, tb, n_ab};
    nbr_[tb] = {u, n_ca, t};
    nbr_[u] = {tb, ub, n_dc};
    nbr_[ub] = {t, n_bd, u};
    replace_neighbor(n_ca, t, tb);
    replace_neighbor(n_bd, u, ub);
  }

  int opposite_vertex(int t, int b, int c) const {
    for (int v : tris_[t])
      if (v != b && v != c) return v;
    return -1;
  }

  void legalize_all() {
    std::vector<std::pair<int, int>> stack;
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
      for (int k = 0; k < 3; ++k) stack.emplace_back(t, k);
    const double tol = 1e-12 * extent_ * extent_ * extent_ * extent_;
    size_t guard = 0;
    const size_t limit = 64 * tris_.size() * tris_.size() + 1024;
    while (!stack.empty()) {
      if (++guard > limit) throw DegenerateGeometryError("delaunay: edge flipping did not converge");
      auto [t, k] = stack.back();
      stack.pop_back();
      int u = nbr_[t][k];
      if (u < 0) continue;
      int a = tris_[t][k], b = tris_[t][(k + 1) % 3], c = tris_[t][(k + 2) % 3];
      int d = opposite_vertex(u, b, c);
      if (incircle(P(a), P(b), P(c), P(d)) <= tol) continue;
      // The quad a-b-d-c must be strictly convex for the flip to be valid.
      if (orient(P(a), P(b), P(d)) <= 0.0 || orient(P(a), P(d), P(c)) <= 0.0) continue;
      flip(t, k, u);
      for (int s = 0; s < 3; ++s) {
        stack.emplace_back(t, s);
        stack.emplace_back(u, s);
      }
    }
  }

  // t = (a, b, c) with the shared edge (b, c) opposite slot k; u = (d, c, b).
  void flip(int t, int k, int u) {
    rotate_to(t, k);
    auto [a, b, c] = tris_[t];
    int n_ca = nbr_[t][1], n_ab = nbr_[t][2];
    rotate_to(u, slot_of(u, opposite_vertex(u, b, c)));
    int d = tris_[u][0];
    int n_bd = nbr_[u][1], n_dc = nbr_[u][2];
    tris_[t] = {a, b, d};
    nbr_[t] = {n_bd, u, n_ab};
    tris_[u] = {a, d, c};
    nbr_[u] = {n_dc, n_ca, t};
    replace_neighbor(n_bd, u, t);
    replace_neighbor(n_ca, t, u);
  }

  std::span<const Point2> pts_;
  double extent_ = 1.0;
  std::vector<std::array<int, 3>> tris_;
  std::vector<std::array<int, 3>> nbr_;
};

}  // namespace

void LandmarkSet::validate(int64_t image_size) const {
  const double hi = static_cast<double>(image_size - 1);
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 || p.x > hi || p.y > hi)
      throw DomainError("landmark outside [0, " + std::to_string(image_size - 1) + "]^2");
  delaunay(points);
}

TriangleMesh delaunay(std::span<const Point2> points) {
  if (points.size() < 3) throw DegenerateGeometryError("delaunay: need at least 3 points");
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DegenerateGeometryError("delaunay: non-finite point");
  return Triangulator(points).run();
}

MeshInterpolator::MeshInterpolator(const LandmarkSet& anchors, int64_t size)
    : size_(size), anchors_(anchors), mesh_(delaunay(anchors)) {
  if (size < 1) throw DimensionError("MeshInterpolator: size must be positive");
  tri_.assign(static_cast<size_t>(size * size), -1);
  weights_.assign(static_cast<size_t>(size * size), {0.0, 0.0, 0.0});
  const auto& pts = anchors_.points;
  constexpr double kInsideTol = -1e-12;
  for (int t = 0; t < static_cast<int>(mesh_.triangles.size()); ++t) {
    const auto& tri = mesh_.triangles[static_cast<size_t>(t)];
    const Point2& a = pts[static_cast<size_t>(tri[0])];
    const Point2& b = pts[static_cast<size_t>(tri[1])];
    const Point2& c = pts[static_cast<size_t>(tri[2])];
    double area = orient(a, b, c);
    auto lo_x = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(std::min({a.x, b.x, c.x}) - 1e-9)));
    auto hi_x = std::min<int64_t>(size - 1, static_cast<int64_t>(std::floor(std::max({a.x, b.x, c.x}) + 1e-9)));
    auto lo_y = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(std::min({a.y, b.y, c.y}) - 1e-9)));
    auto hi_y = std::min<int64_t>(size - 1, static_cast<int64_t>(std::floor(std::max({a.y, b.y, c.y}) + 1e-9)));
    for (int64_t y = lo_y; y <= hi_y; ++y)
      for (int64_t x = lo_x; x <= hi_x; ++x) {
        size_t i = static_cast<size_t>(y * size + x);
        if (tri_[i] >= 0) continue;
        Point2 p{static_cast<double>(x), static_cast<double>(y)};
        double wa = orient(p, b, c) / area;
        double wb = orient(a, p, c) / area;
        double wc = orient(a, b, p) / area;
        if (wa < kInsideTol || wb < kInsideTol || wc < kInsideTol) continue;
        tri_[i] = t;
        weights_[i] = {wa, wb, wc};
      }
  }
}

DenseOffset MeshInterpolator::interpolate(std::span<const Point2> sparse_offsets) const {
  if (sparse_offsets.size() != anchors_.size())
    throw DimensionError("sparse offsets count " + std::to_string(sparse_offsets.size()) +
                         " != anchor count " + std::to_string(anchors_.size()));
  DenseOffset out;
  out.size = size_;
  out.field.assign(static_cast<size_t>(size_ * size_ * 2), 0.0);
  for (size_t i = 0; i < tri_.size(); ++i) {
    int t = tri_[i];
    if (t < 0) continue;
    const auto& tri = mesh_.triangles[static_cast<size_t>(t)];
    const auto& w = weights_[i];
    double dx = 0.0, dy = 0.0;
    for (int k = 0; k < 3; ++k) {
      const Point2& o = sparse_offsets[static_cast<size_t>(tri[static_cast<size_t>(k)])];
      dx += w[static_cast<size_t>(k)] * o.x;
      dy += w[static_cast<size_t>(k)] * o.y;
    }
    out.field[2 * i] = dx;
    out.field[2 * i + 1] = dy;
  }
  return out;
}

DenseOffset sparse_to_dense(const LandmarkSet& anchors, std::span<const Point2> sparse_offsets, int64_t size) {
  if (sparse_offsets.size() != anchors.size())
    throw DimensionError("sparse_to_dense: anchors and offsets differ in count");
  return MeshInterpolator(anchors, size).interpolate(sparse_offsets);
}

Tensor bilinear_sample(const Tensor& img, const Tensor& coords) {
  const bool batched = img.rank() == 4;
  if (!batched && img.rank() != 3) throw DimensionError("bilinear_sample: img must be [H,W,C] or [B,H,W,C]");
  if (coords.rank() != img.rank() || coords.dim(-1) != 2)
    throw DimensionError("bilinear_sample: coords must be [...,H,W,2], got " + shape_str(coords.shape()));
  const int64_t b = batched ? img.dim(0) : 1;
  const int64_t h = img.dim(-3), w = img.dim(-2), c = img.dim(-1);
  const int64_t oh = coords.dim(-3), ow = coords.dim(-2);
  if ((batched && coords.dim(0) != b)) throw DimensionError("bilinear_sample: batch mismatch");

  const auto& iv = img.values();
  const auto& cv = coords.values();
  Shape out_shape = batched ? Shape{b, oh, ow, c} : Shape{oh, ow, c};
  std::vector<double> out(static_cast<size_t>(b * oh * ow * c), 0.0);

  auto pixel = [h, w, c](int64_t n, int64_t y, int64_t x) -> int64_t {
    if (y < 0 || y >= h || x < 0 || x >= w) return -1;
    return ((n * h + y) * w + x) * c;
  };

  for (int64_t n = 0; n < b; ++n)
    for (int64_t p = 0; p < oh * ow; ++p) {
      double sx = cv[static_cast<size_t>((n * oh * ow + p) * 2)];
      double sy = cv[static_cast<size_t>((n * oh * ow + p) * 2 + 1)];
      double fx = std::floor(sx), fy = std::floor(sy);
      double wx = sx - fx, wy = sy - fy;
      auto x0 = static_cast<int64_t>(fx), y0 = static_cast<int64_t>(fy);
      const int64_t corner[4] = {pixel(n, y0, x0), pixel(n, y0, x0 + 1), pixel(n, y0 + 1, x0),
                                 pixel(n, y0 + 1, x0 + 1)};
      const double cw[4] = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
      double* o = &out[static_cast<size_t>((n * oh * ow + p) * c)];
      for (int q = 0; q < 4; ++q) {
        if (corner[q] < 0) continue;
        for (int64_t k = 0; k < c; ++k) o[k] += cw[q] * iv[static_cast<size_t>(corner[q] + k)];
      }
    }

  return Tensor::make_result(out_shape, std::move(out), {img, coords},
                             [b, h, w, c, oh, ow, pixel](detail::Node& self) {
                               detail::Node& ni = *self.inputs[0];
                               detail::Node& nc = *self.inputs[1];
                               const auto& cv = nc.value;
                               const auto& iv = ni.value;
                               std::vector<double>* gi = ni.requires_grad ? &ni.ensure_grad() : nullptr;
                               std::vector<double>* gc = nc.requires_grad ? &nc.ensure_grad() : nullptr;
                               for (int64_t n = 0; n < b; ++n)
                                 for (int64_t p = 0; p < oh * ow; ++p) {
                                   size_t ci = static_cast<size_t>((n * oh * ow + p) * 2);
                                   double sx = cv[ci], sy = cv[ci + 1];
                                   double fx = std::floor(sx), fy = std::floor(sy);
                                   double wx = sx - fx, wy = sy - fy;
                                   auto x0 = static_cast<int64_t>(fx), y0 = static_cast<int64_t>(fy);
                                   const int64_t corner[4] = {pixel(n, y0, x0), pixel(n, y0, x0 + 1),
                                                              pixel(n, y0 + 1, x0), pixel(n, y0 + 1, x0 + 1)};
                                   const double cw[4] = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy,
                                                         wx * wy};
                                   // d weight / d x and d weight / d y per corner.
                                   const double dwx[4] = {-(1 - wy), (1 - wy), -wy, wy};
                                   const double dwy[4] = {-(1 - wx), -wx, (1 - wx), wx};
                                   const double* g = &self.grad[static_cast<size_t>((n * oh * ow + p) * c)];
                                   for (int q = 0; q < 4; ++q) {
                                     if (corner[q] < 0) continue;
                                     for (int64_t k = 0; k < c; ++k) {
                                       size_t at = static_cast<size_t>(corner[q] + k);
                                       if (gi) (*gi)[at] += cw[q] * g[k];
                                       if (gc) {
                                         (*gc)[ci] += dwx[q] * iv[at] * g[k];
                                         (*gc)[ci + 1] += dwy[q] * iv[at] * g[k];
                                       }
                                     }
                                   }
                                 }
                             });
}

Tensor sampling_grid(std::span<const DenseOffset> offsets) {
  if (offsets.empty()) throw DimensionError("sampling_grid: no offsets");
  const int64_t n = offsets[0].size;
  std::vector<double> grid;
  grid.reserve(static_cast<size_t>(static_cast<int64_t>(offsets.size()) * n * n * 2));
  for (const auto& off : offsets) {
    if (off.size != n) throw DimensionError("sampling_grid: offsets differ in size");
    for (int64_t y = 0; y < n; ++y)
      for (int64_t x = 0; x < n; ++x) {
        size_t i = static_cast<size_t>((y * n + x) * 2);
        grid.push_back(static_cast<double>(x) + off.field[i]);
        grid.push_back(static_cast<double>(y) + off.field[i + 1]);
      }
  }
  return Tensor::from({static_cast<int64_t>(offsets.size()), n, n, 2}, std::move(grid));
}

DenseOffset warp_offsets(const MeshInterpolator& dst, const LandmarkSet& src) {
  const auto& anchors = dst.anchors().points;
  if (src.size() != anchors.size()) throw DimensionError("warp: landmark sets differ in count");
  std::vector<Point2> delta(anchors.size());
  for (size_t i = 0; i < anchors.size(); ++i)
    delta[i] = {src.points[i].x - anchors[i].x, src.points[i].y - anchors[i].y};
  return dst.interpolate(delta);
}

Tensor warp_with_offsets(const Tensor& traces, std::span<const DenseOffset> offsets) {
  if (traces.rank() != 4 || traces.dim(0) != static_cast<int64_t>(offsets.size()))
    throw DimensionError("warp_with_offsets: need one offset field per batch row");
  if (traces.dim(1) != offsets[0].size || traces.dim(2) != offsets[0].size)
    throw DimensionError("warp_with_offsets: trace size does not match offsets");
  return bilinear_sample(traces, sampling_grid(offsets));
}

Tensor warp_trace(const Tensor& trace, const LandmarkSet& src, const LandmarkSet& dst) {
  const bool batched = trace.rank() == 4;
  if (!(batched && trace.dim(0) == 1) && trace.rank() != 3)
    throw DimensionError("warp_trace: trace must be [N,N,3] or [1,N,N,3]");
  const int64_t n = trace.dim(-3);
  if (trace.dim(-2) != n) throw DimensionError("warp_trace: trace must be square");
  src.validate(n);
  dst.validate(n);
  MeshInterpolator mesh(dst, n);
  DenseOffset off = warp_offsets(mesh, src);
  Tensor t4 = batched ? trace : reshape(trace, {1, n, n, trace.dim(-1)});
  Tensor out = warp_with_offsets(t4, std::span<const DenseOffset>(&off, 1));
  return batched ? out : reshape(out, {n, n, trace.dim(-1)});
}

}  // namespace stdn
