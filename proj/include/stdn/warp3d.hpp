// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "stdn/tensor.hpp"

namespace stdn {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Number of face-shape vertices used to drive the warp.
inline constexpr int kLandmarkCount = 140;

/// 2-D vertex positions in pixel coordinates (x = column, y = row).
struct LandmarkSet {
  std::vector<Point2> points;

  size_t size() const { return points.size(); }
  /// Throws DomainError unless every point is finite and inside
  /// [0, size-1]^2, DegenerateGeometryError if all points are collinear.
  void validate(int64_t image_size) const;
};

/// Counter-clockwise index triples into a point set.
struct TriangleMesh {
  std::vector<std::array<int, 3>> triangles;
};

/// Delaunay triangulation. Needs at least three points, not all collinear
/// and no duplicates (DegenerateGeometryError otherwise). Cocircular
/// configurations get one of the valid triangulations.
TriangleMesh delaunay(std::span<const Point2> points);
inline TriangleMesh delaunay(const LandmarkSet& lm) { return delaunay(lm.points); }

/// N x N x 2 pixel offsets (dx, dy), row-major over (y, x).
struct DenseOffset {
  int64_t size = 0;
  std::vector<double> field;

  Point2 at(int64_t x, int64_t y) const {
    size_t i = static_cast<size_t>((y * size + x) * 2);
    return {field[i], field[i + 1]};
  }
};

/// Per-pixel triangle assignment and barycentric weights of a landmark mesh
/// on an N x N grid. Pixels on a shared edge belong to the lowest-index
/// triangle; pixels outside the hull belong to none.
class MeshInterpolator {
 public:
  MeshInterpolator(const LandmarkSet& anchors, int64_t size);

  /// Barycentric blend of per-landmark offsets; zero outside the hull.
  DenseOffset interpolate(std::span<const Point2> sparse_offsets) const;

  const TriangleMesh& mesh() const { return mesh_; }
  const LandmarkSet& anchors() const { return anchors_; }
  int64_t size() const { return size_; }
  /// Triangle index covering pixel (x, y), or -1.
  int triangle_at(int64_t x, int64_t y) const { return tri_[static_cast<size_t>(y * size_ + x)]; }

 private:
  int64_t size_;
  LandmarkSet anchors_;
  TriangleMesh mesh_;
  std::vector<int> tri_;
  std::vector<std::array<double, 3>> weights_;
};

/// Dense offset from sparse landmark offsets by Delaunay barycentric
/// interpolation over the anchors.
DenseOffset sparse_to_dense(const LandmarkSet& anchors, std::span<const Point2> sparse_offsets, int64_t size);

/// out[p] = img at coords[p] by bilinear interpolation; samples outside the
/// image read as zero. img: [H,W,C] or [B,H,W,C]; coords: [...,H,W,2] as
/// (x, y). Differentiable in both img and coords.
Tensor bilinear_sample(const Tensor& img, const Tensor& coords);

/// Sampling grid p0 + offset for a batch: [B,N,N,2].
Tensor sampling_grid(std::span<const DenseOffset> offsets);

/// Backward gather anchored at the target geometry: each output pixel p
/// reads trace(p + dp(p)) with dp interpolated from (src - dst) over the
/// Delaunay mesh of dst. trace: [N,N,3] or [1,N,N,3].
Tensor warp_trace(const Tensor& trace, const LandmarkSet& src, const LandmarkSet& dst);

/// Batched warp with precomputed offsets, one per batch row.
Tensor warp_with_offsets(const Tensor& traces, std::span<const DenseOffset> offsets);

/// Offsets for warping from src geometry onto the mesh of `dst`.
DenseOffset warp_offsets(const MeshInterpolator& dst, const LandmarkSet& src);

}  // namespace stdn
