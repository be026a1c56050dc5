// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

// Slow reference implementations shared by the unit tests and the
// acceptance binary.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "grad_suite.hpp"
#include "stdn/eval.hpp"
#include "stdn/warp3d.hpp"

namespace stdn::testing {

inline double cross(Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

// Per-pixel point-in-triangle search and barycentric blend.
inline std::vector<double> brute_force_dense(const LandmarkSet& anchors, const std::vector<Point2>& offsets,
                                             int64_t n) {
  const TriangleMesh mesh = delaunay(anchors);
  std::vector<double> field(static_cast<size_t>(n * n * 2), 0.0);
  for (int64_t y = 0; y < n; ++y)
    for (int64_t x = 0; x < n; ++x) {
      const Point2 p{static_cast<double>(x), static_cast<double>(y)};
      for (const auto& t : mesh.triangles) {
        const Point2 a = anchors.points[static_cast<size_t>(t[0])], b = anchors.points[static_cast<size_t>(t[1])],
                     c = anchors.points[static_cast<size_t>(t[2])];
        const double area = cross(a, b, c);
        const double wa = cross(p, b, c) / area, wb = cross(a, p, c) / area, wc = cross(a, b, p) / area;
        if (wa < -1e-12 || wb < -1e-12 || wc < -1e-12) continue;
        const Point2 oa = offsets[static_cast<size_t>(t[0])], ob = offsets[static_cast<size_t>(t[1])],
                     oc = offsets[static_cast<size_t>(t[2])];
        field[static_cast<size_t>((y * n + x) * 2)] = wa * oa.x + wb * ob.x + wc * oc.x;
        field[static_cast<size_t>((y * n + x) * 2 + 1)] = wa * oa.y + wb * ob.y + wc * oc.y;
        break;
      }
    }
  return field;
}

// Worst |sparse_to_dense - brute force| over `trials` random configurations
// cycling through Q = 4, 10, 140 on an N x N grid.
inline double dense_oracle_error(uint64_t seed, int trials, int64_t n = 32) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int q = trial % 3 == 0 ? 4 : trial % 3 == 1 ? 10 : 140;
    LandmarkSet lm = random_landmarks(rng, q, n);
    std::vector<Point2> off(static_cast<size_t>(q));
    for (auto& o : off) o = {u(rng), u(rng)};
    const auto want = brute_force_dense(lm, off, n);
    const auto got = sparse_to_dense(lm, off, n).field;
    for (size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  return worst;
}

struct ShiftOracle {
  double inside = 0.0;    // worst error against trace(p - t) inside the target hull
  double outside = 0.0;   // worst deviation from the identity outside it
};

// Target landmarks are the source set moved by an integer translation t, so
// inside the hull the warp must read the trace at p - t exactly.
inline ShiftOracle shift_oracle(uint64_t seed, int trials, int64_t n = 32) {
  std::mt19937_64 rng(seed);
  ShiftOracle out;
  for (int trial = 0; trial < trials; ++trial) {
    std::uniform_int_distribution<int> shift(-3, 3);
    const int tx = shift(rng), ty = shift(rng);
    LandmarkSet src;
    std::uniform_real_distribution<double> u(4.0, static_cast<double>(n) - 5.0);
    for (int i = 0; i < 30; ++i) src.points.push_back({u(rng), u(rng)});
    LandmarkSet dst = src;
    for (auto& p : dst.points) p = {p.x + tx, p.y + ty};
    Tensor trace = random_tensor(rng, {1, n, n, 3});
    Tensor warped = warp_trace(trace, src, dst);
    MeshInterpolator m(dst, n);
    for (int64_t y = 0; y < n; ++y)
      for (int64_t x = 0; x < n; ++x)
        for (int64_t c = 0; c < 3; ++c) {
          if (m.triangle_at(x, y) < 0)
            out.outside = std::max(out.outside, std::abs(warped.at({0, y, x, c}) - trace.at({0, y, x, c})));
          else
            out.inside = std::max(out.inside, std::abs(warped.at({0, y, x, c}) - trace.at({0, y - ty, x - tx, c})));
        }
  }
  return out;
}

struct RocOracle {
  double eer = 0, threshold = 0, tdr = 0;
};

// Direct sweep over every distinct score plus one point above all of them.
// Samples scoring at or above a threshold are called spoof.
inline RocOracle brute_force_roc(const std::vector<ScoreRecord>& recs) {
  std::vector<double> ts;
  for (const auto& r : recs)
    if (std::find(ts.begin(), ts.end(), r.score) == ts.end()) ts.push_back(r.score);
  std::sort(ts.begin(), ts.end());
  ts.push_back(ts.back() + 1.0);
  double n_live = 0, n_spoof = 0;
  for (const auto& r : recs) (r.label == Label::kLive ? n_live : n_spoof) += 1;
  auto rates = [&](double t) {
    double missed = 0, rejected = 0;
    for (const auto& r : recs) {
      if (r.label == Label::kSpoof && r.score < t) missed += 1;
      if (r.label == Label::kLive && r.score >= t) rejected += 1;
    }
    return std::pair{missed / n_spoof, rejected / n_live};
  };
  RocOracle out;
  for (double t : ts) {
    auto [a, b] = rates(t);
    if (b <= kTargetFdr) {
      out.tdr = 1 - a;
      break;
    }
  }
  for (size_t i = 0; i < ts.size(); ++i) {
    auto [a, b] = rates(ts[i]);
    if (a - b < 0) continue;
    if (a == b || i == 0) {
      out.eer = a;
      out.threshold = ts[i];
    } else {
      auto [pa, pb] = rates(ts[i - 1]);
      const double lam = (pb - pa) / ((a - b) - (pa - pb));
      out.eer = pa + lam * (a - pa);
      out.threshold = ts[i - 1] + lam * (ts[i] - ts[i - 1]);
    }
    break;
  }
  return out;
}

// Coarse scores so that ties occur within and across classes.
inline std::vector<ScoreRecord> random_score_set(std::mt19937_64& rng, int n_live = 10, int n_spoof = 10) {
  std::uniform_int_distribution<int> coarse(0, 12);
  std::vector<ScoreRecord> out;
  for (int i = 0; i < n_live; ++i) out.push_back({"l" + std::to_string(i), Label::kLive, std::nullopt, coarse(rng) * 0.05});
  for (int i = 0; i < n_spoof; ++i)
    out.push_back({"s" + std::to_string(i), Label::kSpoof, std::nullopt, coarse(rng) * 0.05 + 0.1});
  return out;
}

}  // namespace stdn::testing
