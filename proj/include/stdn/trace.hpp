// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "stdn/tensor.hpp"
#include "stdn/warp3d.hpp"

namespace stdn {

/// The four spoof-trace elements, batched along axis 0:
///   s_color [B,1,1,3]  color range bias (multiplies the image)
///   b       [B,1,1,3]  color balance bias
///   C       [B,L,L,3]  smooth content pattern, L = N/4
///   T       [B,N,N,3]  high-frequency texture pattern
struct TraceElements {
  Tensor s_color;
  Tensor b;
  Tensor C;
  Tensor T;

  static TraceElements zeros(int64_t batch, int64_t image_size);
  int64_t batch() const { return T.dim(0); }
  int64_t image_size() const { return T.dim(1); }
  TraceElements detach() const { return {s_color.detach(), b.detach(), C.detach(), T.detach()}; }
};

enum class TraceElement { kColorRange = 0, kColorBalance = 1, kContent = 2, kTexture = 3 };

inline constexpr int kTraceElementCount = 4;

/// Resolution of the content pattern for an N x N image.
inline int64_t content_size(int64_t image_size) { return image_size / 4; }

/// G(I) = s*I + b + resize(C, N) + T, images [B,N,N,3].
Tensor compose(const TraceElements& elems, const Tensor& img);

/// I - G(I). Not clamped; values may leave [0,1].
Tensor reconstruct_live(const Tensor& img, const TraceElements& elems);

/// live + trace warped from src_lm geometry onto live_lm geometry.
/// live and src_trace are [1,N,N,3].
Tensor synthesize_spoof(const Tensor& live, const LandmarkSet& live_lm, const Tensor& src_trace,
                        const LandmarkSet& src_lm);

struct HardenResult {
  TraceElements elems;
  std::vector<TraceElement> zeroed;  // one per batch row
};

/// Zeroes one uniformly chosen element per batch row. Gradients still flow
/// through the surviving elements.
HardenResult harden(const TraceElements& elems, std::mt19937_64& rng);

/// Four tagged little-endian float64 arrays (s, b, C, T) for one sample.
void write_trace_elements(const std::string& path, const TraceElements& elems);
TraceElements read_trace_elements(const std::string& path);

}  // namespace stdn
