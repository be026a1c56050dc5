// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "stdn/tensor.hpp"
#include "stdn/warp3d.hpp"

namespace stdn {

/// Binary P6, maxval 255. Values are clamped to [0,1] and rounded.
/// img: [H,W,3] or [1,H,W,3].
void write_ppm(const std::filesystem::path& path, const Tensor& img);
/// Returns [1,H,W,3] in [0,1]. Throws std::runtime_error on malformed files.
Tensor read_ppm(const std::filesystem::path& path);

/// "x,y" header then one point per line, shortest round-trip decimals.
void write_landmarks_csv(const std::filesystem::path& path, const LandmarkSet& lm);
LandmarkSet read_landmarks_csv(const std::filesystem::path& path);

/// Signed trace values mapped to display range: clamp(0.5 + v/2, 0, 1).
Tensor trace_to_display(const Tensor& trace);

/// Panels [1,h_i,w_i,3] resized to a common height and laid out left to
/// right.
Tensor contact_sheet(const std::vector<Tensor>& panels);

}  // namespace stdn
