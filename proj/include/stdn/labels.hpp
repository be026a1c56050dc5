// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace stdn {

enum class Label { kLive, kSpoof };

/// Synthetic spoof media. Each family plants a different dominant trace
/// element.
enum class Medium { kColorShift, kMoire, kMaskEdge };

inline constexpr int kMediumCount = 3;

std::string_view to_string(Label label);
std::string_view to_string(Medium medium);
std::optional<Label> parse_label(std::string_view text);
std::optional<Medium> parse_medium(std::string_view text);

}  // namespace stdn
