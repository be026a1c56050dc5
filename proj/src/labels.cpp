// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdn/labels.hpp"

namespace stdn {

std::string_view to_string(Label label) { return label == Label::kLive ? "live" : "spoof"; }

std::string_view to_string(Medium medium) {
  switch (medium) {
    case Medium::kColorShift: return "colorshift";
    case Medium::kMoire: return "moire";
    case Medium::kMaskEdge: return "maskedge";
  }
  return "unknown";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "live") return Label::kLive;
  if (text == "spoof") return Label::kSpoof;
  return std::nullopt;
}

std::optional<Medium> parse_medium(std::string_view text) {
  if (text == "colorshift") return Medium::kColorShift;
  if (text == "moire") return Medium::kMoire;
  if (text == "maskedge") return Medium::kMaskEdge;
  return std::nullopt;
}

}  // namespace stdn
