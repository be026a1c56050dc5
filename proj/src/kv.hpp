// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

// Flat `key = value` text shared by the dataset and training configs.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stdn::kv {

using Entries = std::vector<std::pair<std::string, std::string>>;

/// Blank lines and lines starting with '#' are skipped. Throws ConfigError
/// on a line without '=' or with an empty key.
Entries parse(std::string_view text);

double to_double(const std::string& key, const std::string& value);
int64_t to_int(const std::string& key, const std::string& value);
uint64_t to_uint(const std::string& key, const std::string& value);
/// "a,b,c"
std::array<int64_t, 3> to_triple(const std::string& key, const std::string& value);

/// Shortest round-trip decimal form.
std::string format(double v);
std::string format(const std::array<int64_t, 3>& v);

std::string read_file(const std::string& path);

}  // namespace stdn::kv
