// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "kv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stdn/errors.hpp"

namespace stdn::kv {
namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("config key '" + key + "': expected " + what + ", got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* what) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad(key, value, what);
  return out;
}

}  // namespace

Entries parse(std::string_view text) {
  Entries out;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  return parse_number<double>(key, value, "a number");
}

int64_t to_int(const std::string& key, const std::string& value) {
  return parse_number<int64_t>(key, value, "an integer");
}

uint64_t to_uint(const std::string& key, const std::string& value) {
  return parse_number<uint64_t>(key, value, "a non-negative integer");
}

std::array<int64_t, 3> to_triple(const std::string& key, const std::string& value) {
  std::array<int64_t, 3> out{};
  std::stringstream ss(value);
  std::string part;
  size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i == 3) bad(key, value, "three comma-separated integers");
    out[i++] = to_int(key, std::string(trim(part)));
  }
  if (i != 3) bad(key, value, "three comma-separated integers");
  return out;
}

std::string format(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format(const std::array<int64_t, 3>& v) {
  return std::to_string(v[0]) + "," + std::to_string(v[1]) + "," + std::to_string(v[2]);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace stdn::kv
