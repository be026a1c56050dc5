// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

// Little-endian binary helpers shared by the checkpoint and trace formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stdn::binio {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("unexpected end of binary file");
  return v;
}

inline void put_doubles(std::ostream& os, std::span<const double> v) {
  put<uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> get_doubles(std::istream& is) {
  auto n = get<uint64_t>(is);
  if (n > (uint64_t{1} << 32)) throw std::runtime_error("implausible array length in binary file");
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("unexpected end of binary file");
  return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is) {
  auto n = get<uint64_t>(is);
  if (n > (uint64_t{1} << 24)) throw std::runtime_error("implausible string length in binary file");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("unexpected end of binary file");
  return s;
}

}  // namespace stdn::binio
