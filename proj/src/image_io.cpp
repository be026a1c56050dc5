// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdn/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kv.hpp"
#include "stdn/errors.hpp"
#include "stdn/ops.hpp"

namespace stdn {
namespace {

Tensor as_batch1(const Tensor& img) {
  if (img.rank() == 3) return reshape(img, {1, img.dim(0), img.dim(1), img.dim(2)});
  if (img.rank() == 4 && img.dim(0) == 1) return img;
  throw DimensionError("expected a single image [H,W,3] or [1,H,W,3], got " + shape_str(img.shape()));
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& is) {
  std::string tok;
  while (tok.empty()) {
    int c = is.get();
    if (c == EOF) throw std::runtime_error("ppm: truncated header");
    if (c == '#') {
      while (c != '\n' && c != EOF) c = is.get();
    } else if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      while (!std::isspace(is.peek()) && is.peek() != EOF) tok.push_back(static_cast<char>(is.get()));
    }
  }
  return tok;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Tensor& img) {
  Tensor x = as_batch1(img);
  if (x.dim(3) != 3) throw DimensionError("ppm needs 3 channels");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P6\n" << x.dim(2) << " " << x.dim(1) << "\n255\n";
  std::string bytes(x.values().size(), '\0');
  for (size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(x.values()[i], 0.0, 1.0);
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  if (header_token(is) != "P6") throw std::runtime_error("ppm: only binary P6 is supported: " + path.string());
  int64_t w = std::stoll(header_token(is));
  int64_t h = std::stoll(header_token(is));
  int maxval = std::stoi(header_token(is));
  if (w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("ppm: unsupported size or maxval");
  is.get();
  std::string bytes(static_cast<size_t>(w * h * 3), '\0');
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!is) throw std::runtime_error("ppm: truncated pixel data: " + path.string());
  std::vector<double> v(bytes.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<unsigned char>(bytes[i]) / 255.0;
  return Tensor::from({1, h, w, 3}, std::move(v));
}

void write_landmarks_csv(const std::filesystem::path& path, const LandmarkSet& lm) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "x,y\n";
  for (const auto& p : lm.points) os << kv::format(p.x) << "," << kv::format(p.y) << "\n";
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

LandmarkSet read_landmarks_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  if (line.rfind("x,y", 0) != 0) throw std::runtime_error("landmark csv: missing x,y header in " + path.string());
  LandmarkSet lm;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("landmark csv: bad row '" + line + "'");
    lm.points.push_back({kv::to_double("x", line.substr(0, comma)), kv::to_double("y", line.substr(comma + 1))});
  }
  return lm;
}

Tensor trace_to_display(const Tensor& trace) {
  std::vector<double> v(trace.values());
  for (auto& x : v) x = std::clamp(0.5 + 0.5 * x, 0.0, 1.0);
  return Tensor::from(trace.shape(), std::move(v));
}

Tensor contact_sheet(const std::vector<Tensor>& panels) {
  if (panels.empty()) throw DimensionError("contact sheet needs at least one panel");
  int64_t h = 0;
  for (const auto& p : panels) h = std::max(h, as_batch1(p).dim(1));
  std::vector<Tensor> row;
  for (const auto& p : panels) {
    Tensor x = as_batch1(p).detach();
    if (x.dim(1) != h) x = resize_bilinear(x, h, x.dim(2) * h / x.dim(1));
    row.push_back(x);
  }
  return concat(row, 2);
}

}  // namespace stdn
