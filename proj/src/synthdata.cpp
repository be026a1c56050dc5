// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdn/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "kv.hpp"
#include "stdn/errors.hpp"
#include "stdn/image_io.hpp"
#include "stdn/ops.hpp"

namespace stdn {

uint64_t mix_seed(uint64_t a, uint64_t b) {
  // splitmix64 finalizer over a combined state
  uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

constexpr int kRings = 7;
constexpr int kPerRing = kLandmarkCount / kRings;
// Angular phase of each ring in units of one step. None is 0 or 1/2, so no
// ring is mirror-symmetric about the face axes.
constexpr double kRingPhase[kRings] = {0.13, 0.37, 0.61, 0.83, 0.29, 0.71, 0.19};

struct Similarity {
  double angle = 0.0, scale = 1.0, tx = 0.0, ty = 0.0;
  Point2 apply(Point2 p, double c) const {
    const double dx = p.x - c, dy = p.y - c;
    const double cs = std::cos(angle), sn = std::sin(angle);
    return {c + tx + scale * (cs * dx - sn * dy), c + ty + scale * (sn * dx + cs * dy)};
  }
};

double semi_x(int64_t n) { return 0.25 * static_cast<double>(n); }
double semi_y(int64_t n) { return 0.28 * static_cast<double>(n); }

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double random_sign(std::mt19937_64& rng) { return std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Blob {
  double cx, cy, sigma;
  std::array<double, 3> amp;
  double at(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
  }
};

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - a.x - t * vx, p.y - a.y - t * vy);
}

// Distance to the closed outline, negative inside it.
double signed_outline_distance(Point2 p, const std::vector<Point2>& ring) {
  double d = std::numeric_limits<double>::infinity();
  bool inside = false;
  for (size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const Point2 a = ring[i], b = ring[j];
    d = std::min(d, point_segment_distance(p, a, b));
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside ? -d : d;
}

}  // namespace

LandmarkSet canonical_landmarks(int64_t size) {
  const double c = 0.5 * static_cast<double>(size - 1);
  LandmarkSet lm;
  for (int k = 0; k < kRings; ++k) {
    const double r = static_cast<double>(k + 1) / kRings;
    for (int j = 0; j < kPerRing; ++j) {
      const double th = 2.0 * std::numbers::pi * (j + kRingPhase[k]) / kPerRing;
      lm.points.push_back({c + r * semi_x(size) * std::cos(th), c + r * semi_y(size) * std::sin(th)});
    }
  }
  return lm;
}

SyntheticSample gen_live(uint64_t seed, int64_t size) {
  if (size < 16 || size % 16 != 0) throw DimensionError("gen_live: image size must be a positive multiple of 16");
  std::mt19937_64 rng(seed);
  const double n = static_cast<double>(size);
  const double c = 0.5 * (n - 1.0);

  Similarity sim;
  sim.angle = uniform(rng, -15.0, 15.0) * std::numbers::pi / 180.0;
  sim.scale = uniform(rng, 0.8, 1.2);
  sim.tx = uniform(rng, -n / 10.0, n / 10.0);
  sim.ty = uniform(rng, -n / 10.0, n / 10.0);

  SyntheticSample s;
  s.seed = seed;
  for (const auto& p : canonical_landmarks(size).points) {
    Point2 q = sim.apply(p, c);
    q.x = std::clamp(q.x + uniform(rng, -0.25, 0.25), 0.0, n - 1.0);
    q.y = std::clamp(q.y + uniform(rng, -0.25, 0.25), 0.0, n - 1.0);
    s.landmarks.points.push_back(q);
  }

  // Narrow palettes: a global color shift has to be visible in one image.
  constexpr std::array<double, 3> kBackground{0.40, 0.45, 0.50};
  constexpr std::array<double, 3> kSkin{0.70, 0.52, 0.42};
  std::array<double, 3> bg, ramp_x, ramp_y, skin;
  for (int ch = 0; ch < 3; ++ch) {
    bg[ch] = kBackground[ch] + uniform(rng, -0.04, 0.04);
    ramp_x[ch] = uniform(rng, -0.06, 0.06);
    ramp_y[ch] = uniform(rng, -0.06, 0.06);
  }
  for (int ch = 0; ch < 3; ++ch) skin[ch] = kSkin[ch] + uniform(rng, -0.03, 0.03);
  const double wave_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double edge_width = uniform(rng, 1.5, 2.5);

  std::vector<Blob> blobs(static_cast<size_t>(std::uniform_int_distribution<int>(3, 6)(rng)));
  for (auto& b : blobs) {
    b.cx = uniform(rng, 0.2 * n, 0.8 * n);
    b.cy = uniform(rng, 0.2 * n, 0.8 * n);
    b.sigma = uniform(rng, n / 16.0, n / 6.0);
    for (auto& a : b.amp) a = uniform(rng, -0.08, 0.08);
  }

  const double cs = std::cos(sim.angle), sn = std::sin(sim.angle);
  const double ax = semi_x(size) * sim.scale, ay = semi_y(size) * sim.scale;
  std::vector<double> img(static_cast<size_t>(size * size * 3));
  for (int64_t y = 0; y < size; ++y)
    for (int64_t x = 0; x < size; ++x) {
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      // Face frame coordinates for the soft ellipse mask.
      const double dx = fx - c - sim.tx, dy = fy - c - sim.ty;
      const double u = cs * dx + sn * dy, v = -sn * dx + cs * dy;
      const double rho = std::sqrt((u / ax) * (u / ax) + (v / ay) * (v / ay));
      const double face = sigmoid((1.0 - rho) * std::min(ax, ay) / edge_width);
      const double wave = 0.05 * std::cos(2.0 * std::numbers::pi * (fx + fy) / n + wave_phase);
      for (int ch = 0; ch < 3; ++ch) {
        double val = bg[ch] + ramp_x[ch] * (fx / n - 0.5) + ramp_y[ch] * (fy / n - 0.5) + wave;
        val = (1.0 - face) * val + face * skin[ch];
        for (const auto& b : blobs) val += b.amp[ch] * b.at(fx, fy);
        img[static_cast<size_t>((y * size + x) * 3 + ch)] = std::clamp(val, 0.1, 0.9);
      }
    }
  s.image = Tensor::from({1, size, size, 3}, std::move(img));
  s.base = s.image;
  s.label = Label::kLive;
  return s;
}

TraceElements gen_trace(uint64_t seed, Medium medium, int64_t size, const LandmarkSet* geometry) {
  if (size < 16 || size % 16 != 0) throw DimensionError("gen_trace: image size must be a positive multiple of 16");
  std::mt19937_64 rng(seed);
  const int64_t l = content_size(size);
  const double n = static_cast<double>(size);
  std::vector<double> s(3), b(3), content(static_cast<size_t>(l * l * 3), 0.0),
      texture(static_cast<size_t>(size * size * 3), 0.0);

  auto small_global = [&] {
    for (int ch = 0; ch < 3; ++ch) {
      s[ch] = uniform(rng, -0.02, 0.02);
      b[ch] = uniform(rng, -0.02, 0.02);
    }
  };
  auto add_content_blob = [&](double amp_lo, double amp_hi) {
    Blob blob{uniform(rng, 0.3 * l, 0.7 * l), uniform(rng, 0.3 * l, 0.7 * l),
              uniform(rng, l / 8.0, l / 5.0), {}};
    const double sign = random_sign(rng);
    for (auto& a : blob.amp) a = sign * uniform(rng, amp_lo, amp_hi);
    for (int64_t y = 0; y < l; ++y)
      for (int64_t x = 0; x < l; ++x)
        for (int ch = 0; ch < 3; ++ch)
          content[static_cast<size_t>((y * l + x) * 3 + ch)] +=
              blob.amp[ch] * blob.at(static_cast<double>(x), static_cast<double>(y));
  };

  switch (medium) {
    case Medium::kColorShift: {
      for (int ch = 0; ch < 3; ++ch) {
        s[ch] = random_sign(rng) * uniform(rng, 0.1, 0.3);
        b[ch] = random_sign(rng) * uniform(rng, 0.05, 0.15);
      }
      add_content_blob(0.0, 0.02);
      std::normal_distribution<double> noise(0.0, 0.004);
      for (auto& t : texture) t = std::clamp(noise(rng), -0.02, 0.02);
      break;
    }
    case Medium::kMoire: {
      small_global();
      const double amp = uniform(rng, 0.1, 0.25);
      const double period = uniform(rng, 2.5, 4.0);
      const double theta = uniform(rng, 0.0, std::numbers::pi);
      const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      std::array<double, 3> tint{uniform(rng, 0.6, 1.0), uniform(rng, 0.6, 1.0), uniform(rng, 0.6, 1.0)};
      for (int64_t y = 0; y < size; ++y)
        for (int64_t x = 0; x < size; ++x) {
          const double w = std::sin(2.0 * std::numbers::pi *
                                        (static_cast<double>(x) * std::cos(theta) +
                                         static_cast<double>(y) * std::sin(theta)) /
                                        period +
                                    phase);
          for (int ch = 0; ch < 3; ++ch) texture[static_cast<size_t>((y * size + x) * 3 + ch)] = amp * tint[ch] * w;
        }
      break;
    }
    case Medium::kMaskEdge: {
      small_global();
      const LandmarkSet outline = geometry ? *geometry : canonical_landmarks(size);
      if (outline.size() != static_cast<size_t>(kLandmarkCount))
        throw DimensionError("gen_trace: mask-edge geometry needs " + std::to_string(kLandmarkCount) + " landmarks");
      const size_t first = static_cast<size_t>((kRings - 1) * kPerRing);
      const std::vector<Point2> ring(outline.points.begin() + static_cast<std::ptrdiff_t>(first),
                                     outline.points.begin() + static_cast<std::ptrdiff_t>(first + kPerRing));
      // Smooth tint of the mask material over the face.
      const double tint_sign = random_sign(rng);
      std::array<double, 3> tint;
      for (auto& t : tint) t = tint_sign * uniform(rng, 0.1, 0.2);
      const double scale = n / static_cast<double>(l);
      for (int64_t y = 0; y < l; ++y)
        for (int64_t x = 0; x < l; ++x) {
          const Point2 p{(static_cast<double>(x) + 0.5) * scale - 0.5, (static_cast<double>(y) + 0.5) * scale - 0.5};
          const double cover = sigmoid(-signed_outline_distance(p, ring) / scale);
          for (int ch = 0; ch < 3; ++ch) content[static_cast<size_t>((y * l + x) * 3 + ch)] = tint[ch] * cover;
        }
      // Sharp line along the mask boundary.
      const double half_width = uniform(rng, 0.6, 1.2);
      const double sign = random_sign(rng);
      std::array<double, 3> edge{uniform(rng, 0.7, 1.0), uniform(rng, 0.7, 1.0), uniform(rng, 0.7, 1.0)};
      for (int64_t y = 0; y < size; ++y)
        for (int64_t x = 0; x < size; ++x) {
          const Point2 p{static_cast<double>(x), static_cast<double>(y)};
          if (std::abs(signed_outline_distance(p, ring)) < half_width)
            for (int ch = 0; ch < 3; ++ch) texture[static_cast<size_t>((y * size + x) * 3 + ch)] = sign * 0.2 * edge[ch];
        }
      break;
    }
  }
  return {Tensor::from({1, 1, 1, 3}, s), Tensor::from({1, 1, 1, 3}, b), Tensor::from({1, l, l, 3}, content),
          Tensor::from({1, size, size, 3}, texture)};
}

SyntheticSample gen_spoof(uint64_t seed, Medium medium, int64_t size) {
  SyntheticSample base = gen_live(mix_seed(seed, 1), size);
  SyntheticSample s;
  s.seed = seed;
  s.label = Label::kSpoof;
  s.medium = medium;
  s.landmarks = base.landmarks;
  s.base = base.image;
  s.planted = gen_trace(mix_seed(seed, 2), medium, size, &base.landmarks);
  s.image = add(base.image, compose(*s.planted, base.image));
  return s;
}

void DatasetConfig::validate() const {
  if (n_live < 1 || n_spoof < 1) throw DomainError("dataset: n_live and n_spoof must be >= 1");
  if (media.empty()) throw DomainError("dataset: at least one medium is required");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw DomainError("dataset: test_fraction must be in [0,1)");
  if (image_size < 16 || image_size % 16 != 0) throw DomainError("dataset: image size must be a positive multiple of 16");
  auto test_count = [&](int64_t n) { return static_cast<int64_t>(std::llround(static_cast<double>(n) * test_fraction)); };
  if (n_live - test_count(n_live) < 1 || n_spoof - test_count(n_spoof) < 1)
    throw DomainError("dataset: split leaves a class without training samples");
}

std::vector<ManifestEntry> dataset_manifest(const DatasetConfig& cfg, bool test_split) {
  cfg.validate();
  const char* split = test_split ? "test" : "train";
  const uint64_t split_tag = test_split ? 0x7E57ull : 0x7A1Aull;
  auto count = [&](int64_t n) {
    const auto t = static_cast<int64_t>(std::llround(static_cast<double>(n) * cfg.test_fraction));
    return test_split ? t : n - t;
  };
  std::vector<ManifestEntry> out;
  char id[64];
  for (int64_t i = 0; i < count(cfg.n_live); ++i) {
    std::snprintf(id, sizeof id, "%s_live_%04lld", split, static_cast<long long>(i));
    out.push_back({id, Label::kLive, std::nullopt, mix_seed(cfg.seed, mix_seed(split_tag, 2 * static_cast<uint64_t>(i)))});
  }
  for (int64_t i = 0; i < count(cfg.n_spoof); ++i) {
    std::snprintf(id, sizeof id, "%s_spoof_%04lld", split, static_cast<long long>(i));
    out.push_back({id, Label::kSpoof, cfg.media[static_cast<size_t>(i) % cfg.media.size()],
                   mix_seed(cfg.seed, mix_seed(split_tag, 2 * static_cast<uint64_t>(i) + 1))});
  }
  return out;
}

SyntheticSample regenerate(const ManifestEntry& entry, int64_t size) {
  SyntheticSample s;
  if (entry.label == Label::kLive) {
    s = gen_live(entry.seed, size);
  } else {
    if (!entry.medium) throw DomainError("manifest entry " + entry.id + ": spoof without medium");
    s = gen_spoof(entry.seed, *entry.medium, size);
  }
  s.id = entry.id;
  return s;
}

Dataset gen_dataset(const DatasetConfig& cfg) {
  Dataset d;
  for (const auto& e : dataset_manifest(cfg, false)) d.train.push_back(regenerate(e, cfg.image_size));
  for (const auto& e : dataset_manifest(cfg, true)) d.test.push_back(regenerate(e, cfg.image_size));
  return d;
}

std::string format_dataset_config(const DatasetConfig& cfg) {
  std::ostringstream os;
  os << "n_live = " << cfg.n_live << "\n";
  os << "n_spoof = " << cfg.n_spoof << "\n";
  os << "media = ";
  for (size_t i = 0; i < cfg.media.size(); ++i) os << (i ? "," : "") << to_string(cfg.media[i]);
  os << "\nseed = " << cfg.seed << "\n";
  os << "image_size = " << cfg.image_size << "\n";
  os << "test_fraction = " << kv::format(cfg.test_fraction) << "\n";
  return os.str();
}

DatasetConfig parse_dataset_config(const std::string& text) {
  DatasetConfig cfg;
  for (const auto& [k, v] : kv::parse(text)) {
    if (k == "n_live") cfg.n_live = kv::to_int(k, v);
    else if (k == "n_spoof") cfg.n_spoof = kv::to_int(k, v);
    else if (k == "seed") cfg.seed = kv::to_uint(k, v);
    else if (k == "image_size") cfg.image_size = kv::to_int(k, v);
    else if (k == "test_fraction") cfg.test_fraction = kv::to_double(k, v);
    else if (k == "media") {
      cfg.media.clear();
      std::stringstream ss(v);
      std::string part;
      while (std::getline(ss, part, ',')) {
        auto m = parse_medium(part);
        if (!m) throw ConfigError("dataset config: unknown medium '" + part + "'");
        cfg.media.push_back(*m);
      }
    } else {
      throw ConfigError("dataset config: unknown key '" + k + "'");
    }
  }
  return cfg;
}

void export_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  cfg.validate();
  std::ostringstream manifest;
  manifest << "split,id,label,medium,seed\n";
  for (bool test : {false, true}) {
    const fs::path sub = dir / (test ? "test" : "train");
    fs::create_directories(sub);
    for (const auto& e : dataset_manifest(cfg, test)) {
      SyntheticSample s = regenerate(e, cfg.image_size);
      write_ppm(sub / (e.id + ".ppm"), s.image);
      write_landmarks_csv(sub / (e.id + "_landmarks.csv"), s.landmarks);
      manifest << (test ? "test" : "train") << "," << e.id << "," << to_string(e.label) << ","
               << (e.medium ? to_string(*e.medium) : std::string_view("none")) << "," << e.seed << "\n";
    }
  }
  std::ofstream(dir / "manifest.csv") << manifest.str();
  std::ofstream cfg_out(dir / "dataset.cfg");
  cfg_out << format_dataset_config(cfg);
  if (!cfg_out) throw std::runtime_error("cannot write " + (dir / "dataset.cfg").string());
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  LoadedDataset out;
  out.config = parse_dataset_config(kv::read_file((dir / "dataset.cfg").string()));
  std::ifstream is(dir / "manifest.csv");
  if (!is) throw std::runtime_error("cannot read " + (dir / "manifest.csv").string());
  std::string line;
  std::getline(is, line);
  if (line != "split,id,label,medium,seed") throw std::runtime_error("manifest.csv: unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string part;
    while (std::getline(ss, part, ',')) f.push_back(part);
    if (f.size() != 5) throw std::runtime_error("manifest.csv: bad row '" + line + "'");
    ManifestEntry e;
    e.id = f[1];
    auto label = parse_label(f[2]);
    if (!label) throw std::runtime_error("manifest.csv: bad label in '" + line + "'");
    e.label = *label;
    if (f[3] != "none") {
      e.medium = parse_medium(f[3]);
      if (!e.medium) throw std::runtime_error("manifest.csv: bad medium in '" + line + "'");
    }
    e.seed = kv::to_uint("seed", f[4]);
    (f[0] == "test" ? out.test : out.train).push_back(e);
  }
  return out;
}

}  // namespace stdn
