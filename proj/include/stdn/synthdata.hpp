// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stdn/labels.hpp"
#include "stdn/tensor.hpp"
#include "stdn/trace.hpp"
#include "stdn/warp3d.hpp"

namespace stdn {

struct SyntheticSample {
  std::string id;
  uint64_t seed = 0;
  Tensor image;  // [1,N,N,3], not clamped for spoofs
  LandmarkSet landmarks;
  Label label = Label::kLive;
  std::optional<Medium> medium;
  std::optional<TraceElements> planted;
  Tensor base;  // live image the spoof was built from; equals image for live samples
};

/// 64-bit mix used to derive independent per-sample seeds.
uint64_t mix_seed(uint64_t a, uint64_t b);

/// Face-shaped lattice of kLandmarkCount points centred in an N x N image:
/// 7 concentric elliptical rings of 20 points each.
LandmarkSet canonical_landmarks(int64_t size);

/// Smooth live face: low-frequency background, a soft skin-toned ellipse
/// on the landmark outline and 3-6 Gaussian color blobs, in [0.1, 0.9].
/// Landmarks are the canonical lattice under a random similarity plus
/// sub-pixel jitter. N must be a multiple of 16.
SyntheticSample gen_live(uint64_t seed, int64_t size);

/// Planted spoof trace for one medium. Mask-edge contours follow the outer
/// landmark ring of `geometry` (the canonical lattice when omitted). All
/// element values lie in [-0.3, 0.3].
TraceElements gen_trace(uint64_t seed, Medium medium, int64_t size, const LandmarkSet* geometry = nullptr);

/// Spoof built as base + compose(planted, base) from gen_live/gen_trace
/// seeds derived from `seed`.
SyntheticSample gen_spoof(uint64_t seed, Medium medium, int64_t size);

struct DatasetConfig {
  int64_t n_live = 200;
  int64_t n_spoof = 200;
  std::vector<Medium> media{Medium::kColorShift, Medium::kMoire, Medium::kMaskEdge};
  uint64_t seed = 0;
  int64_t image_size = 64;
  double test_fraction = 0.2;

  /// DomainError for counts < 1, empty media, or a split that leaves a
  /// class with no train sample.
  void validate() const;
};

/// One row of a dataset manifest; enough to regenerate the sample.
struct ManifestEntry {
  std::string id;
  Label label = Label::kLive;
  std::optional<Medium> medium;
  uint64_t seed = 0;
};

struct Dataset {
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> test;
};

/// Counts are totals; round(count * test_fraction) of each class goes to
/// test. Spoof media cycle through cfg.media.
std::vector<ManifestEntry> dataset_manifest(const DatasetConfig& cfg, bool test_split);
SyntheticSample regenerate(const ManifestEntry& entry, int64_t size);
Dataset gen_dataset(const DatasetConfig& cfg);

/// Writes <dir>/{train,test}/<id>.ppm and <id>_landmarks.csv, manifest.csv
/// (split,id,label,medium,seed) and dataset.cfg.
void export_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir);

std::string format_dataset_config(const DatasetConfig& cfg);
DatasetConfig parse_dataset_config(const std::string& text);

struct LoadedDataset {
  DatasetConfig config;
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
};
/// Reads dataset.cfg and manifest.csv from an exported directory.
LoadedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace stdn
