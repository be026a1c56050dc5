// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "stdn/eval.hpp"
#include "stdn/losses.hpp"
#include "stdn/models.hpp"
#include "stdn/optim.hpp"
#include "stdn/synthdata.hpp"
#include "stdn/warp3d.hpp"

namespace stdn {

struct TrainConfig {
  double base_lr = 1e-4;
  int64_t total_iters = 3000;
  int64_t decay_every = 1000;
  double decay_ratio = 10.0;
  int64_t batch_size = 8;  // half live, half spoof
  uint64_t seed = 0;
  int64_t image_size = 64;
  int64_t checkpoint_every = 500;  // 0 disables periodic checkpoints
  std::array<int64_t, 3> encoder_widths{16, 32, 64};
  std::array<int64_t, 3> decoder_widths{32, 16, 16};
  std::array<int64_t, 3> disc_widths{8, 16, 32};
  LossWeights weights;

  /// DomainError on odd or too small batches, non-positive counts or rates.
  void validate() const;
  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
};

/// Flat `key = value` text. Unknown keys raise ConfigError; keys absent
/// from the text keep the values of `base`.
TrainConfig parse_train_config(const std::string& text, TrainConfig base = {});
std::string format_train_config(const TrainConfig& cfg);

/// base_lr / decay_ratio^floor(iter / decay_every).
double lr_schedule(int64_t iter, const TrainConfig& cfg);

/// Training samples with their landmark meshes rasterized once.
class TrainingSet {
 public:
  TrainingSet(std::vector<SyntheticSample> samples, int64_t image_size);

  const std::vector<SyntheticSample>& live() const { return live_; }
  const std::vector<SyntheticSample>& spoof() const { return spoof_; }
  const MeshInterpolator& live_mesh(size_t i) const { return live_mesh_[i]; }

 private:
  std::vector<SyntheticSample> live_, spoof_;
  std::vector<MeshInterpolator> live_mesh_;
};

/// Balanced minibatch; spoof row i is paired with live row i.
struct TrainBatch {
  Tensor live;   // [B/2,N,N,3]
  Tensor spoof;  // [B/2,N,N,3]
  std::vector<LandmarkSet> spoof_landmarks;
  std::vector<const MeshInterpolator*> live_meshes;
};

/// Draws B/2 live and B/2 spoof indices uniformly with replacement.
TrainBatch sample_batch(const TrainingSet& data, int64_t half, std::mt19937_64& rng);

struct StepStats {
  int64_t iter = 0;
  double l_g = 0, l_esr = 0, l_r = 0, l_d = 0, l_p = 0;
  double total = 0;  // generator-step total plus supervision-step total
  double gen_lr = 0;
  double disc_lr = 0;
  double sup_lr = 0;
};

/// Generator, discriminators, both optimizers and the sampling RNG.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  /// One minibatch: generator step, discriminator step at half the LR,
  /// supervision step. Throws NumericError (iteration and loss components
  /// in the message) on a non-finite loss, before the update it would feed.
  StepStats step(const TrainBatch& batch);

  /// Samples and steps until iteration() == until. on_step runs after every
  /// step, on_checkpoint every cfg.checkpoint_every iterations.
  void run(const TrainingSet& data, int64_t until, const std::function<void(const StepStats&)>& on_step = {},
           const std::function<void(const Trainer&)>& on_checkpoint = {});

  int64_t iteration() const { return iter_; }
  const TrainConfig& config() const { return cfg_; }
  Generator& generator() { return *gen_; }
  const Generator& generator() const { return *gen_; }
  MultiScaleDiscriminator& discriminator() { return *disc_; }
  const Adam& gen_optimizer() const { return *gen_opt_; }
  const Adam& disc_optimizer() const { return *disc_opt_; }
  std::mt19937_64& rng() { return rng_; }
  /// Last completed step, for diagnostics after an abort.
  const StepStats& last_stats() const { return last_; }

  void save(std::ostream& os) const;
  void save(const std::filesystem::path& path) const;
  /// Restores a checkpoint written by save(). Only total_iters and
  /// checkpoint_every are taken from cfg; everything else is stored.
  static Trainer load(std::istream& is, TrainConfig cfg);
  static Trainer load(const std::filesystem::path& path, TrainConfig cfg);

 private:
  TrainConfig cfg_;
  std::mt19937_64 rng_;
  std::unique_ptr<Generator> gen_;
  std::unique_ptr<MultiScaleDiscriminator> disc_;
  std::unique_ptr<Adam> gen_opt_, disc_opt_;
  int64_t iter_ = 0;
  StepStats last_;
};

/// CSV log of step stats: header iter,L_G,L_ESR,L_R,L_D,L_P,total.
std::string log_header();
std::string log_line(const StepStats& s);

/// Frozen-generator inference in running-statistics mode.
struct Inference {
  TraceElements elems;
  Tensor spoof_map;  // [B,K,K,1]
  Tensor trace;      // composed [B,N,N,3]
};
Inference infer(Generator& gen, const Tensor& images);

struct SampleInference {
  ScoreTerms terms;
  Tensor trace;  // [1,N,N,3]
};
/// infer() over [1,N,N,3] images in chunks of `batch`, one result per image.
std::vector<SampleInference> infer_each(Generator& gen, const std::vector<Tensor>& images, int64_t batch = 16);

}  // namespace stdn
