// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "binio.hpp"
#include "kv.hpp"
#include "stdn/errors.hpp"
#include "stdn/ops.hpp"
#include "stdn/trace.hpp"

namespace stdn {

void TrainConfig::validate() const {
  if (batch_size < 4 || batch_size % 2 != 0) throw DomainError("batch_size must be even and at least 4");
  if (total_iters < 0 || decay_every < 1 || checkpoint_every < 0)
    throw DomainError("total_iters, decay_every and checkpoint_every must be non-negative (decay_every >= 1)");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw DomainError("base_lr must be positive");
  if (!(decay_ratio >= 1.0) || !std::isfinite(decay_ratio)) throw DomainError("decay_ratio must be >= 1");
  if (image_size < 16 || image_size % 16 != 0) throw DomainError("image_size must be a positive multiple of 16");
  for (const auto* w : {&encoder_widths, &decoder_widths, &disc_widths})
    for (auto c : *w)
      if (c < 1) throw DomainError("layer widths must be positive");
  weights.validate();
}

GeneratorConfig TrainConfig::generator_config() const { return {image_size, encoder_widths, decoder_widths}; }
DiscriminatorConfig TrainConfig::discriminator_config() const { return {image_size, disc_widths}; }

TrainConfig parse_train_config(const std::string& text, TrainConfig cfg) {
  for (const auto& [k, v] : kv::parse(text)) {
    if (k == "base_lr") cfg.base_lr = kv::to_double(k, v);
    else if (k == "total_iters") cfg.total_iters = kv::to_int(k, v);
    else if (k == "decay_every") cfg.decay_every = kv::to_int(k, v);
    else if (k == "decay_ratio") cfg.decay_ratio = kv::to_double(k, v);
    else if (k == "batch_size") cfg.batch_size = kv::to_int(k, v);
    else if (k == "seed") cfg.seed = kv::to_uint(k, v);
    else if (k == "image_size") cfg.image_size = kv::to_int(k, v);
    else if (k == "checkpoint_every") cfg.checkpoint_every = kv::to_int(k, v);
    else if (k == "encoder_widths") cfg.encoder_widths = kv::to_triple(k, v);
    else if (k == "decoder_widths") cfg.decoder_widths = kv::to_triple(k, v);
    else if (k == "disc_widths") cfg.disc_widths = kv::to_triple(k, v);
    else if (k == "alpha0") cfg.weights.alpha0 = kv::to_double(k, v);
    else if (k == "alpha1") cfg.weights.alpha1 = kv::to_double(k, v);
    else if (k == "alpha2") cfg.weights.alpha2 = kv::to_double(k, v);
    else if (k == "alpha3") cfg.weights.alpha3 = kv::to_double(k, v);
    else if (k == "alpha4") cfg.weights.alpha4 = kv::to_double(k, v);
    else if (k == "alpha5") cfg.weights.alpha5 = kv::to_double(k, v);
    else if (k == "beta") cfg.weights.beta = kv::to_double(k, v);
    else throw ConfigError("train config: unknown key '" + k + "'");
  }
  return cfg;
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "base_lr = " << kv::format(c.base_lr) << "\n"
     << "total_iters = " << c.total_iters << "\n"
     << "decay_every = " << c.decay_every << "\n"
     << "decay_ratio = " << kv::format(c.decay_ratio) << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "seed = " << c.seed << "\n"
     << "image_size = " << c.image_size << "\n"
     << "checkpoint_every = " << c.checkpoint_every << "\n"
     << "encoder_widths = " << kv::format(c.encoder_widths) << "\n"
     << "decoder_widths = " << kv::format(c.decoder_widths) << "\n"
     << "disc_widths = " << kv::format(c.disc_widths) << "\n"
     << "alpha0 = " << kv::format(c.weights.alpha0) << "\n"
     << "alpha1 = " << kv::format(c.weights.alpha1) << "\n"
     << "alpha2 = " << kv::format(c.weights.alpha2) << "\n"
     << "alpha3 = " << kv::format(c.weights.alpha3) << "\n"
     << "alpha4 = " << kv::format(c.weights.alpha4) << "\n"
     << "alpha5 = " << kv::format(c.weights.alpha5) << "\n"
     << "beta = " << kv::format(c.weights.beta) << "\n";
  return os.str();
}

double lr_schedule(int64_t iter, const TrainConfig& cfg) {
  if (iter < 0) throw DomainError("lr_schedule: negative iteration");
  return cfg.base_lr / std::pow(cfg.decay_ratio, static_cast<double>(iter / cfg.decay_every));
}

TrainingSet::TrainingSet(std::vector<SyntheticSample> samples, int64_t image_size) {
  for (auto& s : samples) {
    if (s.image.shape() != Shape{1, image_size, image_size, 3})
      throw DimensionError("training sample " + s.id + " has shape " + shape_str(s.image.shape()));
    s.landmarks.validate(image_size);
    (s.label == Label::kLive ? live_ : spoof_).push_back(std::move(s));
  }
  if (live_.empty() || spoof_.empty()) throw DomainError("training set needs both live and spoof samples");
  live_mesh_.reserve(live_.size());
  for (const auto& s : live_) live_mesh_.emplace_back(s.landmarks, image_size);
}

TrainBatch sample_batch(const TrainingSet& data, int64_t half, std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> pick_live(0, data.live().size() - 1);
  std::uniform_int_distribution<size_t> pick_spoof(0, data.spoof().size() - 1);
  TrainBatch b;
  std::vector<Tensor> live, spoof;
  for (int64_t i = 0; i < half; ++i) {
    const size_t li = pick_live(rng);
    const size_t si = pick_spoof(rng);
    live.push_back(data.live()[li].image);
    b.live_meshes.push_back(&data.live_mesh(li));
    spoof.push_back(data.spoof()[si].image);
    b.spoof_landmarks.push_back(data.spoof()[si].landmarks);
  }
  b.live = concat(live, 0);
  b.spoof = concat(spoof, 0);
  return b;
}

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  cfg_.validate();
  configure_allocator();
  gen_ = std::make_unique<Generator>(cfg_.generator_config(), rng_);
  disc_ = std::make_unique<MultiScaleDiscriminator>(cfg_.discriminator_config(), rng_);
  gen_opt_ = std::make_unique<Adam>(gen_->parameters());
  disc_opt_ = std::make_unique<Adam>(disc_->parameters());
}

namespace {

TraceElements rows(const TraceElements& e, int64_t begin, int64_t end) {
  return {slice(e.s_color, 0, begin, end), slice(e.b, 0, begin, end), slice(e.C, 0, begin, end),
          slice(e.T, 0, begin, end)};
}

std::string components(int64_t iter, const StepStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "iteration %lld: L_G=%.6g L_ESR=%.6g L_R=%.6g L_D=%.6g L_P=%.6g",
                static_cast<long long>(iter), s.l_g, s.l_esr, s.l_r, s.l_d, s.l_p);
  return buf;
}

}  // namespace

StepStats Trainer::step(const TrainBatch& batch) {
  const int64_t half = batch.live.dim(0);
  if (batch.spoof.dim(0) != half || static_cast<int64_t>(batch.live_meshes.size()) != half ||
      static_cast<int64_t>(batch.spoof_landmarks.size()) != half)
    throw DimensionError("train step: unbalanced batch");
  const auto& w = cfg_.weights;
  const double lr = lr_schedule(iter_, cfg_);
  const auto gen_params = gen_->parameters();
  const auto disc_params = disc_->parameters();

  std::vector<Label> labels(static_cast<size_t>(half), Label::kLive);
  labels.resize(static_cast<size_t>(2 * half), Label::kSpoof);

  StepStats st;
  st.iter = iter_;
  auto check = [&](double v) {
    if (!std::isfinite(v)) throw NumericError("non-finite loss at " + components(iter_, st));
  };

  // 1. Generator step.
  set_requires_grad(disc_params, false);
  const Tensor both = concat({batch.live, batch.spoof}, 0);
  GeneratorOutput out = gen_->forward(both, true);
  const Tensor trace = compose(out.elems, both);
  const Tensor trace_live = slice(trace, 0, 0, half);
  const Tensor trace_spoof = slice(trace, 0, half, 2 * half);
  const Tensor recon = sub(batch.spoof, trace_spoof);

  const TraceElements spoof_elems = rows(out.elems, half, 2 * half);
  HardenResult hard = harden(spoof_elems, rng_);
  std::vector<DenseOffset> offsets;
  for (int64_t i = 0; i < half; ++i)
    offsets.push_back(warp_offsets(*batch.live_meshes[static_cast<size_t>(i)],
                                   batch.spoof_landmarks[static_cast<size_t>(i)]));
  const Tensor warped = warp_with_offsets(compose(hard.elems, batch.spoof), offsets);
  const Tensor synth = add(batch.live, warped);

  const Tensor l_g = gen_adv_loss(disc_->forward(recon), disc_->forward(synth));
  const Tensor l_esr = esr_loss(out.spoof_map, labels);
  const Tensor l_r = regularizer_loss(trace_live, trace_spoof, w.beta);
  const Tensor gen_total = total_generator_loss(l_g, l_esr, l_r, w);
  st.l_g = l_g.item();
  st.l_esr = l_esr.item();
  st.l_r = l_r.item();
  check(gen_total.item());
  gen_opt_->zero_grad();
  gen_total.backward();

  // 2. Discriminator step on the generator step's detached outputs. Its loss
  // is checked before either network moves.
  const Tensor synth_d = synth.detach();
  const Tensor warped_d = warped.detach();
  set_requires_grad(disc_params, true);
  const Tensor l_d = disc_adv_loss(disc_->forward(batch.live), disc_->forward(batch.spoof),
                                   disc_->forward(recon.detach()), disc_->forward(synth_d));
  st.l_d = l_d.item();
  check(st.l_d);

  gen_opt_->step(lr);
  st.gen_lr = gen_opt_->last_lr();
  disc_opt_->zero_grad();
  l_d.backward();
  disc_opt_->step(lr / 2.0);
  st.disc_lr = disc_opt_->last_lr();

  // 3. Supervision step on live + synthesized spoof.
  set_requires_grad(disc_params, false);
  const Tensor sup_in = concat({batch.live, synth_d}, 0);
  GeneratorOutput sup = gen_->forward(sup_in, true);
  const Tensor recovered = compose(rows(sup.elems, half, 2 * half), synth_d);
  const Tensor l_esr2 = esr_loss(sup.spoof_map, labels);
  const Tensor l_p = pixel_loss(recovered, warped_d);
  const Tensor sup_total = total_supervision_loss(l_esr2, l_p, w);
  st.l_p = l_p.item();
  check(sup_total.item());
  gen_opt_->zero_grad();
  sup_total.backward();
  gen_opt_->step(lr);
  st.sup_lr = gen_opt_->last_lr();
  set_requires_grad(disc_params, true);

  st.total = gen_total.item() + sup_total.item();
  ++iter_;
  last_ = st;
  return st;
}

void Trainer::run(const TrainingSet& data, int64_t until, const std::function<void(const StepStats&)>& on_step,
                  const std::function<void(const Trainer&)>& on_checkpoint) {
  const int64_t half = cfg_.batch_size / 2;
  while (iter_ < until) {
    StepStats st = step(sample_batch(data, half, rng_));
    if (on_step) on_step(st);
    if (on_checkpoint && cfg_.checkpoint_every > 0 && iter_ % cfg_.checkpoint_every == 0) on_checkpoint(*this);
  }
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'T', 'D', 'N', 'C', 'K', 'P', 'T'};
constexpr uint32_t kCheckpointVersion = 1;

void put_params(std::ostream& os, const std::vector<Tensor>& params) {
  binio::put<uint64_t>(os, params.size());
  for (const auto& p : params) binio::put_doubles(os, p.values());
}

void get_params(std::istream& is, const std::vector<Tensor>& params) {
  if (binio::get<uint64_t>(is) != params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (auto p : params) {
    auto v = binio::get_doubles(is);
    if (v.size() != static_cast<size_t>(p.numel())) throw std::runtime_error("checkpoint: parameter size mismatch");
    std::copy(v.begin(), v.end(), p.data().begin());
  }
}

void put_stats(std::ostream& os, const std::vector<BatchNormStats*>& stats) {
  binio::put<uint64_t>(os, stats.size());
  for (const auto* s : stats) {
    binio::put_doubles(os, s->running_mean);
    binio::put_doubles(os, s->running_var);
  }
}

void get_stats(std::istream& is, const std::vector<BatchNormStats*>& stats) {
  if (binio::get<uint64_t>(is) != stats.size()) throw std::runtime_error("checkpoint: batchnorm count mismatch");
  for (auto* s : stats) {
    auto m = binio::get_doubles(is);
    auto v = binio::get_doubles(is);
    if (m.size() != s->running_mean.size() || v.size() != s->running_var.size())
      throw std::runtime_error("checkpoint: batchnorm size mismatch");
    s->running_mean = std::move(m);
    s->running_var = std::move(v);
  }
}

}  // namespace

void Trainer::save(std::ostream& os) const {
  os.write(kCheckpointMagic, 8);
  binio::put<uint32_t>(os, kCheckpointVersion);
  binio::put_string(os, format_train_config(cfg_));
  binio::put<int64_t>(os, iter_);
  put_params(os, gen_->parameters());
  put_stats(os, gen_->batchnorm_stats());
  put_params(os, disc_->parameters());
  put_stats(os, disc_->batchnorm_stats());
  gen_opt_->save(os);
  disc_opt_->save(os);
  std::ostringstream rng_state;
  rng_state << rng_;
  binio::put_string(os, rng_state.str());
}

void Trainer::save(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp);
    save(os);
    if (!os) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Trainer Trainer::load(std::istream& is, TrainConfig cfg) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string_view(magic, 8) != std::string_view(kCheckpointMagic, 8))
    throw std::runtime_error("not a checkpoint file");
  if (binio::get<uint32_t>(is) != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  TrainConfig stored = parse_train_config(binio::get_string(is));
  stored.total_iters = cfg.total_iters;
  stored.checkpoint_every = cfg.checkpoint_every;
  Trainer t(stored);
  t.iter_ = binio::get<int64_t>(is);
  get_params(is, t.gen_->parameters());
  get_stats(is, t.gen_->batchnorm_stats());
  get_params(is, t.disc_->parameters());
  get_stats(is, t.disc_->batchnorm_stats());
  t.gen_opt_->load(is);
  t.disc_opt_->load(is);
  std::istringstream rng_state(binio::get_string(is));
  rng_state >> t.rng_;
  if (!rng_state) throw std::runtime_error("checkpoint: bad rng state");
  return t;
}

Trainer Trainer::load(const std::filesystem::path& path, TrainConfig cfg) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path.string());
  return load(is, std::move(cfg));
}

std::string log_header() { return "iter,L_G,L_ESR,L_R,L_D,L_P,total"; }

std::string log_line(const StepStats& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", static_cast<long long>(s.iter), s.l_g,
                s.l_esr, s.l_r, s.l_d, s.l_p, s.total);
  return buf;
}

Inference infer(Generator& gen, const Tensor& images) {
  GeneratorOutput out = gen.forward(images.detach(), false);
  Inference r;
  r.elems = out.elems.detach();
  r.spoof_map = out.spoof_map.detach();
  r.trace = compose(r.elems, images.detach());
  return r;
}

std::vector<SampleInference> infer_each(Generator& gen, const std::vector<Tensor>& images, int64_t batch) {
  if (batch < 1) throw DomainError("infer_each: batch must be positive");
  std::vector<SampleInference> out;
  out.reserve(images.size());
  for (size_t i = 0; i < images.size(); i += static_cast<size_t>(batch)) {
    const size_t end = std::min(images.size(), i + static_cast<size_t>(batch));
    const Inference inf = infer(gen, concat({images.begin() + static_cast<std::ptrdiff_t>(i),
                                             images.begin() + static_cast<std::ptrdiff_t>(end)}, 0));
    for (size_t j = i; j < end; ++j) {
      const auto r = static_cast<int64_t>(j - i);
      const Tensor trace = slice(inf.trace, 0, r, r + 1);
      out.push_back({score_terms(slice(inf.spoof_map, 0, r, r + 1), trace), trace});
    }
  }
  return out;
}

}  // namespace stdn
