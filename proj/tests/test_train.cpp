// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "stdn/errors.hpp"
#include "stdn/train.hpp"

using namespace stdn;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.image_size = 32;
  cfg.batch_size = 4;
  cfg.encoder_widths = {6, 8, 10};
  cfg.decoder_widths = {6, 4, 4};
  cfg.disc_widths = {4, 6, 8};
  cfg.base_lr = 1e-3;
  cfg.seed = 17;
  return cfg;
}

const TrainingSet& tiny_data() {
  static const TrainingSet data = [] {
    DatasetConfig d;
    d.n_live = 6;
    d.n_spoof = 6;
    d.image_size = 32;
    d.test_fraction = 0.0;
    d.seed = 2;
    return TrainingSet(gen_dataset(d).train, 32);
  }();
  return data;
}

std::vector<double> flat(const std::vector<Tensor>& params) {
  std::vector<double> out;
  for (const auto& p : params) out.insert(out.end(), p.values().begin(), p.values().end());
  return out;
}

}  // namespace

TEST_CASE("lr_schedule") {
  TrainConfig cfg;
  cfg.decay_every = 1000;
  CHECK(lr_schedule(0, cfg) == 1e-4);
  CHECK(lr_schedule(999, cfg) == 1e-4);
  CHECK(lr_schedule(1000, cfg) == doctest::Approx(1e-5).epsilon(1e-15));
  CHECK(lr_schedule(1999, cfg) == doctest::Approx(1e-5).epsilon(1e-15));
  CHECK(lr_schedule(2000, cfg) == doctest::Approx(1e-6).epsilon(1e-15));
  cfg.decay_every = 45000;
  CHECK(lr_schedule(44999, cfg) == 1e-4);
  CHECK(lr_schedule(45000, cfg) == doctest::Approx(1e-5).epsilon(1e-15));
}

TEST_CASE("adam matches a hand-stepped trace") {
  Tensor p = Tensor::from({1}, {1.0}, true);
  Adam opt({p});
  const double grads[3] = {1.0, -2.0, 0.5};
  // beta1 0.5, beta2 0.999, eps 1e-8, lr 0.1.
  double x = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    p.mutable_grad()[0] = g;
    opt.step(0.1);
    m = 0.5 * m + 0.5 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.1 * (m / (1 - std::pow(0.5, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    CHECK(p.values()[0] == doctest::Approx(x).epsilon(1e-14));
  }
  // First step by hand: mhat = 1, vhat = 1.
  Tensor q = Tensor::from({1}, {0.0}, true);
  Adam single({q});
  q.mutable_grad()[0] = 3.0;
  single.step(0.1);
  CHECK(q.values()[0] == doctest::Approx(-0.1).epsilon(1e-9));
  CHECK(single.last_lr() == 0.1);
  CHECK(single.steps() == 1);
}

TEST_CASE("adam edge cases") {
  Tensor p = Tensor::from({3}, {0.5, -1.0, 2.0}, true);
  Adam opt({p});
  opt.zero_grad();
  opt.step(0.1);
  CHECK(p.values() == std::vector<double>{0.5, -1.0, 2.0});

  // Element-wise: packing order does not matter.
  Tensor a1 = Tensor::from({2}, {1.0, 2.0}, true), b1 = Tensor::from({1}, {3.0}, true);
  Tensor a2 = a1.clone(true), b2 = b1.clone(true);
  Adam o1({a1, b1}), o2({b2, a2});
  for (int t = 0; t < 4; ++t) {
    for (Tensor* x : {&a1, &a2}) {
      x->mutable_grad()[0] = 0.3 * t - 0.5;
      x->mutable_grad()[1] = 1.0 / (t + 1);
    }
    for (Tensor* x : {&b1, &b2}) x->mutable_grad()[0] = -0.7 + t;
    o1.step(0.05);
    o2.step(0.05);
  }
  CHECK(a1.values() == a2.values());
  CHECK(b1.values() == b2.values());

  Tensor bad = Tensor::from({2}, {1.0, 1.0}, true);
  Adam ob({bad});
  bad.mutable_grad()[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ob.step(0.1), NumericError);
  CHECK(bad.values() == std::vector<double>{1.0, 1.0});
  CHECK(ob.steps() == 0);
}

TEST_CASE("train config") {
  TrainConfig cfg = tiny_config();
  cfg.weights.alpha3 = 0.02;
  TrainConfig back = parse_train_config(format_train_config(cfg));
  CHECK(back.base_lr == cfg.base_lr);
  CHECK(back.batch_size == 4);
  CHECK(back.encoder_widths == cfg.encoder_widths);
  CHECK(back.disc_widths == cfg.disc_widths);
  CHECK(back.weights.alpha3 == 0.02);
  CHECK(back.seed == 17);
  CHECK(format_train_config(back) == format_train_config(cfg));
  CHECK_THROWS_AS(parse_train_config("nonsense = 3\n"), ConfigError);

  TrainConfig odd = cfg;
  odd.batch_size = 5;
  CHECK_THROWS_AS(odd.validate(), DomainError);
  TrainConfig neg = cfg;
  neg.base_lr = -1;
  CHECK_THROWS_AS(neg.validate(), DomainError);

  TrainConfig defaults;
  CHECK(defaults.base_lr == 1e-4);
  CHECK(defaults.decay_ratio == 10.0);
  CHECK(defaults.batch_size == 8);
  CHECK(defaults.total_iters == 3000);
  CHECK(defaults.decay_every == 1000);
}

TEST_CASE("balanced batches") {
  std::mt19937_64 rng(1);
  TrainBatch b = sample_batch(tiny_data(), 3, rng);
  CHECK(b.live.shape() == Shape{3, 32, 32, 3});
  CHECK(b.spoof.shape() == Shape{3, 32, 32, 3});
  CHECK(b.live_meshes.size() == 3);
  CHECK(b.spoof_landmarks.size() == 3);
}

TEST_CASE("one step moves both networks, discriminator at half rate") {
  Trainer t(tiny_config());
  const auto gen_before = flat(t.generator().parameters());
  const auto disc_params = t.discriminator().parameters();
  const auto disc_before = flat(disc_params);
  std::mt19937_64 rng(3);
  StepStats st = t.step(sample_batch(tiny_data(), 2, rng));
  CHECK(t.iteration() == 1);
  CHECK(st.gen_lr == 1e-3);
  CHECK(st.sup_lr == 1e-3);
  CHECK(st.disc_lr == 5e-4);
  CHECK(t.disc_optimizer().last_lr() == t.gen_optimizer().last_lr() / 2);

  double moved = 0;
  const auto gen_after = flat(t.generator().parameters());
  for (size_t i = 0; i < gen_after.size(); ++i) moved += std::abs(gen_after[i] - gen_before[i]);
  CHECK(moved > 0);

  // The discriminator moved exactly once, by a first Adam step at lr/2 on
  // the gradient left in its buffers. Gradients from the generator or
  // supervision steps would show up in those buffers or in the update.
  size_t offset = 0;
  double checked = 0;
  for (const auto& p : disc_params) {
    for (size_t i = 0; i < p.values().size(); ++i) {
      const double g = p.grad()[i];
      const double want = disc_before[offset + i] - 5e-4 * g / (std::abs(g) + 1e-8);
      CHECK(std::abs(p.values()[i] - want) < 1e-12);
      checked += std::abs(g) > 0;
    }
    offset += p.values().size();
  }
  CHECK(checked > 0);
}

TEST_CASE("optimizers own disjoint parameter sets") {
  Trainer t(tiny_config());
  std::set<const void*> gen, disc;
  for (const auto& p : t.gen_optimizer().params()) gen.insert(p.node().get());
  for (const auto& p : t.disc_optimizer().params()) disc.insert(p.node().get());
  CHECK(gen.size() == t.generator().parameters().size());
  CHECK(disc.size() == t.discriminator().parameters().size());
  for (const void* p : gen) CHECK(disc.count(p) == 0);
  for (const auto& p : t.discriminator().parameters()) CHECK(p.requires_grad());
}

TEST_CASE("training is deterministic and resumes exactly") {
  std::vector<std::string> log_a, log_b;
  Trainer a(tiny_config());
  a.run(tiny_data(), 4, [&](const StepStats& s) { log_a.push_back(log_line(s)); });

  Trainer b(tiny_config());
  b.run(tiny_data(), 2, [&](const StepStats& s) { log_b.push_back(log_line(s)); });
  std::stringstream ckpt;
  b.save(ckpt);
  Trainer c = Trainer::load(ckpt, tiny_config());
  CHECK(c.iteration() == 2);
  c.run(tiny_data(), 4, [&](const StepStats& s) { log_b.push_back(log_line(s)); });

  CHECK(log_a == log_b);
  CHECK(flat(a.generator().parameters()) == flat(c.generator().parameters()));
  CHECK(flat(a.discriminator().parameters()) == flat(c.discriminator().parameters()));

  std::stringstream sa, sc;
  a.save(sa);
  c.save(sc);
  CHECK(sa.str() == sc.str());
}

TEST_CASE("non-finite loss aborts before any update") {
  Trainer t(tiny_config());
  std::mt19937_64 rng(4);
  TrainBatch batch = sample_batch(tiny_data(), 2, rng);
  batch.spoof = batch.spoof.clone();
  batch.spoof.data()[5] = std::numeric_limits<double>::infinity();
  const auto before = flat(t.generator().parameters());
  try {
    t.step(batch);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("iteration 0") != std::string::npos);
    CHECK(msg.find("L_G=") != std::string::npos);
  }
  CHECK(flat(t.generator().parameters()) == before);
  CHECK(t.iteration() == 0);
}

TEST_CASE("checkpoint callback cadence and log format") {
  TrainConfig cfg = tiny_config();
  cfg.checkpoint_every = 2;
  Trainer t(cfg);
  std::vector<int64_t> at;
  t.run(tiny_data(), 5, {}, [&](const Trainer& tr) { at.push_back(tr.iteration()); });
  CHECK(at == std::vector<int64_t>{2, 4});
  CHECK(log_header() == "iter,L_G,L_ESR,L_R,L_D,L_P,total");
  CHECK(log_line(t.last_stats()).rfind("4,", 0) == 0);
}

TEST_CASE("inference helpers") {
  Trainer t(tiny_config());
  std::vector<Tensor> imgs;
  for (size_t i = 0; i < 3; ++i) imgs.push_back(tiny_data().spoof()[i].image);
  Inference all = infer(t.generator(), concat(imgs, 0));
  std::vector<SampleInference> each = infer_each(t.generator(), imgs, 2);
  REQUIRE(each.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    Tensor row = slice(all.trace, 0, static_cast<int64_t>(i), static_cast<int64_t>(i) + 1);
    // Chunks change the GEMM shapes, so only rounding may differ.
    double gap = 0;
    for (size_t j = 0; j < row.values().size(); ++j)
      gap = std::max(gap, std::abs(each[i].trace.values()[j] - row.values()[j]));
    CHECK(gap < 1e-13);
    ScoreTerms want = score_terms(slice(all.spoof_map, 0, static_cast<int64_t>(i), static_cast<int64_t>(i) + 1), row);
    CHECK(each[i].terms.map_term == doctest::Approx(want.map_term).epsilon(1e-12));
    CHECK(each[i].terms.trace_term == doctest::Approx(want.trace_term).epsilon(1e-12));
  }
}
