// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

// Runs the acceptance checks and prints one PASS/FAIL line per criterion.
// The exit status is 0 whenever every check ran to completion; with
// --strict any FAIL line makes it 1.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "grad_suite.hpp"
#include "oracles.hpp"
#include "stdn/eval.hpp"
#include "stdn/losses.hpp"
#include "stdn/synthdata.hpp"
#include "stdn/train.hpp"

namespace fs = std::filesystem;
using namespace stdn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[768];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

Verdict gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_case = "none";
  const auto cases = testing::gradient_cases();
  for (const auto& c : cases)
    for (uint64_t seed = 1; seed <= 20; ++seed) {
      const double e = c.run(seed);
      if (!(e <= worst)) {
        worst = e;
        worst_case = c.name;
      }
    }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 120.0, fmt("%zu ops x 20 seeds, worst rel. error %.2e (%s), %.1f s", cases.size(),
                                            worst, worst_case.c_str(), secs)};
}

Verdict warping_oracles() {
  const double dense = testing::dense_oracle_error(2026, 100);
  bool identity = true;
  std::mt19937_64 rng(9);
  for (int q : {4, 10, 140}) {
    const LandmarkSet lm = testing::random_landmarks(rng, q, 32);
    const Tensor t = testing::random_tensor(rng, {1, 32, 32, 3});
    identity = identity && warp_trace(t, lm, lm).values() == t.values();
  }
  const auto shift = testing::shift_oracle(31, 20);
  return {dense < 1e-9 && identity && shift.inside < 1e-9,
          fmt("dense field vs brute force %.1e over 100 configs; zero-offset warp %s; integer shift %.1e in hull",
              dense, identity ? "exact" : "NOT exact", shift.inside)};
}

std::vector<Tensor> constant_maps(int64_t batch, double v) {
  std::vector<Tensor> out;
  for (int64_t s : {8, 4, 2}) out.push_back(Tensor::full({batch, s, s, 2}, v));
  return out;
}

std::vector<Tensor> one_hot_maps(int64_t batch, int hot) {
  std::vector<Tensor> out;
  for (int64_t s : {8, 4, 2}) {
    std::vector<double> v(static_cast<size_t>(batch * s * s * 2), 0.0);
    for (size_t i = static_cast<size_t>(hot); i < v.size(); i += 2) v[i] = 1.0;
    out.push_back(Tensor::from({batch, s, s, 2}, v));
  }
  return out;
}

Verdict loss_fixtures() {
  struct Fixture {
    const char* name;
    double got, want;
  };
  const int64_t n = 8;
  const double c = 0.3;
  const LossWeights w;
  LossWeights w2 = w;
  w2.alpha2 *= 2;
  const Tensor live_c = Tensor::full({1, n, n, 3}, c);
  const auto zero = constant_maps(2, 0.0), half = constant_maps(2, 0.5);
  const std::vector<Fixture> fixtures{
      {"esr live zeros", esr_loss(Tensor::zeros({2, 4, 4, 1}), {Label::kLive, Label::kLive}).item(), 0.0},
      {"esr spoof 0.5", esr_loss(Tensor::full({1, 4, 4, 1}, 0.5), {Label::kSpoof}).item(), 0.5},
      {"esr spoof ones", esr_loss(Tensor::full({1, 4, 4, 1}, 1.0), {Label::kSpoof}).item(), 0.0},
      {"esr live ones", esr_loss(Tensor::full({1, 4, 4, 1}, 1.0), {Label::kLive}).item(), 1.0},
      {"gen adv fooled", gen_adv_loss(constant_maps(2, 1.0), constant_maps(2, 1.0)).item(), 0.0},
      {"gen adv zeros", gen_adv_loss(zero, zero).item(), 6.0},
      {"disc adv perfect", disc_adv_loss(one_hot_maps(2, 0), one_hot_maps(2, 1), zero, zero).item(), 0.0},
      {"disc adv halves", disc_adv_loss(half, half, half, half).item(), 3.0},
      {"reg zero", regularizer_loss(Tensor::zeros({1, n, n, 3}), Tensor::zeros({1, n, n, 3}), 1e4).item(), 0.0},
      {"reg constant sum", regularizer_loss(live_c, Tensor(), 1e4, SquaredNorm::kSum).item(),
       1e4 * 3 * n * n * c * c},
      {"reg constant mean", regularizer_loss(live_c, Tensor(), 1e4).item(), 1e4 * c * c},
      {"pixel equal", pixel_loss(Tensor::full({1, 4, 4, 3}, 0.2), Tensor::full({1, 4, 4, 3}, 0.2)).item(), 0.0},
      {"pixel 0.2", pixel_loss(Tensor::zeros({1, 4, 4, 3}), Tensor::full({1, 4, 4, 3}, 0.2)).item(), 0.2},
      {"generator total", total_generator_loss(6, 0.5, 3, w), 56.003},
      {"generator total zero", total_generator_loss(0, 0, 0, w), 0.0},
      {"generator total alpha2 x2", total_generator_loss(6, 0.5, 3, w2) - total_generator_loss(6, 0.5, 3, w), 50.0},
      {"supervision total", total_supervision_loss(0.1, 0.2, w), 5.2},
      {"supervision total zero", total_supervision_loss(0, 0, w), 0.0},
  };
  double worst = 0.0;
  std::string worst_name = "none";
  for (const auto& f : fixtures) {
    const double e = std::abs(f.got - f.want) / std::max(1.0, std::abs(f.want));
    if (!(e <= worst)) {
      worst = e;
      worst_name = f.name;
    }
  }
  return {worst <= 1e-12, fmt("%zu fixtures, worst rel. deviation %.1e (%s), generator total %.17g", fixtures.size(),
                              worst, worst_name.c_str(), total_generator_loss(6, 0.5, 3, w))};
}

Verdict roc_oracle() {
  std::mt19937_64 rng(2026);
  int mismatches = 0, identity_breaks = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto recs = testing::random_score_set(rng, 10 + trial % 7, 10 + trial % 5);
    const MetricsReport r = roc_metrics(recs);
    const auto b = testing::brute_force_roc(recs);
    if (r.eer != b.eer || r.threshold != b.threshold || r.tdr_at_fdr != b.tdr) ++mismatches;
    if (r.acer != (r.apcer + r.bpcer) / 2) ++identity_breaks;
  }
  return {mismatches == 0 && identity_breaks == 0,
          fmt("50 score sets: %d mismatches vs brute-force sweep, %d ACER identity breaks", mismatches,
              identity_breaks)};
}

std::vector<Tensor> images_of(const std::vector<SyntheticSample>& v) {
  std::vector<Tensor> out;
  for (const auto& s : v) out.push_back(s.image);
  return out;
}

std::vector<SyntheticSample> spoofs_of(const std::vector<SyntheticSample>& v) {
  std::vector<SyntheticSample> out;
  for (const auto& s : v)
    if (s.label == Label::kSpoof) out.push_back(s);
  return out;
}

std::vector<Medium> media_of(const std::vector<SyntheticSample>& v) {
  std::vector<Medium> out;
  for (const auto& s : v) out.push_back(*s.medium);
  return out;
}

// Mean |estimated trace - planted trace| per element.
double trace_l1(const std::vector<SampleInference>& inf, const std::vector<SyntheticSample>& spoofs) {
  double total = 0;
  size_t count = 0;
  for (size_t i = 0; i < spoofs.size(); ++i) {
    const auto& img = spoofs[i].image.values();
    const auto& base = spoofs[i].base.values();
    const auto& est = inf[i].trace.values();
    for (size_t j = 0; j < img.size(); ++j) total += std::abs(est[j] - (img[j] - base[j]));
    count += img.size();
  }
  return total / static_cast<double>(count);
}

struct DeskRun {
  Dataset data;
  TrainConfig cfg;
  std::optional<Trainer> trainer;
  std::vector<std::string> log;
  std::vector<StepStats> stats;
  std::string mid_checkpoint;
  int64_t mid_iter = 0;
  double train_seconds = 0;
  double l1_init = 0, l1_final = 0;
  double alpha0 = 0;
  MetricsReport metrics;
  std::vector<double> test_scores;
};

std::vector<double> score_split(Generator& gen, const std::vector<SyntheticSample>& split, double alpha0) {
  std::vector<double> out;
  for (const auto& r : infer_each(gen, images_of(split))) out.push_back(r.terms.combine(alpha0));
  return out;
}

void desk_run(DeskRun& run, const TrainConfig& cfg, const DatasetConfig& dcfg, const fs::path& work) {
  run.data = gen_dataset(dcfg);
  run.cfg = cfg;
  run.trainer.emplace(cfg);
  Trainer& t = *run.trainer;

  const auto test_spoofs = spoofs_of(run.data.test);
  run.l1_init = trace_l1(infer_each(t.generator(), images_of(test_spoofs)), test_spoofs);

  const TrainingSet train_set(run.data.train, dcfg.image_size);
  run.mid_iter = cfg.total_iters / 2;
  std::ofstream log(work / "train_log.csv");
  log << log_header() << "\n";
  const auto t0 = Clock::now();
  t.run(train_set, cfg.total_iters, [&](const StepStats& s) {
    run.stats.push_back(s);
    run.log.push_back(log_line(s));
    log << run.log.back() << "\n";
    if (t.iteration() == run.mid_iter) {
      std::ostringstream os;
      t.save(os);
      run.mid_checkpoint = os.str();
    }
    if (t.iteration() % 250 == 0)
      std::cerr << "  desk run: iteration " << t.iteration() << "/" << cfg.total_iters << ", "
                << fmt("%.0f s", seconds_since(t0)) << std::endl;
  });
  run.train_seconds = seconds_since(t0);
  t.save(work / "final.ckpt");

  run.l1_final = trace_l1(infer_each(t.generator(), images_of(test_spoofs)), test_spoofs);

  std::vector<LabeledTerms> calib;
  const auto train_inf = infer_each(t.generator(), images_of(run.data.train));
  for (size_t i = 0; i < run.data.train.size(); ++i) calib.push_back({run.data.train[i].label, train_inf[i].terms});
  run.alpha0 = calibrate_alpha0(calib);

  run.test_scores = score_split(t.generator(), run.data.test, run.alpha0);
  std::vector<ScoreRecord> records;
  for (size_t i = 0; i < run.data.test.size(); ++i)
    records.push_back({run.data.test[i].id, run.data.test[i].label, run.data.test[i].medium, run.test_scores[i]});
  run.metrics = roc_metrics(records);
  std::ofstream(work / "scores.csv") << format_scores_csv(records);
  std::ofstream(work / "report.kv") << format_report_kv(run.metrics, {{"alpha0", run.alpha0},
                                                                       {"trace_l1_init", run.l1_init},
                                                                       {"trace_l1_final", run.l1_final},
                                                                       {"train_seconds", run.train_seconds}});
}

Verdict desk_outcome(const DeskRun& run) {
  const double ratio = run.l1_final / run.l1_init;
  const bool eer_ok = run.metrics.eer <= 0.05;
  const bool l1_ok = ratio <= 0.5;
  const bool time_ok = run.train_seconds <= 1800.0;
  return {eer_ok && l1_ok && time_ok,
          fmt("EER %.2f%% (alpha0 %.3g) %s; trace L1 %.4f vs %.4f at init = %.0f%% %s; "
              "%lld iterations in %.1f min on %u core(s) %s",
              100 * run.metrics.eer, run.alpha0, eer_ok ? "ok" : "over 5%", run.l1_final, run.l1_init, 100 * ratio,
              l1_ok ? "ok" : "over 50%", static_cast<long long>(run.cfg.total_iters), run.train_seconds / 60,
              std::max(1u, std::thread::hardware_concurrency()), time_ok ? "ok" : "over 30 min")};
}

Verdict medium_outcome(DeskRun& run) {
  const auto train_spoofs = spoofs_of(run.data.train), test_spoofs = spoofs_of(run.data.test);
  auto traces = [&](const std::vector<SyntheticSample>& v) {
    std::vector<Tensor> out;
    for (auto& r : infer_each(run.trainer->generator(), images_of(v))) out.push_back(r.trace);
    return out;
  };
  MediumClassifierOptions opts;
  opts.seed = 11;
  const double on_traces =
      medium_classify(traces(train_spoofs), media_of(train_spoofs), traces(test_spoofs), media_of(test_spoofs), opts);
  const double on_images = medium_classify(images_of(train_spoofs), media_of(train_spoofs), images_of(test_spoofs),
                                           media_of(test_spoofs), opts);
  return {on_traces >= 0.85 && on_traces >= on_images - 0.05,
          fmt("traces %.1f%%, raw images %.1f%% (%zu train / %zu held-out spoofs)", 100 * on_traces, 100 * on_images,
              train_spoofs.size(), test_spoofs.size())};
}

Verdict score_determinism(DeskRun& run, const fs::path& work) {
  const auto again = score_split(run.trainer->generator(), run.data.test, run.alpha0);
  Trainer reloaded = Trainer::load(work / "final.ckpt", run.cfg);
  const auto reload = score_split(reloaded.generator(), run.data.test, run.alpha0);
  const bool same = again == run.test_scores && reload == run.test_scores;
  const int64_t n = run.cfg.image_size;
  const double half = score(Tensor::full({n / 4, n / 4}, 1.0), Tensor::zeros({n, n, 3}), run.alpha0);
  return {same && half == 0.5, fmt("%zu test scores %s across reruns and a checkpoint reload; M=1, trace=0 -> %.17g",
                                   run.test_scores.size(), same ? "bit-identical" : "DIFFER", half)};
}

Verdict schedule_and_resume(const DeskRun& run) {
  const TrainConfig& cfg = run.cfg;
  bool half_lr = !run.stats.empty();
  for (const auto& s : run.stats) half_lr = half_lr && s.disc_lr == s.gen_lr / 2 && s.sup_lr == s.gen_lr;

  bool decay = true;
  int boundaries = 0;
  for (int64_t b = cfg.decay_every; b < cfg.total_iters; b += cfg.decay_every, ++boundaries) {
    const auto& before = run.stats[static_cast<size_t>(b - 1)];
    const auto& after = run.stats[static_cast<size_t>(b)];
    decay = decay && std::abs(before.gen_lr / after.gen_lr - cfg.decay_ratio) < 1e-12 &&
            lr_schedule(b - 1, cfg) == before.gen_lr && lr_schedule(b, cfg) == after.gen_lr;
  }

  const int64_t extra = std::min<int64_t>(25, cfg.total_iters - run.mid_iter);
  std::istringstream is(run.mid_checkpoint);
  Trainer resumed = Trainer::load(is, cfg);
  const TrainingSet train_set(run.data.train, cfg.image_size);
  std::vector<std::string> lines;
  resumed.run(train_set, run.mid_iter + extra, [&](const StepStats& s) { lines.push_back(log_line(s)); });
  bool same = static_cast<int64_t>(lines.size()) == extra;
  for (int64_t i = 0; same && i < extra; ++i)
    same = lines[static_cast<size_t>(i)] == run.log[static_cast<size_t>(run.mid_iter + i)];

  return {half_lr && decay && same,
          fmt("discriminator lr = generator lr / 2 on %zu steps %s; x%g decay at %d boundaries %s; "
              "resume at %lld reproduces %lld log lines %s",
              run.stats.size(), half_lr ? "ok" : "BROKEN", cfg.decay_ratio, boundaries, decay ? "ok" : "BROKEN",
              static_cast<long long>(run.mid_iter), static_cast<long long>(extra),
              same ? "bit-exactly" : "with DIFFERENCES")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks: one PASS/FAIL line per criterion", "stdn_acceptance"};
  std::string work_dir = "acceptance";
  int64_t iters = 3000;
  bool strict = false;
  bool skip_desk = false;
  app.add_option("--work-dir", work_dir, "Directory for the desk run's log, checkpoint and scores");
  app.add_option("--iters", iters, "Training iterations for the desk run")->check(CLI::PositiveNumber);
  app.add_flag("--skip-desk", skip_desk, "Skip the training run and the criteria that need it");
  app.add_flag("--strict", strict, "Exit 1 when any criterion fails");
  CLI11_PARSE(app, argc, argv);

  const fs::path work(work_dir);
  fs::create_directories(work);
  // ctest hides the output of passing tests, so the lines also go to a file.
  std::ofstream summary(work / "acceptance.txt");
  int failures = 0;
  auto say = [&](const std::string& line) {
    std::cout << line << std::endl;
    summary << line << std::endl;
  };
  auto report = [&](int id, const char* name, const Verdict& v) {
    say(std::string(v.pass ? "PASS" : "FAIL") + " " + std::to_string(id) + " " + name + ": " + v.detail);
    if (!v.pass) ++failures;
  };

  try {
    report(1, "gradient suite", gradient_suite());
    report(2, "warping oracles", warping_oracles());
    report(3, "loss fixtures", loss_fixtures());
    report(7, "ROC oracle", roc_oracle());
    if (skip_desk) {
      say("SKIP 4 5 6 8: desk run disabled");
    } else {
      DatasetConfig dcfg;
      dcfg.n_live = 200;
      dcfg.n_spoof = 200;
      dcfg.image_size = 64;
      dcfg.seed = 2026;
      TrainConfig cfg;
      cfg.total_iters = iters;
      // Short smoke runs still cross a decay boundary.
      cfg.decay_every = std::min<int64_t>(cfg.decay_every, std::max<int64_t>(1, iters / 3));
      cfg.seed = 7;
      DeskRun run;
      desk_run(run, cfg, dcfg, work);
      report(4, "desk end-to-end run", desk_outcome(run));
      report(5, "medium classification", medium_outcome(run));
      report(6, "score determinism", score_determinism(run, work));
      report(8, "schedule and resume", schedule_and_resume(run));
    }
  } catch (const std::exception& e) {
    say(std::string("FAIL aborted: ") + e.what());
    return 1;
  }
  say(std::to_string(failures) + " criteria failed");
  return strict && failures > 0 ? 1 : 0;
}
