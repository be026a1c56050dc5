// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "stdn/cli.hpp"
#include "stdn/image_io.hpp"
#include "stdn/train.hpp"

using namespace stdn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

const fs::path& root() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "stdn_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

constexpr const char* kTinyTrain =
    "batch_size = 4\nencoder_widths = 6,8,10\ndecoder_widths = 6,4,4\ndisc_widths = 4,6,8\n"
    "base_lr = 0.001\ncheckpoint_every = 2\n";

TrainConfig tiny_train_config() {
  TrainConfig cfg = parse_train_config(kTinyTrain);
  cfg.image_size = 32;
  return cfg;
}

// A generator whose decoder is zero except the color-balance bias, so the
// composed trace is the constant `b` for every input.
fs::path constant_trace_checkpoint(const std::string& name, double b) {
  Trainer t(tiny_train_config());
  for (auto p : t.generator().decoder_parameters())
    for (auto& v : p.data()) v = 0.0;
  auto sb_bias = t.generator().decoder_parameters()[1];
  for (int ch = 3; ch < 6; ++ch) sb_bias.data()[static_cast<size_t>(ch)] = std::atanh(b);
  const fs::path path = root() / name;
  t.save(path);
  return path;
}

const fs::path& dataset() {
  static const fs::path dir = [] {
    fs::path d = root() / "data";
    REQUIRE(cli({"gendata", "--n-live", "5", "--n-spoof", "5", "--seed", "7", "--size", "32", "--out", d.string()})
                .code == 0);
    return d;
  }();
  return dir;
}

const fs::path& config_file() {
  static const fs::path p = [] {
    fs::path f = root() / "tiny.cfg";
    std::ofstream(f) << kTinyTrain;
    return f;
  }();
  return p;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"gendata"}).code == kExitUsage);
  CHECK(cli({"gendata", "--out", (root() / "x").string(), "--bogus"}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  Run r = cli({"gendata", "--n-live", "3"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("--out") != std::string::npos);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("gendata writes the dataset deterministically") {
  const fs::path d = dataset();
  int images = 0;
  for (const auto* split : {"train", "test"})
    for (const auto& e : fs::directory_iterator(d / split)) images += e.path().extension() == ".ppm";
  CHECK(images == 10);
  CHECK(lines(d / "manifest.csv").size() == 11);

  const fs::path again = root() / "data_again";
  REQUIRE(cli({"gendata", "--n-live", "5", "--n-spoof", "5", "--seed", "7", "--size", "32", "--out", again.string()})
              .code == 0);
  int compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(d)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), d);
    CHECK(slurp(e.path()) == slurp(again / rel));
    ++compared;
  }
  CHECK(compared == 2 + 2 * 10);

  const fs::path dry = root() / "dry";
  Run r = cli({"gendata", "--n-live", "4", "--out", dry.string(), "--dry-run"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("n_live = 4") != std::string::npos);
  CHECK_FALSE(fs::exists(dry));

  CHECK(cli({"gendata", "--n-live", "0", "--out", dry.string()}).code == kExitDomain);
}

TEST_CASE("train, resume and eval") {
  const fs::path run1 = root() / "run1", run2 = root() / "run2";
  Run dry = cli({"train", "--data", dataset().string(), "--out", run1.string(), "--config", config_file().string(),
                 "--dry-run"});
  CHECK(dry.code == kExitOk);
  CHECK(dry.out.find("batch_size = 4") != std::string::npos);
  CHECK_FALSE(fs::exists(run1 / "final.ckpt"));

  Run r = cli({"train", "--data", dataset().string(), "--out", run1.string(), "--config", config_file().string(),
               "--iters", "3", "--seed", "5"});
  REQUIRE(r.code == kExitOk);
  CHECK(fs::exists(run1 / "train.cfg"));
  CHECK(fs::exists(run1 / "checkpoint_000002.ckpt"));
  CHECK(fs::exists(run1 / "final.ckpt"));
  const auto log1 = lines(run1 / "train_log.csv");
  REQUIRE(log1.size() == 4);
  CHECK(log1[0] == "iter,L_G,L_ESR,L_R,L_D,L_P,total");

  // Resuming from iteration 2 reproduces the uninterrupted tail.
  r = cli({"train", "--data", dataset().string(), "--out", run2.string(), "--config", config_file().string(),
           "--iters", "3", "--seed", "5", "--checkpoint", (run1 / "checkpoint_000002.ckpt").string()});
  REQUIRE(r.code == kExitOk);
  const auto log2 = lines(run2 / "train_log.csv");
  REQUIRE(log2.size() == 2);
  CHECK(log2[1] == log1[3]);
  CHECK(slurp(run2 / "final.ckpt") == slurp(run1 / "final.ckpt"));

  const fs::path rep = root() / "report", rep2 = root() / "report2";
  r = cli({"eval", "--data", dataset().string(), "--checkpoint", (run1 / "final.ckpt").string(), "--out",
           rep.string()});
  REQUIRE(r.code == kExitOk);
  const std::string kv = slurp(rep / "report.kv");
  for (const char* key : {"eer = ", "apcer = ", "bpcer = ", "acer = ", "tdr_at_fdr = ", "alpha0 = "})
    CHECK(kv.find(key) != std::string::npos);
  CHECK(lines(rep / "scores.csv").front() == "id,label,medium,score");
  CHECK(fs::exists(rep / "report.txt"));
  REQUIRE(cli({"eval", "--data", dataset().string(), "--checkpoint", (run1 / "final.ckpt").string(), "--out",
               rep2.string()})
              .code == kExitOk);
  CHECK(slurp(rep / "scores.csv") == slurp(rep2 / "scores.csv"));
  CHECK(slurp(rep / "report.kv") == slurp(rep2 / "report.kv"));

  CHECK(cli({"eval", "--data", dataset().string(), "--checkpoint", (root() / "missing.ckpt").string(), "--out",
             rep.string()})
            .code == kExitUsage);
  CHECK(cli({"train", "--data", (root() / "no_such_dir").string(), "--out", run1.string()}).code == kExitUsage);
}

TEST_CASE("eval on a single-class test split is a domain error") {
  const fs::path cfg = root() / "one_class.cfg", d = root() / "one_class";
  // 5 live give one test sample; 2 spoof round to none.
  std::ofstream(cfg) << "n_live = 5\nn_spoof = 2\nimage_size = 32\ntest_fraction = 0.2\nseed = 1\n";
  REQUIRE(cli({"gendata", "--config", cfg.string(), "--out", d.string()}).code == kExitOk);
  const fs::path ckpt = constant_trace_checkpoint("one_class.ckpt", 0.1);
  Run r = cli({"eval", "--data", d.string(), "--checkpoint", ckpt.string(), "--out", (root() / "oc").string()});
  CHECK(r.code == kExitDomain);
  CHECK(r.err.find("domain error") != std::string::npos);
}

TEST_CASE("non-finite training aborts with exit 3") {
  Trainer t(tiny_train_config());
  auto p = t.generator().parameters().front();
  p.data()[0] = std::numeric_limits<double>::quiet_NaN();
  const fs::path ckpt = root() / "nan.ckpt";
  t.save(ckpt);
  Run r = cli({"train", "--data", dataset().string(), "--out", (root() / "nan_run").string(), "--config",
               config_file().string(), "--iters", "2", "--checkpoint", ckpt.string()});
  CHECK(r.code == kExitNumeric);
  CHECK(r.err.find("iteration 0") != std::string::npos);
}

TEST_CASE("disentangle on a zero-trace generator") {
  const fs::path ckpt = constant_trace_checkpoint("zero.ckpt", 0.0);
  const fs::path img = dataset() / "train" / "train_spoof_0000.ppm";
  const fs::path lm = dataset() / "train" / "train_spoof_0000_landmarks.csv";
  const fs::path out = root() / "dis", out2 = root() / "dis2";
  Run r = cli({"disentangle", "--image", img.string(), "--landmarks", lm.string(), "--checkpoint", ckpt.string(),
               "--out", out.string()});
  REQUIRE(r.code == kExitOk);
  int panels = 0;
  for (const char* name : {"s", "b", "C", "T", "trace", "live"}) panels += fs::exists(out / (std::string(name) + ".ppm"));
  CHECK(panels == 6);
  CHECK(fs::exists(out / "sheet.ppm"));
  CHECK(fs::exists(out / "elements.bin"));
  CHECK(read_ppm(out / "live.ppm").values() == read_ppm(img).values());
  const Tensor sheet = read_ppm(out / "sheet.ppm");
  CHECK(sheet.dim(2) > 6 * 32 - 1);

  REQUIRE(cli({"disentangle", "--image", img.string(), "--checkpoint", ckpt.string(), "--out", out2.string()}).code ==
          kExitOk);
  for (const char* name : {"s", "b", "C", "T", "trace", "live", "sheet"})
    CHECK(slurp(out / (std::string(name) + ".ppm")) == slurp(out2 / (std::string(name) + ".ppm")));

  CHECK(cli({"disentangle", "--image", (root() / "nope.ppm").string(), "--checkpoint", ckpt.string(), "--out",
             out.string()})
            .code == kExitUsage);
}

TEST_CASE("synthesize transfers a constant trace") {
  const double c = 0.2;
  const fs::path ckpt = constant_trace_checkpoint("const.ckpt", c);
  const fs::path src = dataset() / "train" / "train_spoof_0001.ppm";
  const fs::path src_lm = dataset() / "train" / "train_spoof_0001_landmarks.csv";
  const fs::path dst = dataset() / "train" / "train_live_0002.ppm";
  const fs::path dst_lm = dataset() / "train" / "train_live_0002_landmarks.csv";
  const Tensor target = read_ppm(dst);

  auto check_shift = [&](const fs::path& out, bool hull_only) {
    const Tensor synth = read_ppm(out / "synthesized.ppm");
    MeshInterpolator mesh(read_landmarks_csv(dst_lm), 32);
    int64_t checked = 0;
    for (int64_t y = 0; y < 32; ++y)
      for (int64_t x = 0; x < 32; ++x) {
        if (hull_only && mesh.triangle_at(x, y) < 0) continue;
        for (int64_t ch = 0; ch < 3; ++ch) {
          const double want = target.at({0, y, x, ch}) + c;
          if (want > 1.0) continue;
          CHECK(std::abs(synth.at({0, y, x, ch}) - want) <= 0.5 / 255 + 1e-9);
          ++checked;
        }
      }
    CHECK(checked > 100);
  };

  const fs::path out1 = root() / "syn_same", out2 = root() / "syn_moved", out3 = root() / "syn_moved2";
  REQUIRE(cli({"synthesize", "--source", src.string(), "--source-landmarks", dst_lm.string(), "--target",
               dst.string(), "--target-landmarks", dst_lm.string(), "--checkpoint", ckpt.string(), "--out",
               out1.string()})
              .code == kExitOk);
  check_shift(out1, false);

  REQUIRE(cli({"synthesize", "--source", src.string(), "--source-landmarks", src_lm.string(), "--target",
               dst.string(), "--target-landmarks", dst_lm.string(), "--checkpoint", ckpt.string(), "--out",
               out2.string()})
              .code == kExitOk);
  check_shift(out2, true);
  CHECK(fs::exists(out2 / "warped_trace.ppm"));

  REQUIRE(cli({"synthesize", "--source", src.string(), "--source-landmarks", src_lm.string(), "--target",
               dst.string(), "--target-landmarks", dst_lm.string(), "--checkpoint", ckpt.string(), "--out",
               out3.string()})
              .code == kExitOk);
  CHECK(slurp(out2 / "synthesized.ppm") == slurp(out3 / "synthesized.ppm"));
}
