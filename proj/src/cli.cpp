// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kv.hpp"
#include "stdn/errors.hpp"
#include "stdn/eval.hpp"
#include "stdn/image_io.hpp"
#include "stdn/ops.hpp"
#include "stdn/synthdata.hpp"
#include "stdn/trace.hpp"
#include "stdn/train.hpp"

namespace stdn {
namespace {

namespace fs = std::filesystem;

// Bad flags, missing files and other problems with what the user passed.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::string out;
  std::string checkpoint;
  std::string data;
  std::string image, landmarks;
  std::string source, source_landmarks, target, target_landmarks;
  std::optional<uint64_t> seed;
  std::optional<int64_t> n_live, n_spoof, size, iters;
  bool dry_run = false;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what);
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Generator& load_generator(const std::string& checkpoint, std::optional<Trainer>& holder) {
  require_file(checkpoint, "--checkpoint");
  holder.emplace(Trainer::load(fs::path(checkpoint), TrainConfig{}));
  return holder->generator();
}

Tensor load_image(const std::string& path, const char* what, int64_t size) {
  require_file(path, what);
  Tensor img = read_ppm(path);
  if (img.dim(1) != size || img.dim(2) != size)
    throw DimensionError(std::string(what) + ": expected a " + std::to_string(size) + "x" + std::to_string(size) +
                         " image, got " + shape_str(img.shape()));
  return img;
}

LandmarkSet load_landmarks(const std::string& path, const char* what, int64_t size) {
  require_file(path, what);
  LandmarkSet lm = read_landmarks_csv(path);
  lm.validate(size);
  return lm;
}

std::vector<Tensor> images_of(const std::vector<SyntheticSample>& samples) {
  std::vector<Tensor> out;
  for (const auto& s : samples) out.push_back(s.image);
  return out;
}

std::vector<SyntheticSample> regenerate_all(const std::vector<ManifestEntry>& entries, int64_t size) {
  std::vector<SyntheticSample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(regenerate(e, size));
  return out;
}

LoadedDataset load_data(const std::string& dir) {
  if (dir.empty()) throw UsageError("missing --data");
  if (!fs::is_regular_file(fs::path(dir) / "manifest.csv")) throw UsageError("no dataset at " + dir);
  return load_dataset(dir);
}

int cmd_gendata(const Flags& f, std::ostream& out) {
  DatasetConfig cfg;
  if (!f.config.empty()) {
    require_file(f.config, "--config");
    cfg = parse_dataset_config(kv::read_file(f.config));
  }
  if (f.n_live) cfg.n_live = *f.n_live;
  if (f.n_spoof) cfg.n_spoof = *f.n_spoof;
  if (f.seed) cfg.seed = *f.seed;
  if (f.size) cfg.image_size = *f.size;
  cfg.validate();
  if (f.dry_run) {
    out << format_dataset_config(cfg);
    return kExitOk;
  }
  export_dataset(cfg, f.out);
  out << "wrote " << cfg.n_live + cfg.n_spoof << " samples to " << f.out << "\n";
  return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out, std::ostream& err) {
  const LoadedDataset data = load_data(f.data);
  TrainConfig cfg;
  cfg.image_size = data.config.image_size;
  if (!f.config.empty()) {
    require_file(f.config, "--config");
    cfg = parse_train_config(kv::read_file(f.config), cfg);
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.iters) cfg.total_iters = *f.iters;
  if (f.size) cfg.image_size = *f.size;
  if (cfg.image_size != data.config.image_size)
    throw UsageError("image_size " + std::to_string(cfg.image_size) + " does not match the dataset's " +
                     std::to_string(data.config.image_size));
  cfg.validate();
  if (f.dry_run) {
    out << format_train_config(cfg);
    return kExitOk;
  }

  std::optional<Trainer> trainer;
  if (!f.checkpoint.empty()) {
    require_file(f.checkpoint, "--checkpoint");
    trainer.emplace(Trainer::load(fs::path(f.checkpoint), cfg));
  } else {
    trainer.emplace(cfg);
  }
  const fs::path dir(f.out);
  fs::create_directories(dir);
  write_text(dir / "train.cfg", format_train_config(trainer->config()));

  // Rows from an earlier run in this directory are kept up to the resume point.
  const fs::path log_path = dir / "train_log.csv";
  std::string kept = log_header() + "\n";
  if (trainer->iteration() > 0 && fs::exists(log_path)) {
    std::istringstream old(kv::read_file(log_path.string()));
    std::string line;
    std::getline(old, line);
    while (std::getline(old, line))
      if (!line.empty() && std::stoll(line.substr(0, line.find(','))) < trainer->iteration()) kept += line + "\n";
  }
  write_text(log_path, kept);
  std::ofstream log(log_path, std::ios::app);

  const TrainingSet train_set(regenerate_all(data.train, cfg.image_size), cfg.image_size);
  const int64_t until = trainer->config().total_iters;
  try {
    trainer->run(
        train_set, until,
        [&](const StepStats& s) {
          log << log_line(s) << "\n" << std::flush;
          if ((s.iter + 1) % 100 == 0 || s.iter + 1 == until) out << log_line(s) << "\n" << std::flush;
        },
        [&](const Trainer& t) {
          char name[64];
          std::snprintf(name, sizeof name, "checkpoint_%06lld.ckpt", static_cast<long long>(t.iteration()));
          t.save(dir / name);
        });
  } catch (const NumericError& e) {
    err << "training aborted: " << e.what() << "\nlast finite step: " << log_header() << "\n"
        << log_line(trainer->last_stats()) << "\n";
    return kExitNumeric;
  }
  trainer->save(dir / "final.ckpt");
  out << "trained to iteration " << trainer->iteration() << "; wrote " << (dir / "final.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  const LoadedDataset data = load_data(f.data);
  std::optional<Trainer> holder;
  Generator& gen = load_generator(f.checkpoint, holder);
  const int64_t n = gen.config().image_size;
  if (n != data.config.image_size) throw UsageError("checkpoint and dataset image sizes differ");

  // alpha0 comes from the training split; metrics from the test split.
  const auto train = regenerate_all(data.train, n);
  const auto test = regenerate_all(data.test, n);
  std::vector<LabeledTerms> calib;
  const auto train_inf = infer_each(gen, images_of(train));
  for (size_t i = 0; i < train.size(); ++i) calib.push_back({train[i].label, train_inf[i].terms});
  const double alpha0 = calibrate_alpha0(calib);

  std::vector<ScoreRecord> records;
  const auto test_inf = infer_each(gen, images_of(test));
  for (size_t i = 0; i < test.size(); ++i)
    records.push_back({test[i].id, test[i].label, test[i].medium, test_inf[i].terms.combine(alpha0)});
  const MetricsReport report = roc_metrics(records);

  const fs::path dir(f.out);
  fs::create_directories(dir);
  write_text(dir / "scores.csv", format_scores_csv(records));
  write_text(dir / "report.txt", format_report_text(report, alpha0));
  write_text(dir / "report.kv", format_report_kv(report, {{"alpha0", alpha0}}));
  out << format_report_text(report, alpha0);
  return kExitOk;
}

int cmd_disentangle(const Flags& f, std::ostream& out) {
  std::optional<Trainer> holder;
  Generator& gen = load_generator(f.checkpoint, holder);
  const int64_t n = gen.config().image_size;
  const Tensor img = load_image(f.image, "--image", n);
  if (!f.landmarks.empty()) load_landmarks(f.landmarks, "--landmarks", n);

  const Inference inf = infer(gen, img);
  const TraceElements& e = inf.elems;
  const Tensor zeros = Tensor::zeros(img.shape());
  // Each element shown as its own contribution to the composed trace.
  const std::vector<std::pair<std::string, Tensor>> panels{
      {"s", trace_to_display(mul(img, e.s_color))},
      {"b", trace_to_display(add(zeros, e.b))},
      {"C", trace_to_display(resize_bilinear(e.C, n, n))},
      {"T", trace_to_display(e.T)},
      {"trace", trace_to_display(inf.trace)},
      {"live", reconstruct_live(img, e)},
  };
  const fs::path dir(f.out);
  fs::create_directories(dir);
  std::vector<Tensor> sheet;
  for (const auto& [name, panel] : panels) {
    write_ppm(dir / (name + ".ppm"), panel);
    sheet.push_back(panel);
  }
  write_ppm(dir / "sheet.ppm", contact_sheet(sheet));
  write_trace_elements((dir / "elements.bin").string(), e);
  out << "wrote " << panels.size() << " panels and sheet.ppm to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_synthesize(const Flags& f, std::ostream& out) {
  std::optional<Trainer> holder;
  Generator& gen = load_generator(f.checkpoint, holder);
  const int64_t n = gen.config().image_size;
  const Tensor source = load_image(f.source, "--source", n);
  const LandmarkSet source_lm = load_landmarks(f.source_landmarks, "--source-landmarks", n);
  const Tensor target = load_image(f.target, "--target", n);
  const LandmarkSet target_lm = load_landmarks(f.target_landmarks, "--target-landmarks", n);

  const Tensor trace = infer(gen, source).trace;
  const Tensor warped = warp_trace(trace, source_lm, target_lm);
  const Tensor synth = add(target, warped);
  const fs::path dir(f.out);
  fs::create_directories(dir);
  write_ppm(dir / "warped_trace.ppm", trace_to_display(warped));
  write_ppm(dir / "synthesized.ppm", synth);
  out << "wrote warped_trace.ppm and synthesized.ppm to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spoof trace disentanglement at desk scale", "stdn"};
  app.require_subcommand(1, 1);
  Flags f;

  auto* gendata = app.add_subcommand("gendata", "Generate a synthetic live/spoof dataset");
  gendata->add_option("--out", f.out, "Output directory")->required();
  gendata->add_option("--config", f.config, "Dataset config (key = value)");
  gendata->add_option("--n-live", f.n_live, "Live samples (train + test)");
  gendata->add_option("--n-spoof", f.n_spoof, "Spoof samples (train + test)");
  gendata->add_option("--seed", f.seed, "Dataset seed");
  gendata->add_option("--size", f.size, "Image size N");
  gendata->add_flag("--dry-run", f.dry_run, "Print the effective config only");

  auto* train = app.add_subcommand("train", "Train generator and discriminators");
  train->add_option("--data", f.data, "Dataset directory")->required();
  train->add_option("--out", f.out, "Run directory")->required();
  train->add_option("--config", f.config, "Training config (key = value)");
  train->add_option("--checkpoint", f.checkpoint, "Resume from this checkpoint");
  train->add_option("--seed", f.seed, "Training seed");
  train->add_option("--iters", f.iters, "Total iterations");
  train->add_option("--size", f.size, "Image size N");
  train->add_flag("--dry-run", f.dry_run, "Validate and print the config without training");

  auto* eval = app.add_subcommand("eval", "Score the test split and report metrics");
  eval->add_option("--data", f.data, "Dataset directory")->required();
  eval->add_option("--checkpoint", f.checkpoint, "Checkpoint")->required();
  eval->add_option("--out", f.out, "Report directory")->required();

  auto* disentangle = app.add_subcommand("disentangle", "Write trace elements and the live reconstruction");
  disentangle->add_option("--image", f.image, "Input PPM")->required();
  disentangle->add_option("--landmarks", f.landmarks, "Landmark CSV of the input");
  disentangle->add_option("--checkpoint", f.checkpoint, "Checkpoint")->required();
  disentangle->add_option("--out", f.out, "Output directory")->required();

  auto* synthesize = app.add_subcommand("synthesize", "Transfer a spoof trace onto a live face");
  synthesize->add_option("--source", f.source, "Spoof PPM")->required();
  synthesize->add_option("--source-landmarks", f.source_landmarks, "Landmark CSV of the spoof")->required();
  synthesize->add_option("--target", f.target, "Live PPM")->required();
  synthesize->add_option("--target-landmarks", f.target_landmarks, "Landmark CSV of the live face")->required();
  synthesize->add_option("--checkpoint", f.checkpoint, "Checkpoint")->required();
  synthesize->add_option("--out", f.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (gendata->parsed()) return cmd_gendata(f, out);
    if (train->parsed()) return cmd_train(f, out, err);
    if (eval->parsed()) return cmd_eval(f, out);
    if (disentangle->parsed()) return cmd_disentangle(f, out);
    return cmd_synthesize(f, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const StatisticsError& e) {
    err << "domain error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace stdn
