// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "kv.hpp"
#include "stdn/errors.hpp"
#include "stdn/models.hpp"
#include "stdn/ops.hpp"
#include "stdn/optim.hpp"

namespace stdn {

namespace {

double l1(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += std::abs(v);
  return s;
}

}  // namespace

ScoreTerms score_terms(const Tensor& m, const Tensor& trace) {
  const bool map_ok = (m.rank() == 2 && m.dim(0) == m.dim(1)) ||
                      (m.rank() == 3 && m.dim(0) == m.dim(1) && m.dim(2) == 1) ||
                      (m.rank() == 4 && m.dim(0) == 1 && m.dim(1) == m.dim(2) && m.dim(3) == 1);
  if (!map_ok) throw DimensionError("score: spoof map must be one [K,K] map, got " + shape_str(m.shape()));
  const bool trace_ok = (trace.rank() == 3 && trace.dim(0) == trace.dim(1) && trace.dim(2) == 3) ||
                        (trace.rank() == 4 && trace.dim(0) == 1 && trace.dim(1) == trace.dim(2) && trace.dim(3) == 3);
  if (!trace_ok) throw DimensionError("score: trace must be one [N,N,3] image, got " + shape_str(trace.shape()));
  return {l1(m) / (2.0 * static_cast<double>(m.numel())), l1(trace) / (2.0 * static_cast<double>(trace.numel()))};
}

double score(const Tensor& m, const Tensor& trace, double alpha0) { return score_terms(m, trace).combine(alpha0); }

std::vector<double> alpha0_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 16; ++k) g.push_back(std::pow(10.0, -3.0 + 0.25 * k));
  return g;
}

double calibrate_alpha0(std::span<const LabeledTerms> records) {
  std::vector<ScoreRecord> scored(records.size());
  for (size_t i = 0; i < records.size(); ++i) scored[i].label = records[i].label;
  double best_alpha = 0.0, best_eer = std::numeric_limits<double>::infinity();
  for (double a : alpha0_grid()) {
    for (size_t i = 0; i < records.size(); ++i) scored[i].score = records[i].terms.combine(a);
    const double eer = roc_metrics(scored).eer;
    if (eer < best_eer) {
      best_eer = eer;
      best_alpha = a;
    }
  }
  return best_alpha;
}

namespace {

struct SortedScores {
  std::vector<double> live, spoof;

  explicit SortedScores(std::span<const ScoreRecord> records) {
    for (const auto& r : records) {
      if (!std::isfinite(r.score)) throw DomainError("roc: non-finite score for " + r.id);
      (r.label == Label::kLive ? live : spoof).push_back(r.score);
    }
    if (live.empty() || spoof.empty()) throw DomainError("roc: both live and spoof records are required");
    std::sort(live.begin(), live.end());
    std::sort(spoof.begin(), spoof.end());
  }

  ErrorRates at(double t) const {
    const auto below = [](const std::vector<double>& v, double t) {
      return static_cast<double>(std::lower_bound(v.begin(), v.end(), t) - v.begin());
    };
    return {below(spoof, t) / static_cast<double>(spoof.size()),
            (static_cast<double>(live.size()) - below(live, t)) / static_cast<double>(live.size())};
  }
};

double sentinel_above(double max) {
  double s = max + 1.0;
  return s > max ? s : std::nextafter(max, std::numeric_limits<double>::infinity());
}

}  // namespace

ErrorRates error_rates(std::span<const ScoreRecord> records, double threshold) {
  return SortedScores(records).at(threshold);
}

MetricsReport roc_metrics(std::span<const ScoreRecord> records, std::optional<double> fixed_threshold) {
  const SortedScores sorted(records);
  std::vector<double> thresholds;
  thresholds.reserve(records.size() + 1);
  for (const auto& r : records) thresholds.push_back(r.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(sentinel_above(thresholds.back()));

  std::vector<ErrorRates> ops;
  ops.reserve(thresholds.size());
  for (double t : thresholds) ops.push_back(sorted.at(t));

  MetricsReport rep;
  // APCER - BPCER runs from -1 at the lowest threshold to +1 at the sentinel.
  size_t k = 0;
  while (ops[k].apcer - ops[k].bpcer < 0.0) ++k;
  const double dk = ops[k].apcer - ops[k].bpcer;
  if (dk == 0.0) {
    rep.eer = ops[k].apcer;
    rep.threshold = thresholds[k];
  } else {
    const double dp = ops[k - 1].apcer - ops[k - 1].bpcer;
    const double lambda = -dp / (dk - dp);
    rep.eer = ops[k - 1].apcer + lambda * (ops[k].apcer - ops[k - 1].apcer);
    rep.threshold = thresholds[k - 1] + lambda * (thresholds[k] - thresholds[k - 1]);
  }
  if (fixed_threshold) rep.threshold = *fixed_threshold;
  const ErrorRates at = sorted.at(rep.threshold);
  rep.apcer = at.apcer;
  rep.bpcer = at.bpcer;
  rep.acer = (rep.apcer + rep.bpcer) / 2.0;

  for (size_t i = 0; i < ops.size(); ++i)
    if (ops[i].bpcer <= kTargetFdr) {
      rep.tdr_at_fdr = 1.0 - ops[i].apcer;
      break;
    }
  return rep;
}

namespace {

struct MediumNet {
  std::array<ConvLayer, 3> convs;
  Tensor w, bias;

  MediumNet(std::mt19937_64& rng, int64_t classes) {
    const int64_t widths[4] = {3, 8, 16, 32};
    for (size_t i = 0; i < convs.size(); ++i) {
      convs[i] = ConvLayer(3, widths[i], widths[i + 1], 2);
      std::normal_distribution<double> he(0.0, std::sqrt(2.0 / (9.0 * static_cast<double>(widths[i]))));
      for (auto& v : convs[i].kernel.data()) v = he(rng);
    }
    w = Tensor::zeros({32, classes}, true);
    std::normal_distribution<double> lin(0.0, 1.0 / std::sqrt(32.0));
    for (auto& v : w.data()) v = lin(rng);
    bias = Tensor::zeros({classes}, true);
  }

  Tensor forward(const Tensor& x) const {
    Tensor h = x;
    for (const auto& c : convs) h = leaky_relu(c.forward(h), 0.2);
    h = global_avg_pool(h);
    return bias_add(matmul(reshape(h, {h.dim(0), h.dim(3)}), w), bias);
  }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> p;
    for (const auto& c : convs) {
      p.push_back(c.kernel);
      p.push_back(c.bias);
    }
    p.push_back(w);
    p.push_back(bias);
    return p;
  }
};

}  // namespace

double medium_classify(const std::vector<Tensor>& train_inputs, const std::vector<Medium>& train_media,
                       const std::vector<Tensor>& test_inputs, const std::vector<Medium>& test_media,
                       const MediumClassifierOptions& opts) {
  if (train_inputs.empty() || test_inputs.empty()) throw DomainError("medium_classify: empty split");
  if (train_inputs.size() != train_media.size() || test_inputs.size() != test_media.size())
    throw DimensionError("medium_classify: inputs and tags differ in length");
  if (std::set<Medium>(train_media.begin(), train_media.end()).size() < 2)
    throw DomainError("medium_classify: training split needs at least two media");

  const Shape shape = train_inputs.front().shape();
  if (shape.size() != 4 || shape[0] != 1 || shape[3] != 3)
    throw DimensionError("medium_classify: inputs must be [1,N,N,3]");
  for (const auto* set : {&train_inputs, &test_inputs})
    for (const auto& t : *set)
      if (t.shape() != shape) throw DimensionError("medium_classify: inputs differ in shape");

  // Per-channel standardization from the training split.
  std::array<double, 3> mu{}, sd{};
  for (const auto& t : train_inputs)
    for (size_t i = 0; i < t.values().size(); ++i) mu[i % 3] += t.values()[i];
  const double count = static_cast<double>(train_inputs.size() * train_inputs.front().values().size() / 3);
  for (auto& m : mu) m /= count;
  for (const auto& t : train_inputs)
    for (size_t i = 0; i < t.values().size(); ++i) sd[i % 3] += std::pow(t.values()[i] - mu[i % 3], 2);
  for (auto& s : sd) s = std::sqrt(s / count) + 1e-8;
  auto standardize = [&](const std::vector<Tensor>& in, const std::vector<size_t>& idx) {
    std::vector<double> v;
    for (size_t i : idx)
      for (size_t j = 0; j < in[i].values().size(); ++j) v.push_back((in[i].values()[j] - mu[j % 3]) / sd[j % 3]);
    return Tensor::from({static_cast<int64_t>(idx.size()), shape[1], shape[2], 3}, std::move(v));
  };

  std::mt19937_64 rng(opts.seed);
  MediumNet net(rng, kMediumCount);
  Adam opt(net.parameters(), AdamConfig{0.9, 0.999, 1e-8});
  std::vector<size_t> order(train_inputs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t b = 0; b < order.size(); b += static_cast<size_t>(opts.batch_size)) {
      std::vector<size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                              order.begin() + static_cast<std::ptrdiff_t>(
                                                  std::min(order.size(), b + static_cast<size_t>(opts.batch_size))));
      std::vector<int> labels;
      for (size_t i : idx) labels.push_back(static_cast<int>(train_media[i]));
      Tensor loss = softmax_cross_entropy(net.forward(standardize(train_inputs, idx)), labels);
      if (!std::isfinite(loss.item())) throw NumericError("medium_classify: non-finite loss");
      opt.zero_grad();
      loss.backward();
      opt.step(opts.lr);
    }
  }

  std::vector<size_t> all(test_inputs.size());
  std::iota(all.begin(), all.end(), 0);
  const Tensor logits = net.forward(standardize(test_inputs, all));
  const int64_t k = logits.dim(1);
  size_t correct = 0;
  for (size_t i = 0; i < all.size(); ++i) {
    const double* row = logits.values().data() + static_cast<int64_t>(i) * k;
    const auto pred = std::max_element(row, row + k) - row;
    if (pred == static_cast<int>(test_media[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(all.size());
}

std::string format_scores_csv(std::span<const ScoreRecord> records) {
  std::ostringstream os;
  os << "id,label,medium,score\n";
  for (const auto& r : records)
    os << r.id << "," << to_string(r.label) << "," << (r.medium ? to_string(*r.medium) : std::string_view("none"))
       << "," << kv::format(r.score) << "\n";
  return os.str();
}

std::string format_report_kv(const MetricsReport& r, const std::vector<std::pair<std::string, double>>& extra) {
  std::ostringstream os;
  os << "eer = " << kv::format(r.eer) << "\n"
     << "threshold = " << kv::format(r.threshold) << "\n"
     << "apcer = " << kv::format(r.apcer) << "\n"
     << "bpcer = " << kv::format(r.bpcer) << "\n"
     << "acer = " << kv::format(r.acer) << "\n"
     << "tdr_at_fdr = " << kv::format(r.tdr_at_fdr) << "\n";
  for (const auto& [k, v] : extra) os << k << " = " << kv::format(v) << "\n";
  return os.str();
}

std::string format_report_text(const MetricsReport& r, double alpha0) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "alpha0      %.6g\nEER         %.2f%%  (threshold %.6g)\nAPCER       %.2f%%\nBPCER       %.2f%%\n"
                "ACER        %.2f%%\nTDR@FDR=0.5%% %.2f%%\n",
                alpha0, 100 * r.eer, r.threshold, 100 * r.apcer, 100 * r.bpcer, 100 * r.acer, 100 * r.tdr_at_fdr);
  return buf;
}

}  // namespace stdn
