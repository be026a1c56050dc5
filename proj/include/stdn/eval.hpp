// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stdn/labels.hpp"
#include "stdn/tensor.hpp"

namespace stdn {

struct ScoreRecord {
  std::string id;
  Label label = Label::kLive;
  std::optional<Medium> medium;
  double score = 0.0;
};

/// The two halves of the spoof score before weighting:
///   map_term   = ||M||_1 / (2 K^2)
///   trace_term = ||G(I)||_1 / (2 * 3 N^2)
struct ScoreTerms {
  double map_term = 0.0;
  double trace_term = 0.0;
  double combine(double alpha0) const { return map_term + alpha0 * trace_term; }
};

/// m: one spoof map [K,K], [K,K,1] or [1,K,K,1]; trace: [N,N,3] or
/// [1,N,N,3].
ScoreTerms score_terms(const Tensor& m, const Tensor& trace);
double score(const Tensor& m, const Tensor& trace, double alpha0);

struct LabeledTerms {
  Label label = Label::kLive;
  ScoreTerms terms;
};

/// 10^(-3 + k/4), k = 0..16.
std::vector<double> alpha0_grid();

/// Grid value with the lowest EER; ties go to the smallest alpha0.
/// DomainError unless both classes are present.
double calibrate_alpha0(std::span<const LabeledTerms> records);

struct MetricsReport {
  double eer = 0.0;
  double threshold = 0.0;  // EER threshold, or the fixed one when given
  double apcer = 0.0;      // spoofs scored below threshold
  double bpcer = 0.0;      // lives scored at or above threshold
  double acer = 0.0;
  double tdr_at_fdr = 0.0;
};

inline constexpr double kTargetFdr = 0.005;

/// A score >= threshold is called spoof. The EER is found on the sweep over
/// every distinct score plus one sentinel above the maximum, interpolating
/// linearly between the last operating point with APCER < BPCER and the
/// first with APCER >= BPCER. TDR@FDR is the true detection rate at the
/// lowest swept threshold whose false detection rate is <= kTargetFdr.
/// DomainError unless both classes are present or if a score is not finite.
MetricsReport roc_metrics(std::span<const ScoreRecord> records, std::optional<double> fixed_threshold = {});

/// Error rates at one threshold.
struct ErrorRates {
  double apcer = 0.0;
  double bpcer = 0.0;
};
ErrorRates error_rates(std::span<const ScoreRecord> records, double threshold);

struct MediumClassifierOptions {
  uint64_t seed = 0;
  int epochs = 60;
  int batch_size = 16;
  double lr = 3e-3;
};

/// Trains a small conv classifier (3 stride-2 conv blocks, global average
/// pool, linear head) on images [1,N,N,3] tagged with media and returns the
/// accuracy on the test images. Inputs are standardized per channel with
/// training-set statistics. DomainError when either split is empty or the
/// training split has fewer than two media.
double medium_classify(const std::vector<Tensor>& train_inputs, const std::vector<Medium>& train_media,
                       const std::vector<Tensor>& test_inputs, const std::vector<Medium>& test_media,
                       const MediumClassifierOptions& opts = {});

/// CSV `id,label,medium,score` with shortest round-trip scores.
std::string format_scores_csv(std::span<const ScoreRecord> records);
/// `key = value` lines: eer, threshold, apcer, bpcer, acer, tdr_at_fdr and
/// the extra pairs given.
std::string format_report_kv(const MetricsReport& r,
                             const std::vector<std::pair<std::string, double>>& extra = {});
std::string format_report_text(const MetricsReport& r, double alpha0);

}  // namespace stdn
