// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hca/heatmap_codec.hpp"

namespace hca {

inline constexpr double kDefaultThreshold = 0.25;

enum class DiscOutcome { matched, false_negative, false_positive, true_negative };

struct DiscScore {
  DiscOutcome outcome = DiscOutcome::true_negative;
  double distance_mm = 0.0;  // only meaningful when matched
};

struct SampleScore {
  std::vector<DiscScore> discs;
};

/// Scores one prediction against ground truth. `gt` is in image pixels with
/// spacing_mm per image pixel; decoded peaks are multiplied by
/// `scale_to_image` (image px per heatmap px) before measuring.
SampleScore score_sample(const HeatmapStack& prediction, const KeypointSet& gt, double threshold,
                         double scale_to_image);

struct DiscMetrics {
  int count = 0;  // matched detections
  std::optional<double> dtt_mean_mm;
  int fn_count = 0;
  int fp_count = 0;
};

struct MetricsReport {
  std::optional<double> dtt_mean_mm;
  std::optional<double> dtt_std_mm;
  double fnr_pct = 0.0;
  double fpr_pct = 0.0;
  std::vector<DiscMetrics> per_disc;
  int n_samples = 0;
  double threshold = kDefaultThreshold;
};

/// Pools matched distances across samples (population std). A rate whose
/// denominator is zero is reported as 0. Throws InputDomainError on no records.
MetricsReport aggregate(const std::vector<SampleScore>& records, double threshold);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

/// Table with DTT (mm) / FNR (%) / FPR (%) columns, "mean(±std)" DTT cell.
std::string format_table(const MetricsReport& report, const std::string& method);

}  // namespace hca
