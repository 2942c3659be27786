// SPDX-License-Identifier: Apache-2.0
#include "hca/evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "hca/errors.hpp"
#include "hca/spine_data.hpp"

namespace hca {

SampleScore score_sample(const HeatmapStack& prediction, const KeypointSet& gt, double threshold,
                         double scale_to_image) {
  if (prediction.discs() != kDiscCount || gt.size() != kDiscCount) {
    throw InputDomainError("score_sample: expected " + std::to_string(kDiscCount) +
                           " discs, got prediction " + std::to_string(prediction.discs()) +
                           " / ground truth " + std::to_string(gt.size()));
  }
  const KeypointSet detected = decode_peaks(prediction, threshold);
  SampleScore score;
  score.discs.resize(kDiscCount);
  for (std::size_t i = 0; i < score.discs.size(); ++i) {
    const bool truth = gt.visible[i];
    const bool found = detected.visible[i];
    auto& d = score.discs[i];
    if (truth && found) {
      d.outcome = DiscOutcome::matched;
      const Point2 p = detected.coords[i];
      d.distance_mm = std::hypot(p.row * scale_to_image - gt.coords[i].row,
                                 p.col * scale_to_image - gt.coords[i].col) *
                      gt.spacing_mm;
    } else if (truth) {
      d.outcome = DiscOutcome::false_negative;
    } else if (found) {
      d.outcome = DiscOutcome::false_positive;
    } else {
      d.outcome = DiscOutcome::true_negative;
    }
  }
  return score;
}

MetricsReport aggregate(const std::vector<SampleScore>& records, double threshold) {
  if (records.empty()) throw InputDomainError("aggregate: no records");
  MetricsReport r;
  r.threshold = threshold;
  r.n_samples = static_cast<int>(records.size());
  r.per_disc.resize(kDiscCount);
  std::vector<double> disc_sums(kDiscCount, 0.0);
  std::vector<double> distances;
  long matched = 0, fn = 0, fp = 0, negatives = 0;
  for (const auto& rec : records) {
    if (rec.discs.size() != static_cast<std::size_t>(kDiscCount)) {
      throw InputDomainError("aggregate: record with wrong disc count");
    }
    for (std::size_t i = 0; i < rec.discs.size(); ++i) {
      const auto& d = rec.discs[i];
      auto& pd = r.per_disc[i];
      switch (d.outcome) {
        case DiscOutcome::matched:
          ++matched;
          ++pd.count;
          distances.push_back(d.distance_mm);
          disc_sums[i] += d.distance_mm;
          break;
        case DiscOutcome::false_negative:
          ++fn;
          ++pd.fn_count;
          break;
        case DiscOutcome::false_positive:
          ++fp;
          ++negatives;
          ++pd.fp_count;
          break;
        case DiscOutcome::true_negative:
          ++negatives;
          break;
      }
    }
  }
  if (matched > 0) {
    double sum = 0.0;
    for (double d : distances) sum += d;
    const double mean = sum / matched;
    double var = 0.0;
    for (double d : distances) var += (d - mean) * (d - mean);
    r.dtt_mean_mm = mean;
    r.dtt_std_mm = std::sqrt(var / matched);
  }
  for (std::size_t i = 0; i < r.per_disc.size(); ++i) {
    if (r.per_disc[i].count > 0) r.per_disc[i].dtt_mean_mm = disc_sums[i] / r.per_disc[i].count;
  }
  r.fnr_pct = (matched + fn) > 0 ? 100.0 * fn / (matched + fn) : 0.0;
  r.fpr_pct = negatives > 0 ? 100.0 * fp / negatives : 0.0;
  return r;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json per_disc = nlohmann::json::array();
  for (const auto& d : report.per_disc) {
    per_disc.push_back({{"count", d.count},
                        {"dtt_mean_mm", optional_json(d.dtt_mean_mm)},
                        {"fn_count", d.fn_count},
                        {"fp_count", d.fp_count}});
  }
  return {{"dtt_mean_mm", optional_json(report.dtt_mean_mm)},
          {"dtt_std_mm", optional_json(report.dtt_std_mm)},
          {"fnr_pct", report.fnr_pct},
          {"fpr_pct", report.fpr_pct},
          {"per_disc", per_disc},
          {"n_samples", report.n_samples},
          {"threshold", report.threshold}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.dtt_mean_mm = optional_from(j.at("dtt_mean_mm"));
  r.dtt_std_mm = optional_from(j.at("dtt_std_mm"));
  r.fnr_pct = j.at("fnr_pct").get<double>();
  r.fpr_pct = j.at("fpr_pct").get<double>();
  r.n_samples = j.at("n_samples").get<int>();
  r.threshold = j.at("threshold").get<double>();
  for (const auto& d : j.at("per_disc")) {
    r.per_disc.push_back({d.at("count").get<int>(), optional_from(d.at("dtt_mean_mm")),
                          d.at("fn_count").get<int>(), d.at("fp_count").get<int>()});
  }
  return r;
}

std::string format_table(const MetricsReport& report, const std::string& method) {
  char dtt[64];
  if (report.dtt_mean_mm) {
    std::snprintf(dtt, sizeof dtt, "%.2f(±%.2f)", *report.dtt_mean_mm, report.dtt_std_mm.value_or(0.0));
  } else {
    std::snprintf(dtt, sizeof dtt, "n/a");
  }
  char line[256];
  std::ostringstream os;
  std::snprintf(line, sizeof line, "%-24s | %-16s | %-8s | %-8s\n", "Method", "DTT (mm)", "FNR (%)", "FPR (%)");
  os << line;
  os << std::string(24, '-') << "-+-" << std::string(16, '-') << "-+-" << std::string(8, '-')
     << "-+-" << std::string(8, '-') << '\n';
  // "±" is two bytes in UTF-8; widen the field so columns still line up
  std::snprintf(line, sizeof line, "%-24s | %-*s | %-8.2f | %-8.2f\n", method.c_str(),
                report.dtt_mean_mm ? 17 : 16, dtt, report.fnr_pct, report.fpr_pct);
  os << line;
  os << "samples: " << report.n_samples << ", threshold: " << report.threshold << '\n';
  return os.str();
}

}  // namespace hca
