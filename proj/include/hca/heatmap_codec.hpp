// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "hca/tensor.hpp"

namespace hca {

/// Disc position in pixels. Invisible discs carry the (-1, -1) sentinel.
struct Point2 {
  double row = 0.0;
  double col = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline constexpr Point2 kInvisiblePoint{-1.0, -1.0};
inline constexpr double kDefaultSigma = 2.0;

/// V disc coordinates plus visibility flags and isotropic pixel spacing.
struct KeypointSet {
  std::vector<Point2> coords;
  std::vector<bool> visible;
  double spacing_mm = 1.0;

  int size() const { return static_cast<int>(coords.size()); }
  int visible_count() const;

  /// Throws InputDomainError unless sizes agree, spacing > 0 and every visible
  /// point is inside a height x width grid.
  void validate(int height, int width) const;

  /// Same points with coordinates multiplied by `factor` (spacing is divided).
  KeypointSet scaled(double factor) const;
};

enum class HeatmapRole { target, prediction };

/// V x H x W stack; one channel per disc.
struct HeatmapStack {
  Tensor values;
  HeatmapRole role = HeatmapRole::prediction;

  int discs() const { return values.channels(); }
  int height() const { return values.height(); }
  int width() const { return values.width(); }
};

/// Per-channel normalized distribution over the M = H*W pixels.
struct ProbabilityMap {
  Tensor values;

  int discs() const { return values.channels(); }
  int pixels() const { return values.height() * values.width(); }
};

/// Gaussian target per visible disc, centered on the nearest pixel so the
/// channel peak is exactly 1.0; invisible channels are zero.
HeatmapStack encode_heatmaps(const KeypointSet& keypoints, int height, int width,
                             double sigma = kDefaultSigma);

/// Per-channel softmax with max-subtraction.
ProbabilityMap softmax_probability(const HeatmapStack& prediction);

/// Backpropagates dL/dP through softmax_probability to dL/d(prediction).
Tensor softmax_backward(const ProbabilityMap& prob, const Tensor& grad_prob);

/// Argmax per channel; ties resolve to the smallest row, then smallest column.
/// Channels whose maximum is below `threshold` decode as invisible.
KeypointSet decode_peaks(const HeatmapStack& prediction, double threshold);

/// Peak value of each channel (used for confidence reporting).
std::vector<double> channel_peaks(const HeatmapStack& prediction);

}  // namespace hca
