// SPDX-License-Identifier: Apache-2.0
#include "hca/heatmap_codec.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hca/errors.hpp"

namespace hca {

int KeypointSet::visible_count() const {
  return static_cast<int>(std::count(visible.begin(), visible.end(), true));
}

void KeypointSet::validate(int height, int width) const {
  if (coords.size() != visible.size()) {
    throw InputDomainError("keypoints: coords and visibility lengths differ");
  }
  if (!(spacing_mm > 0.0)) throw InputDomainError("keypoints: spacing_mm must be positive");
  for (int i = 0; i < size(); ++i) {
    if (!visible[i]) continue;
    const auto& p = coords[i];
    if (!(p.row >= 0.0 && p.row <= height - 1 && p.col >= 0.0 && p.col <= width - 1)) {
      std::ostringstream os;
      os << "keypoint " << i << " (" << p.row << ", " << p.col << ") outside " << height << "x"
         << width;
      throw InputDomainError(os.str());
    }
  }
}

KeypointSet KeypointSet::scaled(double factor) const {
  KeypointSet out = *this;
  for (int i = 0; i < size(); ++i) {
    if (visible[i]) out.coords[i] = {coords[i].row * factor, coords[i].col * factor};
  }
  out.spacing_mm = spacing_mm / factor;
  return out;
}

HeatmapStack encode_heatmaps(const KeypointSet& keypoints, int height, int width, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("encode_heatmaps: sigma must be positive");
  if (height <= 0 || width <= 0) throw InputDomainError("encode_heatmaps: empty grid");
  keypoints.validate(height, width);

  HeatmapStack out{Tensor(keypoints.size(), height, width), HeatmapRole::target};
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int i = 0; i < keypoints.size(); ++i) {
    if (!keypoints.visible[i]) continue;
    const double cr = std::floor(keypoints.coords[i].row + 0.5);
    const double cc = std::floor(keypoints.coords[i].col + 0.5);
    auto ch = out.values.channel(i);
    for (int y = 0; y < height; ++y) {
      const double dy2 = (y - cr) * (y - cr);
      for (int x = 0; x < width; ++x) {
        ch[static_cast<std::size_t>(y) * width + x] = std::exp(-(dy2 + (x - cc) * (x - cc)) * inv);
      }
    }
  }
  return out;
}

ProbabilityMap softmax_probability(const HeatmapStack& prediction) {
  const Tensor& in = prediction.values;
  ProbabilityMap out{Tensor(in.channels(), in.height(), in.width())};
  for (int c = 0; c < in.channels(); ++c) {
    auto src = in.channel(c);
    auto dst = out.values.channel(c);
    double peak = -INFINITY;
    for (double v : src) {
      if (!std::isfinite(v)) throw NumericInputError("softmax_probability: non-finite input");
      peak = std::max(peak, v);
    }
    double sum = 0.0;
    for (std::size_t p = 0; p < src.size(); ++p) {
      dst[p] = std::exp(src[p] - peak);
      sum += dst[p];
    }
    for (double& v : dst) v /= sum;
  }
  return out;
}

Tensor softmax_backward(const ProbabilityMap& prob, const Tensor& grad_prob) {
  if (!prob.values.same_shape(grad_prob)) throw InputDomainError("softmax_backward: shape mismatch");
  Tensor grad(grad_prob.channels(), grad_prob.height(), grad_prob.width());
  for (int c = 0; c < grad.channels(); ++c) {
    auto p = prob.values.channel(c);
    auto g = grad_prob.channel(c);
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * g[i];
    auto out = grad.channel(c);
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * (g[i] - dot);
  }
  return grad;
}

KeypointSet decode_peaks(const HeatmapStack& prediction, double threshold) {
  if (threshold < 0.0) throw InputDomainError("decode_peaks: negative threshold");
  const Tensor& t = prediction.values;
  KeypointSet out;
  out.coords.assign(t.channels(), kInvisiblePoint);
  out.visible.assign(t.channels(), false);
  for (int c = 0; c < t.channels(); ++c) {
    auto ch = t.channel(c);
    if (ch.empty()) continue;
    // first occurrence in row-major order == smallest row, then smallest col
    const auto it = std::max_element(ch.begin(), ch.end());
    if (*it >= threshold) {
      const auto idx = static_cast<int>(it - ch.begin());
      out.coords[c] = {static_cast<double>(idx / t.width()), static_cast<double>(idx % t.width())};
      out.visible[c] = true;
    }
  }
  return out;
}

std::vector<double> channel_peaks(const HeatmapStack& prediction) {
  std::vector<double> peaks;
  for (int c = 0; c < prediction.discs(); ++c) {
    auto ch = prediction.values.channel(c);
    peaks.push_back(ch.empty() ? 0.0 : *std::max_element(ch.begin(), ch.end()));
  }
  return peaks;
}

}  // namespace hca
