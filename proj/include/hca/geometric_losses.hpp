// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "hca/hca_network.hpp"
#include "hca/heatmap_codec.hpp"
#include "hca/random.hpp"

namespace hca {

enum class PrototypeMode { expectation, stochastic };

struct LossConfig {
  double lambda_sk = 2e-4;
  double beta = 0.75;
  double alpha = 0.8;
  int samples = 10;
  PrototypeMode prototype_mode = PrototypeMode::expectation;
  bool alpha_learnable = false;

  /// Throws ConfigError: lambda >= 0, beta in [0,1], alpha in (0,1], T >= 1.
  void validate() const;

  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

/// Expected (or sampled) disc location per channel, in heatmap pixels.
struct Prototype {
  std::vector<Point2> coords;
  std::vector<bool> valid;

  int size() const { return static_cast<int>(coords.size()); }
};

/// Pixel draws kept by stochastic mode for the backward pass.
struct PrototypeTrace {
  PrototypeMode mode = PrototypeMode::expectation;
  int samples = 1;
  std::vector<std::vector<int>> draws;  // per channel, flat pixel indices
};

/// (1/(V*M)) * sum over visible channels of squared error. Invisible channels
/// add nothing but stay in the normalization.
double mse_loss(const HeatmapStack& prediction, const HeatmapStack& target,
                const std::vector<bool>& visible, Tensor* grad = nullptr);

/// Expectation mode: soft-argmax. Stochastic mode: mean of config.samples
/// multinomial draws per channel; needs `rng`.
Prototype prototype_from_map(const ProbabilityMap& prob, const LossConfig& config,
                             Rng* rng = nullptr, PrototypeTrace* trace = nullptr);

/// dL/dP from dL/d(coords). Stochastic mode routes the gradient through the
/// probabilities of the drawn pixels only (unbiased for the expectation mode
/// gradient).
Tensor prototype_backward(const ProbabilityMap& prob, const PrototypeTrace& trace,
                          const std::vector<Point2>& grad_coords);

/// Sum over jointly valid pairs c < k of alpha^(k-c) (|V_c - V_k| - |G_c - G_k|)^2.
/// `grad_pred` receives dPD/dV (zero for invalid discs), `grad_alpha` dPD/dalpha.
double pairwise_distance_loss(const Prototype& pred, const Prototype& gt, double alpha,
                              std::vector<Point2>* grad_pred = nullptr,
                              double* grad_alpha = nullptr);

/// Mean over valid discs of |V_i - G_i|.
double identity_distance_loss(const Prototype& pred, const Prototype& gt,
                              std::vector<Point2>* grad_pred = nullptr);

struct SkeletonGradients {
  std::vector<Tensor> intermediates;
  double alpha = 0.0;
};

/// Sum over stacks of beta * L_id + (1 - beta) * L_pd. `gt` must be expressed
/// in heatmap pixels.
double skeleton_loss(const std::vector<HeatmapStack>& intermediates, const KeypointSet& gt,
                     const LossConfig& config, Rng* rng = nullptr,
                     SkeletonGradients* grads = nullptr);

struct LossBreakdown {
  double total = 0.0;
  double mse = 0.0;
  double skeleton = 0.0;
};

struct LossGradients {
  OutputGradients output;
  double alpha = 0.0;
};

/// mse_loss(fused, target) + lambda * skeleton_loss(intermediates, gt).
/// `gt` in heatmap pixels. When lambda == 0 the skeleton term is skipped.
LossBreakdown total_loss(const NetworkOutput& prediction, const HeatmapStack& target,
                         const KeypointSet& gt, const LossConfig& config, Rng* rng = nullptr,
                         LossGradients* grads = nullptr);

}  // namespace hca
