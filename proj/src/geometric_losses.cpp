// SPDX-License-Identifier: Apache-2.0
#include "hca/geometric_losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hca/errors.hpp"

namespace hca {

void LossConfig::validate() const {
  if (!(lambda_sk >= 0.0)) throw ConfigError("loss: lambda_sk must be >= 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("loss: beta must lie in [0, 1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("loss: alpha must lie in (0, 1]");
  if (samples < 1) throw ConfigError("loss: samples must be >= 1");
}

double mse_loss(const HeatmapStack& prediction, const HeatmapStack& target,
                const std::vector<bool>& visible, Tensor* grad) {
  const Tensor& p = prediction.values;
  const Tensor& t = target.values;
  if (!p.same_shape(t)) {
    throw InputDomainError("mse_loss: prediction " + p.shape_string() + " vs target " +
                           t.shape_string());
  }
  if (static_cast<int>(visible.size()) != p.channels()) {
    throw InputDomainError("mse_loss: visibility has " + std::to_string(visible.size()) +
                           " entries for " + std::to_string(p.channels()) + " channels");
  }
  const double norm = static_cast<double>(p.size());  // V * M
  if (grad) *grad = Tensor(p.channels(), p.height(), p.width());
  double sum = 0.0;
  for (int c = 0; c < p.channels(); ++c) {
    if (!visible[static_cast<std::size_t>(c)]) continue;
    auto pc = p.channel(c);
    auto tc = t.channel(c);
    for (std::size_t i = 0; i < pc.size(); ++i) {
      const double d = pc[i] - tc[i];
      sum += d * d;
    }
    if (grad) {
      auto gc = grad->channel(c);
      for (std::size_t i = 0; i < pc.size(); ++i) gc[i] = 2.0 * (pc[i] - tc[i]) / norm;
    }
  }
  return sum / norm;
}

Prototype prototype_from_map(const ProbabilityMap& prob, const LossConfig& config, Rng* rng,
                             PrototypeTrace* trace) {
  const Tensor& t = prob.values;
  const int W = t.width();
  Prototype out;
  out.coords.resize(static_cast<std::size_t>(t.channels()));
  out.valid.assign(static_cast<std::size_t>(t.channels()), true);
  if (trace) {
    trace->mode = config.prototype_mode;
    trace->samples = config.samples;
    trace->draws.assign(static_cast<std::size_t>(t.channels()), {});
  }
  if (config.prototype_mode == PrototypeMode::stochastic && rng == nullptr) {
    throw ConfigError("prototype_from_map: stochastic mode needs a random generator");
  }

  std::vector<double> cdf;
  for (int c = 0; c < t.channels(); ++c) {
    auto ch = t.channel(c);
    double total = 0.0;
    for (double v : ch) {
      if (!(v >= 0.0)) throw InputDomainError("prototype_from_map: negative or NaN probability");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      std::ostringstream os;
      os << "prototype_from_map: channel " << c << " sums to " << total;
      throw InputDomainError(os.str());
    }

    Point2 p{0.0, 0.0};
    if (config.prototype_mode == PrototypeMode::expectation) {
      for (std::size_t i = 0; i < ch.size(); ++i) {
        p.row += ch[i] * static_cast<double>(static_cast<int>(i) / W);
        p.col += ch[i] * static_cast<double>(static_cast<int>(i) % W);
      }
    } else {
      cdf.resize(ch.size());
      double run = 0.0;
      for (std::size_t i = 0; i < ch.size(); ++i) cdf[i] = (run += ch[i]);
      std::vector<int> draws;
      draws.reserve(static_cast<std::size_t>(config.samples));
      for (int s = 0; s < config.samples; ++s) {
        const double u = uniform01(*rng) * run;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        // skip zero-mass cells sitting on the boundary
        while (it != cdf.end() && ch[static_cast<std::size_t>(it - cdf.begin())] <= 0.0) ++it;
        if (it == cdf.end()) --it;
        const int idx = static_cast<int>(it - cdf.begin());
        draws.push_back(idx);
        p.row += idx / W;
        p.col += idx % W;
      }
      p.row /= config.samples;
      p.col /= config.samples;
      if (trace) trace->draws[static_cast<std::size_t>(c)] = std::move(draws);
    }
    out.coords[static_cast<std::size_t>(c)] = p;
  }
  return out;
}

Tensor prototype_backward(const ProbabilityMap& prob, const PrototypeTrace& trace,
                          const std::vector<Point2>& grad_coords) {
  const Tensor& t = prob.values;
  const int W = t.width();
  if (static_cast<int>(grad_coords.size()) != t.channels()) {
    throw InputDomainError("prototype_backward: gradient count mismatch");
  }
  Tensor grad(t.channels(), t.height(), t.width());
  for (int c = 0; c < t.channels(); ++c) {
    const Point2 g = grad_coords[static_cast<std::size_t>(c)];
    if (g.row == 0.0 && g.col == 0.0) continue;
    auto dst = grad.channel(c);
    if (trace.mode == PrototypeMode::expectation) {
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = g.row * static_cast<double>(static_cast<int>(i) / W) +
                 g.col * static_cast<double>(static_cast<int>(i) % W);
      }
    } else {
      auto p = t.channel(c);
      for (int idx : trace.draws[static_cast<std::size_t>(c)]) {
        const auto i = static_cast<std::size_t>(idx);
        dst[i] += (g.row * (idx / W) + g.col * (idx % W)) / (trace.samples * p[i]);
      }
    }
  }
  return grad;
}

namespace {

double distance(Point2 a, Point2 b) { return std::hypot(a.row - b.row, a.col - b.col); }

void check_sizes(const Prototype& pred, const Prototype& gt, const char* what) {
  if (pred.size() != gt.size() || pred.valid.size() != pred.coords.size() ||
      gt.valid.size() != gt.coords.size()) {
    throw InputDomainError(std::string(what) + ": prototype sizes differ");
  }
}

}  // namespace

double identity_distance_loss(const Prototype& pred, const Prototype& gt,
                              std::vector<Point2>* grad_pred) {
  check_sizes(pred, gt, "identity_distance_loss");
  const int V = pred.size();
  if (grad_pred) grad_pred->assign(static_cast<std::size_t>(V), {0.0, 0.0});
  int n = 0;
  for (int i = 0; i < V; ++i) n += pred.valid[i] && gt.valid[i];
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (int i = 0; i < V; ++i) {
    if (!(pred.valid[i] && gt.valid[i])) continue;
    const auto& p = pred.coords[static_cast<std::size_t>(i)];
    const auto& g = gt.coords[static_cast<std::size_t>(i)];
    const double d = distance(p, g);
    sum += d;
    if (grad_pred && d > 0.0) {
      (*grad_pred)[static_cast<std::size_t>(i)] = {(p.row - g.row) / (d * n),
                                                   (p.col - g.col) / (d * n)};
    }
  }
  return sum / n;
}

double pairwise_distance_loss(const Prototype& pred, const Prototype& gt, double alpha,
                              std::vector<Point2>* grad_pred, double* grad_alpha) {
  check_sizes(pred, gt, "pairwise_distance_loss");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputDomainError("pairwise_distance_loss: alpha outside (0, 1]");
  const int V = pred.size();
  if (grad_pred) grad_pred->assign(static_cast<std::size_t>(V), {0.0, 0.0});
  if (grad_alpha) *grad_alpha = 0.0;
  double sum = 0.0;
  for (int c = 0; c < V; ++c) {
    if (!(pred.valid[c] && gt.valid[c])) continue;
    for (int k = c + 1; k < V; ++k) {
      if (!(pred.valid[k] && gt.valid[k])) continue;
      const auto& pc = pred.coords[static_cast<std::size_t>(c)];
      const auto& pk = pred.coords[static_cast<std::size_t>(k)];
      const double dp = distance(pc, pk);
      const double dg = distance(gt.coords[static_cast<std::size_t>(c)],
                                 gt.coords[static_cast<std::size_t>(k)]);
      const double weight = std::pow(alpha, k - c);
      const double diff = dp - dg;
      sum += weight * diff * diff;
      if (grad_alpha) *grad_alpha += (k - c) * std::pow(alpha, k - c - 1) * diff * diff;
      if (grad_pred && dp > 0.0) {
        const double s = 2.0 * weight * diff / dp;
        const Point2 g{s * (pc.row - pk.row), s * (pc.col - pk.col)};
        auto& gc = (*grad_pred)[static_cast<std::size_t>(c)];
        auto& gk = (*grad_pred)[static_cast<std::size_t>(k)];
        gc.row += g.row;
        gc.col += g.col;
        gk.row -= g.row;
        gk.col -= g.col;
      }
    }
  }
  return sum;
}

double skeleton_loss(const std::vector<HeatmapStack>& intermediates, const KeypointSet& gt,
                     const LossConfig& config, Rng* rng, SkeletonGradients* grads) {
  if (intermediates.empty()) throw InputDomainError("skeleton_loss: no intermediate predictions");
  if (gt.coords.size() != gt.visible.size()) {
    throw InputDomainError("skeleton_loss: keypoint coords and visibility differ in length");
  }
  const Prototype target{gt.coords, gt.visible};
  if (grads) {
    grads->intermediates.clear();
    grads->alpha = 0.0;
  }
  double total = 0.0;
  for (const auto& stack : intermediates) {
    if (stack.discs() != gt.size()) {
      throw InputDomainError("skeleton_loss: " + std::to_string(stack.discs()) +
                             " channels for " + std::to_string(gt.size()) + " discs");
    }
    const ProbabilityMap prob = softmax_probability(stack);
    PrototypeTrace trace;
    Prototype pred = prototype_from_map(prob, config, rng, grads ? &trace : nullptr);
    pred.valid = gt.visible;

    std::vector<Point2> g_id, g_pd;
    double g_alpha = 0.0;
    const double l_id = identity_distance_loss(pred, target, grads ? &g_id : nullptr);
    const double l_pd = pairwise_distance_loss(pred, target, config.alpha,
                                               grads ? &g_pd : nullptr, grads ? &g_alpha : nullptr);
    total += config.beta * l_id + (1.0 - config.beta) * l_pd;

    if (grads) {
      std::vector<Point2> g(g_id.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = {config.beta * g_id[i].row + (1.0 - config.beta) * g_pd[i].row,
                config.beta * g_id[i].col + (1.0 - config.beta) * g_pd[i].col};
      }
      grads->intermediates.push_back(softmax_backward(prob, prototype_backward(prob, trace, g)));
      grads->alpha += (1.0 - config.beta) * g_alpha;
    }
  }
  return total;
}

LossBreakdown total_loss(const NetworkOutput& prediction, const HeatmapStack& target,
                         const KeypointSet& gt, const LossConfig& config, Rng* rng,
                         LossGradients* grads) {
  LossBreakdown out;
  out.mse = mse_loss(prediction.fused, target, gt.visible, grads ? &grads->output.fused : nullptr);
  if (grads) {
    grads->output.intermediates.clear();
    grads->alpha = 0.0;
  }
  if (config.lambda_sk > 0.0) {
    SkeletonGradients sk;
    out.skeleton = skeleton_loss(prediction.intermediates, gt, config, rng, grads ? &sk : nullptr);
    if (grads) {
      for (auto& g : sk.intermediates) {
        for (auto& v : g.values()) v *= config.lambda_sk;
        grads->output.intermediates.push_back(std::move(g));
      }
      grads->alpha = config.lambda_sk * sk.alpha;
    }
  }
  out.total = out.mse + config.lambda_sk * out.skeleton;
  return out;
}

}  // namespace hca
