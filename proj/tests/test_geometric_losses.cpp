// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hca/errors.hpp"
#include "hca/geometric_losses.hpp"
#include "oracles.hpp"

using namespace hca;

namespace {

HeatmapStack stack(Tensor t) { return {std::move(t), HeatmapRole::prediction}; }

ProbabilityMap map_from(const Tensor& weights) {
  ProbabilityMap p{weights};
  for (int c = 0; c < p.values.channels(); ++c) {
    double s = 0.0;
    for (double v : p.values.channel(c)) s += v;
    for (double& v : p.values.channel(c)) v /= s;
  }
  return p;
}

Prototype proto(std::vector<Point2> coords, std::vector<bool> valid = {}) {
  if (valid.empty()) valid.assign(coords.size(), true);
  return {std::move(coords), std::move(valid)};
}

KeypointSet keypoints(std::vector<Point2> coords, std::vector<bool> visible) {
  KeypointSet k;
  k.coords = std::move(coords);
  k.visible = std::move(visible);
  return k;
}

std::vector<double> flatten(const std::vector<Point2>& pts) {
  std::vector<double> out;
  for (const auto& p : pts) {
    out.push_back(p.row);
    out.push_back(p.col);
  }
  return out;
}

std::vector<Point2> unflatten(const std::vector<double>& v) {
  std::vector<Point2> out;
  for (std::size_t i = 0; i < v.size(); i += 2) out.push_back({v[i], v[i + 1]});
  return out;
}

std::vector<double> channel_vector(const Tensor& t, int c) {
  return {t.channel(c).begin(), t.channel(c).end()};
}

std::vector<Point2> oracle_prototypes(const Tensor& logits) {
  std::vector<Point2> out;
  for (int c = 0; c < logits.channels(); ++c) {
    out.push_back(oracle::expectation(oracle::softmax(channel_vector(logits, c)), logits.height(), logits.width()));
  }
  return out;
}

}  // namespace

TEST_CASE("mse: exact match, unit offset, brute force, masking, errors") {
  Rng rng(1);
  const Tensor t = oracle::random_tensor(2, 4, 4, rng);
  CHECK(mse_loss(stack(t), stack(t), {true, true}) == 0.0);

  Tensor plus = t;
  for (double& v : plus.values()) v += 1.0;
  CHECK(mse_loss(stack(plus), stack(t), {true, true}) == doctest::Approx(1.0).epsilon(1e-15));

  const Tensor p = oracle::random_tensor(2, 4, 4, rng);
  CHECK(std::abs(mse_loss(stack(p), stack(t), {true, true}) - oracle::mse(p, t, {true, true})) <= 1e-12);
  // masked channel drops out of the sum but not the normalization
  CHECK(mse_loss(stack(plus), stack(t), {true, false}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(mse_loss(stack(p), stack(t), {false, true}) - oracle::mse(p, t, {false, true})) <= 1e-12);

  CHECK_THROWS_AS(mse_loss(stack(Tensor(2, 4, 5)), stack(t), {true, true}), InputDomainError);
  CHECK_THROWS_AS(mse_loss(stack(t), stack(t), {true}), InputDomainError);
}

TEST_CASE("prototype: delta, uniform and two-point distributions") {
  Tensor delta(1, 6, 8);
  delta(0, 3, 5) = 1.0;
  LossConfig exp_cfg;
  LossConfig sto_cfg;
  sto_cfg.prototype_mode = PrototypeMode::stochastic;
  Rng rng(2);
  CHECK(prototype_from_map({delta}, exp_cfg).coords[0] == Point2{3.0, 5.0});
  CHECK(prototype_from_map({delta}, sto_cfg, &rng).coords[0] == Point2{3.0, 5.0});

  const auto u = prototype_from_map(map_from(Tensor(1, 8, 8, 1.0)), exp_cfg);
  CHECK(u.coords[0].row == doctest::Approx(3.5).epsilon(1e-14));
  CHECK(u.coords[0].col == doctest::Approx(3.5).epsilon(1e-14));

  Tensor two(1, 1, 9);
  two(0, 0, 0) = 0.25;
  two(0, 0, 8) = 0.75;
  const auto e = prototype_from_map({two}, exp_cfg);
  CHECK(e.coords[0].row == 0.0);
  CHECK(e.coords[0].col == doctest::Approx(6.0).epsilon(1e-14));
  sto_cfg.samples = 100000;
  Rng seeded(42);
  const auto s = prototype_from_map({two}, sto_cfg, &seeded);
  CHECK(s.coords[0].row == 0.0);
  CHECK(std::abs(s.coords[0].col - 6.0) <= 0.05);
}

TEST_CASE("prototype: stochastic mode is reproducible per seed and needs an rng") {
  Rng r0(3);
  const ProbabilityMap p = map_from(oracle::random_tensor(2, 5, 5, r0, 0.1, 1.0));
  LossConfig cfg;
  cfg.prototype_mode = PrototypeMode::stochastic;
  Rng a(9), b(9);
  CHECK(prototype_from_map(p, cfg, &a).coords == prototype_from_map(p, cfg, &b).coords);
  CHECK_THROWS(prototype_from_map(p, cfg, nullptr));
}

TEST_CASE("prototype: unnormalized input rejected") {
  CHECK_THROWS_AS(prototype_from_map({Tensor(1, 4, 4, 1.0)}, LossConfig{}), InputDomainError);
  Tensor almost(1, 2, 2, 0.25);
  almost(0, 0, 0) += 1e-3;
  CHECK_THROWS_AS(prototype_from_map({almost}, LossConfig{}), InputDomainError);
}

TEST_CASE("stochastic gradient is unbiased for the expectation gradient") {
  Rng r0(4);
  const ProbabilityMap p = map_from(oracle::random_tensor(1, 4, 4, r0, 0.2, 1.0));
  const std::vector<Point2> g{{0.7, -1.3}};
  PrototypeTrace exact_trace;
  prototype_from_map(p, LossConfig{}, nullptr, &exact_trace);
  const Tensor exact = prototype_backward(p, exact_trace, g);

  LossConfig cfg;
  cfg.prototype_mode = PrototypeMode::stochastic;
  cfg.samples = 10;
  Rng rng(5);
  Tensor mean(1, 4, 4);
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    PrototypeTrace tr;
    prototype_from_map(p, cfg, &rng, &tr);
    const Tensor one = prototype_backward(p, tr, g);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += one[i] / reps;
  }
  for (std::size_t i = 0; i < mean.size(); ++i) CHECK(std::abs(mean[i] - exact[i]) <= 0.1);
}

TEST_CASE("pairwise distance: identity, translation, hand case") {
  const auto gt = proto({{0, 0}, {10, 0}, {20, 0}});
  CHECK(pairwise_distance_loss(gt, gt, 0.8) == 0.0);
  const auto moved = proto({{5, 5}, {15, 5}, {25, 5}});
  CHECK(pairwise_distance_loss(moved, gt, 0.8) == 0.0);

  const auto pred = proto({{0, 0}, {10, 0}, {25, 0}});
  const double expected = oracle::pairwise_distance(pred.coords, gt.coords, {true, true, true}, 0.8);
  CHECK(std::abs(expected - 36.0) <= 1e-9);  // (1,3): 25 * 0.64 = 16, (2,3): 25 * 0.8 = 20
  CHECK(std::abs(pairwise_distance_loss(pred, gt, 0.8) - expected) <= 1e-9);

  CHECK_THROWS_AS(pairwise_distance_loss(proto({{0, 0}}), gt, 0.8), InputDomainError);
}

TEST_CASE("pairwise distance: masked discs skip their pairs by original index") {
  Rng rng(6);
  std::vector<Point2> a, b;
  for (int i = 0; i < 6; ++i) {
    a.push_back({uniform(rng, 0, 20), uniform(rng, 0, 20)});
    b.push_back({uniform(rng, 0, 20), uniform(rng, 0, 20)});
  }
  const std::vector<bool> valid{true, false, true, true, false, true};
  const double ref = oracle::pairwise_distance(a, b, valid, 0.7);
  CHECK(std::abs(pairwise_distance_loss(proto(a, valid), proto(b, valid), 0.7) - ref) <= 1e-9);
}

TEST_CASE("pairwise distance: rigid-motion invariance") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point2> v, g;
    for (int i = 0; i < 11; ++i) {
      v.push_back({uniform(rng, 0, 64), uniform(rng, 0, 64)});
      g.push_back({uniform(rng, 0, 64), uniform(rng, 0, 64)});
    }
    const double th = uniform(rng, 0, 2 * std::numbers::pi);
    const double tr = uniform(rng, -30, 30), tc = uniform(rng, -30, 30);
    std::vector<Point2> w;
    for (const auto& p : v) {
      w.push_back({std::cos(th) * p.row - std::sin(th) * p.col + tr, std::sin(th) * p.row + std::cos(th) * p.col + tc});
    }
    const double base = pairwise_distance_loss(proto(v), proto(g), 0.8);
    CHECK(std::abs(pairwise_distance_loss(proto(w), proto(g), 0.8) - base) <= 1e-9 * std::max(1.0, base));
    CHECK(base >= 0.0);
  }
}

TEST_CASE("identity distance is translation sensitive") {
  const auto gt = proto({{3, 3}, {6, 4}});
  CHECK(identity_distance_loss(gt, gt) == 0.0);
  CHECK(identity_distance_loss(proto({{4, 3}, {7, 4}}), gt) == doctest::Approx(1.0));
  CHECK(identity_distance_loss(proto({{3, 5}, {6, 6}}), gt) > 0.0);
  // mean over valid discs only
  CHECK(identity_distance_loss(proto({{4, 3}, {99, 99}}, {true, false}), proto({{3, 3}, {6, 4}}, {true, false})) ==
        doctest::Approx(1.0));
}

TEST_CASE("skeleton: oracle agreement, beta endpoint, zero at matching prototypes") {
  Rng rng(8);
  const Tensor logits = oracle::random_tensor(3, 8, 8, rng, -2, 2);
  const auto gt = keypoints({{1.5, 2.0}, {4.0, 4.5}, {6.5, 3.0}}, {true, true, true});
  LossConfig cfg;  // beta 0.75, alpha 0.8
  const double ref = oracle::skeleton({logits}, gt.coords, gt.visible, 0.75, 0.8);
  CHECK(std::abs(skeleton_loss({stack(logits)}, gt, cfg) - ref) <= 1e-9);

  cfg.beta = 1.0;
  const auto protos = oracle_prototypes(logits);
  const double id_only = oracle::identity_distance(protos, gt.coords, gt.visible);
  const Tensor logits2 = oracle::random_tensor(3, 8, 8, rng, -2, 2);
  const double id_two = id_only + oracle::identity_distance(oracle_prototypes(logits2), gt.coords, gt.visible);
  CHECK(std::abs(skeleton_loss({stack(logits), stack(logits2)}, gt, cfg) - id_two) <= 1e-9);

  const auto matching = keypoints(protos, {true, true, true});
  CHECK(std::abs(skeleton_loss({stack(logits)}, matching, LossConfig{})) <= 1e-12);

  CHECK_THROWS_AS(skeleton_loss({}, gt, LossConfig{}), InputDomainError);
}

TEST_CASE("total loss: lambda zero, perfect prediction, additive decomposition, monotone in lambda") {
  Rng rng(9);
  const Tensor inter = oracle::random_tensor(2, 6, 6, rng, -1, 1);
  const Tensor fused = oracle::random_tensor(2, 6, 6, rng, 0, 1);
  const Tensor target = oracle::random_tensor(2, 6, 6, rng, 0, 1);
  const auto gt = keypoints({{1.0, 2.0}, {4.0, 3.5}}, {true, true});
  const NetworkOutput out{stack(fused), {stack(inter)}};

  LossConfig cfg;
  cfg.lambda_sk = 0.0;
  CHECK(total_loss(out, stack(target), gt, cfg).total == mse_loss(stack(fused), stack(target), gt.visible));

  cfg.lambda_sk = 2e-4;
  const auto l = total_loss(out, stack(target), gt, cfg);
  const double mse = oracle::mse(fused, target, gt.visible);
  const double sk = oracle::skeleton({inter}, gt.coords, gt.visible, cfg.beta, cfg.alpha);
  CHECK(std::abs(l.mse - mse) <= 1e-12);
  CHECK(std::abs(l.skeleton - sk) <= 1e-9);
  CHECK(std::abs(l.total - (mse + 2e-4 * sk)) <= 1e-12);

  double previous = -1.0;
  for (double lambda : {0.0, 1e-4, 2e-4, 1e-2, 1.0}) {
    cfg.lambda_sk = lambda;
    const double t = total_loss(out, stack(target), gt, cfg).total;
    CHECK(t >= previous);
    CHECK(t >= 0.0);
    previous = t;
  }

  const auto perfect_gt = keypoints(oracle_prototypes(inter), {true, true});
  const NetworkOutput perfect{stack(target), {stack(inter)}};
  cfg.lambda_sk = 2e-4;
  CHECK(std::abs(total_loss(perfect, stack(target), perfect_gt, cfg).total) <= 1e-15);
}

TEST_CASE("config validation") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.lambda_sk = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.beta = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.alpha = 1.0;
  CHECK_NOTHROW(c.validate());
  c.samples = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

// ---- finite-difference gradient checks on V=2, 6x6 fixtures, step 1e-5 ----

TEST_CASE("gradient: mse") {
  Rng rng(10);
  Tensor pred = oracle::random_tensor(2, 6, 6, rng);
  const Tensor target = oracle::random_tensor(2, 6, 6, rng, 0, 1);
  for (const std::vector<bool>& vis : {std::vector<bool>{true, true}, std::vector<bool>{true, false}}) {
    Tensor g;
    mse_loss(stack(pred), stack(target), vis, &g);
    auto f = [&] { return mse_loss(stack(pred), stack(target), vis); };
    CHECK(oracle::max_relative_error(g.values(), oracle::numeric_gradient(pred.values(), f, 1e-5)) <= 1e-3);
  }
}

TEST_CASE("gradient: expectation prototype through softmax") {
  Rng rng(11);
  Tensor logits = oracle::random_tensor(2, 6, 6, rng);
  const std::vector<Point2> w{{0.3, -0.8}, {1.1, 0.4}};
  auto f = [&] {
    const auto p = prototype_from_map(softmax_probability(stack(logits)), LossConfig{});
    double s = 0.0;
    for (int i = 0; i < 2; ++i) s += w[i].row * p.coords[i].row + w[i].col * p.coords[i].col;
    return s;
  };
  const ProbabilityMap prob = softmax_probability(stack(logits));
  PrototypeTrace trace;
  prototype_from_map(prob, LossConfig{}, nullptr, &trace);
  const Tensor g = softmax_backward(prob, prototype_backward(prob, trace, w));
  CHECK(oracle::max_relative_error(g.values(), oracle::numeric_gradient(logits.values(), f, 1e-5)) <= 1e-3);
}

TEST_CASE("gradient: pairwise distance and identity distance") {
  Rng rng(12);
  std::vector<double> v, g;
  for (int i = 0; i < 8; ++i) {
    v.push_back(uniform(rng, 0, 6));
    g.push_back(uniform(rng, 0, 6));
  }
  const std::vector<bool> valid{true, true, false, true};
  double alpha = 0.8;
  auto pd = [&] { return pairwise_distance_loss(proto(unflatten(v), valid), proto(unflatten(g), valid), alpha); };
  std::vector<Point2> grad;
  double grad_alpha = 0.0;
  pairwise_distance_loss(proto(unflatten(v), valid), proto(unflatten(g), valid), alpha, &grad, &grad_alpha);
  CHECK(oracle::max_relative_error(flatten(grad), oracle::numeric_gradient(v, pd, 1e-5)) <= 1e-3);
  std::vector<double> a{alpha};
  auto pd_alpha = [&] {
    return pairwise_distance_loss(proto(unflatten(v), valid), proto(unflatten(g), valid), a[0]);
  };
  CHECK(oracle::max_relative_error({grad_alpha}, oracle::numeric_gradient(a, pd_alpha, 1e-5)) <= 1e-3);
  CHECK(grad[2] == Point2{0, 0});

  auto id = [&] { return identity_distance_loss(proto(unflatten(v), valid), proto(unflatten(g), valid)); };
  std::vector<Point2> gid;
  identity_distance_loss(proto(unflatten(v), valid), proto(unflatten(g), valid), &gid);
  CHECK(oracle::max_relative_error(flatten(gid), oracle::numeric_gradient(v, id, 1e-5)) <= 1e-3);
  CHECK(gid[2] == Point2{0, 0});
}

TEST_CASE("gradient: zero distance gives zero gradient, not NaN") {
  const auto p = proto({{1, 1}, {1, 1}});
  std::vector<Point2> g;
  pairwise_distance_loss(p, proto({{1, 1}, {2, 2}}), 0.8, &g);
  for (const auto& x : g) CHECK((std::isfinite(x.row) && std::isfinite(x.col)));
  identity_distance_loss(p, p, &g);
  for (const auto& x : g) CHECK(x == Point2{0, 0});
}

TEST_CASE("gradient: skeleton loss over two stacks, including alpha") {
  Rng rng(13);
  std::vector<Tensor> logits{oracle::random_tensor(2, 6, 6, rng), oracle::random_tensor(2, 6, 6, rng)};
  const auto gt = keypoints({{1.0, 4.0}, {4.5, 1.5}}, {true, true});
  LossConfig cfg;
  auto f = [&] { return skeleton_loss({stack(logits[0]), stack(logits[1])}, gt, cfg); };
  SkeletonGradients sg;
  skeleton_loss({stack(logits[0]), stack(logits[1])}, gt, cfg, nullptr, &sg);
  for (int j = 0; j < 2; ++j) {
    CHECK(oracle::max_relative_error(sg.intermediates[j].values(), oracle::numeric_gradient(logits[j].values(), f, 1e-5)) <= 1e-3);
  }
  std::vector<double> a{cfg.alpha};
  auto fa = [&] {
    LossConfig c = cfg;
    c.alpha = a[0];
    return skeleton_loss({stack(logits[0]), stack(logits[1])}, gt, c);
  };
  CHECK(oracle::max_relative_error({sg.alpha}, oracle::numeric_gradient(a, fa, 1e-5)) <= 1e-3);
}

TEST_CASE("gradient: total loss") {
  Rng rng(14);
  Tensor fused = oracle::random_tensor(2, 6, 6, rng);
  Tensor inter = oracle::random_tensor(2, 6, 6, rng);
  const Tensor target = oracle::random_tensor(2, 6, 6, rng, 0, 1);
  const auto gt = keypoints({{2.0, 3.0}, {5.0, 0.5}}, {true, true});
  LossConfig cfg;
  cfg.lambda_sk = 0.05;  // large enough that the skeleton path is visible in the check
  auto f = [&] { return total_loss({stack(fused), {stack(inter)}}, stack(target), gt, cfg).total; };
  LossGradients lg;
  total_loss({stack(fused), {stack(inter)}}, stack(target), gt, cfg, nullptr, &lg);
  CHECK(oracle::max_relative_error(lg.output.fused.values(), oracle::numeric_gradient(fused.values(), f, 1e-5)) <= 1e-3);
  CHECK(oracle::max_relative_error(lg.output.intermediates[0].values(), oracle::numeric_gradient(inter.values(), f, 1e-5)) <= 1e-3);
}

TEST_CASE("masked disc contributes zero gradient to every term") {
  Rng rng(15);
  const Tensor fused = oracle::random_tensor(2, 6, 6, rng);
  const Tensor inter = oracle::random_tensor(2, 6, 6, rng);
  const Tensor target = oracle::random_tensor(2, 6, 6, rng, 0, 1);
  KeypointSet gt = keypoints({{2.0, 3.0}, kInvisiblePoint}, {true, false});
  LossGradients lg;
  total_loss({stack(fused), {stack(inter)}}, stack(target), gt, LossConfig{}, nullptr, &lg);
  for (double v : lg.output.fused.channel(1)) CHECK(v == 0.0);
  for (double v : lg.output.intermediates[0].channel(1)) CHECK(v == 0.0);

  LossConfig sto;
  sto.prototype_mode = PrototypeMode::stochastic;
  Rng r(3);
  total_loss({stack(fused), {stack(inter)}}, stack(target), gt, sto, &r, &lg);
  for (double v : lg.output.intermediates[0].channel(1)) CHECK(v == 0.0);
}
