// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "hca/errors.hpp"
#include "hca/hca_network.hpp"
#include "oracles.hpp"

using namespace hca;

namespace {

ModelConfig tiny(int size = 32) {
  ModelConfig c;
  c.stacks = 1;
  c.channels = 8;
  c.input_height = size;
  c.input_width = size;
  return c;
}

double sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return s;
}

}  // namespace

TEST_CASE("output shape contract at 256x256") {
  ModelConfig c;
  c.channels = 8;
  const Model m = build_model(c);
  Rng rng(1);
  const auto out = m.forward(oracle::random_tensor(1, 256, 256, rng, 0, 1));
  CHECK(out.fused.discs() == 11);
  CHECK(out.fused.height() == 64);
  CHECK(out.fused.width() == 64);
  REQUIRE(out.intermediates.size() == 2);
  for (const auto& o : out.intermediates) {
    CHECK(o.values.same_shape(out.fused.values));
  }
}

TEST_CASE("output shape is a function of input size, V and N") {
  Rng rng(2);
  for (int trial = 0; trial < 6; ++trial) {
    ModelConfig c;
    c.stacks = 1 + static_cast<int>(uniform_index(rng, 3));
    c.channels = 2 + static_cast<int>(uniform_index(rng, 4));
    c.hourglass_depth = 1 + static_cast<int>(uniform_index(rng, 2));
    c.num_discs = 1 + static_cast<int>(uniform_index(rng, 12));
    const int unit = kHeatmapStride << c.hourglass_depth;
    c.input_height = unit * (1 + static_cast<int>(uniform_index(rng, 3)));
    c.input_width = unit * (1 + static_cast<int>(uniform_index(rng, 3)));
    c.seed = trial;
    const Model m = build_model(c);
    const auto out = m.forward(oracle::random_tensor(1, c.input_height, c.input_width, rng, 0, 1));
    CHECK(out.fused.discs() == c.num_discs);
    CHECK(out.fused.height() == c.input_height / 4);
    CHECK(out.fused.width() == c.input_width / 4);
    CHECK(static_cast<int>(out.intermediates.size()) == c.stacks);
  }
}

TEST_CASE("seeded construction and pure forward") {
  const Model a = build_model(tiny()), b = build_model(tiny());
  CHECK(a.parameters() == b.parameters());
  auto other = tiny();
  other.seed = 1;
  CHECK_FALSE(build_model(other).parameters() == a.parameters());

  Rng rng(3);
  const Tensor x = oracle::random_tensor(1, 32, 32, rng, 0, 1);
  const auto o1 = a.forward(x), o2 = a.forward(x);
  CHECK(o1.fused.values == o2.fused.values);
  CHECK(o1.intermediates[0].values == o2.intermediates[0].values);
}

TEST_CASE("structure counts") {
  ModelConfig c = tiny();
  c.stacks = 2;
  const Model m = build_model(c);
  CHECK(m.head_count() == 2);
  CHECK(m.fusion_layer_count() == 1);
  CHECK(m.head_bias_indices().size() == 2);

  std::size_t previous = 0;
  for (int n = 1; n <= 3; ++n) {
    c.stacks = n;
    const std::size_t count = build_model(c).parameter_count();
    CHECK(count > previous);
    previous = count;
  }
}

TEST_CASE("configuration and input errors") {
  ModelConfig c = tiny();
  c.input_height = 48;  // not a multiple of 4 * 2^3
  CHECK_THROWS_AS(build_model(c), ConfigError);
  c = tiny();
  c.stacks = 0;
  CHECK_THROWS_AS(build_model(c), ConfigError);
  c = tiny();
  c.num_discs = 0;
  CHECK_THROWS_AS(build_model(c), ConfigError);
  const Model m = build_model(tiny());
  CHECK_THROWS_AS(m.forward(Tensor(1, 64, 32)), InputDomainError);
  CHECK_THROWS_AS(m.forward(Tensor(2, 32, 32)), InputDomainError);
}

TEST_CASE("input gradient of sum(fused) by finite differences") {
  const Model m = build_model(tiny());
  Rng rng(4);
  Tensor x = oracle::random_tensor(1, 32, 32, rng, 0, 1);
  Model::Trace trace;
  const auto out = m.forward(x, trace);
  OutputGradients og{Tensor(out.fused.discs(), out.fused.height(), out.fused.width(), 1.0), {}};
  Gradients g = m.parameters().zero_gradients();
  const Tensor gx = m.backward(trace, og, g);
  auto f = [&] { return sum(m.forward(x).fused.values); };
  const auto numeric = oracle::numeric_gradient(x.values(), f, 1e-6);
  CHECK(oracle::max_relative_error(gx.values(), numeric, 1e-6) <= 1e-3);
}

TEST_CASE("parameter gradients by finite differences (sampled entries, N=2)") {
  ModelConfig c = tiny();
  c.stacks = 2;
  c.num_discs = 3;
  Model m = build_model(c);
  Rng rng(5);
  const Tensor x = oracle::random_tensor(1, 32, 32, rng, 0, 1);
  const Tensor probe_f = oracle::random_tensor(3, 8, 8, rng);
  const std::vector<Tensor> probe_i{oracle::random_tensor(3, 8, 8, rng), oracle::random_tensor(3, 8, 8, rng)};
  auto objective = [&] {
    const auto out = m.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < probe_f.size(); ++i) s += probe_f[i] * out.fused.values[i];
    for (int j = 0; j < 2; ++j) {
      for (std::size_t i = 0; i < probe_f.size(); ++i) s += probe_i[j][i] * out.intermediates[j].values[i];
    }
    return s;
  };
  Model::Trace trace;
  m.forward(x, trace);
  Gradients g = m.parameters().zero_gradients();
  m.backward(trace, {probe_f, probe_i}, g);

  ParameterSet& ps = m.parameters();
  double worst = 0.0;
  for (int p = 0; p < ps.count(); ++p) {
    auto& value = ps[p].value;
    for (int s = 0; s < 3; ++s) {
      const std::size_t k = uniform_index(rng, value.size());
      const double keep = value[k];
      value[k] = keep + 1e-6;
      const double up = objective();
      value[k] = keep - 1e-6;
      const double down = objective();
      value[k] = keep;
      const double numeric = (up - down) / 2e-6;
      const double err = std::abs(numeric - g[p][k]) / std::max({std::abs(numeric), std::abs(g[p][k]), 1e-6});
      worst = std::max(worst, err);
      CHECK_MESSAGE(err <= 1e-3, ps[p].name << "[" << k << "] analytic " << g[p][k] << " numeric " << numeric);
    }
  }
  MESSAGE("worst sampled parameter relative error " << worst);
}

TEST_CASE("every head receives gradient from the fused output") {
  ModelConfig c = tiny();
  c.stacks = 3;
  const Model m = build_model(c);
  Rng rng(6);
  Model::Trace trace;
  const auto out = m.forward(oracle::random_tensor(1, 32, 32, rng, 0, 1), trace);
  Gradients g = m.parameters().zero_gradients();
  m.backward(trace, {oracle::random_tensor(11, 8, 8, rng), {}}, g);
  for (int idx : m.head_bias_indices()) {
    double norm = 0.0;
    for (double v : g[static_cast<std::size_t>(idx)]) norm += v * v;
    CHECK(norm > 0.0);
  }
  (void)out;
}
