// SPDX-License-Identifier: Apache-2.0
#include "hca/parameters.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "hca/errors.hpp"

namespace hca {

int ParameterSet::add(std::string name, std::vector<int> shape, std::vector<double> value) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        [](std::size_t a, int b) { return a * b; });
  if (n != value.size()) throw ConfigError("parameter " + name + ": shape/value size mismatch");
  params_.push_back({std::move(name), std::move(shape), std::move(value)});
  return count() - 1;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Gradients ParameterSet::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.value.size(), 0.0);
  return g;
}

bool operator==(const Parameter& a, const Parameter& b) {
  return a.name == b.name && a.shape == b.shape && a.value == b.value;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) { return a.params_ == b.params_; }

std::vector<double> kaiming_uniform(std::size_t n, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, -bound, bound);
  return v;
}

}  // namespace hca
