// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hca/random.hpp"

namespace hca {

struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
};

/// Gradient buffers aligned index-for-index with a ParameterSet.
using Gradients = std::vector<std::vector<double>>;

/// Owns every trainable tensor of a model. Layers refer to entries by index,
/// so forward passes only need a const reference and concurrent inference on
/// one set is safe.
class ParameterSet {
 public:
  int add(std::string name, std::vector<int> shape, std::vector<double> value);

  const Parameter& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
  Parameter& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  const double* data(int i) const { return params_[static_cast<std::size_t>(i)].value.data(); }

  int count() const { return static_cast<int>(params_.size()); }
  std::size_t scalar_count() const;
  const std::vector<Parameter>& all() const { return params_; }
  std::vector<Parameter>& all() { return params_; }

  Gradients zero_gradients() const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<Parameter> params_;
};

bool operator==(const Parameter& a, const Parameter& b);

// Kaiming-uniform fill with a = sqrt(5): U(-b, b), b = 1 / sqrt(fan_in).
std::vector<double> kaiming_uniform(std::size_t n, int fan_in, Rng& rng);

}  // namespace hca
