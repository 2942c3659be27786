// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hca/geometric_losses.hpp"
#include "hca/hca_network.hpp"

namespace hca {

enum class OptimizerKind { rmsprop };

struct TrainConfig {
  int epochs = 500;
  int batch_size = 4;
  double learning_rate = 2.5e-4;
  OptimizerKind optimizer = OptimizerKind::rmsprop;
  LossConfig loss;
  ModelConfig model;
  int checkpoint_every = 50;
  double heatmap_sigma = kDefaultSigma;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Every accepted key, in canonical order.
const std::vector<std::string>& config_keys();

/// Applies one `key = value` assignment. Throws UsageError on an unknown key
/// (listing the valid ones) or an unparsable value.
void apply_config_value(TrainConfig& config, const std::string& key, const std::string& value);

/// Flat `key = value` text; `#` starts a comment. Missing keys keep defaults.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

/// Canonical text for every key (round-trips exactly through parse_config).
std::string format_config(const TrainConfig& config);

}  // namespace hca
