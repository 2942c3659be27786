// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "hca/config_file.hpp"
#include "hca/hca_network.hpp"
#include "hca/parameters.hpp"
#include "hca/random.hpp"

namespace hca {

inline constexpr const char* kCheckpointVersion = "hca-ckpt/1";

struct RmsPropState {
  std::vector<std::vector<double>> square_avg;
  double alpha_square_avg = 0.0;
};

/// Everything needed to rebuild a model or continue its training run.
struct Checkpoint {
  TrainConfig config;
  ParameterSet parameters;
  RmsPropState optimizer;
  int epoch = 0;
  Rng rng;
  double alpha = 0.8;  // pairwise-distance decay, trained when learnable
  double best_score = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
};

/// Atomic: writes `<path>.tmp` then renames over `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Parses the whole archive before returning; throws VersionError when the
/// header is not this build's format and IoError on truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Model with the checkpoint's parameters (names and shapes must match).
Model model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace hca
