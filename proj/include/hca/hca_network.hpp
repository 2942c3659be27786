// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hca/heatmap_codec.hpp"
#include "hca/layers.hpp"
#include "hca/mlka_attention.hpp"

namespace hca {

/// Stem downsampling between the input image and the heatmaps.
inline constexpr int kHeatmapStride = 4;

struct ModelConfig {
  int stacks = 2;
  int channels = 64;
  int hourglass_depth = 3;
  int num_discs = 11;
  int input_height = 256;
  int input_width = 256;
  std::vector<LkaScaleSpec> scales = default_mlka_scales();
  std::uint64_t seed = 0;

  MlkaConfig mlka() const { return {channels, scales}; }
  int heatmap_height() const { return input_height / kHeatmapStride; }
  int heatmap_width() const { return input_width / kHeatmapStride; }

  /// Throws ConfigError: N >= 1, V >= 1, C >= 1, depth >= 1, and the heatmap
  /// grid (input / 4) divisible by 2^depth.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct NetworkOutput {
  HeatmapStack fused;
  std::vector<HeatmapStack> intermediates;
};

/// Recursive encoder-decoder with a skip branch at every level.
class Hourglass {
 public:
  struct Trace {
    ResidualBlock::Trace up;
    MaxPoolTrace pool;
    ResidualBlock::Trace low1;
    std::unique_ptr<Trace> inner;
    ResidualBlock::Trace bottom;
    ResidualBlock::Trace low3;
  };

  Hourglass(ParameterSet& params, const std::string& name, int depth, int channels, Rng& rng);

  Tensor forward(const ParameterSet& params, const Tensor& x, Trace* trace) const;
  Tensor backward(const ParameterSet& params, const Trace& trace, const Tensor& grad,
                  Gradients& grads) const;

 private:
  int depth_;
  ResidualBlock up_;
  ResidualBlock low1_;
  std::unique_ptr<Hourglass> inner_;
  ResidualBlock bottom_;
  ResidualBlock low3_;
};

/// Gradients the losses send back into the network.
struct OutputGradients {
  Tensor fused;
  std::vector<Tensor> intermediates;  // may be empty, or one per stack
};

/// HCA-Net: conv stem, N stacked (hourglass -> M-LKA -> head) blocks, and a
/// per-disc 1x1 fusion over the N intermediate predictions.
class Model {
 public:
  struct Trace;

  explicit Model(const ModelConfig& config);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  const ModelConfig& config() const { return config_; }
  const ParameterSet& parameters() const { return params_; }
  ParameterSet& parameters() { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }

  int head_count() const;
  int fusion_layer_count() const { return 1; }
  /// Parameter indices of the per-stack head biases and the fusion bias.
  std::vector<int> head_bias_indices() const;
  int fusion_bias_index() const;

  /// Pure inference. Throws InputDomainError for a shape other than 1 x H x W.
  NetworkOutput forward(const Tensor& image) const;
  NetworkOutput forward(const Tensor& image, Trace& trace) const;

  /// Accumulates parameter gradients and returns dL/d(image).
  Tensor backward(const Trace& trace, const OutputGradients& grad, Gradients& grads) const;

 private:
  struct Block;

  ModelConfig config_;
  ParameterSet params_;
  Conv2d stem_conv_;
  ResidualBlock stem_res_;
  std::vector<std::unique_ptr<Block>> blocks_;
  Conv2d fusion_;
};

struct Model::Trace {
  struct BlockTrace {
    Tensor input;
    Hourglass::Trace hourglass;
    Tensor hourglass_out;
    Mlka::Trace attention;
    Tensor attention_out;
    Tensor feature_pre;
    Tensor feature;
    Tensor head;
  };

  Tensor image;
  Tensor stem_pre;
  Tensor stem_act;
  ResidualBlock::Trace stem_res;
  MaxPoolTrace pool;
  std::vector<BlockTrace> blocks;
  Tensor fusion_input;
};

/// Deterministic initialization from config.seed.
Model build_model(const ModelConfig& config);

}  // namespace hca
