// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "hca/parameters.hpp"
#include "hca/tensor.hpp"

namespace hca {

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int dilation = 1;
  int padding = -1;  // -1: "same" padding, dilation * (kernel - 1) / 2
  bool depthwise = false;
  bool bias = true;
};

/// 2D convolution (dense or depth-wise) with zero padding.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterSet& params, const std::string& name, ConvSpec spec, Rng& rng);

  Tensor forward(const ParameterSet& params, const Tensor& x) const;
  /// Accumulates weight/bias gradients into `grads` and returns dL/dx.
  Tensor backward(const ParameterSet& params, const Tensor& x, const Tensor& grad_out,
                  Gradients& grads) const;

  const ConvSpec& spec() const { return spec_; }
  int weight_index() const { return weight_; }
  int bias_index() const { return bias_; }
  int output_size(int input) const;
  std::size_t parameter_count(const ParameterSet& params) const;

 private:
  ConvSpec spec_;
  int padding_ = 0;
  int weight_ = -1;
  int bias_ = -1;
};

Tensor relu(const Tensor& x);
// grad * 1[pre > 0]
Tensor relu_backward(const Tensor& pre, const Tensor& grad);

struct MaxPoolTrace {
  std::vector<int> argmax;
  int in_height = 0;
  int in_width = 0;
};

/// 2x2 / stride 2 max pooling.
Tensor max_pool2(const Tensor& x, MaxPoolTrace* trace);
Tensor max_pool2_backward(const MaxPoolTrace& trace, const Tensor& grad);

/// Nearest-neighbour 2x upsampling.
Tensor upsample2(const Tensor& x);
Tensor upsample2_backward(const Tensor& grad);

Tensor hadamard(const Tensor& a, const Tensor& b);

/// relu(x + conv2(relu(conv1(x)))) with 3x3 convolutions and constant width.
class ResidualBlock {
 public:
  struct Trace {
    Tensor x, a1, h1, sum;
  };

  ResidualBlock() = default;
  ResidualBlock(ParameterSet& params, const std::string& name, int channels, Rng& rng);

  Tensor forward(const ParameterSet& params, const Tensor& x, Trace* trace) const;
  Tensor backward(const ParameterSet& params, const Trace& trace, const Tensor& grad,
                  Gradients& grads) const;

 private:
  Conv2d conv1_;
  Conv2d conv2_;
};

}  // namespace hca
