// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "hca/layers.hpp"

namespace hca {

/// One scale of large-kernel attention: a K x K receptive field realized as a
/// (2d-1)x(2d-1) depth-wise convolution followed by a ceil(K/d) x ceil(K/d)
/// depth-wise convolution with dilation d.
class LkaScaleSpec {
 public:
  /// Throws ConfigError unless K >= 3, d >= 2 and ceil(K/d) is odd and >= 3.
  LkaScaleSpec(int kernel, int dilation);

  int kernel() const { return kernel_; }
  int dilation() const { return dilation_; }
  int local_kernel() const { return 2 * dilation_ - 1; }
  int dilated_kernel() const { return (kernel_ + dilation_ - 1) / dilation_; }

  friend bool operator==(const LkaScaleSpec&, const LkaScaleSpec&) = default;

 private:
  int kernel_;
  int dilation_;
};

struct MlkaConfig {
  int channels = 64;
  std::vector<LkaScaleSpec> scales;

  /// Nonempty scale list with distinct kernels and channels >= 1.
  void validate() const;
};

/// Default scale set {(9,3), (15,3), (21,3)}.
std::vector<LkaScaleSpec> default_mlka_scales();

/// Text form "9:3,15:3,21:3" used by config files and checkpoints.
std::string format_scales(const std::vector<LkaScaleSpec>& scales);
std::vector<LkaScaleSpec> parse_scales(const std::string& text);

/// Local depth-wise convolution then dilated depth-wise convolution; C x H x W
/// in, same shape out.
class LkaBranch {
 public:
  struct Trace {
    Tensor x, local;
  };

  LkaBranch() = default;
  LkaBranch(ParameterSet& params, const std::string& name, int channels, LkaScaleSpec spec,
            Rng& rng);

  Tensor forward(const ParameterSet& params, const Tensor& x, Trace* trace) const;
  Tensor backward(const ParameterSet& params, const Trace& trace, const Tensor& grad,
                  Gradients& grads) const;

  const Conv2d& local_conv() const { return local_; }
  const Conv2d& dilated_conv() const { return dilated_; }
  std::size_t parameter_count(const ParameterSet& params) const;

 private:
  Conv2d local_;
  Conv2d dilated_;
};

/// Multi-scale large kernel attention: branch outputs are concatenated, mixed
/// by one 1x1 convolution (|S|*C -> C) into an attention map, which gates the
/// input elementwise.
class Mlka {
 public:
  struct Trace {
    Tensor x;
    std::vector<LkaBranch::Trace> branches;
    Tensor merged_input;
    Tensor attention;
  };

  Mlka() = default;
  Mlka(ParameterSet& params, const std::string& name, const MlkaConfig& config, Rng& rng);

  Tensor forward(const ParameterSet& params, const Tensor& x, Trace* trace = nullptr) const;
  Tensor backward(const ParameterSet& params, const Trace& trace, const Tensor& grad,
                  Gradients& grads) const;

  const MlkaConfig& config() const { return config_; }
  const std::vector<LkaBranch>& branches() const { return branches_; }
  const Conv2d& merge() const { return merge_; }

 private:
  MlkaConfig config_;
  std::vector<LkaBranch> branches_;
  Conv2d merge_;
};

}  // namespace hca
