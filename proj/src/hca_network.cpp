// SPDX-License-Identifier: Apache-2.0
#include "hca/hca_network.hpp"

#include <sstream>

#include "hca/errors.hpp"

namespace hca {

void ModelConfig::validate() const {
  if (stacks < 1) throw ConfigError("model: stacks must be >= 1");
  if (num_discs < 1) throw ConfigError("model: num_discs must be >= 1");
  if (channels < 1) throw ConfigError("model: channels must be >= 1");
  if (hourglass_depth < 1) throw ConfigError("model: hourglass_depth must be >= 1");
  const int multiple = kHeatmapStride << hourglass_depth;
  if (input_height < multiple || input_width < multiple || input_height % multiple != 0 ||
      input_width % multiple != 0) {
    std::ostringstream os;
    os << "model: input " << input_height << "x" << input_width << " must be a multiple of "
       << multiple << " (stem stride " << kHeatmapStride << " x 2^" << hourglass_depth << ")";
    throw ConfigError(os.str());
  }
  mlka().validate();
}

Hourglass::Hourglass(ParameterSet& params, const std::string& name, int depth, int channels,
                     Rng& rng)
    : depth_(depth),
      up_(params, name + ".up", channels, rng),
      low1_(params, name + ".low1", channels, rng) {
  if (depth > 1) {
    inner_ = std::make_unique<Hourglass>(params, name + ".inner", depth - 1, channels, rng);
  } else {
    bottom_ = ResidualBlock(params, name + ".bottom", channels, rng);
  }
  low3_ = ResidualBlock(params, name + ".low3", channels, rng);
}

Tensor Hourglass::forward(const ParameterSet& params, const Tensor& x, Trace* trace) const {
  Tensor out = up_.forward(params, x, trace ? &trace->up : nullptr);
  Tensor pooled = max_pool2(x, trace ? &trace->pool : nullptr);
  Tensor low = low1_.forward(params, pooled, trace ? &trace->low1 : nullptr);
  if (inner_) {
    if (trace) trace->inner = std::make_unique<Trace>();
    low = inner_->forward(params, low, trace ? trace->inner.get() : nullptr);
  } else {
    low = bottom_.forward(params, low, trace ? &trace->bottom : nullptr);
  }
  low = low3_.forward(params, low, trace ? &trace->low3 : nullptr);
  out += upsample2(low);
  return out;
}

Tensor Hourglass::backward(const ParameterSet& params, const Trace& trace, const Tensor& grad,
                           Gradients& grads) const {
  Tensor g_low = low3_.backward(params, trace.low3, upsample2_backward(grad), grads);
  g_low = inner_ ? inner_->backward(params, *trace.inner, g_low, grads)
                 : bottom_.backward(params, trace.bottom, g_low, grads);
  g_low = low1_.backward(params, trace.low1, g_low, grads);
  Tensor g_x = up_.backward(params, trace.up, grad, grads);
  g_x += max_pool2_backward(trace.pool, g_low);
  return g_x;
}

struct Model::Block {
  Block(ParameterSet& params, const std::string& name, const ModelConfig& config, bool remap,
        Rng& rng)
      : hourglass(params, name + ".hourglass", config.hourglass_depth, config.channels, rng),
        attention(params, name + ".mlka", config.mlka(), rng),
        feature(params, name + ".feature", {config.channels, config.channels, 1}, rng),
        head(params, name + ".head", {config.channels, config.num_discs, 1}, rng),
        has_remap(remap) {
    if (remap) {
      feature_remap = Conv2d(params, name + ".feature_remap", {config.channels, config.channels, 1}, rng);
      head_remap = Conv2d(params, name + ".head_remap", {config.num_discs, config.channels, 1}, rng);
    }
  }

  Hourglass hourglass;
  Mlka attention;
  Conv2d feature;
  Conv2d head;
  Conv2d feature_remap;
  Conv2d head_remap;
  bool has_remap;
};

Model::Model(const ModelConfig& config) : config_(config) {
  config.validate();
  Rng rng(config.seed);
  stem_conv_ = Conv2d(params_, "stem.conv",
                      {.in_channels = 1, .out_channels = config.channels, .kernel = 7, .stride = 2},
                      rng);
  stem_res_ = ResidualBlock(params_, "stem.res", config.channels, rng);
  for (int j = 0; j < config.stacks; ++j) {
    blocks_.push_back(std::make_unique<Block>(params_, "block" + std::to_string(j), config,
                                              j + 1 < config.stacks, rng));
  }
  // Per-disc fusion over stacks, starting as the plain average.
  const int v = config.num_discs, n = config.stacks;
  params_.add("fusion.weight", {v, n},
              std::vector<double>(static_cast<std::size_t>(v) * n, 1.0 / n));
  params_.add("fusion.bias", {v}, std::vector<double>(static_cast<std::size_t>(v), 0.0));
}

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

int Model::head_count() const { return static_cast<int>(blocks_.size()); }

std::vector<int> Model::head_bias_indices() const {
  std::vector<int> out;
  for (const auto& b : blocks_) out.push_back(b->head.bias_index());
  return out;
}

int Model::fusion_bias_index() const { return params_.count() - 1; }

NetworkOutput Model::forward(const Tensor& image) const {
  Trace trace;
  return forward(image, trace);
}

NetworkOutput Model::forward(const Tensor& image, Trace& trace) const {
  if (image.channels() != 1 || image.height() != config_.input_height ||
      image.width() != config_.input_width) {
    std::ostringstream os;
    os << "model input must be 1x" << config_.input_height << "x" << config_.input_width
       << ", got " << image.shape_string();
    throw InputDomainError(os.str());
  }
  trace.image = image;
  trace.stem_pre = stem_conv_.forward(params_, image);
  trace.stem_act = relu(trace.stem_pre);
  Tensor x = stem_res_.forward(params_, trace.stem_act, &trace.stem_res);
  x = max_pool2(x, &trace.pool);

  NetworkOutput out;
  trace.blocks.clear();
  trace.blocks.resize(blocks_.size());
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const Block& b = *blocks_[j];
    auto& t = trace.blocks[j];
    t.input = x;
    t.hourglass_out = b.hourglass.forward(params_, x, &t.hourglass);
    t.attention_out = b.attention.forward(params_, t.hourglass_out, &t.attention);
    t.feature_pre = b.feature.forward(params_, t.attention_out);
    t.feature = relu(t.feature_pre);
    t.head = b.head.forward(params_, t.feature);
    if (b.has_remap) {
      x += b.feature_remap.forward(params_, t.feature);
      x += b.head_remap.forward(params_, t.head);
    }
    out.intermediates.push_back({t.head, HeatmapRole::prediction});
  }

  // fused_v = sum_j w[v][j] * Out_j[v] + b[v]
  const int n = config_.stacks;
  const double* w = params_.data(params_.count() - 2);
  const double* bias = params_.data(params_.count() - 1);
  const Tensor& first = out.intermediates.front().values;
  Tensor fused(first.channels(), first.height(), first.width());
  for (int v = 0; v < fused.channels(); ++v) {
    auto dst = fused.channel(v);
    std::fill(dst.begin(), dst.end(), bias[v]);
    for (int j = 0; j < n; ++j) {
      const double wv = w[v * n + j];
      auto src = out.intermediates[static_cast<std::size_t>(j)].values.channel(v);
      for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += wv * src[p];
    }
  }
  out.fused = {std::move(fused), HeatmapRole::prediction};
  return out;
}

Tensor Model::backward(const Trace& trace, const OutputGradients& grad, Gradients& grads) const {
  const int n = config_.stacks;
  const int wi = params_.count() - 2, bi = params_.count() - 1;
  const double* w = params_.data(wi);
  auto& gw = grads[static_cast<std::size_t>(wi)];
  auto& gb = grads[static_cast<std::size_t>(bi)];
  const Tensor& gf = grad.fused;

  std::vector<Tensor> g_heads;
  for (int j = 0; j < n; ++j) {
    const Tensor& head = trace.blocks[static_cast<std::size_t>(j)].head;
    Tensor g(head.channels(), head.height(), head.width());
    for (int v = 0; v < g.channels(); ++v) {
      auto src = gf.channel(v);
      auto h = head.channel(v);
      auto dst = g.channel(v);
      const double wv = w[v * n + j];
      double acc = 0.0;
      for (std::size_t p = 0; p < dst.size(); ++p) {
        dst[p] = wv * src[p];
        acc += src[p] * h[p];
      }
      gw[static_cast<std::size_t>(v * n + j)] += acc;
    }
    if (!grad.intermediates.empty()) g += grad.intermediates[static_cast<std::size_t>(j)];
    g_heads.push_back(std::move(g));
  }
  for (int v = 0; v < gf.channels(); ++v) {
    double acc = 0.0;
    for (double x : gf.channel(v)) acc += x;
    gb[static_cast<std::size_t>(v)] += acc;
  }

  Tensor carry;  // dL/d(input of the following block)
  for (int j = n - 1; j >= 0; --j) {
    const Block& b = *blocks_[static_cast<std::size_t>(j)];
    const auto& t = trace.blocks[static_cast<std::size_t>(j)];
    Tensor g_head = std::move(g_heads[static_cast<std::size_t>(j)]);
    Tensor g_feature;
    if (b.has_remap) {
      g_head += b.head_remap.backward(params_, t.head, carry, grads);
      g_feature = b.feature_remap.backward(params_, t.feature, carry, grads);
      g_feature += b.head.backward(params_, t.feature, g_head, grads);
    } else {
      g_feature = b.head.backward(params_, t.feature, g_head, grads);
    }
    Tensor g = b.feature.backward(params_, t.attention_out, relu_backward(t.feature_pre, g_feature), grads);
    g = b.attention.backward(params_, t.attention, g, grads);
    g = b.hourglass.backward(params_, t.hourglass, g, grads);
    if (b.has_remap) g += carry;
    carry = std::move(g);
  }

  Tensor g = max_pool2_backward(trace.pool, carry);
  g = stem_res_.backward(params_, trace.stem_res, g, grads);
  return stem_conv_.backward(params_, trace.image, relu_backward(trace.stem_pre, g), grads);
}

Model build_model(const ModelConfig& config) { return Model(config); }

}  // namespace hca
