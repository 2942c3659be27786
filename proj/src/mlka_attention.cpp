// SPDX-License-Identifier: Apache-2.0
#include "hca/mlka_attention.hpp"

#include <set>
#include <sstream>

#include "hca/errors.hpp"

namespace hca {

LkaScaleSpec::LkaScaleSpec(int kernel, int dilation) : kernel_(kernel), dilation_(dilation) {
  std::ostringstream os;
  os << "LKA scale (K=" << kernel << ", d=" << dilation << "): ";
  if (kernel < 3) throw ConfigError(os.str() + "kernel must be >= 3");
  if (dilation < 2) throw ConfigError(os.str() + "dilation must be >= 2");
  const int k = dilated_kernel();
  if (k < 3 || k % 2 == 0) throw ConfigError(os.str() + "ceil(K/d) must be odd and >= 3");
}

void MlkaConfig::validate() const {
  if (channels < 1) throw ConfigError("M-LKA: channels must be >= 1");
  if (scales.empty()) throw ConfigError("M-LKA: empty scale set");
  std::set<int> kernels;
  for (const auto& s : scales) {
    if (!kernels.insert(s.kernel()).second) {
      throw ConfigError("M-LKA: duplicate kernel " + std::to_string(s.kernel()));
    }
  }
}

std::vector<LkaScaleSpec> default_mlka_scales() { return {{9, 3}, {15, 3}, {21, 3}}; }

std::string format_scales(const std::vector<LkaScaleSpec>& scales) {
  std::string out;
  for (const auto& s : scales) {
    if (!out.empty()) out += ',';
    out += std::to_string(s.kernel()) + ":" + std::to_string(s.dilation());
  }
  return out;
}

std::vector<LkaScaleSpec> parse_scales(const std::string& text) {
  std::vector<LkaScaleSpec> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("scale '" + item + "' is not K:d");
    try {
      out.emplace_back(std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1)));
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError("scale '" + item + "' is not K:d");
    }
  }
  if (out.empty()) throw ConfigError("M-LKA: empty scale set");
  return out;
}

LkaBranch::LkaBranch(ParameterSet& params, const std::string& name, int channels,
                     LkaScaleSpec spec, Rng& rng)
    : local_(params, name + ".dw",
             {.in_channels = channels,
              .out_channels = channels,
              .kernel = spec.local_kernel(),
              .depthwise = true},
             rng),
      dilated_(params, name + ".dwd",
               {.in_channels = channels,
                .out_channels = channels,
                .kernel = spec.dilated_kernel(),
                .dilation = spec.dilation(),
                .depthwise = true},
               rng) {}

Tensor LkaBranch::forward(const ParameterSet& params, const Tensor& x, Trace* trace) const {
  Tensor local = local_.forward(params, x);
  Tensor out = dilated_.forward(params, local);
  if (trace) {
    trace->x = x;
    trace->local = std::move(local);
  }
  return out;
}

Tensor LkaBranch::backward(const ParameterSet& params, const Trace& trace, const Tensor& grad,
                           Gradients& grads) const {
  const Tensor g_local = dilated_.backward(params, trace.local, grad, grads);
  return local_.backward(params, trace.x, g_local, grads);
}

std::size_t LkaBranch::parameter_count(const ParameterSet& params) const {
  return local_.parameter_count(params) + dilated_.parameter_count(params);
}

Mlka::Mlka(ParameterSet& params, const std::string& name, const MlkaConfig& config, Rng& rng)
    : config_(config) {
  config.validate();
  for (std::size_t i = 0; i < config.scales.size(); ++i) {
    branches_.emplace_back(params, name + ".branch" + std::to_string(i), config.channels,
                           config.scales[i], rng);
  }
  const int merged = config.channels * static_cast<int>(config.scales.size());
  merge_ = Conv2d(params, name + ".merge", {merged, config.channels, 1}, rng);
}

Tensor Mlka::forward(const ParameterSet& params, const Tensor& x, Trace* trace) const {
  if (x.channels() != config_.channels) {
    throw ConfigError("M-LKA: expected " + std::to_string(config_.channels) + " channels, got " +
                      x.shape_string());
  }
  std::vector<Tensor> outs;
  outs.reserve(branches_.size());
  if (trace) trace->branches.resize(branches_.size());
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    outs.push_back(branches_[i].forward(params, x, trace ? &trace->branches[i] : nullptr));
  }
  Tensor merged = concat_channels(outs);
  Tensor attention = merge_.forward(params, merged);
  Tensor out = hadamard(attention, x);
  if (trace) {
    trace->x = x;
    trace->merged_input = std::move(merged);
    trace->attention = std::move(attention);
  }
  return out;
}

Tensor Mlka::backward(const ParameterSet& params, const Trace& trace, const Tensor& grad,
                      Gradients& grads) const {
  Tensor g_x = hadamard(grad, trace.attention);
  const Tensor g_attention = hadamard(grad, trace.x);
  const Tensor g_merged = merge_.backward(params, trace.merged_input, g_attention, grads);
  const std::vector<int> sizes(branches_.size(), config_.channels);
  const auto parts = split_channels(g_merged, sizes);
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    g_x += branches_[i].backward(params, trace.branches[i], parts[i], grads);
  }
  return g_x;
}

}  // namespace hca
