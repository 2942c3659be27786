// SPDX-License-Identifier: Apache-2.0
#include "hca/layers.hpp"

#include <algorithm>

#include "hca/errors.hpp"

namespace hca {
namespace {

// Output indices o in [lo, hi) whose input index o*stride + shift lies in [0, n).
struct Span1 {
  int lo, hi;
};

Span1 valid_outputs(int out_size, int in_size, int stride, int shift) {
  int lo = 0;
  if (shift < 0) lo = (-shift + stride - 1) / stride;
  int hi = out_size;
  const int last = in_size - 1 - shift;  // o*stride <= last
  if (last < 0) {
    hi = 0;
  } else {
    hi = std::min(out_size, last / stride + 1);
  }
  return {lo, std::max(lo, hi)};
}

}  // namespace

Conv2d::Conv2d(ParameterSet& params, const std::string& name, ConvSpec spec, Rng& rng)
    : spec_(spec) {
  if (spec.in_channels < 1 || spec.out_channels < 1 || spec.kernel < 1 || spec.stride < 1 ||
      spec.dilation < 1) {
    throw ConfigError("conv " + name + ": non-positive dimension");
  }
  if (spec.depthwise && spec.in_channels != spec.out_channels) {
    throw ConfigError("conv " + name + ": depth-wise convolution needs in == out channels");
  }
  padding_ = spec.padding >= 0 ? spec.padding : spec.dilation * (spec.kernel - 1) / 2;
  const int group_in = spec.depthwise ? 1 : spec.in_channels;
  const int fan_in = group_in * spec.kernel * spec.kernel;
  const std::size_t n = static_cast<std::size_t>(spec.out_channels) * fan_in;
  weight_ = params.add(name + ".weight", {spec.out_channels, group_in, spec.kernel, spec.kernel},
                       kaiming_uniform(n, fan_in, rng));
  if (spec.bias) {
    bias_ = params.add(name + ".bias", {spec.out_channels},
                       std::vector<double>(static_cast<std::size_t>(spec.out_channels), 0.0));
  }
}

int Conv2d::output_size(int input) const {
  return (input + 2 * padding_ - spec_.dilation * (spec_.kernel - 1) - 1) / spec_.stride + 1;
}

std::size_t Conv2d::parameter_count(const ParameterSet& params) const {
  std::size_t n = params[weight_].value.size();
  if (bias_ >= 0) n += params[bias_].value.size();
  return n;
}

Tensor Conv2d::forward(const ParameterSet& params, const Tensor& x) const {
  if (x.channels() != spec_.in_channels) {
    throw ConfigError("conv: expected " + std::to_string(spec_.in_channels) + " channels, got " +
                      x.shape_string());
  }
  const int H = x.height(), W = x.width();
  const int OH = output_size(H), OW = output_size(W);
  const int K = spec_.kernel, S = spec_.stride, D = spec_.dilation;
  const int group_in = spec_.depthwise ? 1 : spec_.in_channels;
  Tensor out(spec_.out_channels, OH, OW);
  const double* w = params.data(weight_);
  const double* b = bias_ >= 0 ? params.data(bias_) : nullptr;

  for (int oc = 0; oc < spec_.out_channels; ++oc) {
    double* __restrict o = out.channel(oc).data();
    if (b) std::fill(o, o + out.plane(), b[oc]);
    for (int g = 0; g < group_in; ++g) {
      const int ic = spec_.depthwise ? oc : g;
      const double* __restrict in = x.channel(ic).data();
      const double* wk = w + (static_cast<std::size_t>(oc) * group_in + g) * K * K;
      for (int ky = 0; ky < K; ++ky) {
        const int sy = ky * D - padding_;
        const Span1 ry = valid_outputs(OH, H, S, sy);
        for (int kx = 0; kx < K; ++kx) {
          const double wv = wk[ky * K + kx];
          const int sx = kx * D - padding_;
          const Span1 rx = valid_outputs(OW, W, S, sx);
          for (int oy = ry.lo; oy < ry.hi; ++oy) {
            const double* __restrict irow = in + static_cast<std::size_t>(oy * S + sy) * W + sx;
            double* __restrict orow = o + static_cast<std::size_t>(oy) * OW;
            if (S == 1) {
              for (int ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += wv * irow[ox];
            } else {
              for (int ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += wv * irow[ox * S];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor Conv2d::backward(const ParameterSet& params, const Tensor& x, const Tensor& grad_out,
                        Gradients& grads) const {
  const int H = x.height(), W = x.width();
  const int OH = grad_out.height(), OW = grad_out.width();
  const int K = spec_.kernel, S = spec_.stride, D = spec_.dilation;
  const int group_in = spec_.depthwise ? 1 : spec_.in_channels;
  if (grad_out.channels() != spec_.out_channels || OH != output_size(H) || OW != output_size(W)) {
    throw InputDomainError("conv backward: gradient shape " + grad_out.shape_string());
  }
  Tensor grad_in(x.channels(), H, W);
  const double* w = params.data(weight_);
  double* gw = grads[static_cast<std::size_t>(weight_)].data();

  for (int oc = 0; oc < spec_.out_channels; ++oc) {
    const double* __restrict go = grad_out.channel(oc).data();
    if (bias_ >= 0) {
      double s = 0.0;
      for (std::size_t i = 0; i < grad_out.plane(); ++i) s += go[i];
      grads[static_cast<std::size_t>(bias_)][static_cast<std::size_t>(oc)] += s;
    }
    for (int g = 0; g < group_in; ++g) {
      const int ic = spec_.depthwise ? oc : g;
      const double* __restrict in = x.channel(ic).data();
      double* __restrict gi = grad_in.channel(ic).data();
      const std::size_t wbase = (static_cast<std::size_t>(oc) * group_in + g) * K * K;
      for (int ky = 0; ky < K; ++ky) {
        const int sy = ky * D - padding_;
        const Span1 ry = valid_outputs(OH, H, S, sy);
        for (int kx = 0; kx < K; ++kx) {
          const double wv = w[wbase + ky * K + kx];
          const int sx = kx * D - padding_;
          const Span1 rx = valid_outputs(OW, W, S, sx);
          double acc = 0.0;
          for (int oy = ry.lo; oy < ry.hi; ++oy) {
            const std::size_t ioff = static_cast<std::size_t>(oy * S + sy) * W + sx;
            const double* __restrict irow = in + ioff;
            double* __restrict girow = gi + ioff;
            const double* __restrict grow = go + static_cast<std::size_t>(oy) * OW;
            if (S == 1) {
              for (int ox = rx.lo; ox < rx.hi; ++ox) {
                acc += grow[ox] * irow[ox];
                girow[ox] += wv * grow[ox];
              }
            } else {
              for (int ox = rx.lo; ox < rx.hi; ++ox) {
                acc += grow[ox] * irow[ox * S];
                girow[ox * S] += wv * grow[ox];
              }
            }
          }
          gw[wbase + ky * K + kx] += acc;
        }
      }
    }
  }
  return grad_in;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& pre, const Tensor& grad) {
  Tensor g = grad;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(pre[i] > 0.0)) g[i] = 0.0;
  }
  return g;
}

Tensor max_pool2(const Tensor& x, MaxPoolTrace* trace) {
  if (x.height() % 2 != 0 || x.width() % 2 != 0) {
    throw InputDomainError("max_pool2: odd spatial size " + x.shape_string());
  }
  const int OH = x.height() / 2, OW = x.width() / 2;
  Tensor out(x.channels(), OH, OW);
  if (trace) {
    trace->argmax.assign(out.size(), 0);
    trace->in_height = x.height();
    trace->in_width = x.width();
  }
  std::size_t k = 0;
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < OH; ++y) {
      for (int xx = 0; xx < OW; ++xx, ++k) {
        int best = (2 * y) * x.width() + 2 * xx;
        double bv = x.channel(c)[static_cast<std::size_t>(best)];
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * y + dy) * x.width() + 2 * xx + dx;
            const double v = x.channel(c)[static_cast<std::size_t>(idx)];
            if (v > bv) {
              bv = v;
              best = idx;
            }
          }
        }
        out[k] = bv;
        if (trace) trace->argmax[k] = best;
      }
    }
  }
  return out;
}

Tensor max_pool2_backward(const MaxPoolTrace& trace, const Tensor& grad) {
  Tensor g(grad.channels(), trace.in_height, trace.in_width);
  std::size_t k = 0;
  for (int c = 0; c < grad.channels(); ++c) {
    auto dst = g.channel(c);
    for (std::size_t i = 0; i < grad.plane(); ++i, ++k) {
      dst[static_cast<std::size_t>(trace.argmax[k])] += grad[k];
    }
  }
  return g;
}

Tensor upsample2(const Tensor& x) {
  Tensor out(x.channels(), x.height() * 2, x.width() * 2);
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int xx = 0; xx < out.width(); ++xx) out(c, y, xx) = x(c, y / 2, xx / 2);
    }
  }
  return out;
}

Tensor upsample2_backward(const Tensor& grad) {
  Tensor g(grad.channels(), grad.height() / 2, grad.width() / 2);
  for (int c = 0; c < grad.channels(); ++c) {
    for (int y = 0; y < grad.height(); ++y) {
      for (int x = 0; x < grad.width(); ++x) g(c, y / 2, x / 2) += grad(c, y, x);
    }
  }
  return g;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw InputDomainError("hadamard: shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

ResidualBlock::ResidualBlock(ParameterSet& params, const std::string& name, int channels, Rng& rng)
    : conv1_(params, name + ".conv1", {channels, channels, 3}, rng),
      conv2_(params, name + ".conv2", {channels, channels, 3}, rng) {}

Tensor ResidualBlock::forward(const ParameterSet& params, const Tensor& x, Trace* trace) const {
  Tensor a1 = conv1_.forward(params, x);
  Tensor h1 = relu(a1);
  Tensor sum = conv2_.forward(params, h1);
  sum += x;
  Tensor out = relu(sum);
  if (trace) {
    trace->x = x;
    trace->a1 = std::move(a1);
    trace->h1 = std::move(h1);
    trace->sum = std::move(sum);
  }
  return out;
}

Tensor ResidualBlock::backward(const ParameterSet& params, const Trace& trace, const Tensor& grad,
                               Gradients& grads) const {
  const Tensor g_sum = relu_backward(trace.sum, grad);
  const Tensor g_h1 = conv2_.backward(params, trace.h1, g_sum, grads);
  Tensor g_x = conv1_.backward(params, trace.x, relu_backward(trace.a1, g_h1), grads);
  g_x += g_sum;
  return g_x;
}

}  // namespace hca
