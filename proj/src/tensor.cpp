// SPDX-License-Identifier: Apache-2.0
#include "hca/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "hca/errors.hpp"

namespace hca {

Tensor::Tensor(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 0 || height < 0 || width < 0) {
    throw InputDomainError("negative tensor dimension");
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << channels_ << "x" << height_ << "x" << width_;
  return os.str();
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) {
    throw InputDomainError("tensor add: " + shape_string() + " vs " + other.shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) return {};
  const int h = parts.front().height();
  const int w = parts.front().width();
  int c = 0;
  for (const auto& p : parts) {
    if (p.height() != h || p.width() != w) {
      throw InputDomainError("concat: spatial mismatch " + p.shape_string());
    }
    c += p.channels();
  }
  Tensor out(c, h, w);
  double* dst = out.data();
  for (const auto& p : parts) dst = std::copy(p.data(), p.data() + p.size(), dst);
  return out;
}

std::vector<Tensor> split_channels(const Tensor& t, std::span<const int> sizes) {
  if (std::accumulate(sizes.begin(), sizes.end(), 0) != t.channels()) {
    throw InputDomainError("split: channel sizes do not add up to " + t.shape_string());
  }
  std::vector<Tensor> out;
  out.reserve(sizes.size());
  const double* src = t.data();
  for (int c : sizes) {
    Tensor part(c, t.height(), t.width());
    std::copy(src, src + part.size(), part.data());
    src += part.size();
    out.push_back(std::move(part));
  }
  return out;
}

}  // namespace hca
