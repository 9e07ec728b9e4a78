// tfsep/tensor.cpp

// Copyright 2026  tfsep authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "tfsep/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tfsep {

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  int64_t n = 1;
  for (int64_t d : shape_) {
    if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
    n *= d;
  }
  cols_ = shape_.empty() ? 0 : shape_.back();
  data_.assign(static_cast<size_t>(n), 0.0);
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t({1});
  t.at(0) = value;
  return t;
}

Tensor Tensor::from_vector(const std::vector<double>& v) {
  Tensor t({static_cast<int64_t>(v.size())});
  t.data_ = v;
  return t;
}

int64_t Tensor::rows() const {
  if (ndim() != 2) throw std::invalid_argument("Tensor::rows: not 2-D");
  return shape_[0];
}

int64_t Tensor::cols() const {
  if (ndim() != 2) throw std::invalid_argument("Tensor::cols: not 2-D");
  return shape_[1];
}

Tensor Tensor::reshaped(std::vector<int64_t> new_shape) const {
  Tensor t(std::move(new_shape));
  if (t.numel() != numel())
    throw std::invalid_argument("Tensor::reshaped: element count mismatch");
  t.data_ = data_;
  return t;
}

void Tensor::fill(double value) {
  std::fill(data_.begin(), data_.end(), value);
}

bool Tensor::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

double Tensor::l2_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return std::sqrt(s);
}

double Tensor::sum() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

}  // namespace tfsep
