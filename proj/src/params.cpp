// Copyright 2026 The gibcomm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gib/params.hpp"

#include <cmath>

namespace gib {

BlockId ParamSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (rows <= 0 || cols <= 0) {
    throw ShapeError("parameter block '" + name + "' has non-positive shape");
  }
  for (const auto& b : blocks_) {
    if (b.name == name) throw ArgumentError("duplicate parameter name: " + name);
  }
  ParamBlock block{std::move(name), static_cast<std::size_t>(values_.size()),
                   rows, cols};
  const Eigen::Index old = values_.size();
  values_.conservativeResize(old + rows * cols);
  values_.segment(old, rows * cols).setZero();
  blocks_.push_back(std::move(block));
  return BlockId{blocks_.size() - 1};
}

ConstMatrixMap ParamSet::view(BlockId id) const {
  const auto& b = blocks_.at(id.index);
  return ConstMatrixMap(values_.data() + b.offset, b.rows, b.cols);
}

MatrixMap ParamSet::view(BlockId id) {
  const auto& b = blocks_.at(id.index);
  return MatrixMap(values_.data() + b.offset, b.rows, b.cols);
}

MatrixMap ParamSet::view_in(BlockId id, Vector& flat) const {
  const auto& b = blocks_.at(id.index);
  if (flat.size() != values_.size()) throw ShapeError("gradient layout mismatch");
  return MatrixMap(flat.data() + b.offset, b.rows, b.cols);
}

ConstMatrixMap ParamSet::view_in(BlockId id, const Vector& flat) const {
  const auto& b = blocks_.at(id.index);
  if (flat.size() != values_.size()) throw ShapeError("gradient layout mismatch");
  return ConstMatrixMap(flat.data() + b.offset, b.rows, b.cols);
}

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2,
           double eps)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Vector::Zero(static_cast<Eigen::Index>(size))),
      v_(Vector::Zero(static_cast<Eigen::Index>(size))) {}

void Adam::step(Vector& values, const Vector& grad) {
  if (grad.size() != values.size() || m_.size() != values.size()) {
    throw ShapeError("Adam: state/gradient size mismatch");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  values.array() -=
      lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace gib
