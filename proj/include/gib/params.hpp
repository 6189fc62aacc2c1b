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

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gib {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Handle to a named matrix slice inside a ParamSet.
struct BlockId {
  std::size_t index = 0;
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

/// A flat parameter vector partitioned into named, shape-tagged matrices.
///
/// Layers hold BlockIds and read their weights through views, so gradients,
/// optimizer state and per-graph gradient buffers all share one flat layout.
class ParamSet {
 public:
  BlockId add(std::string name, Eigen::Index rows, Eigen::Index cols);

  ConstMatrixMap view(BlockId id) const;
  MatrixMap view(BlockId id);
  /// View of the same block inside a gradient (or any same-layout) vector.
  MatrixMap view_in(BlockId id, Vector& flat) const;
  ConstMatrixMap view_in(BlockId id, const Vector& flat) const;

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(BlockId id) const { return blocks_.at(id.index); }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }
  Vector zeros_like() const { return Vector::Zero(values_.size()); }

  bool all_finite() const { return values_.allFinite(); }

 private:
  std::vector<ParamBlock> blocks_;
  Vector values_;
};

/// Adam optimizer state over one ParamSet.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  /// Descends along `grad`. Pass a negated gradient to ascend.
  void step(Vector& values, const Vector& grad);
  double learning_rate() const { return lr_; }
  long steps() const { return t_; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  Vector m_;
  Vector v_;
};

}  // namespace gib
