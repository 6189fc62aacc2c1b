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

#include "gib/extractor.hpp"

#include <cmath>

namespace gib {

std::vector<bool> AssignmentMatrix::hard_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) mask[static_cast<std::size_t>(i)] = s(i, 0) > 0.5;
  return mask;
}

NodeAssigner NodeAssigner::create(ParamSet& params, const std::string& prefix, int dim) {
  NodeAssigner a;
  a.first_ = Linear::create(params, prefix + ".fc0", dim, dim);
  a.second_ = Linear::create(params, prefix + ".fc1", dim, 2);
  return a;
}

AssignmentMatrix NodeAssigner::forward(const ParamSet& params, const Matrix& node_features,
                                       Cache* cache) const {
  Matrix hidden = first_.forward(params, node_features).array().tanh();
  Matrix probs = softmax_rows(second_.forward(params, hidden));
  AssignmentMatrix out{probs};
  if (cache) {
    cache->input = node_features;
    cache->hidden = std::move(hidden);
    cache->probs = std::move(probs);
  }
  return out;
}

Matrix NodeAssigner::backward(const ParamSet& params, const Cache& cache, const Matrix& ds,
                              Vector& grad) const {
  // Softmax Jacobian per row: dz = p ⊙ (ds − <ds, p>).
  const Vector inner = (ds.array() * cache.probs.array()).rowwise().sum();
  Matrix dlogits = cache.probs.array() * (ds.colwise() - inner).array();
  const Matrix dhidden = second_.backward(params, cache.hidden, dlogits, grad);
  const Matrix dpre = dhidden.array() * (1.0 - cache.hidden.array().square());
  return first_.backward(params, cache.input, dpre, grad);
}

Vector aggregate_subgraph(const AssignmentMatrix& s, const Matrix& node_features) {
  if (s.s.rows() != node_features.rows()) {
    throw ShapeError("aggregate_subgraph: assignment/feature row mismatch");
  }
  return node_features.transpose() * s.s.col(0);
}

void aggregate_subgraph_backward(const AssignmentMatrix& s, const Matrix& node_features,
                                 const Vector& dout, Matrix& ds, Matrix& dx) {
  ds.col(0) += node_features * dout;
  dx.noalias() += s.s.col(0) * dout.transpose();
}

namespace {

struct RowNormParts {
  Eigen::Matrix2d m;
  Eigen::Vector2d row_sum;
  Eigen::Matrix2d diff;
  double value;
};

RowNormParts row_norm_parts(const AssignmentMatrix& s, const Matrix& adjacency) {
  if (s.s.cols() != 2) throw ShapeError("connectivity_loss: S must have two columns");
  if (adjacency.rows() != s.s.rows() || adjacency.cols() != s.s.rows()) {
    throw ShapeError("connectivity_loss: adjacency shape does not match S");
  }
  RowNormParts p;
  p.m = s.s.transpose() * adjacency * s.s;
  p.row_sum = p.m.rowwise().sum().array() + kRowNormGuard;
  Eigen::Matrix2d normed = p.row_sum.cwiseInverse().asDiagonal() * p.m;
  p.diff = normed - Eigen::Matrix2d::Identity();
  p.value = p.diff.norm();
  return p;
}

}  // namespace

double connectivity_loss(const AssignmentMatrix& s, const Matrix& adjacency) {
  return row_norm_parts(s, adjacency).value;
}

ConnectivityLoss connectivity_loss_with_grad(const AssignmentMatrix& s,
                                             const Matrix& adjacency) {
  const auto p = row_norm_parts(s, adjacency);
  ConnectivityLoss out;
  out.value = p.value;
  out.grad_s = Matrix::Zero(s.s.rows(), 2);
  if (p.value == 0.0) return out;
  const Eigen::Matrix2d dnormed = p.diff / p.value;
  Eigen::Matrix2d dm;
  for (int k = 0; k < 2; ++k) {
    const double r = p.row_sum(k);
    const double inner = dnormed.row(k).dot(p.m.row(k));
    for (int j = 0; j < 2; ++j) dm(k, j) = dnormed(k, j) / r - inner / (r * r);
  }
  // M = Sᵀ A S  =>  dS = A S dMᵀ + Aᵀ S dM
  const Matrix as = adjacency * s.s;
  const Matrix ats = adjacency.transpose() * s.s;
  out.grad_s = as * dm.transpose() + ats * dm;
  return out;
}

}  // namespace gib
