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

#include <string>

#include "gib/params.hpp"
#include "gib/backbone.hpp"

namespace gib {

/// m x 2 row-stochastic matrix; column 0 = p(node in subgraph).
struct AssignmentMatrix {
  Matrix s;

  Eigen::Index nodes() const { return s.rows(); }
  /// Hard mask (p > 0.5) for reporting only.
  std::vector<bool> hard_mask() const;
};

/// Node assignment MLP: Linear + tanh, Linear + row softmax.
class NodeAssigner {
 public:
  NodeAssigner() = default;
  static NodeAssigner create(ParamSet& params, const std::string& prefix, int dim);

  struct Cache {
    Matrix input;
    Matrix hidden;  // tanh output
    Matrix probs;
  };

  AssignmentMatrix forward(const ParamSet& params, const Matrix& node_features,
                           Cache* cache) const;
  /// Gradient w.r.t. node features given dL/dS.
  Matrix backward(const ParamSet& params, const Cache& cache, const Matrix& ds,
                  Vector& grad) const;

  const Linear& output_layer() const { return second_; }

 private:
  Linear first_;
  Linear second_;
};

/// First row of SᵀX: sum_i S[i,0] x_i.
Vector aggregate_subgraph(const AssignmentMatrix& s, const Matrix& node_features);

/// Backward of aggregate_subgraph. Accumulates into ds (column 0) and dx.
void aggregate_subgraph_backward(const AssignmentMatrix& s, const Matrix& node_features,
                                 const Vector& dout, Matrix& ds, Matrix& dx);

inline constexpr double kRowNormGuard = 1e-10;

struct ConnectivityLoss {
  double value = 0.0;
  Matrix grad_s;  // dL/dS, m x 2
};

/// ‖RowNorm(SᵀAS) − I₂‖_F with row-sum normalization guarded by 1e-10.
double connectivity_loss(const AssignmentMatrix& s, const Matrix& adjacency);
ConnectivityLoss connectivity_loss_with_grad(const AssignmentMatrix& s,
                                             const Matrix& adjacency);

}  // namespace gib
