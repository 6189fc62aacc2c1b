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
#include <optional>
#include <string>
#include <vector>

#include "gib/params.hpp"
#include "gib/rng.hpp"

namespace gib {

enum class BackboneKind { gcn, gin };

BackboneKind parse_backbone(const std::string& s);
std::string to_string(BackboneKind kind);

/// D̃^{-1/2} (A + I) D̃^{-1/2}.
Matrix normalized_adjacency(const Matrix& adjacency);

/// Row-wise numerically stable log-softmax.
Matrix log_softmax_rows(const Matrix& logits);
Matrix softmax_rows(const Matrix& logits);

/// Fully connected layer acting on row samples: Y = X W + b.
struct Linear {
  BlockId weight;
  BlockId bias;
  int in = 0;
  int out = 0;

  static Linear create(ParamSet& params, const std::string& prefix, int in, int out);
  Matrix forward(const ParamSet& params, const Matrix& x) const;
  /// Accumulates dW, db into `grad`; returns dX.
  Matrix backward(const ParamSet& params, const Matrix& x, const Matrix& dy,
                  Vector& grad) const;
};

/// ReLU(P H W + b) with P the normalized adjacency.
struct GcnLayer {
  Linear linear;

  struct Cache {
    Matrix propagated;  // P H
    Matrix pre;         // P H W + b
  };

  static GcnLayer create(ParamSet& params, const std::string& prefix, int in, int out);
  Matrix forward(const ParamSet& params, const Matrix& norm_adj, const Matrix& h,
                 Cache* cache) const;
  Matrix backward(const ParamSet& params, const Matrix& norm_adj, const Cache& cache,
                  const Matrix& dy, Vector& grad) const;
};

/// MLP((1 + eps) h_v + sum_{u in N(v)} h_u) with MLP = Linear, ReLU, Linear.
struct GinLayer {
  BlockId epsilon;
  Linear first;
  Linear second;

  struct Cache {
    Matrix input;   // H
    Matrix summed;  // (1 + eps) H + A H
    Matrix hidden;  // summed W1 + b1, pre-ReLU
  };

  static GinLayer create(ParamSet& params, const std::string& prefix, int in, int out);
  Matrix forward(const ParamSet& params, const Matrix& adjacency, const Matrix& h,
                 Cache* cache) const;
  Matrix backward(const ParamSet& params, const Matrix& adjacency, const Cache& cache,
                  const Matrix& dy, Vector& grad) const;
};

/// Per-graph operators shared by every GNN pass over that graph. Holds a
/// pointer to the adjacency; the owner must outlive it.
struct GraphOperators {
  const Matrix* adjacency = nullptr;
  Matrix normalized;
};

GraphOperators make_operators(const Matrix& adjacency);

/// Two message-passing layers of one kind. GIN outputs get a ReLU so both
/// backbones emit non-negative node features.
class GnnStack {
 public:
  GnnStack() = default;
  static GnnStack create(ParamSet& params, const std::string& prefix, BackboneKind kind,
                         int in, int hidden);

  struct Cache {
    std::vector<GcnLayer::Cache> gcn;
    std::vector<GinLayer::Cache> gin;
    std::vector<Matrix> gin_out;  // pre-ReLU outputs of GIN layers
  };

  Matrix forward(const ParamSet& params, const GraphOperators& ops, const Matrix& x,
                 Cache* cache) const;
  /// Returns the gradient w.r.t. the input features.
  Matrix backward(const ParamSet& params, const GraphOperators& ops, const Cache& cache,
                  const Matrix& dy, Vector& grad) const;

  BackboneKind kind() const { return kind_; }
  int hidden() const { return hidden_; }

 private:
  BackboneKind kind_ = BackboneKind::gcn;
  int hidden_ = 0;
  std::vector<GcnLayer> gcn_;
  std::vector<GinLayer> gin_;
};

/// Receiver classifier: Linear, ReLU, dropout, Linear, log-softmax.
class InferenceHead {
 public:
  InferenceHead() = default;
  static InferenceHead create(ParamSet& params, const std::string& prefix, int dim,
                              int class_n, double dropout);

  struct Cache {
    Matrix input;
    Matrix hidden;  // pre-ReLU
    Matrix mask;    // dropout scaling per unit; all ones in evaluation mode
    Matrix dropped;
    Matrix log_probs;
  };

  /// `rng` set means training mode (dropout active).
  Vector forward(const ParamSet& params, const Vector& x, Rng* rng, Cache* cache) const;
  /// `dlogp` is the gradient w.r.t. the log-probabilities. Returns dx.
  Vector backward(const ParamSet& params, const Cache& cache, const Vector& dlogp,
                  Vector& grad) const;

  int class_n() const { return class_n_; }
  double dropout() const { return dropout_; }

 private:
  Linear first_;
  Linear second_;
  int class_n_ = 0;
  double dropout_ = 0.5;
};

/// Glorot-uniform for every block named "*.weight", zeros elsewhere.
void glorot_init(ParamSet& params, std::uint64_t seed);

/// Parameters of a plain MLP with the given layer sizes (weights "l<i>.weight").
ParamSet init_params(const std::vector<int>& sizes, std::uint64_t seed);

}  // namespace gib
