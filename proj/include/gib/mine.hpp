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
#include <span>
#include <stdexcept>
#include <vector>

#include "gib/backbone.hpp"
#include "gib/kernels.hpp"
#include "gib/params.hpp"
#include "gib/rng.hpp"

namespace gib {

class EstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One graph as seen by a GNN: operators plus node features.
struct GraphInput {
  const GraphOperators* ops = nullptr;
  const Matrix* features = nullptr;
};

/// Statistics network f_κ(g, x̂): an optional two-layer GCN over g with mean
/// readout, concatenated with x̂ and scored by a two-layer MLP.
///
/// Built without the graph branch it scores raw vector pairs (u, v), which is
/// how the estimator is validated against closed-form Gaussian MI.
class StatisticsNetwork {
 public:
  static StatisticsNetwork for_graphs(int feature_dim, int graph_dim, int signal_dim,
                                      int hidden, std::uint64_t seed);
  static StatisticsNetwork for_vectors(int u_dim, int v_dim, int hidden, std::uint64_t seed);

  bool has_graph_branch() const { return graph_branch_.has_value(); }
  int summary_dim() const { return u_dim_; }
  int signal_dim() const { return v_dim_; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  struct SummaryCache {
    GnnStack::Cache gnn;
    Eigen::Index nodes = 0;
  };
  Vector summarize(const GraphInput& g, SummaryCache* cache) const;
  void summarize_backward(const GraphInput& g, const SummaryCache& cache, const Vector& du,
                          Vector& grad) const;

  struct ScoreCache {
    Matrix input;
    Matrix hidden;
  };
  double score(const Vector& u, const Vector& v, ScoreCache* cache) const;
  /// Accumulates parameter gradients scaled by `dscore`; writes du, dv.
  void score_backward(const ScoreCache& cache, double dscore, Vector& grad, Vector* du,
                      Vector* dv) const;

 private:
  ParamSet params_;
  std::optional<GnnStack> graph_branch_;
  Linear fc0_;
  Linear fc1_;
  int u_dim_ = 0;
  int v_dim_ = 0;
};

/// Derangement of 0..n-1 (Sattolo's algorithm), n >= 2.
std::vector<int> derangement(int n, Rng& rng);

struct DvResult {
  double value = 0.0;
  std::vector<double> joint;     // f(u_i, v_i)
  std::vector<double> marginal;  // f(u_i, v_{π(i)})
  Vector param_grad;             // ∂value/∂κ (empty unless requested)
  std::vector<Vector> signal_grad;  // ∂value/∂v_j (empty unless requested)
};

struct DvRequest {
  bool param_grad = false;
  bool signal_grad = false;
  Execution execution = Execution::serial;
};

/// (1/K) Σ f(u_i, v_i) − log (1/K) Σ exp f(u_i, v_{π(i)}), computed with a
/// stable log-sum-exp. `summaries` are precomputed u_i.
DvResult dv_estimate_vectors(const StatisticsNetwork& net, std::span<const Vector> summaries,
                             std::span<const Vector> signals, std::span<const int> pairing,
                             const DvRequest& request = {});

/// Same bound over (graph, x̂) pairs; gradients also flow through the graph branch.
DvResult dv_estimate(const StatisticsNetwork& net, std::span<const GraphInput> graphs,
                     std::span<const Vector> signals, std::span<const int> pairing,
                     const DvRequest& request = {});

/// Owns κ and its optimizer state across inner-loop invocations.
class MineTrainer {
 public:
  MineTrainer(StatisticsNetwork net, double learning_rate, std::uint64_t seed);

  StatisticsNetwork& net() { return net_; }
  const StatisticsNetwork& net() const { return net_; }

  /// One gradient ascent step on the DV bound; returns the bound before the step.
  double step_vectors(std::span<const Vector> summaries, std::span<const Vector> signals,
                      Execution ex = Execution::serial);
  double step_graphs(std::span<const GraphInput> graphs, std::span<const Vector> signals,
                     Execution ex = Execution::serial);

  /// Fresh derangement from the trainer's stream.
  std::vector<int> next_pairing(int n);

 private:
  void apply(const DvResult& r);

  StatisticsNetwork net_;
  Adam adam_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Runs `steps` ascent steps of the DV bound on κ only. Throws ArgumentError
/// for steps < 1 and EstimatorError on a non-finite bound.
std::vector<double> mine_inner_train(MineTrainer& trainer, std::span<const GraphInput> graphs,
                                     std::span<const Vector> signals, int steps,
                                     Execution ex = Execution::serial);

}  // namespace gib
