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
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gib/backbone.hpp"
#include "gib/channel.hpp"
#include "gib/dataset.hpp"
#include "gib/extractor.hpp"
#include "gib/kernels.hpp"
#include "gib/mine.hpp"
#include "gib/quantizer.hpp"

namespace gib {

enum class DigitalScheme { vq, scalar8 };
enum class MineSchedule { per_batch, pretrain_freeze };

std::string to_string(DigitalScheme s);
std::string to_string(MineSchedule s);

struct TrainConfig {
  double beta = 0.1;
  double alpha = 5.0;
  double lambda_cm = 0.25;
  int hidden_dim = 16;
  BackboneKind backbone = BackboneKind::gcn;
  int batch_size = 128;
  int epochs = 100;
  int inner_steps = 5;
  int noise_draws = 1;
  double learning_rate = 1e-3;
  double mine_learning_rate = 1e-4;
  std::uint64_t seed = 0;
  /// Training channel: analog 5 dB, or discrete epsilon 0.94 in digital mode.
  ChannelConfig channel = ChannelConfig::analog(5.0);
  bool digital = false;
  DigitalScheme scheme = DigitalScheme::vq;
  int codebook_size = 256;
  int chunks = 1;
  bool ema = true;
  /// Seed the codebook from the first training batch instead of the random init.
  bool codebook_data_init = true;
  double codebook_learning_rate = 1e-3;
  double codebook_decay = 0.99;
  double codebook_smoothing = 1e-5;
  double scalar_range = 4.0;  // scalar8 quantizes each dimension over [-range, range]
  double dropout = 0.5;
  MineSchedule mine_schedule = MineSchedule::per_batch;
  int mine_pretrain_steps = 200;
  Execution execution = Execution::parallel;

  /// Throws ArgumentError describing the first invalid field.
  void validate() const;
  /// Symbol alphabet size seen by the discrete channel.
  int symbol_alphabet() const;
};

/// Per-sample or aggregated loss terms.
struct LossComponents {
  double inf = 0.0;
  double mi = 0.0;
  double con = 0.0;
  double vq = 0.0;
  double cm = 0.0;
  double total = 0.0;
};

/// analog: inf + β·mi + α·con; digital adds vq + λ·cm.
double total_loss(const LossComponents& c, const TrainConfig& config);

/// Mean negative log-likelihood of `labels` under row log-probabilities.
double inference_loss(std::span<const Vector> log_probs, std::span<const int> labels);

/// Parameter collections: transmitter (extractor + encoder), receiver head, MINE.
struct ModelParams {
  ParamSet phi;
  ParamSet theta;
  ParamSet kappa;
};

class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, ModelParams last_good, std::optional<Codebook> codebook)
      : std::runtime_error(what), last_good(std::move(last_good)), codebook(std::move(codebook)) {}
  ModelParams last_good;
  std::optional<Codebook> codebook;
};

/// Corpus-wide per-graph operators, built once.
class PreparedCorpus {
 public:
  explicit PreparedCorpus(const Corpus& corpus);
  const Corpus& corpus() const { return *corpus_; }
  GraphInput input(int index) const;
  const GraphOperators& ops(int index) const { return ops_.at(static_cast<std::size_t>(index)); }

 private:
  const Corpus* corpus_;
  std::vector<GraphOperators> ops_;
};

/// Everything the transmitter produced for one graph.
struct TransmitterPass {
  GnnStack::Cache gnn_cache;
  NodeAssigner::Cache assign_cache;
  Matrix node_features;
  AssignmentMatrix s;
  Vector aggregated;  // first row of SᵀX
  Vector signal;      // power-normalized aggregated vector (channel input)
  ConnectivityLoss con;
  std::vector<int> indices;  // digital only: transmitted symbols
  Vector quantized;          // digital only: reconstruction before the channel
};

/// The end-to-end system: GNN extractor, channel, quantizer, classifier, MINE.
class GibSystem {
 public:
  GibSystem(int feature_dim, int class_n, const TrainConfig& config);

  const TrainConfig& config() const { return config_; }
  int class_n() const { return head_.class_n(); }

  ParamSet& phi() { return phi_; }
  const ParamSet& phi() const { return phi_; }
  ParamSet& theta() { return theta_; }
  const ParamSet& theta() const { return theta_; }
  MineTrainer& mine() { return mine_; }
  const MineTrainer& mine() const { return mine_; }
  std::optional<Codebook>& codebook() { return codebook_; }
  const std::optional<Codebook>& codebook() const { return codebook_; }

  ModelParams snapshot() const;
  void restore(const ModelParams& params);

  /// Extractor + encoder. `with_grad` keeps caches and the L_con gradient.
  TransmitterPass transmit(const GraphInput& g, bool with_grad) const;
  /// Channel (if given) and dequantization; returns x̂. Without a channel the
  /// digital path still quantizes.
  Vector receive_signal(const TransmitterPass& tx, const ChannelConfig* channel, Rng& rng) const;
  /// Log-probabilities. `dropout_rng` set = training mode.
  Vector infer(const Vector& xhat, Rng* dropout_rng, InferenceHead::Cache* cache) const;

  /// Backpropagates dL/dx̂ (summed over noise draws) and the weighted
  /// auxiliary terms into a phi-shaped gradient.
  void transmitter_backward(const GraphInput& g, const TransmitterPass& tx, const Vector& dxhat,
                            double con_weight, double cm_weight, Vector& grad_phi) const;
  const InferenceHead& head() const { return head_; }

  /// Argmax class of a single graph through the given channel (none = ideal).
  int predict(const GraphInput& g, const ChannelConfig* channel, Rng& rng) const;

 private:
  TrainConfig config_;
  ParamSet phi_;
  ParamSet theta_;
  GnnStack gnn_;
  NodeAssigner assigner_;
  InferenceHead head_;
  MineTrainer mine_;
  std::optional<Codebook> codebook_;
  std::optional<ScalarQuantizer> scalar_;
};

/// Forward state of one training batch through the training channel.
/// Samples are graph-major with `noise_draws` entries per graph.
struct BatchForward {
  std::vector<int> batch;
  std::vector<GraphInput> graphs;
  std::vector<TransmitterPass> tx;
  std::vector<GraphInput> sample_graphs;
  std::vector<Vector> xhat;
  std::vector<Vector> log_probs;
  std::vector<InferenceHead::Cache> head_caches;
};

/// Noise and dropout streams derive from (config seed, step, graph id, draw),
/// so the same step always sees the same channel realisation.
BatchForward forward_batch(const GibSystem& system, const PreparedCorpus& corpus,
                           const std::vector<int>& batch, std::uint64_t step);

struct BatchGradient {
  LossComponents loss;
  Vector phi;
  Vector theta;
};

/// Batch loss with κ held fixed and its gradient w.r.t. φ and θ. `pairing`
/// pairs samples for the MI bound and is ignored when β = 0.
BatchGradient batch_gradient(const GibSystem& system, const PreparedCorpus& corpus,
                             const BatchForward& forward, std::span<const int> pairing);

struct EpochStats {
  int epoch = 0;
  LossComponents loss;  // batch-averaged
  double train_accuracy = 0.0;
  std::vector<double> mine_curve;  // DV bound before each inner step, last batch
};

struct TrainResult {
  ModelParams params;
  std::optional<Codebook> codebook;
  std::vector<EpochStats> curve;
};

/// Trains on the non-held-out graphs of `fold`. The trained
/// system is left in `system`.
TrainResult train_fold(GibSystem& system, const PreparedCorpus& corpus, const FoldSplit& split,
                       int fold);
/// Convenience: trains on an explicit index list.
TrainResult train_on(GibSystem& system, const PreparedCorpus& corpus,
                     const std::vector<int>& train_indices);

struct EvalResult {
  ChannelConfig channel;
  double accuracy = 0.0;
  LossComponents loss;
  std::vector<int> predictions;
  std::vector<int> labels;
};

/// Evaluation mode (dropout off), one channel draw per graph and setting.
std::vector<EvalResult> evaluate(const GibSystem& system, const PreparedCorpus& corpus,
                                 const std::vector<int>& indices,
                                 const std::vector<ChannelConfig>& settings);

struct MetricsRecord {
  std::string experiment;
  std::string variant;
  std::string backbone;
  int hidden_dim = 0;
  int fold = 0;
  std::string axis_name;
  double axis_value = 0.0;
  double accuracy = 0.0;
  LossComponents loss;
  int epoch = 0;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
};

struct SettingSummary {
  std::string axis_name;
  double axis_value = 0.0;
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation across folds
  int folds = 0;
};

struct CrossValidation {
  std::vector<MetricsRecord> records;  // fold-major, then setting order
  std::vector<SettingSummary> summary;
};

/// Describes an evaluation axis: one ChannelConfig per value.
struct EvalAxis {
  std::string name;  // snr_db | epsilon | symbol_error_rate
  std::vector<double> values;

  std::vector<ChannelConfig> settings(const TrainConfig& config, std::uint64_t seed) const;
};

struct CvOptions {
  std::string experiment = "experiment";
  std::string variant = "full";
  int k = 10;
  bool record_wall_time = true;
  Execution fold_execution = Execution::serial;
  /// Called once per fold after training, before evaluation.
  std::function<void(int fold, const GibSystem&, const PreparedCorpus&, const std::vector<int>& test)>
      on_fold_trained;
};

/// Model seed used for one fold of a cross-validation run.
std::uint64_t fold_seed(std::uint64_t base, int fold);

CrossValidation cross_validate(const Corpus& corpus, const TrainConfig& config,
                               const EvalAxis& axis, const CvOptions& options);

/// Mean and sample stdev of accuracy per (axis_name, axis_value), in first-seen order.
std::vector<SettingSummary> aggregate(std::span<const MetricsRecord> records);

}  // namespace gib
