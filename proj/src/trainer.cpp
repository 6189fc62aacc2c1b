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

#include "gib/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gib {

std::string to_string(DigitalScheme s) { return s == DigitalScheme::vq ? "vq" : "scalar8"; }

std::string to_string(MineSchedule s) {
  return s == MineSchedule::per_batch ? "per_batch" : "pretrain_freeze";
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ArgumentError("train config: " + m); };
  if (!(beta >= 0.0)) fail("beta must be >= 0");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(lambda_cm >= 0.0)) fail("lambda_cm must be >= 0");
  if (hidden_dim < 1) fail("hidden_dim must be positive");
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (epochs < 0) fail("epochs must be >= 0");
  if (inner_steps < 1) fail("inner_steps must be >= 1");
  if (noise_draws < 1) fail("noise_draws must be >= 1");
  if (!(learning_rate > 0.0) || !(mine_learning_rate > 0.0)) fail("learning rates must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  channel.validate();
  if (digital) {
    if (channel.kind != ChannelKind::discrete) fail("digital mode needs a discrete training channel");
    if (scheme == DigitalScheme::vq) {
      if (codebook_size < 2) fail("codebook_size must be >= 2");
      if (chunks < 1 || hidden_dim % chunks != 0) fail("chunks must divide hidden_dim");
    }
    if (channel.r != symbol_alphabet()) fail("discrete channel r must equal the symbol alphabet size");
    if (!(scalar_range > 0.0)) fail("scalar_range must be positive");
  } else if (channel.kind != ChannelKind::analog) {
    fail("analog mode needs an analog training channel");
  }
  if (mine_schedule == MineSchedule::pretrain_freeze && mine_pretrain_steps < 1) {
    fail("mine_pretrain_steps must be >= 1");
  }
}

int TrainConfig::symbol_alphabet() const {
  return scheme == DigitalScheme::vq ? codebook_size : ScalarQuantizer::levels;
}

double total_loss(const LossComponents& c, const TrainConfig& config) {
  double total = c.inf + config.beta * c.mi + config.alpha * c.con;
  if (config.digital) total += c.vq + config.lambda_cm * c.cm;
  return total;
}

double inference_loss(std::span<const Vector> log_probs, std::span<const int> labels) {
  if (log_probs.empty()) throw ArgumentError("inference_loss: empty batch");
  if (log_probs.size() != labels.size()) throw ShapeError("inference_loss: batch/label size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= log_probs[i].size()) {
      throw ArgumentError("inference_loss: label " + std::to_string(labels[i]) + " out of range");
    }
    sum -= log_probs[i](labels[i]);
  }
  return sum / static_cast<double>(labels.size());
}

PreparedCorpus::PreparedCorpus(const Corpus& corpus) : corpus_(&corpus) {
  ops_.reserve(corpus.graphs.size());
  for (const auto& g : corpus.graphs) ops_.push_back(make_operators(g.adjacency));
}

GraphInput PreparedCorpus::input(int index) const {
  const auto i = static_cast<std::size_t>(index);
  return GraphInput{&ops_.at(i), &corpus_->graphs.at(i).features};
}

namespace {

MineTrainer make_mine(int feature_dim, const TrainConfig& c) {
  return MineTrainer(StatisticsNetwork::for_graphs(feature_dim, c.hidden_dim, c.hidden_dim,
                                                   2 * c.hidden_dim, derive_seed(c.seed, {3})),
                     c.mine_learning_rate, derive_seed(c.seed, {4}));
}

int argmax(const Vector& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

GibSystem::GibSystem(int feature_dim, int class_n, const TrainConfig& config)
    : config_(config), mine_(make_mine(feature_dim, config)) {
  config_.validate();
  if (class_n < 2) throw ArgumentError("GibSystem: class_n must be >= 2");
  gnn_ = GnnStack::create(phi_, "phi.gnn", config_.backbone, feature_dim, config_.hidden_dim);
  assigner_ = NodeAssigner::create(phi_, "phi.assign", config_.hidden_dim);
  head_ = InferenceHead::create(theta_, "theta.head", config_.hidden_dim, class_n, config_.dropout);
  glorot_init(phi_, derive_seed(config_.seed, {1}));
  glorot_init(theta_, derive_seed(config_.seed, {2}));
  if (config_.digital) {
    if (config_.scheme == DigitalScheme::vq) {
      codebook_ = Codebook::random(config_.codebook_size, config_.hidden_dim / config_.chunks,
                                   derive_seed(config_.seed, {5}), config_.codebook_decay,
                                   config_.codebook_smoothing);
    } else {
      scalar_.emplace(-config_.scalar_range, config_.scalar_range);
    }
  }
}

ModelParams GibSystem::snapshot() const {
  return ModelParams{phi_, theta_, mine_.net().params()};
}

void GibSystem::restore(const ModelParams& params) {
  if (params.phi.size() != phi_.size() || params.theta.size() != theta_.size() ||
      params.kappa.size() != mine_.net().params().size()) {
    throw ShapeError("restore: parameter layout mismatch");
  }
  phi_.values() = params.phi.values();
  theta_.values() = params.theta.values();
  mine_.net().params().values() = params.kappa.values();
}

TransmitterPass GibSystem::transmit(const GraphInput& g, bool with_grad) const {
  TransmitterPass tx;
  tx.node_features = gnn_.forward(phi_, *g.ops, *g.features, with_grad ? &tx.gnn_cache : nullptr);
  tx.s = assigner_.forward(phi_, tx.node_features, with_grad ? &tx.assign_cache : nullptr);
  tx.aggregated = aggregate_subgraph(tx.s, tx.node_features);
  // A dead embedding (all-zero ReLU outputs) carries no signal; transmit
  // zeros instead of failing the whole batch.
  tx.signal = tx.aggregated.norm() > 0.0 ? normalize_power(tx.aggregated)
                                         : Vector::Zero(tx.aggregated.size());
  if (with_grad) {
    tx.con = connectivity_loss_with_grad(tx.s, *g.ops->adjacency);
  } else {
    tx.con.value = connectivity_loss(tx.s, *g.ops->adjacency);
  }
  if (codebook_) {
    auto q = quantize_chunks(tx.signal, *codebook_, config_.chunks);
    tx.indices = std::move(q.indices);
    tx.quantized = std::move(q.reconstruction);
  } else if (scalar_) {
    tx.indices = scalar_->quantize(tx.signal);
    tx.quantized = scalar_->dequantize(tx.indices);
  }
  return tx;
}

Vector GibSystem::receive_signal(const TransmitterPass& tx, const ChannelConfig* channel,
                                 Rng& rng) const {
  if (!config_.digital) {
    if (!channel) return tx.signal;
    if (channel->kind != ChannelKind::analog) throw ArgumentError("analog system needs an analog channel");
    return awgn(tx.signal, channel->snr_db, rng);
  }
  std::vector<int> received = tx.indices;
  if (channel) {
    if (channel->kind != ChannelKind::discrete) throw ArgumentError("digital system needs a discrete channel");
    received = sdc_transmit(tx.indices, channel->epsilon, config_.symbol_alphabet(), rng);
  }
  if (codebook_) return dequantize_chunks(received, *codebook_);
  return scalar_->dequantize(received);
}

Vector GibSystem::infer(const Vector& xhat, Rng* dropout_rng, InferenceHead::Cache* cache) const {
  return head_.forward(theta_, xhat, dropout_rng, cache);
}

void GibSystem::transmitter_backward(const GraphInput& g, const TransmitterPass& tx,
                                     const Vector& dxhat, double con_weight, double cm_weight,
                                     Vector& grad_phi) const {
  // Straight-through in digital mode, identity Jacobian for AWGN.
  Vector dsignal = dxhat;
  if (config_.digital && cm_weight != 0.0) dsignal += cm_weight * commitment_grad(tx.signal, tx.quantized);
  Vector daggregated = Vector::Zero(tx.aggregated.size());
  if (tx.aggregated.norm() > 0.0) daggregated = normalize_power_backward(tx.aggregated, dsignal);
  Matrix ds = Matrix::Zero(tx.s.s.rows(), 2);
  Matrix dx = Matrix::Zero(tx.node_features.rows(), tx.node_features.cols());
  aggregate_subgraph_backward(tx.s, tx.node_features, daggregated, ds, dx);
  if (con_weight != 0.0) ds += con_weight * tx.con.grad_s;
  dx += assigner_.backward(phi_, tx.assign_cache, ds, grad_phi);
  gnn_.backward(phi_, *g.ops, tx.gnn_cache, dx, grad_phi);
}

int GibSystem::predict(const GraphInput& g, const ChannelConfig* channel, Rng& rng) const {
  const auto tx = transmit(g, false);
  return argmax(infer(receive_signal(tx, channel, rng), nullptr, nullptr));
}

namespace {

constexpr std::uint64_t kTagBatch = 0xba7c;
constexpr std::uint64_t kTagNoise = 0xc4a;
constexpr std::uint64_t kTagDropout = 0xd0;
constexpr std::uint64_t kTagAccuracy = 0xacc;
constexpr std::uint64_t kTagPretrain = 0x9e;
constexpr std::uint64_t kTagReseed = 0x5eed;
constexpr std::uint64_t kTagEval = 0xe7a1;
constexpr std::uint64_t kTagEvalPairing = 0x9a2;
constexpr std::uint64_t kTagCodebookInit = 0xc0de1;
constexpr double kCodebookJitter = 0.05;

std::vector<std::vector<int>> make_batches(std::vector<int> order, int batch_size) {
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  // A single-graph batch has no negative pair for the MI bound.
  if (batches.size() > 1 && batches.back().size() < 2) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

}  // namespace

BatchForward forward_batch(const GibSystem& system, const PreparedCorpus& corpus,
                           const std::vector<int>& batch, std::uint64_t step) {
  const auto& cfg = system.config();
  const int b_n = static_cast<int>(batch.size());
  const int n_draws = cfg.noise_draws;
  const auto samples = static_cast<std::size_t>(b_n * n_draws);
  BatchForward f;
  f.batch = batch;
  for (int gid : batch) f.graphs.push_back(corpus.input(gid));
  f.tx.resize(batch.size());
  f.xhat.resize(samples);
  f.log_probs.resize(samples);
  f.head_caches.resize(samples);
  for_each_index(cfg.execution, b_n, [&](int b) {
    const auto sb = static_cast<std::size_t>(b);
    const auto gid = static_cast<std::uint64_t>(batch[sb]);
    f.tx[sb] = system.transmit(f.graphs[sb], true);
    for (int n = 0; n < n_draws; ++n) {
      const auto si = sb * static_cast<std::size_t>(n_draws) + static_cast<std::size_t>(n);
      Rng noise = make_rng(cfg.seed, {kTagNoise, step, gid, static_cast<std::uint64_t>(n)});
      Rng dropout = make_rng(cfg.seed, {kTagDropout, step, gid, static_cast<std::uint64_t>(n)});
      f.xhat[si] = system.receive_signal(f.tx[sb], &cfg.channel, noise);
      f.log_probs[si] = system.infer(f.xhat[si], &dropout, &f.head_caches[si]);
    }
  });
  for (std::size_t s = 0; s < samples; ++s) {
    f.sample_graphs.push_back(f.graphs[s / static_cast<std::size_t>(n_draws)]);
  }
  return f;
}

BatchGradient batch_gradient(const GibSystem& system, const PreparedCorpus& corpus,
                             const BatchForward& f, std::span<const int> pairing) {
  const auto& cfg = system.config();
  const int b_n = static_cast<int>(f.batch.size());
  const int n_draws = cfg.noise_draws;
  const int samples = b_n * n_draws;
  auto label_of = [&](std::size_t b) {
    return corpus.corpus().graphs[static_cast<std::size_t>(f.batch[b])].label;
  };

  BatchGradient out;
  LossComponents& c = out.loss;
  for (int s = 0; s < samples; ++s) {
    c.inf -= f.log_probs[static_cast<std::size_t>(s)](label_of(static_cast<std::size_t>(s / n_draws)));
  }
  c.inf /= samples;
  for (const auto& t : f.tx) {
    c.con += t.con.value;
    if (cfg.digital) c.cm += (t.signal - t.quantized).squaredNorm();
  }
  c.con /= b_n;
  c.cm /= b_n;
  c.vq = c.cm;

  const bool use_mi = cfg.beta > 0.0;
  DvResult dv;
  if (use_mi) {
    DvRequest req;
    req.signal_grad = true;
    req.execution = cfg.execution;
    dv = dv_estimate(system.mine().net(), f.sample_graphs, f.xhat, pairing, req);
    c.mi = dv.value;
  }
  c.total = total_loss(c, cfg);

  std::vector<Vector> grad_phi(f.batch.size());
  std::vector<Vector> grad_theta(f.batch.size());
  const double inv_samples = 1.0 / samples;
  for_each_index(cfg.execution, b_n, [&](int b) {
    const auto sb = static_cast<std::size_t>(b);
    grad_phi[sb] = system.phi().zeros_like();
    grad_theta[sb] = system.theta().zeros_like();
    Vector dxhat = Vector::Zero(cfg.hidden_dim);
    for (int n = 0; n < n_draws; ++n) {
      const auto si = sb * static_cast<std::size_t>(n_draws) + static_cast<std::size_t>(n);
      Vector dlogp = Vector::Zero(system.class_n());
      dlogp(label_of(sb)) = -inv_samples;
      dxhat += system.head().backward(system.theta(), f.head_caches[si], dlogp, grad_theta[sb]);
      if (use_mi) dxhat += cfg.beta * dv.signal_grad[si];
    }
    system.transmitter_backward(f.graphs[sb], f.tx[sb], dxhat, cfg.alpha / b_n,
                                cfg.lambda_cm / b_n, grad_phi[sb]);
  });
  out.phi = sum_in_order(grad_phi, static_cast<Eigen::Index>(system.phi().size()));
  out.theta = sum_in_order(grad_theta, static_cast<Eigen::Index>(system.theta().size()));
  return out;
}

namespace {

class FoldTrainer {
 public:
  FoldTrainer(GibSystem& system, const PreparedCorpus& corpus)
      : sys_(system),
        corpus_(corpus),
        cfg_(system.config()),
        adam_phi_(system.phi().size(), cfg_.learning_rate),
        adam_theta_(system.theta().size(), cfg_.learning_rate) {}

  TrainResult run(const std::vector<int>& train) {
    TrainResult result;
    if (cfg_.epochs > 0 && train.size() < 2) throw ArgumentError("train_fold: need at least two training graphs");
    const bool use_mi = cfg_.beta > 0.0;
    if (use_mi && cfg_.mine_schedule == MineSchedule::pretrain_freeze && cfg_.epochs > 0) {
      pretrain_mine(train);
    }
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      std::vector<int> order = train;
      Rng shuffle = make_rng(cfg_.seed, {kTagBatch, static_cast<std::uint64_t>(epoch)});
      std::shuffle(order.begin(), order.end(), shuffle);
      EpochStats stats;
      stats.epoch = epoch + 1;
      double weight = 0.0;
      for (const auto& batch : make_batches(std::move(order), cfg_.batch_size)) {
        const auto c = step(batch, stats.mine_curve);
        const double w = static_cast<double>(batch.size());
        stats.loss.inf += w * c.inf;
        stats.loss.mi += w * c.mi;
        stats.loss.con += w * c.con;
        stats.loss.vq += w * c.vq;
        stats.loss.cm += w * c.cm;
        weight += w;
      }
      stats.loss.inf /= weight;
      stats.loss.mi /= weight;
      stats.loss.con /= weight;
      stats.loss.vq /= weight;
      stats.loss.cm /= weight;
      stats.loss.total = total_loss(stats.loss, cfg_);
      stats.train_accuracy = accuracy(train, static_cast<std::uint64_t>(epoch));
      result.curve.push_back(std::move(stats));
    }
    result.params = sys_.snapshot();
    result.codebook = sys_.codebook();
    return result;
  }

 private:
  void pretrain_mine(const std::vector<int>& train) {
    const auto batches = make_batches(train, cfg_.batch_size);
    for (int p = 0; p < cfg_.mine_pretrain_steps; ++p) {
      const auto& batch = batches[static_cast<std::size_t>(p) % batches.size()];
      std::vector<GraphInput> graphs;
      std::vector<Vector> xhat(batch.size());
      for (int gid : batch) graphs.push_back(corpus_.input(gid));
      for_each_index(cfg_.execution, static_cast<int>(batch.size()), [&](int b) {
        const int gid = batch[static_cast<std::size_t>(b)];
        Rng rng = make_rng(cfg_.seed, {kTagPretrain, static_cast<std::uint64_t>(p),
                                       static_cast<std::uint64_t>(gid)});
        xhat[static_cast<std::size_t>(b)] =
            sys_.receive_signal(sys_.transmit(graphs[static_cast<std::size_t>(b)], false), &cfg_.channel, rng);
      });
      sys_.mine().step_graphs(graphs, xhat, cfg_.execution);
    }
  }

  LossComponents step(const std::vector<int>& batch, std::vector<double>& mine_curve) {
    const auto step_id = static_cast<std::uint64_t>(global_step_);
    const ModelParams before = sys_.snapshot();
    const auto codebook_before = sys_.codebook();

    const BatchForward f = forward_batch(sys_, corpus_, batch, step_id);
    std::vector<int> pairing;
    if (cfg_.beta > 0.0) {
      if (cfg_.mine_schedule == MineSchedule::per_batch) {
        mine_curve = mine_inner_train(sys_.mine(), f.sample_graphs, f.xhat, cfg_.inner_steps,
                                      cfg_.execution);
      }
      pairing = sys_.mine().next_pairing(static_cast<int>(f.xhat.size()));
    }
    const BatchGradient g = batch_gradient(sys_, corpus_, f, pairing);
    const LossComponents& c = g.loss;
    if (!std::isfinite(c.total)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << global_step_ << " (inf=" << c.inf << ", mi=" << c.mi
          << ", con=" << c.con << ", cm=" << c.cm << ")";
      throw TrainingAborted(msg.str(), before, codebook_before);
    }
    if (!g.phi.allFinite() || !g.theta.allFinite()) {
      throw TrainingAborted("non-finite gradient at step " + std::to_string(global_step_), before,
                            codebook_before);
    }
    adam_phi_.step(sys_.phi().values(), g.phi);
    adam_theta_.step(sys_.theta().values(), g.theta);

    if (auto& cb = sys_.codebook()) update_codebook(*cb, f.tx, step_id);
    ++global_step_;
    return c;
  }

  void update_codebook(Codebook& cb, const std::vector<TransmitterPass>& tx, std::uint64_t step_id) {
    const Eigen::Index d = cb.dim();
    std::vector<Vector> vectors;
    std::vector<int> indices;
    for (const auto& t : tx) {
      for (std::size_t c = 0; c < t.indices.size(); ++c) {
        vectors.push_back(t.signal.segment(static_cast<Eigen::Index>(c) * d, d));
        indices.push_back(t.indices[c]);
      }
    }
    if (step_id == 0 && cfg_.codebook_data_init) {
      Rng init = make_rng(cfg_.seed, {kTagCodebookInit});
      cb.initialize_from(vectors, kCodebookJitter, init);
      return;
    }
    if (cfg_.ema) {
      Rng reseed = make_rng(cfg_.seed, {kTagReseed, step_id});
      cb.ema_update(vectors, indices, &reseed);
    } else {
      Matrix grad = Matrix::Zero(cb.size(), d);
      for (std::size_t i = 0; i < vectors.size(); ++i) {
        grad.row(indices[i]) += codebook_loss_grad(vectors[i], cb.entry(indices[i])).transpose();
      }
      cb.apply_gradient(grad / static_cast<double>(tx.size()), cfg_.codebook_learning_rate);
    }
  }

  double accuracy(const std::vector<int>& indices, std::uint64_t epoch) {
    std::vector<int> correct(indices.size(), 0);
    for_each_index(cfg_.execution, static_cast<int>(indices.size()), [&](int i) {
      const int gid = indices[static_cast<std::size_t>(i)];
      Rng rng = make_rng(cfg_.seed, {kTagAccuracy, epoch, static_cast<std::uint64_t>(gid)});
      const int pred = sys_.predict(corpus_.input(gid), &cfg_.channel, rng);
      correct[static_cast<std::size_t>(i)] = pred == corpus_.corpus().graphs[static_cast<std::size_t>(gid)].label;
    });
    return static_cast<double>(std::accumulate(correct.begin(), correct.end(), 0)) /
           static_cast<double>(indices.size());
  }

  GibSystem& sys_;
  const PreparedCorpus& corpus_;
  TrainConfig cfg_;
  Adam adam_phi_;
  Adam adam_theta_;
  long global_step_ = 0;
};

}  // namespace

TrainResult train_on(GibSystem& system, const PreparedCorpus& corpus,
                     const std::vector<int>& train_indices) {
  FoldTrainer trainer(system, corpus);
  return trainer.run(train_indices);
}

TrainResult train_fold(GibSystem& system, const PreparedCorpus& corpus, const FoldSplit& split,
                       int fold) {
  if (fold < 0 || fold >= split.fold_count) throw ArgumentError("train_fold: fold index out of range");
  return train_on(system, corpus, split.train_indices(fold));
}

std::vector<EvalResult> evaluate(const GibSystem& system, const PreparedCorpus& corpus,
                                 const std::vector<int>& indices,
                                 const std::vector<ChannelConfig>& settings) {
  if (settings.empty()) throw ArgumentError("evaluate: no channel settings");
  if (indices.empty()) throw ArgumentError("evaluate: no graphs");
  const auto& cfg = system.config();
  const int n = static_cast<int>(indices.size());
  std::vector<GraphInput> graphs;
  std::vector<int> labels;
  for (int gid : indices) {
    graphs.push_back(corpus.input(gid));
    labels.push_back(corpus.corpus().graphs.at(static_cast<std::size_t>(gid)).label);
  }
  std::vector<TransmitterPass> tx(indices.size());
  for_each_index(cfg.execution, n, [&](int i) {
    tx[static_cast<std::size_t>(i)] = system.transmit(graphs[static_cast<std::size_t>(i)], false);
  });

  std::vector<EvalResult> results;
  for (const auto& setting : settings) {
    setting.validate();
    EvalResult r;
    r.channel = setting;
    r.labels = labels;
    r.predictions.assign(indices.size(), 0);
    std::vector<Vector> xhat(indices.size());
    std::vector<double> nll(indices.size(), 0.0);
    for_each_index(cfg.execution, n, [&](int i) {
      const auto si = static_cast<std::size_t>(i);
      Rng rng = make_rng(setting.seed, {kTagEval, static_cast<std::uint64_t>(indices[si])});
      xhat[si] = system.receive_signal(tx[si], &setting, rng);
      const Vector logp = system.infer(xhat[si], nullptr, nullptr);
      r.predictions[si] = argmax(logp);
      nll[si] = -logp(labels[si]);
    });
    int correct = 0;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      correct += r.predictions[i] == labels[i];
      r.loss.inf += nll[i];
      r.loss.con += tx[i].con.value;
      if (cfg.digital) r.loss.cm += (tx[i].signal - tx[i].quantized).squaredNorm();
    }
    r.accuracy = static_cast<double>(correct) / n;
    r.loss.inf /= n;
    r.loss.con /= n;
    r.loss.cm /= n;
    r.loss.vq = r.loss.cm;
    if (n >= 2) {
      Rng rng = make_rng(setting.seed, {kTagEvalPairing});
      r.loss.mi = dv_estimate(system.mine().net(), graphs, xhat, derangement(n, rng)).value;
    }
    r.loss.total = total_loss(r.loss, cfg);
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<ChannelConfig> EvalAxis::settings(const TrainConfig& config, std::uint64_t seed) const {
  std::vector<ChannelConfig> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t s = derive_seed(seed, {0x5e77, static_cast<std::uint64_t>(i)});
    const double v = values[i];
    if (name == "snr_db") {
      out.push_back(ChannelConfig::analog(v, s));
    } else if (name == "epsilon") {
      out.push_back(ChannelConfig::discrete(v, config.symbol_alphabet(), s));
    } else if (name == "symbol_error_rate") {
      out.push_back(ChannelConfig::discrete(1.0 - v, config.symbol_alphabet(), s));
    } else {
      throw ArgumentError("unknown evaluation axis '" + name + "'");
    }
    if ((out.back().kind == ChannelKind::analog) == config.digital) {
      throw ArgumentError("evaluation axis '" + name + "' does not match the " +
                          (config.digital ? "digital" : "analog") + " pipeline");
    }
  }
  return out;
}

std::vector<SettingSummary> aggregate(std::span<const MetricsRecord> records) {
  std::vector<SettingSummary> out;
  std::vector<std::vector<double>> values;
  for (const auto& r : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SettingSummary& s) {
      return s.axis_name == r.axis_name && s.axis_value == r.axis_value;
    });
    if (it == out.end()) {
      out.push_back(SettingSummary{r.axis_name, r.axis_value, 0.0, 0.0, 0});
      values.emplace_back();
      it = out.end() - 1;
    }
    values[static_cast<std::size_t>(it - out.begin())].push_back(r.accuracy);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& v = values[i];
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out[i].mean = mean;
    out[i].stdev = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    out[i].folds = static_cast<int>(v.size());
  }
  return out;
}

std::uint64_t fold_seed(std::uint64_t base, int fold) {
  return derive_seed(base, {0xf0, static_cast<std::uint64_t>(fold)});
}

CrossValidation cross_validate(const Corpus& corpus, const TrainConfig& config,
                               const EvalAxis& axis, const CvOptions& options) {
  config.validate();
  const FoldSplit split = kfold_split(corpus, options.k, config.seed);
  const PreparedCorpus prepared(corpus);
  std::vector<std::vector<MetricsRecord>> per_fold(static_cast<std::size_t>(options.k));

  for_each_index(options.fold_execution, options.k, [&](int fold) {
    const auto start = std::chrono::steady_clock::now();
    TrainConfig fold_config = config;
    fold_config.seed = fold_seed(config.seed, fold);
    const auto test = split.test_indices(fold);
    const auto before = checksum(corpus, test);

    GibSystem system(corpus.feature_dim, corpus.class_n, fold_config);
    train_fold(system, prepared, split, fold);
    if (checksum(corpus, test) != before) {
      throw std::logic_error("held-out fold " + std::to_string(fold) + " changed during training");
    }
    if (options.on_fold_trained) options.on_fold_trained(fold, system, prepared, test);
    const auto settings = axis.settings(fold_config, fold_config.seed);
    const auto results = evaluate(system, prepared, test, settings);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    auto& out = per_fold[static_cast<std::size_t>(fold)];
    for (std::size_t i = 0; i < results.size(); ++i) {
      MetricsRecord rec;
      rec.experiment = options.experiment;
      rec.variant = options.variant;
      rec.backbone = to_string(config.backbone);
      rec.hidden_dim = config.hidden_dim;
      rec.fold = fold;
      rec.axis_name = axis.name;
      rec.axis_value = axis.values[i];
      rec.accuracy = results[i].accuracy;
      rec.loss = results[i].loss;
      rec.epoch = config.epochs;
      rec.seed = settings[i].seed;
      rec.wall_time_s = options.record_wall_time ? wall : 0.0;
      out.push_back(std::move(rec));
    }
  });

  CrossValidation cv;
  for (auto& fold_records : per_fold) {
    for (auto& r : fold_records) cv.records.push_back(std::move(r));
  }
  cv.summary = aggregate(cv.records);
  return cv;
}

}  // namespace gib
