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

#include "gib/mine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gib {

StatisticsNetwork StatisticsNetwork::for_graphs(int feature_dim, int graph_dim, int signal_dim,
                                                int hidden, std::uint64_t seed) {
  StatisticsNetwork net;
  net.graph_branch_ = GnnStack::create(net.params_, "mine.gnn", BackboneKind::gcn,
                                       feature_dim, graph_dim);
  net.u_dim_ = graph_dim;
  net.v_dim_ = signal_dim;
  net.fc0_ = Linear::create(net.params_, "mine.fc0", graph_dim + signal_dim, hidden);
  net.fc1_ = Linear::create(net.params_, "mine.fc1", hidden, 1);
  glorot_init(net.params_, seed);
  return net;
}

StatisticsNetwork StatisticsNetwork::for_vectors(int u_dim, int v_dim, int hidden,
                                                 std::uint64_t seed) {
  StatisticsNetwork net;
  net.u_dim_ = u_dim;
  net.v_dim_ = v_dim;
  net.fc0_ = Linear::create(net.params_, "mine.fc0", u_dim + v_dim, hidden);
  net.fc1_ = Linear::create(net.params_, "mine.fc1", hidden, 1);
  glorot_init(net.params_, seed);
  return net;
}

Vector StatisticsNetwork::summarize(const GraphInput& g, SummaryCache* cache) const {
  if (!graph_branch_) throw EstimatorError("statistics network has no graph branch");
  const Matrix h = graph_branch_->forward(params_, *g.ops, *g.features,
                                          cache ? &cache->gnn : nullptr);
  if (cache) cache->nodes = h.rows();
  return h.colwise().mean().transpose();
}

void StatisticsNetwork::summarize_backward(const GraphInput& g, const SummaryCache& cache,
                                           const Vector& du, Vector& grad) const {
  const Matrix dh = Matrix::Ones(cache.nodes, 1) * (du.transpose() / static_cast<double>(cache.nodes));
  graph_branch_->backward(params_, *g.ops, cache.gnn, dh, grad);
}

double StatisticsNetwork::score(const Vector& u, const Vector& v, ScoreCache* cache) const {
  if (u.size() != u_dim_ || v.size() != v_dim_) throw ShapeError("statistics network: input size mismatch");
  Matrix input(1, u_dim_ + v_dim_);
  input << u.transpose(), v.transpose();
  Matrix hidden = fc0_.forward(params_, input);
  const double out = fc1_.forward(params_, hidden.cwiseMax(0.0))(0, 0);
  if (cache) {
    cache->input = std::move(input);
    cache->hidden = std::move(hidden);
  }
  return out;
}

void StatisticsNetwork::score_backward(const ScoreCache& cache, double dscore, Vector& grad,
                                       Vector* du, Vector* dv) const {
  const Matrix dout = Matrix::Constant(1, 1, dscore);
  const Matrix drelu = fc1_.backward(params_, cache.hidden.cwiseMax(0.0), dout, grad);
  const Matrix dhidden = (cache.hidden.array() > 0.0).select(drelu, 0.0);
  const Matrix dinput = fc0_.backward(params_, cache.input, dhidden, grad);
  if (du) *du = dinput.row(0).head(u_dim_).transpose();
  if (dv) *dv = dinput.row(0).tail(v_dim_).transpose();
}

std::vector<int> derangement(int n, Rng& rng) {
  if (n < 2) throw EstimatorError("derangement needs at least two elements");
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(pick(rng))]);
  }
  return p;
}

namespace {

struct CoreResult {
  DvResult dv;
  std::vector<Vector> summary_grad;  // ∂value/∂u_i
};

CoreResult dv_core(const StatisticsNetwork& net, std::span<const Vector> u,
                   std::span<const Vector> v, std::span<const int> pairing,
                   const DvRequest& req, bool want_summary_grad) {
  const int k = static_cast<int>(u.size());
  if (k < 2) throw EstimatorError("DV estimate needs a batch of at least two pairs");
  if (v.size() != u.size() || pairing.size() != u.size()) {
    throw ShapeError("DV estimate: batch components differ in size");
  }
  std::vector<bool> seen(u.size(), false);
  for (int j : pairing) {
    if (j < 0 || j >= k || seen[static_cast<std::size_t>(j)]) {
      throw ArgumentError("DV estimate: pairing is not a permutation");
    }
    seen[static_cast<std::size_t>(j)] = true;
  }

  const bool backward = req.param_grad || req.signal_grad || want_summary_grad;
  CoreResult out;
  auto& r = out.dv;
  r.joint.resize(u.size());
  r.marginal.resize(u.size());
  std::vector<StatisticsNetwork::ScoreCache> jc(backward ? u.size() : 0);
  std::vector<StatisticsNetwork::ScoreCache> mc(backward ? u.size() : 0);
  for_each_index(req.execution, k, [&](int i) {
    const auto si = static_cast<std::size_t>(i);
    const auto pi = static_cast<std::size_t>(pairing[si]);
    r.joint[si] = net.score(u[si], v[si], backward ? &jc[si] : nullptr);
    r.marginal[si] = net.score(u[si], v[pi], backward ? &mc[si] : nullptr);
  });

  const double mx = *std::max_element(r.marginal.begin(), r.marginal.end());
  double sum_exp = 0.0;
  for (double m : r.marginal) sum_exp += std::exp(m - mx);
  const double log_mean_exp = mx + std::log(sum_exp) - std::log(static_cast<double>(k));
  const double joint_mean =
      std::accumulate(r.joint.begin(), r.joint.end(), 0.0) / static_cast<double>(k);
  r.value = joint_mean - log_mean_exp;
  if (!backward) return out;

  const double inv_k = 1.0 / static_cast<double>(k);
  std::vector<Vector> grads(u.size());
  std::vector<Vector> du(u.size());
  std::vector<Vector> dv_joint(u.size());
  std::vector<Vector> dv_marg(u.size());
  for_each_index(req.execution, k, [&](int i) {
    const auto si = static_cast<std::size_t>(i);
    const double w = std::exp(r.marginal[si] - mx) / sum_exp;
    grads[si] = net.params().zeros_like();
    Vector du_j;
    Vector du_m;
    net.score_backward(jc[si], inv_k, grads[si], &du_j, &dv_joint[si]);
    net.score_backward(mc[si], -w, grads[si], &du_m, &dv_marg[si]);
    du[si] = du_j + du_m;
  });
  if (req.param_grad) {
    r.param_grad = sum_in_order(grads, static_cast<Eigen::Index>(net.params().size()));
  }
  if (req.signal_grad) {
    r.signal_grad.assign(u.size(), Vector::Zero(net.signal_dim()));
    for (std::size_t i = 0; i < u.size(); ++i) {
      r.signal_grad[i] += dv_joint[i];
      r.signal_grad[static_cast<std::size_t>(pairing[i])] += dv_marg[i];
    }
  }
  if (want_summary_grad) out.summary_grad = std::move(du);
  return out;
}

}  // namespace

DvResult dv_estimate_vectors(const StatisticsNetwork& net, std::span<const Vector> summaries,
                             std::span<const Vector> signals, std::span<const int> pairing,
                             const DvRequest& request) {
  return dv_core(net, summaries, signals, pairing, request, false).dv;
}

DvResult dv_estimate(const StatisticsNetwork& net, std::span<const GraphInput> graphs,
                     std::span<const Vector> signals, std::span<const int> pairing,
                     const DvRequest& request) {
  const int k = static_cast<int>(graphs.size());
  std::vector<Vector> u(graphs.size());
  std::vector<StatisticsNetwork::SummaryCache> caches(request.param_grad ? graphs.size() : 0);
  for_each_index(request.execution, k, [&](int i) {
    const auto si = static_cast<std::size_t>(i);
    u[si] = net.summarize(graphs[si], request.param_grad ? &caches[si] : nullptr);
  });
  CoreResult core = dv_core(net, u, signals, pairing, request, request.param_grad);
  if (request.param_grad) {
    std::vector<Vector> grads(graphs.size());
    for_each_index(request.execution, k, [&](int i) {
      const auto si = static_cast<std::size_t>(i);
      grads[si] = net.params().zeros_like();
      net.summarize_backward(graphs[si], caches[si], core.summary_grad[si], grads[si]);
    });
    core.dv.param_grad += sum_in_order(grads, static_cast<Eigen::Index>(net.params().size()));
  }
  return std::move(core.dv);
}

MineTrainer::MineTrainer(StatisticsNetwork net, double learning_rate, std::uint64_t seed)
    : net_(std::move(net)),
      adam_(net_.params().size(), learning_rate),
      seed_(seed) {}

std::vector<int> MineTrainer::next_pairing(int n) {
  Rng rng = make_rng(seed_, {0x9a1, counter_++});
  return derangement(n, rng);
}

void MineTrainer::apply(const DvResult& r) {
  if (!std::isfinite(r.value) || !r.param_grad.allFinite()) {
    std::ostringstream msg;
    msg << "MINE training produced a non-finite bound (value=" << r.value
        << ", step=" << adam_.steps() << ", max|joint|="
        << (r.joint.empty() ? 0.0 : std::abs(*std::max_element(r.joint.begin(), r.joint.end(),
                                      [](double a, double b) { return std::abs(a) < std::abs(b); })))
        << ")";
    throw EstimatorError(msg.str());
  }
  // Ascent on the bound.
  adam_.step(net_.params().values(), -r.param_grad);
}

double MineTrainer::step_vectors(std::span<const Vector> summaries,
                                 std::span<const Vector> signals, Execution ex) {
  const auto pairing = next_pairing(static_cast<int>(summaries.size()));
  DvRequest req;
  req.param_grad = true;
  req.execution = ex;
  const DvResult r = dv_estimate_vectors(net_, summaries, signals, pairing, req);
  apply(r);
  return r.value;
}

double MineTrainer::step_graphs(std::span<const GraphInput> graphs,
                                std::span<const Vector> signals, Execution ex) {
  const auto pairing = next_pairing(static_cast<int>(graphs.size()));
  DvRequest req;
  req.param_grad = true;
  req.execution = ex;
  const DvResult r = dv_estimate(net_, graphs, signals, pairing, req);
  apply(r);
  return r.value;
}

std::vector<double> mine_inner_train(MineTrainer& trainer, std::span<const GraphInput> graphs,
                                     std::span<const Vector> signals, int steps, Execution ex) {
  if (steps < 1) throw ArgumentError("mine_inner_train: steps must be >= 1");
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(steps));
  for (int s = 0; s < steps; ++s) curve.push_back(trainer.step_graphs(graphs, signals, ex));
  return curve;
}

}  // namespace gib
