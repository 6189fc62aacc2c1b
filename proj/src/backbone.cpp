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

#include "gib/backbone.hpp"

#include <cmath>

namespace gib {

BackboneKind parse_backbone(const std::string& s) {
  if (s == "gcn" || s == "GCN") return BackboneKind::gcn;
  if (s == "gin" || s == "GIN") return BackboneKind::gin;
  throw ArgumentError("unknown backbone '" + s + "' (expected gcn or gin)");
}

std::string to_string(BackboneKind kind) {
  return kind == BackboneKind::gcn ? "gcn" : "gin";
}

Matrix normalized_adjacency(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw ShapeError("adjacency must be square");
  Matrix tilde = adjacency;
  tilde.diagonal().array() += 1.0;
  const Vector inv_sqrt = tilde.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * tilde * inv_sqrt.asDiagonal();
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  return log_softmax_rows(logits).array().exp();
}

Linear Linear::create(ParamSet& params, const std::string& prefix, int in, int out) {
  Linear l;
  l.weight = params.add(prefix + ".weight", in, out);
  l.bias = params.add(prefix + ".bias", 1, out);
  l.in = in;
  l.out = out;
  return l;
}

Matrix Linear::forward(const ParamSet& params, const Matrix& x) const {
  if (x.cols() != in) {
    throw ShapeError("linear: expected " + std::to_string(in) + " input columns, got " +
                     std::to_string(x.cols()));
  }
  Matrix y = x * params.view(weight);
  y.rowwise() += params.view(bias).row(0);
  return y;
}

Matrix Linear::backward(const ParamSet& params, const Matrix& x, const Matrix& dy,
                        Vector& grad) const {
  params.view_in(weight, grad).noalias() += x.transpose() * dy;
  params.view_in(bias, grad).row(0) += dy.colwise().sum();
  return dy * params.view(weight).transpose();
}

GcnLayer GcnLayer::create(ParamSet& params, const std::string& prefix, int in, int out) {
  return GcnLayer{Linear::create(params, prefix, in, out)};
}

Matrix GcnLayer::forward(const ParamSet& params, const Matrix& norm_adj, const Matrix& h,
                         Cache* cache) const {
  if (norm_adj.rows() != h.rows()) throw ShapeError("gcn: adjacency/feature row mismatch");
  Matrix propagated = norm_adj * h;
  Matrix pre = linear.forward(params, propagated);
  Matrix out = pre.cwiseMax(0.0);
  if (cache) {
    cache->propagated = std::move(propagated);
    cache->pre = std::move(pre);
  }
  return out;
}

Matrix GcnLayer::backward(const ParamSet& params, const Matrix& norm_adj, const Cache& cache,
                          const Matrix& dy, Vector& grad) const {
  const Matrix dpre = (cache.pre.array() > 0.0).select(dy, 0.0);
  const Matrix dprop = linear.backward(params, cache.propagated, dpre, grad);
  return norm_adj.transpose() * dprop;
}

GinLayer GinLayer::create(ParamSet& params, const std::string& prefix, int in, int out) {
  GinLayer l;
  l.epsilon = params.add(prefix + ".eps", 1, 1);
  l.first = Linear::create(params, prefix + ".mlp0", in, out);
  l.second = Linear::create(params, prefix + ".mlp1", out, out);
  return l;
}

Matrix GinLayer::forward(const ParamSet& params, const Matrix& adjacency, const Matrix& h,
                         Cache* cache) const {
  if (adjacency.rows() != h.rows()) throw ShapeError("gin: adjacency/feature row mismatch");
  const double eps = params.view(epsilon)(0, 0);
  Matrix summed = (1.0 + eps) * h + adjacency * h;
  Matrix hidden = first.forward(params, summed);
  Matrix out = second.forward(params, hidden.cwiseMax(0.0));
  if (cache) {
    cache->input = h;
    cache->summed = std::move(summed);
    cache->hidden = std::move(hidden);
  }
  return out;
}

Matrix GinLayer::backward(const ParamSet& params, const Matrix& adjacency, const Cache& cache,
                          const Matrix& dy, Vector& grad) const {
  const Matrix relu = cache.hidden.cwiseMax(0.0);
  const Matrix drelu = second.backward(params, relu, dy, grad);
  const Matrix dhidden = (cache.hidden.array() > 0.0).select(drelu, 0.0);
  const Matrix dsummed = first.backward(params, cache.summed, dhidden, grad);
  params.view_in(epsilon, grad)(0, 0) += (dsummed.array() * cache.input.array()).sum();
  const double eps = params.view(epsilon)(0, 0);
  return (1.0 + eps) * dsummed + adjacency.transpose() * dsummed;
}

GraphOperators make_operators(const Matrix& adjacency) {
  return GraphOperators{&adjacency, normalized_adjacency(adjacency)};
}

GnnStack GnnStack::create(ParamSet& params, const std::string& prefix, BackboneKind kind,
                          int in, int hidden) {
  GnnStack s;
  s.kind_ = kind;
  s.hidden_ = hidden;
  for (int l = 0; l < 2; ++l) {
    const int layer_in = l == 0 ? in : hidden;
    const std::string name = prefix + ".layer" + std::to_string(l);
    if (kind == BackboneKind::gcn) {
      s.gcn_.push_back(GcnLayer::create(params, name, layer_in, hidden));
    } else {
      s.gin_.push_back(GinLayer::create(params, name, layer_in, hidden));
    }
  }
  return s;
}

Matrix GnnStack::forward(const ParamSet& params, const GraphOperators& ops, const Matrix& x,
                         Cache* cache) const {
  Matrix h = x;
  if (kind_ == BackboneKind::gcn) {
    if (cache) cache->gcn.resize(gcn_.size());
    for (std::size_t l = 0; l < gcn_.size(); ++l) {
      h = gcn_[l].forward(params, ops.normalized, h, cache ? &cache->gcn[l] : nullptr);
    }
  } else {
    if (cache) {
      cache->gin.resize(gin_.size());
      cache->gin_out.resize(gin_.size());
    }
    for (std::size_t l = 0; l < gin_.size(); ++l) {
      Matrix out = gin_[l].forward(params, *ops.adjacency, h, cache ? &cache->gin[l] : nullptr);
      h = out.cwiseMax(0.0);
      if (cache) cache->gin_out[l] = std::move(out);
    }
  }
  return h;
}

Matrix GnnStack::backward(const ParamSet& params, const GraphOperators& ops, const Cache& cache,
                          const Matrix& dy, Vector& grad) const {
  Matrix d = dy;
  if (kind_ == BackboneKind::gcn) {
    for (std::size_t l = gcn_.size(); l-- > 0;) {
      d = gcn_[l].backward(params, ops.normalized, cache.gcn[l], d, grad);
    }
  } else {
    for (std::size_t l = gin_.size(); l-- > 0;) {
      const Matrix dout = (cache.gin_out[l].array() > 0.0).select(d, 0.0);
      d = gin_[l].backward(params, *ops.adjacency, cache.gin[l], dout, grad);
    }
  }
  return d;
}

InferenceHead InferenceHead::create(ParamSet& params, const std::string& prefix, int dim,
                                    int class_n, double dropout) {
  if (dropout < 0.0 || dropout >= 1.0) throw ArgumentError("dropout must lie in [0, 1)");
  InferenceHead h;
  h.first_ = Linear::create(params, prefix + ".fc0", dim, dim);
  h.second_ = Linear::create(params, prefix + ".fc1", dim, class_n);
  h.class_n_ = class_n;
  h.dropout_ = dropout;
  return h;
}

Vector InferenceHead::forward(const ParamSet& params, const Vector& x, Rng* rng,
                              Cache* cache) const {
  if (!x.allFinite()) throw ArgumentError("inference_head: non-finite input");
  const Matrix in = x.transpose();
  Matrix hidden = first_.forward(params, in);
  Matrix mask = Matrix::Ones(1, hidden.cols());
  if (rng && dropout_ > 0.0) {
    std::bernoulli_distribution keep(1.0 - dropout_);
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      mask(0, c) = keep(*rng) ? 1.0 / (1.0 - dropout_) : 0.0;
    }
  }
  Matrix dropped = hidden.cwiseMax(0.0).cwiseProduct(mask);
  Matrix log_probs = log_softmax_rows(second_.forward(params, dropped));
  Vector out = log_probs.row(0).transpose();
  if (cache) {
    cache->input = in;
    cache->hidden = std::move(hidden);
    cache->mask = std::move(mask);
    cache->dropped = std::move(dropped);
    cache->log_probs = std::move(log_probs);
  }
  return out;
}

Vector InferenceHead::backward(const ParamSet& params, const Cache& cache, const Vector& dlogp,
                               Vector& grad) const {
  // d logits = dlogp - softmax * sum(dlogp)
  const RowVector probs = cache.log_probs.row(0).array().exp();
  const Matrix dlogits = dlogp.transpose() - probs * dlogp.sum();
  const Matrix ddropped = second_.backward(params, cache.dropped, dlogits, grad);
  const Matrix dhidden =
      (cache.hidden.array() > 0.0).select(ddropped.cwiseProduct(cache.mask), 0.0);
  const Matrix dx = first_.backward(params, cache.input, dhidden, grad);
  return dx.row(0).transpose();
}

void glorot_init(ParamSet& params, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x6107});
  for (std::size_t i = 0; i < params.blocks().size(); ++i) {
    const auto& b = params.blocks()[i];
    auto view = params.view(BlockId{i});
    const bool is_weight = b.name.size() >= 7 && b.name.compare(b.name.size() - 7, 7, ".weight") == 0;
    if (!is_weight) {
      view.setZero();
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (Eigen::Index c = 0; c < view.cols(); ++c) {
      for (Eigen::Index r = 0; r < view.rows(); ++r) view(r, c) = unif(rng);
    }
  }
}

ParamSet init_params(const std::vector<int>& sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw ArgumentError("init_params: need at least two layer sizes");
  ParamSet params;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    if (sizes[i] <= 0 || sizes[i + 1] <= 0) throw ArgumentError("init_params: sizes must be positive");
    Linear::create(params, "l" + std::to_string(i), sizes[i], sizes[i + 1]);
  }
  glorot_init(params, seed);
  return params;
}

}  // namespace gib
