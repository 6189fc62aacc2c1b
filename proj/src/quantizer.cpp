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

#include "gib/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gib {

Codebook::Codebook(Matrix entries, double decay, double smoothing)
    : entries_(std::move(entries)), decay_(decay), smoothing_(smoothing) {
  if (entries_.rows() < 2) throw ArgumentError("codebook needs at least two entries");
  if (!entries_.allFinite()) throw ArgumentError("codebook entries must be finite");
  if (!(decay_ > 0.0 && decay_ < 1.0)) throw ArgumentError("codebook decay must lie in (0, 1)");
  if (!(smoothing_ >= 0.0)) throw ArgumentError("codebook smoothing must be non-negative");
  // Unit counts with sums equal to the entries make the initial state a
  // fixed point of the smoothed ratio.
  counts_ = Vector::Ones(entries_.rows());
  sums_ = entries_;
  dead_steps_.assign(static_cast<std::size_t>(entries_.rows()), 0);
}

Codebook Codebook::random(int size, int dim, std::uint64_t seed, double decay,
                          double smoothing) {
  if (dim <= 0) throw ArgumentError("codebook dimension must be positive");
  Rng rng = make_rng(seed, {0xc0de});
  std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  Matrix e(size, dim);
  for (Eigen::Index r = 0; r < e.rows(); ++r) {
    for (Eigen::Index c = 0; c < e.cols(); ++c) e(r, c) = n(rng);
  }
  return Codebook(std::move(e), decay, smoothing);
}

int Codebook::nearest(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != entries_.cols()) throw ShapeError("quantize: dimension mismatch");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < entries_.rows(); ++k) {
    const double d = (entries_.row(k).transpose() - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

QuantizationResult Codebook::quantize(const Vector& x) const {
  QuantizationResult r;
  r.index = nearest(x);
  r.codeword = entry(r.index);
  r.commit_input = x;
  return r;
}

void Codebook::ema_update(std::span<const Vector> vectors, std::span<const int> indices,
                          Rng* reseed) {
  if (vectors.size() != indices.size()) throw ShapeError("ema_update: vectors/indices size mismatch");
  const Eigen::Index k_n = entries_.rows();
  Vector batch_counts = Vector::Zero(k_n);
  Matrix batch_sums = Matrix::Zero(k_n, entries_.cols());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const int k = indices[i];
    if (k < 0 || k >= k_n) throw ArgumentError("ema_update: index out of range");
    if (vectors[i].size() != entries_.cols()) throw ShapeError("ema_update: vector dimension mismatch");
    batch_counts(k) += 1.0;
    batch_sums.row(k) += vectors[i].transpose();
  }
  counts_ = decay_ * counts_ + (1.0 - decay_) * batch_counts;
  sums_ = decay_ * sums_ + (1.0 - decay_) * batch_sums;

  const double total = counts_.sum();
  const double scale = total / (total + static_cast<double>(k_n) * smoothing_);
  for (Eigen::Index k = 0; k < k_n; ++k) {
    const double smoothed = (counts_(k) + smoothing_) * scale;
    if (smoothed > 0.0) entries_.row(k) = sums_.row(k) / smoothed;
  }

  if (reseed && !vectors.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, vectors.size() - 1);
    for (Eigen::Index k = 0; k < k_n; ++k) {
      auto& streak = dead_steps_[static_cast<std::size_t>(k)];
      streak = batch_counts(k) == 0.0 ? streak + 1 : 0;
      if (streak >= dead_patience) {
        const Vector& v = vectors[pick(*reseed)];
        entries_.row(k) = v.transpose();
        counts_(k) = 1.0;
        sums_.row(k) = v.transpose();
        streak = 0;
      }
    }
  }
}

void Codebook::apply_gradient(const Matrix& grad, double learning_rate) {
  if (grad.rows() != entries_.rows() || grad.cols() != entries_.cols()) {
    throw ShapeError("codebook gradient shape mismatch");
  }
  entries_ -= learning_rate * grad;
  sums_ = entries_.array().colwise() * counts_.array();
}

void Codebook::set_state(Matrix entries, Vector counts, Matrix sums) {
  if (counts.size() != entries.rows() || sums.rows() != entries.rows() ||
      sums.cols() != entries.cols()) {
    throw ShapeError("codebook state shape mismatch");
  }
  entries_ = std::move(entries);
  counts_ = std::move(counts);
  sums_ = std::move(sums);
  dead_steps_.assign(static_cast<std::size_t>(entries_.rows()), 0);
}

void Codebook::initialize_from(std::span<const Vector> vectors, double jitter, Rng& rng) {
  if (vectors.empty()) throw ArgumentError("initialize_from: no vectors");
  std::uniform_int_distribution<std::size_t> pick(0, vectors.size() - 1);
  std::normal_distribution<double> noise(0.0, jitter);
  for (Eigen::Index k = 0; k < entries_.rows(); ++k) {
    const Vector& v = vectors[pick(rng)];
    if (v.size() != entries_.cols()) throw ShapeError("initialize_from: vector dimension mismatch");
    for (Eigen::Index c = 0; c < entries_.cols(); ++c) entries_(k, c) = v(c) + noise(rng);
  }
  counts_ = Vector::Ones(entries_.rows());
  sums_ = entries_;
  dead_steps_.assign(static_cast<std::size_t>(entries_.rows()), 0);
}

Codebook ema_update(Codebook codebook, std::span<const Vector> vectors,
                    std::span<const int> indices) {
  codebook.ema_update(vectors, indices);
  return codebook;
}

Vector straight_through(const Vector& x, const Vector& codeword) {
  if (x.size() != codeword.size()) throw ShapeError("straight_through: size mismatch");
  return codeword;
}

StraightThroughGrad straight_through_backward(const Vector& dout) {
  return StraightThroughGrad{dout, Vector::Zero(dout.size())};
}

VqLosses vq_losses(const Vector& x, const Vector& codeword) {
  if (x.size() != codeword.size()) throw ShapeError("vq_losses: size mismatch");
  const double d = (x - codeword).squaredNorm();
  return VqLosses{d, d};
}

Vector commitment_grad(const Vector& x, const Vector& codeword) {
  return 2.0 * (x - codeword);
}

Vector codebook_loss_grad(const Vector& x, const Vector& codeword) {
  return 2.0 * (codeword - x);
}

ChunkedQuantization quantize_chunks(const Vector& x, const Codebook& codebook, int chunks) {
  if (chunks < 1 || x.size() % chunks != 0 || x.size() / chunks != codebook.dim()) {
    throw ShapeError("quantize_chunks: dimension " + std::to_string(x.size()) +
                     " not divisible into " + std::to_string(chunks) +
                     " chunks of codebook dimension " + std::to_string(codebook.dim()));
  }
  ChunkedQuantization out;
  out.reconstruction.resize(x.size());
  const Eigen::Index d = codebook.dim();
  for (int c = 0; c < chunks; ++c) {
    const int k = codebook.nearest(x.segment(c * d, d));
    out.indices.push_back(k);
    out.reconstruction.segment(c * d, d) = codebook.entries().row(k).transpose();
  }
  return out;
}

Vector dequantize_chunks(std::span<const int> indices, const Codebook& codebook) {
  const Eigen::Index d = codebook.dim();
  Vector out(static_cast<Eigen::Index>(indices.size()) * d);
  for (std::size_t c = 0; c < indices.size(); ++c) {
    if (indices[c] < 0 || indices[c] >= codebook.size()) throw ArgumentError("dequantize: index out of range");
    out.segment(static_cast<Eigen::Index>(c) * d, d) = codebook.entries().row(indices[c]).transpose();
  }
  return out;
}

ScalarQuantizer::ScalarQuantizer(double lo, double hi) : lo_(lo), hi_(hi) {
  if (!(lo < hi)) throw ArgumentError("scalar quantizer requires lo < hi");
}

std::vector<int> ScalarQuantizer::quantize(const Vector& x) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double t = std::floor((x(i) - lo_) / (hi_ - lo_) * levels);
    out.push_back(static_cast<int>(std::clamp(t, 0.0, static_cast<double>(levels - 1))));
  }
  return out;
}

Vector ScalarQuantizer::dequantize(std::span<const int> symbols) const {
  Vector out(static_cast<Eigen::Index>(symbols.size()));
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] < 0 || symbols[i] >= levels) throw ArgumentError("dequantize: symbol out of range");
    out(static_cast<Eigen::Index>(i)) = lo_ + (symbols[i] + 0.5) * bin_width();
  }
  return out;
}

}  // namespace gib
