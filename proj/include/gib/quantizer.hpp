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
#include <span>
#include <vector>

#include "gib/params.hpp"
#include "gib/rng.hpp"

namespace gib {

struct QuantizationResult {
  int index = 0;
  Vector codeword;
  Vector commit_input;
};

/// K x d codebook with exponential-moving-average statistics.
///
/// After every ema_update, entries[k] = sums[k] / Ñ_k where
/// Ñ_k = (N_k + smoothing) * ΣN / (ΣN + K * smoothing).
class Codebook {
 public:
  Codebook() = default;
  Codebook(Matrix entries, double decay = 0.99, double smoothing = 1e-5);

  /// Standard Gaussian entries scaled by 1/sqrt(d).
  static Codebook random(int size, int dim, std::uint64_t seed, double decay = 0.99,
                         double smoothing = 1e-5);

  int size() const { return static_cast<int>(entries_.rows()); }
  int dim() const { return static_cast<int>(entries_.cols()); }
  double decay() const { return decay_; }
  double smoothing() const { return smoothing_; }

  const Matrix& entries() const { return entries_; }
  const Vector& counts() const { return counts_; }
  const Matrix& sums() const { return sums_; }
  Vector entry(int k) const { return entries_.row(k).transpose(); }

  /// Nearest entry by Euclidean distance, ties to the lowest index.
  QuantizationResult quantize(const Vector& x) const;
  int nearest(const Eigen::Ref<const Vector>& x) const;

  /// One EMA step. With `reseed` set, codes that received no batch vector for
  /// `dead_patience` consecutive steps are re-seeded from random batch vectors.
  void ema_update(std::span<const Vector> vectors, std::span<const int> indices,
                  Rng* reseed = nullptr);
  /// Gradient step on the entries (used when EMA is switched off).
  void apply_gradient(const Matrix& grad, double learning_rate);

  static constexpr int dead_patience = 100;

  /// Restores raw statistics (checkpoint loading).
  void set_state(Matrix entries, Vector counts, Matrix sums);
  /// Replaces every entry by a randomly drawn vector from `vectors` plus
  /// Gaussian jitter of scale `jitter`; counts reset to 1.
  void initialize_from(std::span<const Vector> vectors, double jitter, Rng& rng);

 private:
  Matrix entries_;
  Vector counts_;
  Matrix sums_;
  std::vector<int> dead_steps_;
  double decay_ = 0.99;
  double smoothing_ = 1e-5;
};

/// Functional form of Codebook::ema_update.
Codebook ema_update(Codebook codebook, std::span<const Vector> vectors,
                    std::span<const int> indices);

/// Forward value of the straight-through estimator: the codeword. The
/// backward contract is dL/dx = dL/dout and no gradient to the codeword.
Vector straight_through(const Vector& x, const Vector& codeword);
struct StraightThroughGrad {
  Vector dx;
  Vector dcodeword;
};
StraightThroughGrad straight_through_backward(const Vector& dout);

struct VqLosses {
  double vq = 0.0;  // ‖sg[x] − e‖², gradient to e only
  double cm = 0.0;  // ‖x − sg[e]‖², gradient to x only
};
VqLosses vq_losses(const Vector& x, const Vector& codeword);
/// ∂L_cm/∂x.
Vector commitment_grad(const Vector& x, const Vector& codeword);
/// ∂L_vq/∂e.
Vector codebook_loss_grad(const Vector& x, const Vector& codeword);

/// Splits x into `chunks` equal sub-vectors quantized against one codebook.
struct ChunkedQuantization {
  std::vector<int> indices;
  Vector reconstruction;
};
ChunkedQuantization quantize_chunks(const Vector& x, const Codebook& codebook, int chunks);
Vector dequantize_chunks(std::span<const int> indices, const Codebook& codebook);

/// Uniform 256-level scalar quantizer over [lo, hi] with clamping.
class ScalarQuantizer {
 public:
  ScalarQuantizer(double lo, double hi);
  static constexpr int levels = 256;

  std::vector<int> quantize(const Vector& x) const;
  Vector dequantize(std::span<const int> symbols) const;
  double bin_width() const { return (hi_ - lo_) / levels; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

}  // namespace gib
