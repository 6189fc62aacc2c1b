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
#include <stdexcept>
#include <string>
#include <vector>

#include "gib/params.hpp"
#include "gib/rng.hpp"

namespace gib {

enum class ChannelKind { analog, discrete };

std::string to_string(ChannelKind kind);

/// Channel settings. Only the fields of the active kind are meaningful;
/// validate() rejects out-of-range values.
struct ChannelConfig {
  ChannelKind kind = ChannelKind::analog;
  double snr_db = 5.0;     // analog
  double epsilon = 0.94;   // discrete: probability of correct symbol
  int r = 256;             // discrete: symbol alphabet size
  std::uint64_t seed = 0;

  static ChannelConfig analog(double snr_db, std::uint64_t seed = 0);
  static ChannelConfig discrete(double epsilon, int r, std::uint64_t seed = 0);

  void validate() const;
  /// Per-symbol noise variance sigma^2 = 10^(-snr/10) (unit signal power).
  double noise_variance() const;
  /// N0 = 2 sigma^2.
  double n0() const { return 2.0 * noise_variance(); }
};

class NormalizationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// x * sqrt(d) / ‖x‖ so that mean per-symbol power is 1.
Vector normalize_power(const Vector& x);
/// Vector-Jacobian product of normalize_power at x.
Vector normalize_power_backward(const Vector& x, const Vector& dout);

/// x + n, n ~ N(0, 10^(-snr/10)) i.i.d. Gradient w.r.t. x is the identity.
Vector awgn(const Vector& x, double snr_db, Rng& rng);

/// Symmetric discrete channel: each symbol kept with probability epsilon,
/// otherwise replaced uniformly by one of the other r-1 symbols.
std::vector<int> sdc_transmit(std::span<const int> symbols, double epsilon, int r, Rng& rng);

}  // namespace gib
