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

#include "gib/channel.hpp"

#include <cmath>

namespace gib {

std::string to_string(ChannelKind kind) {
  return kind == ChannelKind::analog ? "analog" : "discrete";
}

ChannelConfig ChannelConfig::analog(double snr_db, std::uint64_t seed) {
  ChannelConfig c;
  c.kind = ChannelKind::analog;
  c.snr_db = snr_db;
  c.seed = seed;
  return c;
}

ChannelConfig ChannelConfig::discrete(double epsilon, int r, std::uint64_t seed) {
  ChannelConfig c;
  c.kind = ChannelKind::discrete;
  c.epsilon = epsilon;
  c.r = r;
  c.seed = seed;
  return c;
}

void ChannelConfig::validate() const {
  if (kind == ChannelKind::analog) {
    if (!std::isfinite(snr_db)) throw ArgumentError("channel: snr_db must be finite");
  } else {
    if (r < 2) throw ArgumentError("channel: symbol set size r must be >= 2");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("channel: epsilon must lie in [0, 1]");
  }
}

double ChannelConfig::noise_variance() const { return std::pow(10.0, -snr_db / 10.0); }

Vector normalize_power(const Vector& x) {
  const double norm = x.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NormalizationError("normalize_power: vector has zero or non-finite norm");
  }
  return x * (std::sqrt(static_cast<double>(x.size())) / norm);
}

Vector normalize_power_backward(const Vector& x, const Vector& dout) {
  const double norm = x.norm();
  if (!(norm > 0.0)) throw NormalizationError("normalize_power: zero vector");
  const double scale = std::sqrt(static_cast<double>(x.size())) / norm;
  return scale * (dout - x * (x.dot(dout) / (norm * norm)));
}

Vector awgn(const Vector& x, double snr_db, Rng& rng) {
  const double sigma = std::sqrt(std::pow(10.0, -snr_db / 10.0));
  std::normal_distribution<double> noise(0.0, 1.0);
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = x(i) + sigma * noise(rng);
  return out;
}

std::vector<int> sdc_transmit(std::span<const int> symbols, double epsilon, int r, Rng& rng) {
  if (r < 2) throw ArgumentError("sdc_transmit: r must be >= 2");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("sdc_transmit: epsilon outside [0, 1]");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> other(0, r - 2);
  std::vector<int> out;
  out.reserve(symbols.size());
  for (int s : symbols) {
    if (s < 0 || s >= r) {
      throw ArgumentError("sdc_transmit: symbol " + std::to_string(s) + " outside [0, " +
                          std::to_string(r) + ")");
    }
    if (epsilon >= 1.0 || unif(rng) < epsilon) {
      out.push_back(s);
    } else {
      const int pick = other(rng);
      out.push_back(pick >= s ? pick + 1 : pick);
    }
  }
  return out;
}

}  // namespace gib
