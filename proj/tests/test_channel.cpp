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


#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gib/channel.hpp"
#include "support.hpp"

using namespace gib;
using gibtest::kGradInstances;
using gibtest::kGradTol;
using gibtest::numeric_grad;
using gibtest::random_vector;
using gibtest::rel_error;

namespace {

double mean_power(const Vector& x) { return x.squaredNorm() / static_cast<double>(x.size()); }

// Upper chi-square quantile via the Wilson-Hilferty cube approximation.
double chi_square_quantile(double df, double z) {
  const double a = 2.0 / (9.0 * df);
  return df * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

}  // namespace

TEST_CASE("normalize_power: worked examples") {
  CHECK(normalize_power(Vector::Ones(4)).isApprox(Vector::Ones(4), 1e-15));
  Vector x(2);
  x << 2.0, 0.0;
  const Vector y = normalize_power(x);
  CHECK(y(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(y(1) == 0.0);
  CHECK_THROWS_AS(normalize_power(Vector::Zero(2)), NormalizationError);
}

TEST_CASE("normalize_power: unit mean power for random vectors") {
  auto rng = make_rng(1, {});
  for (int t = 0; t < 200; ++t) {
    const double scale = std::pow(10.0, -6.0 + 0.06 * t);
    const Vector x = random_vector(rng, 1 + t % 40, scale);
    CHECK(std::abs(mean_power(normalize_power(x)) - 1.0) < 1e-12);
  }
}

TEST_CASE("gradient check: normalize_power") {
  auto rng = make_rng(2, {});
  for (int t = 0; t < kGradInstances; ++t) {
    const Vector x = random_vector(rng, 6);
    const Vector r = random_vector(rng, 6);
    auto f = [&](const Vector& v) { return normalize_power(v).dot(r); };
    CHECK(rel_error(normalize_power_backward(x, r), numeric_grad(f, x)) < kGradTol);
  }
}

TEST_CASE("awgn: vanishing noise and noise variance formula") {
  auto rng = make_rng(3, {});
  const Vector x = normalize_power(random_vector(rng, 16));
  CHECK((awgn(x, 300.0, rng) - x).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(ChannelConfig::analog(0.0).noise_variance() == doctest::Approx(1.0));
  CHECK(ChannelConfig::analog(0.0).n0() == doctest::Approx(2.0));
  CHECK(ChannelConfig::analog(10.0).noise_variance() == doctest::Approx(0.1));
}

TEST_CASE("awgn: empirical variance at 5 dB over 1e6 samples") {
  auto rng = make_rng(4, {});
  const Vector x = Vector::Zero(1000000);
  const Vector y = awgn(x, 5.0, rng);
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
  const double expected = std::pow(10.0, -0.5);
  CHECK(std::abs(var - expected) / expected < 0.02);
  CHECK(std::abs(mean) < 0.002);
}

TEST_CASE("awgn: reproducible under a fixed seed") {
  auto a = make_rng(5, {1, 2});
  auto b = make_rng(5, {1, 2});
  auto c = make_rng(5, {1, 3});
  const Vector x = Vector::Ones(64);
  const Vector ya = awgn(x, 5.0, a);
  CHECK(ya == awgn(x, 5.0, b));
  CHECK(ya != awgn(x, 5.0, c));
}

TEST_CASE("awgn: Jacobian is the identity with the noise held fixed") {
  auto rng = make_rng(6, {});
  for (int t = 0; t < kGradInstances; ++t) {
    const Vector x = random_vector(rng, 5);
    const Vector r = random_vector(rng, 5);
    const std::uint64_t seed = rng();
    auto f = [&](const Vector& v) {
      Rng noise(seed);
      return awgn(v, 5.0, noise).dot(r);
    };
    CHECK(rel_error(r, numeric_grad(f, x)) < kGradTol);
  }
}

TEST_CASE("sdc: identity at epsilon 1 and deterministic flip at epsilon 0 with r 2") {
  auto rng = make_rng(7, {});
  std::vector<int> symbols(500);
  for (auto& s : symbols) s = static_cast<int>(rng() % 256);
  CHECK(sdc_transmit(symbols, 1.0, 256, rng) == symbols);
  std::vector<int> bits(500);
  for (auto& b : bits) b = static_cast<int>(rng() % 2);
  const auto flipped = sdc_transmit(bits, 0.0, 2, rng);
  for (std::size_t i = 0; i < bits.size(); ++i) CHECK(flipped[i] == 1 - bits[i]);
}

TEST_CASE("sdc: correct rate and uniform error mass over 1e6 symbols") {
  constexpr int kR = 256;
  constexpr int kSymbols = 1000000;
  auto rng = make_rng(8, {});
  std::vector<int> symbols(kSymbols);
  for (auto& s : symbols) s = static_cast<int>(rng() % kR);
  const auto out = sdc_transmit(symbols, 0.94, kR, rng);
  // Error offsets (out - in) mod r land in 1..r-1; uniform if the channel is symmetric.
  std::vector<double> offsets(kR, 0.0);
  int correct = 0;
  for (int i = 0; i < kSymbols; ++i) {
    const int off = ((out[static_cast<std::size_t>(i)] - symbols[static_cast<std::size_t>(i)]) % kR + kR) % kR;
    if (off == 0) {
      ++correct;
    } else {
      offsets[static_cast<std::size_t>(off)] += 1.0;
    }
  }
  const double rate = static_cast<double>(correct) / kSymbols;
  CHECK(std::abs(rate - 0.94) / 0.94 < 0.005);
  const double errors = kSymbols - correct;
  const double expected = errors / (kR - 1);
  double chi2 = 0.0;
  for (int k = 1; k < kR; ++k) {
    const double d = offsets[static_cast<std::size_t>(k)] - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < chi_square_quantile(kR - 2, 2.326));
}

TEST_CASE("sdc: per-input marginals follow the transition row") {
  constexpr int kR = 4;
  constexpr int kTrials = 200000;
  auto rng = make_rng(9, {});
  for (int input = 0; input < kR; ++input) {
    const std::vector<int> symbols(kTrials, input);
    const auto out = sdc_transmit(symbols, 0.7, kR, rng);
    std::vector<double> hist(kR, 0.0);
    for (int s : out) hist[static_cast<std::size_t>(s)] += 1.0;
    for (int k = 0; k < kR; ++k) {
      const double p = k == input ? 0.7 : 0.1;
      const double sd = std::sqrt(p * (1.0 - p) / kTrials);
      CHECK(std::abs(hist[static_cast<std::size_t>(k)] / kTrials - p) < 5.0 * sd);
    }
  }
}

TEST_CASE("sdc and config: argument errors") {
  auto rng = make_rng(10, {});
  const std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(sdc_transmit(bad, 0.9, 3, rng), ArgumentError);
  const std::vector<int> neg{-1};
  CHECK_THROWS_AS(sdc_transmit(neg, 0.9, 3, rng), ArgumentError);
  CHECK_THROWS_AS(ChannelConfig::discrete(1.5, 4).validate(), ArgumentError);
  CHECK_THROWS_AS(ChannelConfig::discrete(0.5, 1).validate(), ArgumentError);
  CHECK_THROWS_AS(ChannelConfig::analog(std::nan("")).validate(), ArgumentError);
  CHECK_NOTHROW(ChannelConfig::discrete(0.0, 2).validate());
}
