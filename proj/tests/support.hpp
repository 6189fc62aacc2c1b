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

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "gib/dataset.hpp"
#include "gib/params.hpp"
#include "gib/rng.hpp"

namespace gibtest {

using gib::Matrix;
using gib::Vector;

inline constexpr double kFdStep = 1e-5;
inline constexpr double kGradTol = 1e-4;
inline constexpr int kGradInstances = 20;

/// Central differences of f at x.
inline Vector numeric_grad(const std::function<double(const Vector&)>& f, Vector x,
                           double h = kFdStep) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double up = f(x);
    x(i) = keep - h;
    const double down = f(x);
    x(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

/// ‖a − b‖ / max(‖a‖, ‖b‖), 0 when both vanish.
inline double rel_error(const Vector& a, const Vector& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  return (a - b).norm() / scale;
}

inline Matrix random_matrix(gib::Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline Vector random_vector(gib::Rng& rng, Eigen::Index n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale).col(0);
}

/// Erdos-Renyi graph with at least one edge and random features.
inline gib::Graph random_graph(gib::Rng& rng, int m, double p, int feature_dim, int label = 0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      if (u(rng) < p) edges.emplace_back(i, j);
    }
  }
  if (edges.empty() && m > 1) edges.emplace_back(0, 1);
  Matrix x = random_matrix(rng, m, feature_dim).cwiseAbs();
  return gib::make_graph(m, edges, x, label);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gibcomm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace gibtest
