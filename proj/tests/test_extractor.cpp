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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gib/extractor.hpp"
#include "support.hpp"

using namespace gib;
using gibtest::kGradInstances;
using gibtest::kGradTol;
using gibtest::numeric_grad;
using gibtest::random_matrix;
using gibtest::rel_error;

namespace {

AssignmentMatrix random_assignment(Rng& rng, int m) {
  return AssignmentMatrix{softmax_rows(random_matrix(rng, m, 2, 1.5))};
}

Matrix two_triangles() {
  Matrix a = Matrix::Zero(6, 6);
  for (int base : {0, 3}) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (i != j) a(base + i, base + j) = 1.0;
      }
    }
  }
  return a;
}

}  // namespace

TEST_CASE("assigner: zero weights give uniform rows") {
  ParamSet p;
  const auto assigner = NodeAssigner::create(p, "a", 4);
  auto rng = make_rng(1, {});
  const auto s = assigner.forward(p, random_matrix(rng, 5, 4), nullptr);
  CHECK(s.s.isApprox(Matrix::Constant(5, 2, 0.5), 1e-15));
}

TEST_CASE("assigner: rows are stochastic for any input") {
  ParamSet p;
  const auto assigner = NodeAssigner::create(p, "a", 6);
  glorot_init(p, 2);
  auto rng = make_rng(2, {});
  for (int t = 0; t < 30; ++t) {
    const auto s = assigner.forward(p, random_matrix(rng, 9, 6, 3.0), nullptr);
    CHECK((s.s.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((s.s.array() >= 0.0).all());
    CHECK((s.s.array() <= 1.0).all());
  }
}

TEST_CASE("assigner: hand-set final logits") {
  ParamSet p;
  const auto assigner = NodeAssigner::create(p, "a", 2);
  // Block order: fc0.weight, fc0.bias, fc1.weight, fc1.bias.
  p.view(BlockId{0}) = Matrix::Identity(2, 2);
  const double t = std::tanh(0.7);
  Matrix w1(2, 2);
  w1 << 3.0 / t, 1.0 / t, 0.0, 0.0;
  p.view(assigner.output_layer().weight) = w1;
  Matrix x(2, 2);
  x << 0.7, 0.0, 0.0, 0.0;
  const auto s = assigner.forward(p, x, nullptr);
  CHECK(s.s(0, 0) == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(s.s(0, 1) == doctest::Approx(0.1192).epsilon(1e-3));
  CHECK(s.s(1, 0) == doctest::Approx(0.5));
  CHECK(s.s(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("aggregate: one-hot selection and uniform halves") {
  auto rng = make_rng(3, {});
  const Matrix x = random_matrix(rng, 5, 3);
  AssignmentMatrix s{Matrix::Zero(5, 2)};
  s.s.col(1).setOnes();
  s.s(2, 0) = 1.0;
  s.s(2, 1) = 0.0;
  CHECK(aggregate_subgraph(s, x) == Vector(x.row(2).transpose()));
  AssignmentMatrix half{Matrix::Constant(5, 2, 0.5)};
  CHECK(aggregate_subgraph(half, x).isApprox(0.5 * x.colwise().sum().transpose(), 1e-14));
}

TEST_CASE("aggregate: matches a loop oracle and is linear") {
  auto rng = make_rng(4, {});
  for (int t = 0; t < 20; ++t) {
    const auto s = random_assignment(rng, 4);
    const Matrix x = random_matrix(rng, 4, 3);
    const Matrix y = random_matrix(rng, 4, 3);
    Vector oracle = Vector::Zero(3);
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < 4; ++i) oracle(c) += s.s(i, 0) * x(i, c);
    }
    CHECK((aggregate_subgraph(s, x) - oracle).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(aggregate_subgraph(s, x + y).isApprox(aggregate_subgraph(s, x) + aggregate_subgraph(s, y), 1e-12));
    CHECK(aggregate_subgraph(s, 2.5 * x).isApprox(2.5 * aggregate_subgraph(s, x), 1e-12));
  }
  CHECK_THROWS_AS(aggregate_subgraph(random_assignment(rng, 3), Matrix::Zero(4, 2)), ShapeError);
}

TEST_CASE("connectivity loss: perfect partition of disconnected cliques is 0 up to the guard") {
  AssignmentMatrix s{Matrix::Zero(6, 2)};
  s.s.block(0, 0, 3, 1).setOnes();
  s.s.block(3, 1, 3, 1).setOnes();
  CHECK(connectivity_loss(s, two_triangles()) < 1e-9);
  const auto with_grad = connectivity_loss_with_grad(s, two_triangles());
  CHECK(with_grad.value < 1e-9);
  CHECK(with_grad.grad_s.allFinite());
}

TEST_CASE("connectivity loss: uniform assignment is exactly 1 on any graph with an edge") {
  auto rng = make_rng(5, {});
  for (int t = 0; t < 50; ++t) {
    const Graph g = gibtest::random_graph(rng, 3 + t % 10, 0.3, 1);
    AssignmentMatrix s{Matrix::Constant(g.node_count, 2, 0.5)};
    CHECK(std::abs(connectivity_loss(s, g.adjacency) - 1.0) < 1e-9);
  }
}

TEST_CASE("connectivity loss: edgeless graph hits the guard and gives sqrt(2)") {
  auto rng = make_rng(6, {});
  const auto s = random_assignment(rng, 5);
  CHECK(connectivity_loss(s, Matrix::Zero(5, 5)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-4));
}

TEST_CASE("connectivity loss: non-negative and permutation invariant") {
  auto rng = make_rng(7, {});
  for (int t = 0; t < 30; ++t) {
    const Graph g = gibtest::random_graph(rng, 8, 0.4, 1);
    const auto s = random_assignment(rng, 8);
    std::vector<int> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix p = Matrix::Zero(8, 8);
    for (int i = 0; i < 8; ++i) p(i, perm[static_cast<std::size_t>(i)]) = 1.0;
    const double base = connectivity_loss(s, g.adjacency);
    CHECK(base >= 0.0);
    const AssignmentMatrix sp{p * s.s};
    CHECK(connectivity_loss(sp, p * g.adjacency * p.transpose()) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("gradient check: connectivity loss w.r.t. S") {
  auto rng = make_rng(8, {});
  for (int t = 0; t < kGradInstances; ++t) {
    const Graph g = gibtest::random_graph(rng, 7, 0.45, 1);
    const auto s = random_assignment(rng, 7);
    const auto c = connectivity_loss_with_grad(s, g.adjacency);
    CHECK(c.value == doctest::Approx(connectivity_loss(s, g.adjacency)));
    auto f = [&](const Vector& flat) {
      return connectivity_loss(AssignmentMatrix{Eigen::Map<const Matrix>(flat.data(), 7, 2)}, g.adjacency);
    };
    const Vector flat = Eigen::Map<const Vector>(s.s.data(), s.s.size());
    CHECK(rel_error(Eigen::Map<const Vector>(c.grad_s.data(), c.grad_s.size()), numeric_grad(f, flat)) < kGradTol);
  }
}

TEST_CASE("gradient check: aggregation w.r.t. S and node features") {
  auto rng = make_rng(9, {});
  for (int t = 0; t < kGradInstances; ++t) {
    const auto s = random_assignment(rng, 5);
    const Matrix x = random_matrix(rng, 5, 4);
    const Vector r = gibtest::random_vector(rng, 4);
    Matrix ds = Matrix::Zero(5, 2);
    Matrix dx = Matrix::Zero(5, 4);
    aggregate_subgraph_backward(s, x, r, ds, dx);
    auto fs = [&](const Vector& flat) {
      return aggregate_subgraph(AssignmentMatrix{Eigen::Map<const Matrix>(flat.data(), 5, 2)}, x).dot(r);
    };
    auto fx = [&](const Vector& flat) {
      return aggregate_subgraph(s, Eigen::Map<const Matrix>(flat.data(), 5, 4)).dot(r);
    };
    CHECK(rel_error(Eigen::Map<const Vector>(ds.data(), ds.size()),
                    numeric_grad(fs, Eigen::Map<const Vector>(s.s.data(), s.s.size()))) < kGradTol);
    CHECK(rel_error(Eigen::Map<const Vector>(dx.data(), dx.size()),
                    numeric_grad(fx, Eigen::Map<const Vector>(x.data(), x.size()))) < kGradTol);
  }
}

TEST_CASE("gradient check: node assignment MLP") {
  auto rng = make_rng(10, {});
  for (int t = 0; t < kGradInstances; ++t) {
    ParamSet p;
    const auto assigner = NodeAssigner::create(p, "a", 4);
    glorot_init(p, 500 + static_cast<std::uint64_t>(t));
    p.values() += gibtest::random_vector(rng, static_cast<Eigen::Index>(p.size()), 0.1);
    const Matrix x = random_matrix(rng, 6, 4);
    const Matrix r = random_matrix(rng, 6, 2);
    NodeAssigner::Cache cache;
    assigner.forward(p, x, &cache);
    Vector grad = p.zeros_like();
    const Matrix dx = assigner.backward(p, cache, r, grad);
    auto fp = [&](const Vector& theta) {
      ParamSet q = p;
      q.values() = theta;
      return assigner.forward(q, x, nullptr).s.cwiseProduct(r).sum();
    };
    auto fx = [&](const Vector& flat) {
      return assigner.forward(p, Eigen::Map<const Matrix>(flat.data(), 6, 4), nullptr).s.cwiseProduct(r).sum();
    };
    CHECK(rel_error(grad, numeric_grad(fp, p.values())) < kGradTol);
    CHECK(rel_error(Eigen::Map<const Vector>(dx.data(), dx.size()),
                    numeric_grad(fx, Eigen::Map<const Vector>(x.data(), x.size()))) < kGradTol);
  }
}

TEST_CASE("hard mask thresholds column 0") {
  AssignmentMatrix s{Matrix(3, 2)};
  s.s << 0.9, 0.1, 0.2, 0.8, 0.5, 0.5;
  CHECK(s.hard_mask() == std::vector<bool>{true, false, false});
}
