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

#include <atomic>
#include <numeric>
#include <stdexcept>

#include "gib/kernels.hpp"
#include "gib/trainer.hpp"
#include "support.hpp"

using namespace gib;

namespace {

// Forces a real thread team even on single-core machines.
struct ThreadScope {
  int saved = max_threads();
  explicit ThreadScope(int n) { omp_set_num_threads(n); }
  ~ThreadScope() { omp_set_num_threads(saved); }
};

TrainConfig config(Execution ex) {
  TrainConfig c;
  c.backbone = BackboneKind::gcn;
  c.batch_size = 12;
  c.alpha = 1.0;
  c.noise_draws = 2;
  c.seed = 17;
  c.execution = ex;
  return c;
}

}  // namespace

TEST_CASE("for_each_index visits every index once in both modes") {
  ThreadScope threads(4);
  for (Execution ex : {Execution::serial, Execution::parallel}) {
    std::vector<std::atomic<int>> hits(1000);
    for_each_index(ex, 1000, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("for_each_index rethrows a worker exception") {
  ThreadScope threads(4);
  for (Execution ex : {Execution::serial, Execution::parallel}) {
    CHECK_THROWS_AS(for_each_index(ex, 64, [](int i) {
                      if (i == 37) throw std::domain_error("boom");
                    }),
                    std::domain_error);
  }
}

TEST_CASE("sum_in_order is a left fold") {
  auto rng = make_rng(1, {});
  std::vector<Vector> parts;
  for (int i = 0; i < 9; ++i) parts.push_back(gibtest::random_vector(rng, 5, std::pow(10.0, i - 4)));
  Vector expected = Vector::Zero(5);
  for (const auto& p : parts) expected = expected + p;
  CHECK(sum_in_order(parts, 5) == expected);
}

TEST_CASE("batch forward, gradient and DV estimate: parallel equals serial bit for bit") {
  ThreadScope threads(4);
  const Corpus corpus = generate_synthetic(40, 2);
  const PreparedCorpus prepared(corpus);
  std::vector<int> batch(12);
  std::iota(batch.begin(), batch.end(), 3);
  GibSystem serial(corpus.feature_dim, corpus.class_n, config(Execution::serial));
  GibSystem parallel(corpus.feature_dim, corpus.class_n, config(Execution::parallel));
  const auto fs = forward_batch(serial, prepared, batch, 7);
  const auto fp = forward_batch(parallel, prepared, batch, 7);
  for (std::size_t i = 0; i < fs.xhat.size(); ++i) {
    CHECK(fs.xhat[i] == fp.xhat[i]);
    CHECK(fs.log_probs[i] == fp.log_probs[i]);
  }
  Rng rng(3);
  const auto pairing = derangement(static_cast<int>(fs.xhat.size()), rng);
  const auto gs = batch_gradient(serial, prepared, fs, pairing);
  const auto gp = batch_gradient(parallel, prepared, fp, pairing);
  CHECK(gs.loss.total == gp.loss.total);
  CHECK(gs.phi == gp.phi);
  CHECK(gs.theta == gp.theta);

  DvRequest req;
  req.param_grad = true;
  req.signal_grad = true;
  const auto ds = dv_estimate(serial.mine().net(), fs.sample_graphs, fs.xhat, pairing, req);
  req.execution = Execution::parallel;
  const auto dp = dv_estimate(serial.mine().net(), fs.sample_graphs, fs.xhat, pairing, req);
  CHECK(ds.value == dp.value);
  CHECK(ds.param_grad == dp.param_grad);
  for (std::size_t i = 0; i < ds.signal_grad.size(); ++i) CHECK(ds.signal_grad[i] == dp.signal_grad[i]);
}

TEST_CASE("cross-validation folds: parallel equals serial") {
  ThreadScope threads(3);
  const Corpus corpus = generate_synthetic(30, 5);
  TrainConfig c = config(Execution::parallel);
  c.epochs = 1;
  c.batch_size = 8;
  const EvalAxis axis{"snr_db", {0.0, 10.0}};
  CvOptions opt;
  opt.k = 3;
  opt.record_wall_time = false;
  const auto serial = cross_validate(corpus, c, axis, opt);
  opt.fold_execution = Execution::parallel;
  const auto parallel = cross_validate(corpus, c, axis, opt);
  REQUIRE(serial.records.size() == parallel.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(serial.records[i].fold == parallel.records[i].fold);
    CHECK(serial.records[i].accuracy == parallel.records[i].accuracy);
    CHECK(serial.records[i].loss.total == parallel.records[i].loss.total);
  }
}
