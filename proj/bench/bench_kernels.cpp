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


// Serial reference loops vs OpenMP kernels on the hot paths of training and
// digital evaluation. Arg(0) = serial, Arg(1) = parallel.

#include <benchmark/benchmark.h>

#include <numeric>

#include "gib/trainer.hpp"

namespace {

using namespace gib;

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

const Corpus& corpus() {
  static const Corpus c = generate_synthetic(256, 1);
  return c;
}

TrainConfig bench_config(Execution ex) {
  TrainConfig c;
  c.backbone = BackboneKind::gin;
  c.hidden_dim = 32;
  c.batch_size = 128;
  c.alpha = 1.0;
  c.seed = 1;
  c.execution = ex;
  return c;
}

void BM_BatchForwardBackward(benchmark::State& state) {
  const PreparedCorpus prepared(corpus());
  GibSystem system(corpus().feature_dim, corpus().class_n, bench_config(mode(state)));
  std::vector<int> batch(128);
  std::iota(batch.begin(), batch.end(), 0);
  Rng rng(2);
  const auto pairing = derangement(128, rng);
  std::uint64_t step = 0;
  for (auto _ : state) {
    const auto f = forward_batch(system, prepared, batch, step++);
    benchmark::DoNotOptimize(batch_gradient(system, prepared, f, pairing).loss.total);
  }
  state.SetItemsProcessed(state.iterations() * 128);
}

void BM_NearestCodeword(benchmark::State& state) {
  const Codebook codebook = Codebook::random(256, 32, 3);
  Rng rng(4);
  std::normal_distribution<double> z(0.0, 0.2);
  std::vector<Vector> queries(4096, Vector(32));
  for (auto& q : queries) {
    for (Eigen::Index i = 0; i < q.size(); ++i) q(i) = z(rng);
  }
  std::vector<int> out(queries.size());
  for (auto _ : state) {
    for_each_index(mode(state), static_cast<int>(queries.size()), [&](int i) {
      out[static_cast<std::size_t>(i)] = codebook.nearest(queries[static_cast<std::size_t>(i)]);
    });
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(queries.size()));
}

void BM_DvEstimate(benchmark::State& state) {
  const PreparedCorpus prepared(corpus());
  GibSystem system(corpus().feature_dim, corpus().class_n, bench_config(Execution::serial));
  std::vector<int> batch(128);
  std::iota(batch.begin(), batch.end(), 0);
  const auto f = forward_batch(system, prepared, batch, 0);
  Rng rng(5);
  const auto pairing = derangement(128, rng);
  DvRequest req;
  req.param_grad = true;
  req.signal_grad = true;
  req.execution = mode(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dv_estimate(system.mine().net(), f.sample_graphs, f.xhat, pairing, req).value);
  }
}

BENCHMARK(BM_BatchForwardBackward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_NearestCodeword)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DvEstimate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
