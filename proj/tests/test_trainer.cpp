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

#include <omp.h>

#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "gib/trainer.hpp"
#include "support.hpp"

using namespace gib;
using gibtest::kGradTol;
using gibtest::numeric_grad;
using gibtest::rel_error;

namespace {

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig c;
  c.backbone = BackboneKind::gin;
  c.hidden_dim = 16;
  c.batch_size = 10;
  c.learning_rate = 5e-3;
  c.alpha = 1.0;
  c.beta = 0.1;
  c.epochs = 3;
  c.seed = seed;
  return c;
}

TrainConfig digital_config(std::uint64_t seed) {
  TrainConfig c = small_config(seed);
  c.digital = true;
  c.alpha = 0.1;
  c.channel = ChannelConfig::discrete(0.94, c.codebook_size);
  return c;
}

std::vector<int> all_indices(const Corpus& corpus) {
  std::vector<int> idx(corpus.graphs.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

const Corpus& corpus40() {
  static const Corpus c = generate_synthetic(40, 21);
  return c;
}

}  // namespace

TEST_CASE("inference loss: worked examples and scalar oracle") {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Vector> perfect{Vector(2), Vector(2)};
  perfect[0] << 0.0, -inf;
  perfect[1] << -inf, 0.0;
  CHECK(inference_loss(perfect, std::vector<int>{0, 1}) == 0.0);
  const std::vector<Vector> uniform(3, Vector::Constant(2, std::log(0.5)));
  CHECK(inference_loss(uniform, std::vector<int>{0, 1, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  auto rng = make_rng(1, {});
  std::vector<Vector> lp;
  std::vector<int> labels;
  double oracle = 0.0;
  for (int i = 0; i < 17; ++i) {
    lp.push_back(log_softmax_rows(gibtest::random_matrix(rng, 1, 3)).row(0).transpose());
    labels.push_back(i % 3);
    oracle += -lp.back()(labels.back());
  }
  oracle /= 17.0;
  CHECK(std::abs(inference_loss(lp, labels) - oracle) < 1e-12);
  CHECK_THROWS_AS(inference_loss(lp, std::vector<int>(17, 3)), ArgumentError);
  CHECK_THROWS_AS(inference_loss({}, {}), ArgumentError);
}

TEST_CASE("total loss: weights and composition") {
  TrainConfig c;
  c.beta = 0.0;
  c.alpha = 0.0;
  LossComponents l{1.3, 0.7, 0.4, 0.2, 0.6, 0.0};
  CHECK(total_loss(l, c) == 1.3);
  c.beta = 0.1;
  c.alpha = 5.0;
  const LossComponents example{1.0, 0.5, 0.2, 0.0, 0.0, 0.0};
  CHECK(total_loss(example, c) == doctest::Approx(2.05).epsilon(1e-12));
  c.digital = true;
  c.lambda_cm = 0.25;
  CHECK(total_loss(l, c) == doctest::Approx(1.3 + 0.07 + 2.0 + 0.2 + 0.15).epsilon(1e-12));
}

TEST_CASE("train config: validation") {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  CHECK_NOTHROW(TrainConfig{}.validate());
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.beta = -0.1; }).validate(), ArgumentError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.alpha = -1.0; }).validate(), ArgumentError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.batch_size = 1; }).validate(), ArgumentError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.epochs = -1; }).validate(), ArgumentError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.digital = true; }).validate(), ArgumentError);
}

TEST_CASE("train: zero epochs returns the initial parameters and an empty curve") {
  TrainConfig c = small_config(2);
  c.epochs = 0;
  const PreparedCorpus prepared(corpus40());
  GibSystem system(corpus40().feature_dim, corpus40().class_n, c);
  const auto initial = system.snapshot();
  const auto r = train_on(system, prepared, all_indices(corpus40()));
  CHECK(r.curve.empty());
  CHECK(r.params.phi.values() == initial.phi.values());
  CHECK(r.params.theta.values() == initial.theta.values());
  CHECK(r.params.kappa.values() == initial.kappa.values());
}

TEST_CASE("train: identical seeds give identical curves, different seeds differ") {
  const PreparedCorpus prepared(corpus40());
  auto run = [&](std::uint64_t seed) {
    GibSystem system(corpus40().feature_dim, corpus40().class_n, small_config(seed));
    return train_on(system, prepared, all_indices(corpus40()));
  };
  const auto a = run(3);
  const auto b = run(3);
  const auto d = run(4);
  REQUIRE(a.curve.size() == 3);
  for (std::size_t e = 0; e < a.curve.size(); ++e) {
    CHECK(a.curve[e].loss.total == b.curve[e].loss.total);
    CHECK(a.curve[e].train_accuracy == b.curve[e].train_accuracy);
    CHECK(a.curve[e].mine_curve == b.curve[e].mine_curve);
    CHECK(a.curve[e].loss.total == doctest::Approx(total_loss(a.curve[e].loss, small_config(3))).epsilon(1e-12));
  }
  CHECK(a.params.phi.values() == b.params.phi.values());
  CHECK(a.params.phi.values() != d.params.phi.values());
}

TEST_CASE("train: serial and parallel execution are bit-identical") {
  const PreparedCorpus prepared(corpus40());
  const int threads = omp_get_max_threads();
  omp_set_num_threads(4);
  auto run = [&](Execution ex, bool digital) {
    TrainConfig c = digital ? digital_config(5) : small_config(5);
    c.execution = ex;
    c.epochs = 2;
    GibSystem system(corpus40().feature_dim, corpus40().class_n, c);
    auto r = train_on(system, prepared, all_indices(corpus40()));
    const auto settings = EvalAxis{digital ? "epsilon" : "snr_db", {digital ? 0.9 : 0.0}}.settings(c, 9);
    return std::make_pair(std::move(r), evaluate(system, prepared, all_indices(corpus40()), settings));
  };
  for (bool digital : {false, true}) {
    const auto [serial, serial_eval] = run(Execution::serial, digital);
    const auto [parallel, parallel_eval] = run(Execution::parallel, digital);
    CHECK(serial.params.phi.values() == parallel.params.phi.values());
    CHECK(serial.params.theta.values() == parallel.params.theta.values());
    CHECK(serial.params.kappa.values() == parallel.params.kappa.values());
    if (digital) CHECK(serial.codebook->entries() == parallel.codebook->entries());
    CHECK(serial_eval[0].predictions == parallel_eval[0].predictions);
    CHECK(serial_eval[0].loss.total == parallel_eval[0].loss.total);
  }
  omp_set_num_threads(threads);
}

TEST_CASE("train: synthetic corpus reaches 0.95 training accuracy in 30 epochs") {
  const Corpus corpus = generate_synthetic(200, 7);
  const PreparedCorpus prepared(corpus);
  TrainConfig c = small_config(1);
  c.epochs = 30;
  GibSystem system(corpus.feature_dim, corpus.class_n, c);
  const auto r = train_on(system, prepared, all_indices(corpus));
  REQUIRE(r.curve.size() == 30);
  CHECK(r.curve.back().train_accuracy >= 0.95);
}

TEST_CASE("pipeline degeneracies: identity channels match the channel-free forward pass") {
  const PreparedCorpus prepared(corpus40());
  const auto idx = all_indices(corpus40());
  for (bool digital : {false, true}) {
    TrainConfig c = digital ? digital_config(6) : small_config(6);
    GibSystem system(corpus40().feature_dim, corpus40().class_n, c);
    train_on(system, prepared, idx);
    const EvalAxis axis = digital ? EvalAxis{"epsilon", {1.0}} : EvalAxis{"snr_db", {300.0}};
    const auto eval = evaluate(system, prepared, idx, axis.settings(c, 1));
    Rng unused(0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      CHECK(eval[0].predictions[i] == system.predict(prepared.input(idx[i]), nullptr, unused));
    }
  }
}

TEST_CASE("evaluate: accuracy matches a confusion-matrix tally") {
  const PreparedCorpus prepared(corpus40());
  GibSystem system(corpus40().feature_dim, corpus40().class_n, small_config(7));
  train_on(system, prepared, all_indices(corpus40()));
  const auto eval = evaluate(system, prepared, all_indices(corpus40()),
                             EvalAxis{"snr_db", {-10.0, 0.0, 10.0}}.settings(system.config(), 3));
  REQUIRE(eval.size() == 3);
  for (const auto& r : eval) {
    int confusion[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < r.labels.size(); ++i) ++confusion[r.labels[i]][r.predictions[i]];
    const double tally = static_cast<double>(confusion[0][0] + confusion[1][1]) / static_cast<double>(r.labels.size());
    CHECK(r.accuracy == tally);
    CHECK(r.loss.total == doctest::Approx(total_loss(r.loss, system.config())).epsilon(1e-12));
  }
}

TEST_CASE("cross-validation: record counts, loss identity and aggregation oracle") {
  TrainConfig c = small_config(8);
  c.epochs = 2;
  const EvalAxis axis{"snr_db", {-5.0, 5.0, 15.0}};
  CvOptions opt;
  opt.k = 4;
  opt.record_wall_time = false;
  int trained = 0;
  opt.on_fold_trained = [&](int, const GibSystem&, const PreparedCorpus&, const std::vector<int>&) { ++trained; };
  const auto cv = cross_validate(corpus40(), c, axis, opt);
  CHECK(trained == 4);
  REQUIRE(cv.records.size() == 12);
  std::map<double, std::vector<double>> by_value;
  for (const auto& r : cv.records) {
    CHECK(r.loss.total == doctest::Approx(total_loss(r.loss, c)).epsilon(1e-12));
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
    by_value[r.axis_value].push_back(r.accuracy);
  }
  REQUIRE(cv.summary.size() == 3);
  for (const auto& s : cv.summary) {
    const auto& v = by_value[s.axis_value];
    double mean = 0.0;
    for (double a : v) mean += a;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double a : v) ss += (a - mean) * (a - mean);
    CHECK(s.folds == 4);
    CHECK(s.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.stdev == doctest::Approx(std::sqrt(ss / 3.0)).epsilon(1e-12));
  }
  const auto again = cross_validate(corpus40(), c, axis, opt);
  for (std::size_t i = 0; i < cv.records.size(); ++i) CHECK(cv.records[i].accuracy == again.records[i].accuracy);
}

TEST_CASE("aggregate: identical fold accuracies give zero stdev") {
  std::vector<MetricsRecord> records;
  for (int f = 0; f < 5; ++f) {
    MetricsRecord r;
    r.fold = f;
    r.axis_name = "snr_db";
    r.axis_value = 5.0;
    r.accuracy = 0.75;
    records.push_back(r);
  }
  const auto s = aggregate(records);
  REQUIRE(s.size() == 1);
  CHECK(s[0].mean == 0.75);
  CHECK(s[0].stdev == 0.0);
}

TEST_CASE("fold isolation: held-out graphs never influence training") {
  Corpus corpus = corpus40();
  const FoldSplit split = kfold_split(corpus, 4, 1);
  const auto test = split.test_indices(0);
  TrainConfig c = small_config(9);
  c.epochs = 2;
  auto train = [&](const Corpus& data) {
    const PreparedCorpus prepared(data);
    GibSystem system(data.feature_dim, data.class_n, c);
    return train_fold(system, prepared, split, 0).params;
  };
  const auto before = checksum(corpus, test);
  const auto reference = train(corpus);
  CHECK(checksum(corpus, test) == before);
  for (int gid : test) {
    auto& g = corpus.graphs[static_cast<std::size_t>(gid)];
    g.features.setConstant(9.0);
    g.label = 1 - g.label;
  }
  const auto perturbed = train(corpus);
  CHECK(reference.phi.values() == perturbed.phi.values());
  CHECK(reference.theta.values() == perturbed.theta.values());
  CHECK(reference.kappa.values() == perturbed.kappa.values());
}

TEST_CASE("gradient check: full analog pipeline w.r.t. phi and theta") {
  const PreparedCorpus prepared(corpus40());
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    TrainConfig c = small_config(100 + static_cast<std::uint64_t>(t));
    c.noise_draws = 1 + t % 2;
    c.execution = Execution::serial;
    GibSystem system(corpus40().feature_dim, corpus40().class_n, c);
    const std::vector<int> batch{t, t + 10, t + 20};
    const auto step = static_cast<std::uint64_t>(t);
    const auto f0 = forward_batch(system, prepared, batch, step);
    Rng rng = make_rng(static_cast<std::uint64_t>(t), {});
    const auto pairing = derangement(static_cast<int>(f0.xhat.size()), rng);
    const auto g = batch_gradient(system, prepared, f0, pairing);
    auto loss_phi = [&](const Vector& phi) {
      GibSystem s = system;
      s.phi().values() = phi;
      return batch_gradient(s, prepared, forward_batch(s, prepared, batch, step), pairing).loss.total;
    };
    auto loss_theta = [&](const Vector& theta) {
      GibSystem s = system;
      s.theta().values() = theta;
      return batch_gradient(s, prepared, forward_batch(s, prepared, batch, step), pairing).loss.total;
    };
    // A ReLU kink inside the difference window spoils one stencil; narrowing
    // the window separates a kink from a wrong analytic gradient.
    auto error = [&](const Vector& analytic, auto loss, const Vector& at) {
      const double wide = rel_error(analytic, numeric_grad(loss, at));
      return wide < kGradTol ? wide : rel_error(analytic, numeric_grad(loss, at, gibtest::kFdStep / 100.0));
    };
    CHECK(error(g.phi, loss_phi, system.phi().values()) < kGradTol);
    CHECK(error(g.theta, loss_theta, system.theta().values()) < kGradTol);
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("line search: one small optimizer step on a fixed batch lowers the loss") {
  const PreparedCorpus prepared(corpus40());
  for (int t = 0; t < 10; ++t) {
    TrainConfig c = small_config(200 + static_cast<std::uint64_t>(t));
    GibSystem system(corpus40().feature_dim, corpus40().class_n, c);
    const std::vector<int> batch{0, 5, 11, 17, 23, 31};
    const auto f0 = forward_batch(system, prepared, batch, 0);
    Rng rng = make_rng(static_cast<std::uint64_t>(t), {});
    const auto pairing = derangement(static_cast<int>(f0.xhat.size()), rng);
    const auto g = batch_gradient(system, prepared, f0, pairing);
    Adam adam_phi(system.phi().size(), 1e-5);
    Adam adam_theta(system.theta().size(), 1e-5);
    adam_phi.step(system.phi().values(), g.phi);
    adam_theta.step(system.theta().values(), g.theta);
    const double after = batch_gradient(system, prepared, forward_batch(system, prepared, batch, 0), pairing).loss.total;
    CHECK(after < g.loss.total);
  }
}

TEST_CASE("digital pipeline: scalar 8-bit scheme trains and evaluates") {
  TrainConfig c = digital_config(10);
  c.scheme = DigitalScheme::scalar8;
  c.channel = ChannelConfig::discrete(0.94, ScalarQuantizer::levels);
  c.epochs = 2;
  const PreparedCorpus prepared(corpus40());
  GibSystem system(corpus40().feature_dim, corpus40().class_n, c);
  CHECK(c.symbol_alphabet() == 256);
  CHECK_FALSE(system.codebook().has_value());
  train_on(system, prepared, all_indices(corpus40()));
  const auto eval = evaluate(system, prepared, all_indices(corpus40()),
                             EvalAxis{"symbol_error_rate", {0.006, 0.014}}.settings(c, 2));
  REQUIRE(eval.size() == 2);
  CHECK(eval[0].channel.epsilon == doctest::Approx(0.994));
  CHECK(std::isfinite(eval[1].loss.total));
}

TEST_CASE("evaluation axis must match the pipeline") {
  const EvalAxis snr{"snr_db", {5.0}};
  const EvalAxis eps{"epsilon", {0.9}};
  const EvalAxis unknown{"loudness", {0.9}};
  CHECK_THROWS_AS(snr.settings(digital_config(1), 1), ArgumentError);
  CHECK_THROWS_AS(eps.settings(small_config(1), 1), ArgumentError);
  CHECK_THROWS_AS(unknown.settings(small_config(1), 1), ArgumentError);
}
