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


#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gib/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

void summarize(const gib::RunOutput& out) {
  std::cout << gib::render_tables(out.records);
  std::cout << "wrote " << (out.directory / "metrics.csv").string() << ", figure.svg, tables.md, manifest.json\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-oriented graph communication experiments"};
  app.require_subcommand(1);

  std::string spec_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  bool no_timing = false;
  int workers = -1;

  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("spec", spec_path, "experiment spec (flat JSON) or manifest.json")->required();
    cmd->add_option("--set", overrides, "override a spec key, key=value (repeatable)");
    cmd->add_option("--out", out_dir, "output directory (overrides output_dir and GIBCOMM_OUTPUT_ROOT)");
    cmd->add_flag("--no-timing", no_timing, "write wall_time_s = 0 so metrics.csv is byte-reproducible");
    cmd->add_option("--workers", workers, "fold worker threads (0 = CPU count)")->check(CLI::NonNegativeNumber);
  };
  auto* run = app.add_subcommand("run", "cross-validate one spec over its sweep axis");
  add_run_options(run);
  auto* ablate = app.add_subcommand("ablate", "run the ablation variants of a spec with shared folds and seeds");
  add_run_options(ablate);

  std::string csv_path;
  std::string svg_path;
  auto* plot = app.add_subcommand("plot", "regenerate the figure and tables from metrics.csv");
  plot->add_option("metrics", csv_path, "metrics.csv")->required();
  plot->add_option("--out", svg_path, "SVG path (default: figure.svg beside the CSV)");

  std::string gen_dir;
  int gen_n = 200;
  std::uint64_t gen_seed = 7;
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic corpus in TUDataset format");
  gen->add_option("out-dir", gen_dir, "output directory")->required();
  gen->add_option("--n", gen_n, "graph count (even, >= 20)");
  gen->add_option("--seed", gen_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (run->parsed() || ablate->parsed()) {
      gib::ExperimentSpec spec = gib::load_spec(spec_path, overrides);
      if (!out_dir.empty()) spec.output_dir = out_dir;
      if (no_timing) spec.record_wall_time = false;
      if (workers >= 0) spec.workers = workers;
      summarize(run->parsed() ? gib::run_experiment(spec) : gib::run_ablation(spec));
    } else if (plot->parsed()) {
      const auto records = gib::read_metrics_csv(csv_path);
      if (records.empty()) throw gib::SpecError(csv_path + ": no metric rows");
      const std::filesystem::path target =
          svg_path.empty() ? std::filesystem::path(csv_path).parent_path() / "figure.svg" : std::filesystem::path(svg_path);
      std::ofstream(target) << gib::render_figure_svg(records);
      std::cout << gib::render_tables(records) << "wrote " << target.string() << '\n';
    } else if (gen->parsed()) {
      const auto corpus = gib::generate_synthetic(gen_n, gen_seed);
      gib::write_tudataset(corpus, gen_dir);
      std::cout << "wrote " << corpus.graphs.size() << " graphs to " << gen_dir << '\n';
    }
  } catch (const gib::SpecError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const gib::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
