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

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gib/trainer.hpp"

namespace gib {

/// Invalid experiment spec; the message carries "<source>:<line>: " when the
/// offending key can be located.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::string corpus = "synthetic";  // synthetic | tudataset
  std::string dataset_root;
  std::string dataset_name;
  int synthetic_graphs = 200;
  std::uint64_t synthetic_seed = 7;
  TrainConfig train;
  double train_snr_db = 5.0;
  double train_epsilon = 0.94;
  int folds = 10;
  std::string sweep_axis = "snr_db";  // snr_db | epsilon | symbol_error_rate | beta; epsilon when digital
  std::vector<double> sweep_values;
  /// Evaluation axis for a beta sweep; defaults to snr_db or epsilon by mode.
  std::string eval_axis;
  std::vector<double> eval_values;
  bool drop_mi = false;
  bool drop_con = false;
  /// ablate: any of full, no_mi, no_con, beta_sweep.
  std::vector<std::string> variants = {"full", "no_mi", "no_con"};
  std::vector<double> beta_values = {0.01, 0.1, 0.3, 0.5, 0.7};
  std::vector<int> hidden_dims;
  std::string output_dir;
  int workers = 0;  // 0 = CPU count
  bool record_wall_time = true;
  bool dump_assignments = false;
  bool save_checkpoints = false;
};

/// Parses a flat JSON spec (or a manifest.json carrying a "spec" object),
/// then applies "key=value" overrides. `source` names the text in errors.
ExperimentSpec parse_spec(const std::string& text, const std::string& source,
                          const std::vector<std::string>& overrides = {});
ExperimentSpec load_spec(const std::filesystem::path& path,
                         const std::vector<std::string>& overrides = {});
nlohmann::json spec_to_json(const ExperimentSpec& spec);

std::vector<double> default_axis_values(const std::string& axis);

Corpus load_corpus(const ExperimentSpec& spec);

extern const char* const kMetricsHeader;
std::string format_number(double v);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

/// Accuracy-vs-axis line plot, mean ± stdev per series, from records alone.
std::string render_figure_svg(const std::vector<MetricsRecord>& records);
/// Markdown tables: mean ± stdev per series and setting, plus full − no_mi
/// difference rows when both variants are present.
std::string render_tables(const std::vector<MetricsRecord>& records);

struct RunOutput {
  std::filesystem::path directory;
  std::vector<MetricsRecord> records;
};

/// Output directory: spec.output_dir, else $GIBCOMM_OUTPUT_ROOT/<name>, else runs/<name>.
std::filesystem::path resolve_output_dir(const ExperimentSpec& spec);

RunOutput run_experiment(const ExperimentSpec& spec);
RunOutput run_ablation(const ExperimentSpec& spec);

/// "graph_id,node,p_sub" rows for the given graphs.
void write_assignment_dump(const GibSystem& system, const PreparedCorpus& corpus,
                           const std::vector<int>& indices, const std::filesystem::path& path);

}  // namespace gib
