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


#include "gib/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <omp.h>

#include "gib/checkpoint.hpp"

namespace gib {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kKnownKeys = {
    "name", "corpus", "dataset_root", "dataset_name", "synthetic_graphs", "synthetic_seed",
    "beta", "alpha", "lambda_cm", "hidden_dim", "backbone", "batch_size", "epochs",
    "inner_steps", "noise_draws", "learning_rate", "mine_learning_rate", "seed", "digital",
    "scheme", "codebook_size", "chunks", "ema", "codebook_data_init", "codebook_learning_rate",
    "codebook_decay", "codebook_smoothing", "scalar_range", "dropout", "mine_schedule",
    "mine_pretrain_steps", "train_snr_db", "train_epsilon", "folds", "sweep_axis",
    "sweep_values", "eval_axis", "eval_values", "drop_mi", "drop_con", "variants",
    "beta_values", "hidden_dims", "output_dir", "workers", "record_wall_time",
    "dump_assignments", "save_checkpoints"};

const std::set<std::string> kAxes = {"snr_db", "epsilon", "symbol_error_rate", "beta"};
const std::set<std::string> kVariants = {"full", "no_mi", "no_con", "beta_sweep"};

class Reader {
 public:
  Reader(json j, const std::string& text, std::string source, std::set<std::string> overridden)
      : j_(std::move(j)), text_(text), source_(std::move(source)), overridden_(std::move(overridden)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    if (overridden_.count(key)) throw SpecError("--set " + key + ": " + msg);
    const int line = line_of(key);
    if (line > 0) throw SpecError(source_ + ":" + std::to_string(line) + ": " + key + ": " + msg);
    throw SpecError(source_ + ": " + key + ": " + msg);
  }

  int line_of(const std::string& key) const {
    const auto pos = text_.find("\"" + key + "\"");
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void read(const std::string& key, double& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail(key, "must be finite");
  }
  void read(const std::string& key, int& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    const auto x = v.get<long long>();
    if (x < -(1LL << 31) || x > (1LL << 31) - 1) fail(key, "out of range");
    out = static_cast<int>(x);
  }
  void read(const std::string& key, std::uint64_t& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  void read(const std::string& key, bool& out) const {
    if (!has(key)) return;
    if (!j_.at(key).is_boolean()) fail(key, "expected true or false");
    out = j_.at(key).get<bool>();
  }
  void read(const std::string& key, std::string& out) const {
    if (!has(key)) return;
    if (!j_.at(key).is_string()) fail(key, "expected a string");
    out = j_.at(key).get<std::string>();
  }
  void read(const std::string& key, std::vector<double>& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
      if (!std::isfinite(out.back())) fail(key, "values must be finite");
    }
  }
  void read(const std::string& key, std::vector<int>& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array()) fail(key, "expected an array of integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer()) fail(key, "expected an array of integers");
      out.push_back(e.get<int>());
    }
  }
  void read(const std::string& key, std::vector<std::string>& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array()) fail(key, "expected an array of strings");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_string()) fail(key, "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
  }

  const json& root() const { return j_; }

 private:
  json j_;
  const std::string& text_;
  std::string source_;
  std::set<std::string> overridden_;
};

int json_error_line(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

void check_sorted(const Reader& r, const std::string& key, const std::vector<double>& v) {
  if (v.empty()) r.fail(key, "must not be empty");
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) r.fail(key, "values must be sorted ascending and distinct");
  }
}

void check_axis_values(const Reader& r, const std::string& key, const std::string& axis,
                       const std::vector<double>& v) {
  check_sorted(r, key, v);
  for (double x : v) {
    if ((axis == "epsilon" || axis == "symbol_error_rate") && !(x >= 0.0 && x <= 1.0)) {
      r.fail(key, axis + " values must lie in [0, 1]");
    }
    if (axis == "beta" && x < 0.0) r.fail(key, "beta values must be >= 0");
  }
}

bool axis_is_digital(const std::string& axis) { return axis == "epsilon" || axis == "symbol_error_rate"; }

}  // namespace

std::vector<double> default_axis_values(const std::string& axis) {
  if (axis == "snr_db") return {-15.0, -5.0, 5.0, 15.0, 25.0};
  if (axis == "epsilon") return {0.90, 0.92, 0.94, 0.96, 0.98};
  if (axis == "symbol_error_rate") return {0.006, 0.008, 0.010, 0.012, 0.014};
  if (axis == "beta") return {0.01, 0.1, 0.3, 0.5, 0.7};
  throw ArgumentError("unknown axis '" + axis + "'");
}

ExperimentSpec parse_spec(const std::string& text, const std::string& source,
                          const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecError(source + ":" + std::to_string(json_error_line(text, e.byte)) + ": invalid JSON: " + e.what());
  }
  if (doc.is_object() && doc.contains("manifest_version") && doc.contains("spec")) doc = doc.at("spec");
  if (!doc.is_object()) throw SpecError(source + ":1: spec must be a JSON object");

  std::set<std::string> overridden;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw SpecError("--set " + o + ": expected key=value");
    const std::string key = o.substr(0, eq);
    const std::string value = o.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;
    }
    doc[key] = parsed;
    overridden.insert(key);
  }

  Reader r(doc, text, source, overridden);
  for (const auto& [key, value] : doc.items()) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
      r.fail(key, "unknown key");
    }
  }

  ExperimentSpec s;
  TrainConfig& t = s.train;
  r.read("name", s.name);
  if (s.name.empty() || s.name.find_first_not_of(
                            "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-") !=
                            std::string::npos) {
    r.fail("name", "use letters, digits, '_', '.' or '-'");
  }
  r.read("corpus", s.corpus);
  if (s.corpus != "synthetic" && s.corpus != "tudataset") r.fail("corpus", "expected synthetic or tudataset");
  r.read("dataset_root", s.dataset_root);
  r.read("dataset_name", s.dataset_name);
  if (s.corpus == "tudataset") {
    if (s.dataset_root.empty()) r.fail(r.has("dataset_root") ? "dataset_root" : "corpus", "tudataset needs dataset_root");
    if (s.dataset_name.empty()) r.fail(r.has("dataset_name") ? "dataset_name" : "corpus", "tudataset needs dataset_name");
  }
  r.read("synthetic_graphs", s.synthetic_graphs);
  if (s.synthetic_graphs < 20 || s.synthetic_graphs % 2 != 0) r.fail("synthetic_graphs", "must be even and >= 20");
  r.read("synthetic_seed", s.synthetic_seed);

  r.read("beta", t.beta);
  if (t.beta < 0.0) r.fail("beta", "must be >= 0");
  r.read("alpha", t.alpha);
  if (t.alpha < 0.0) r.fail("alpha", "must be >= 0");
  r.read("lambda_cm", t.lambda_cm);
  if (t.lambda_cm < 0.0) r.fail("lambda_cm", "must be >= 0");
  r.read("hidden_dim", t.hidden_dim);
  if (t.hidden_dim < 1) r.fail("hidden_dim", "must be positive");
  std::string backbone = to_string(t.backbone);
  r.read("backbone", backbone);
  try {
    t.backbone = parse_backbone(backbone);
  } catch (const ArgumentError&) {
    r.fail("backbone", "expected gcn or gin");
  }
  r.read("batch_size", t.batch_size);
  if (t.batch_size < 2) r.fail("batch_size", "must be >= 2");
  r.read("epochs", t.epochs);
  if (t.epochs < 0) r.fail("epochs", "must be >= 0");
  r.read("inner_steps", t.inner_steps);
  if (t.inner_steps < 1) r.fail("inner_steps", "must be >= 1");
  r.read("noise_draws", t.noise_draws);
  if (t.noise_draws < 1) r.fail("noise_draws", "must be >= 1");
  r.read("learning_rate", t.learning_rate);
  if (!(t.learning_rate > 0.0)) r.fail("learning_rate", "must be positive");
  r.read("mine_learning_rate", t.mine_learning_rate);
  if (!(t.mine_learning_rate > 0.0)) r.fail("mine_learning_rate", "must be positive");
  r.read("seed", t.seed);
  r.read("digital", t.digital);
  std::string scheme = to_string(t.scheme);
  r.read("scheme", scheme);
  if (scheme == "vq") {
    t.scheme = DigitalScheme::vq;
  } else if (scheme == "scalar8") {
    t.scheme = DigitalScheme::scalar8;
  } else {
    r.fail("scheme", "expected vq or scalar8");
  }
  r.read("codebook_size", t.codebook_size);
  if (t.codebook_size < 2) r.fail("codebook_size", "must be >= 2");
  r.read("chunks", t.chunks);
  if (t.chunks < 1 || t.hidden_dim % t.chunks != 0) r.fail("chunks", "must be positive and divide hidden_dim");
  r.read("ema", t.ema);
  r.read("codebook_data_init", t.codebook_data_init);
  r.read("codebook_learning_rate", t.codebook_learning_rate);
  if (!(t.codebook_learning_rate > 0.0)) r.fail("codebook_learning_rate", "must be positive");
  r.read("codebook_decay", t.codebook_decay);
  if (!(t.codebook_decay > 0.0 && t.codebook_decay < 1.0)) r.fail("codebook_decay", "must lie in (0, 1)");
  r.read("codebook_smoothing", t.codebook_smoothing);
  if (!(t.codebook_smoothing > 0.0)) r.fail("codebook_smoothing", "must be positive");
  r.read("scalar_range", t.scalar_range);
  if (!(t.scalar_range > 0.0)) r.fail("scalar_range", "must be positive");
  r.read("dropout", t.dropout);
  if (!(t.dropout >= 0.0 && t.dropout < 1.0)) r.fail("dropout", "must lie in [0, 1)");
  std::string schedule = to_string(t.mine_schedule);
  r.read("mine_schedule", schedule);
  if (schedule == "per_batch") {
    t.mine_schedule = MineSchedule::per_batch;
  } else if (schedule == "pretrain_freeze") {
    t.mine_schedule = MineSchedule::pretrain_freeze;
  } else {
    r.fail("mine_schedule", "expected per_batch or pretrain_freeze");
  }
  r.read("mine_pretrain_steps", t.mine_pretrain_steps);
  if (t.mine_pretrain_steps < 1) r.fail("mine_pretrain_steps", "must be >= 1");
  r.read("train_snr_db", s.train_snr_db);
  r.read("train_epsilon", s.train_epsilon);
  if (!(s.train_epsilon >= 0.0 && s.train_epsilon <= 1.0)) r.fail("train_epsilon", "must lie in [0, 1]");
  t.channel = t.digital ? ChannelConfig::discrete(s.train_epsilon, t.symbol_alphabet())
                        : ChannelConfig::analog(s.train_snr_db);

  r.read("folds", s.folds);
  if (s.folds < 2) r.fail("folds", "must be >= 2");
  s.sweep_axis = t.digital ? "epsilon" : "snr_db";
  r.read("sweep_axis", s.sweep_axis);
  if (!kAxes.count(s.sweep_axis)) r.fail("sweep_axis", "expected snr_db, epsilon, symbol_error_rate or beta");
  s.sweep_values = default_axis_values(s.sweep_axis);
  r.read("sweep_values", s.sweep_values);
  check_axis_values(r, r.has("sweep_values") ? "sweep_values" : "sweep_axis", s.sweep_axis, s.sweep_values);

  s.eval_axis = t.digital ? "epsilon" : "snr_db";
  r.read("eval_axis", s.eval_axis);
  if (!kAxes.count(s.eval_axis) || s.eval_axis == "beta") {
    r.fail("eval_axis", "expected snr_db, epsilon or symbol_error_rate");
  }
  s.eval_values = default_axis_values(s.eval_axis);
  r.read("eval_values", s.eval_values);
  check_axis_values(r, r.has("eval_values") ? "eval_values" : "eval_axis", s.eval_axis, s.eval_values);
  const std::string channel_axis = s.sweep_axis == "beta" ? s.eval_axis : s.sweep_axis;
  const std::string channel_key = s.sweep_axis == "beta" ? "eval_axis" : "sweep_axis";
  if (axis_is_digital(channel_axis) != t.digital) {
    r.fail(r.has(channel_key) ? channel_key : "digital",
           channel_axis + " does not match digital=" + (t.digital ? "true" : "false"));
  }

  r.read("drop_mi", s.drop_mi);
  r.read("drop_con", s.drop_con);
  r.read("variants", s.variants);
  if (s.variants.empty()) r.fail("variants", "must not be empty");
  for (const auto& v : s.variants) {
    if (!kVariants.count(v)) r.fail("variants", "unknown variant '" + v + "'");
  }
  r.read("beta_values", s.beta_values);
  check_axis_values(r, "beta_values", "beta", s.beta_values);
  r.read("hidden_dims", s.hidden_dims);
  for (int h : s.hidden_dims) {
    if (h < 1 || h % t.chunks != 0) r.fail("hidden_dims", "entries must be positive multiples of chunks");
  }
  r.read("output_dir", s.output_dir);
  r.read("workers", s.workers);
  if (s.workers < 0) r.fail("workers", "must be >= 0");
  r.read("record_wall_time", s.record_wall_time);
  r.read("dump_assignments", s.dump_assignments);
  r.read("save_checkpoints", s.save_checkpoints);

  try {
    t.validate();
  } catch (const ArgumentError& e) {
    throw SpecError(source + ": " + e.what());
  }
  return s;
}

ExperimentSpec load_spec(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw SpecError(path.string() + ": cannot read spec file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str(), path.string(), overrides);
}

json spec_to_json(const ExperimentSpec& s) {
  const TrainConfig& t = s.train;
  json j;
  j["name"] = s.name;
  j["corpus"] = s.corpus;
  j["dataset_root"] = s.dataset_root;
  j["dataset_name"] = s.dataset_name;
  j["synthetic_graphs"] = s.synthetic_graphs;
  j["synthetic_seed"] = s.synthetic_seed;
  j["beta"] = t.beta;
  j["alpha"] = t.alpha;
  j["lambda_cm"] = t.lambda_cm;
  j["hidden_dim"] = t.hidden_dim;
  j["backbone"] = to_string(t.backbone);
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.epochs;
  j["inner_steps"] = t.inner_steps;
  j["noise_draws"] = t.noise_draws;
  j["learning_rate"] = t.learning_rate;
  j["mine_learning_rate"] = t.mine_learning_rate;
  j["seed"] = t.seed;
  j["digital"] = t.digital;
  j["scheme"] = to_string(t.scheme);
  j["codebook_size"] = t.codebook_size;
  j["chunks"] = t.chunks;
  j["ema"] = t.ema;
  j["codebook_data_init"] = t.codebook_data_init;
  j["codebook_learning_rate"] = t.codebook_learning_rate;
  j["codebook_decay"] = t.codebook_decay;
  j["codebook_smoothing"] = t.codebook_smoothing;
  j["scalar_range"] = t.scalar_range;
  j["dropout"] = t.dropout;
  j["mine_schedule"] = to_string(t.mine_schedule);
  j["mine_pretrain_steps"] = t.mine_pretrain_steps;
  j["train_snr_db"] = s.train_snr_db;
  j["train_epsilon"] = s.train_epsilon;
  j["folds"] = s.folds;
  j["sweep_axis"] = s.sweep_axis;
  j["sweep_values"] = s.sweep_values;
  j["eval_axis"] = s.eval_axis;
  j["eval_values"] = s.eval_values;
  j["drop_mi"] = s.drop_mi;
  j["drop_con"] = s.drop_con;
  j["variants"] = s.variants;
  j["beta_values"] = s.beta_values;
  j["hidden_dims"] = s.hidden_dims;
  j["output_dir"] = s.output_dir;
  j["workers"] = s.workers;
  j["record_wall_time"] = s.record_wall_time;
  j["dump_assignments"] = s.dump_assignments;
  j["save_checkpoints"] = s.save_checkpoints;
  return j;
}

Corpus load_corpus(const ExperimentSpec& spec) {
  if (spec.corpus == "synthetic") return generate_synthetic(spec.synthetic_graphs, spec.synthetic_seed);
  return parse_tudataset(spec.dataset_root, spec.dataset_name);
}

const char* const kMetricsHeader =
    "experiment,variant,backbone,hidden_dim,fold,axis_name,axis_value,accuracy,loss_inf,loss_mi,"
    "loss_con,loss_vq,loss_cm,loss_total,seed,wall_time_s";

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    out << r.experiment << ',' << r.variant << ',' << r.backbone << ',' << r.hidden_dim << ','
        << r.fold << ',' << r.axis_name << ',' << format_number(r.axis_value) << ','
        << format_number(r.accuracy) << ',' << format_number(r.loss.inf) << ','
        << format_number(r.loss.mi) << ',' << format_number(r.loss.con) << ','
        << format_number(r.loss.vq) << ',' << format_number(r.loss.cm) << ','
        << format_number(r.loss.total) << ',' << r.seed << ',' << format_number(r.wall_time_s) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<MetricsRecord> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError(path.string() + ": cannot read metrics file");
  std::string line;
  if (!std::getline(in, line)) throw SpecError(path.string() + ":1: empty metrics file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw SpecError(path.string() + ":1: unexpected header");
  std::vector<MetricsRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (f.size() != 16) throw SpecError(where + "expected 16 fields, got " + std::to_string(f.size()));
    try {
      MetricsRecord r;
      r.experiment = f[0];
      r.variant = f[1];
      r.backbone = f[2];
      r.hidden_dim = std::stoi(f[3]);
      r.fold = std::stoi(f[4]);
      r.axis_name = f[5];
      r.axis_value = std::stod(f[6]);
      r.accuracy = std::stod(f[7]);
      r.loss.inf = std::stod(f[8]);
      r.loss.mi = std::stod(f[9]);
      r.loss.con = std::stod(f[10]);
      r.loss.vq = std::stod(f[11]);
      r.loss.cm = std::stod(f[12]);
      r.loss.total = std::stod(f[13]);
      r.seed = std::stoull(f[14]);
      r.wall_time_s = std::stod(f[15]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw SpecError(where + "malformed number");
    }
  }
  return out;
}

namespace {

struct Series {
  std::string label;
  std::string variant;
  std::string backbone;
  int hidden_dim = 0;
  std::vector<SettingSummary> points;
};

/// Groups records by (variant, backbone, hidden_dim) in first-seen order.
std::vector<Series> group_series(const std::vector<MetricsRecord>& records) {
  std::set<std::string> backbones;
  std::set<int> dims;
  for (const auto& r : records) {
    backbones.insert(r.backbone);
    dims.insert(r.hidden_dim);
  }
  std::vector<Series> out;
  std::vector<std::vector<MetricsRecord>> members;
  for (const auto& r : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Series& s) {
      return s.variant == r.variant && s.backbone == r.backbone && s.hidden_dim == r.hidden_dim;
    });
    if (it == out.end()) {
      Series s;
      s.variant = r.variant;
      s.backbone = r.backbone;
      s.hidden_dim = r.hidden_dim;
      s.label = r.variant;
      if (backbones.size() > 1) s.label += " " + r.backbone;
      if (dims.size() > 1) s.label += " dim-" + std::to_string(r.hidden_dim);
      out.push_back(s);
      members.emplace_back();
      it = out.end() - 1;
    }
    members[static_cast<std::size_t>(it - out.begin())].push_back(r);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].points = aggregate(members[i]);
    std::sort(out[i].points.begin(), out[i].points.end(),
              [](const SettingSummary& a, const SettingSummary& b) { return a.axis_value < b.axis_value; });
  }
  return out;
}

std::string axis_label(const std::string& axis) {
  if (axis == "snr_db") return "SNR (dB)";
  if (axis == "epsilon") return "correct-transmission probability epsilon";
  if (axis == "symbol_error_rate") return "symbol error rate";
  return axis;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_figure_svg(const std::vector<MetricsRecord>& records) {
  if (records.empty()) throw ArgumentError("render_figure_svg: no records");
  const auto series = group_series(records);
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      x_lo = std::min(x_lo, p.axis_value);
      x_hi = std::max(x_hi, p.axis_value);
      y_lo = std::min(y_lo, p.mean - p.stdev);
      y_hi = std::max(y_hi, p.mean + p.stdev);
    }
  }
  if (x_hi == x_lo) {
    x_lo -= 1.0;
    x_hi += 1.0;
  }
  y_lo = std::max(0.0, std::floor(y_lo * 20.0) / 20.0);
  y_hi = std::min(1.0, std::ceil(y_hi * 20.0) / 20.0);
  if (y_hi - y_lo < 0.05) {
    y_lo = std::max(0.0, y_lo - 0.05);
    y_hi = std::min(1.0, y_hi + 0.05);
  }
  const double w = 720, h = 440, left = 70, right = 200, top = 30, bottom = 60;
  const double pw = w - left - right, ph = h - top - bottom;
  auto sx = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double yv = y_lo + (y_hi - y_lo) * i / 5.0;
    o << "<line x1=\"" << left - 4 << "\" x2=\"" << left << "\" y1=\"" << sy(yv) << "\" y2=\"" << sy(yv)
      << "\" stroke=\"black\"/><text x=\"" << left - 8 << "\" y=\"" << sy(yv) + 4
      << "\" text-anchor=\"end\">" << fixed(yv, 2) << "</text>\n";
  }
  std::set<double> xs;
  for (const auto& s : series) {
    for (const auto& p : s.points) xs.insert(p.axis_value);
  }
  for (double xv : xs) {
    o << "<line x1=\"" << sx(xv) << "\" x2=\"" << sx(xv) << "\" y1=\"" << top + ph << "\" y2=\""
      << top + ph + 4 << "\" stroke=\"black\"/><text x=\"" << sx(xv) << "\" y=\"" << top + ph + 18
      << "\" text-anchor=\"middle\">" << format_number(xv) << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 15 << "\" text-anchor=\"middle\">"
    << xml_escape(axis_label(records.front().axis_name)) << "</text>\n";
  o << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">accuracy</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = palette[i % 10];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : s.points) o << sx(p.axis_value) << ',' << sy(p.mean) << ' ';
    o << "\"/>\n";
    for (const auto& p : s.points) {
      const double x = sx(p.axis_value);
      o << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << sy(std::max(y_lo, p.mean - p.stdev))
        << "\" y2=\"" << sy(std::min(y_hi, p.mean + p.stdev)) << "\" stroke=\"" << color << "\"/>"
        << "<circle cx=\"" << x << "\" cy=\"" << sy(p.mean) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(i);
    o << "<line x1=\"" << left + pw + 15 << "\" x2=\"" << left + pw + 35 << "\" y1=\"" << ly << "\" y2=\""
      << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << left + pw + 40
      << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string render_tables(const std::vector<MetricsRecord>& records) {
  std::ostringstream o;
  std::vector<std::string> axes;
  for (const auto& r : records) {
    if (std::find(axes.begin(), axes.end(), r.axis_name) == axes.end()) axes.push_back(r.axis_name);
  }
  for (const auto& axis : axes) {
    std::vector<MetricsRecord> subset;
    for (const auto& r : records) {
      if (r.axis_name == axis) subset.push_back(r);
    }
    const auto series = group_series(subset);
    std::set<double> xs;
    for (const auto& s : series) {
      for (const auto& p : s.points) xs.insert(p.axis_value);
    }
    o << "### accuracy (mean ± stdev over folds) vs " << axis << "\n\n| series |";
    for (double x : xs) o << ' ' << axis << '=' << format_number(x) << " |";
    o << "\n|---|";
    for (std::size_t i = 0; i < xs.size(); ++i) o << "---|";
    o << '\n';
    auto cell = [](const Series& s, double x) -> const SettingSummary* {
      for (const auto& p : s.points) {
        if (p.axis_value == x) return &p;
      }
      return nullptr;
    };
    for (const auto& s : series) {
      o << "| " << s.label << " |";
      for (double x : xs) {
        const auto* p = cell(s, x);
        o << ' ' << (p ? fixed(p->mean, 3) + " ± " + fixed(p->stdev, 3) : std::string("-")) << " |";
      }
      o << '\n';
    }
    for (const auto& base : series) {
      if (base.variant != "full") continue;
      for (const char* other : {"no_mi", "no_con"}) {
        auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) {
          return s.variant == other && s.backbone == base.backbone && s.hidden_dim == base.hidden_dim;
        });
        if (it == series.end()) continue;
        o << "| diff full - " << other << " (" << base.backbone << " dim-" << base.hidden_dim << ") |";
        for (double x : xs) {
          const auto* a = cell(base, x);
          const auto* b = cell(*it, x);
          if (a && b) {
            const double d = a->mean - b->mean;
            o << ' ' << (d >= 0 ? "+" : "") << fixed(d, 3) << " |";
          } else {
            o << " - |";
          }
        }
        o << '\n';
      }
    }
    o << '\n';
  }
  return o.str();
}

fs::path resolve_output_dir(const ExperimentSpec& spec) {
  if (!spec.output_dir.empty()) return spec.output_dir;
  if (const char* root = std::getenv("GIBCOMM_OUTPUT_ROOT"); root && *root) return fs::path(root) / spec.name;
  return fs::path("runs") / spec.name;
}

void write_assignment_dump(const GibSystem& system, const PreparedCorpus& corpus,
                           const std::vector<int>& indices, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "graph_id,node,p_sub\n";
  for (int gid : indices) {
    const auto tx = system.transmit(corpus.input(gid), false);
    for (Eigen::Index v = 0; v < tx.s.nodes(); ++v) {
      out << gid << ',' << v << ',' << format_number(tx.s.s(v, 0)) << '\n';
    }
  }
}

namespace {

struct Job {
  std::string variant;
  TrainConfig config;
  EvalAxis axis;
};

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::vector<int> all_indices(const Corpus& corpus) {
  std::vector<int> out(corpus.graphs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
  return out;
}

TrainConfig apply_drops(TrainConfig c, bool drop_mi, bool drop_con) {
  if (drop_mi) c.beta = 0.0;
  if (drop_con) c.alpha = 0.0;
  return c;
}

RunOutput execute(const ExperimentSpec& spec, const std::string& command, const std::vector<Job>& jobs) {
  const Corpus corpus = load_corpus(spec);
  const fs::path dir = resolve_output_dir(spec);
  fs::create_directories(dir);
  if (spec.workers > 0) omp_set_num_threads(spec.workers);
  const Execution fold_execution =
      (spec.workers == 1 || max_threads() < 2) ? Execution::serial : Execution::parallel;

  RunOutput out;
  out.directory = dir;
  json job_log = json::array();
  for (const auto& job : jobs) {
    CvOptions opt;
    opt.experiment = spec.name;
    opt.variant = job.variant;
    opt.k = spec.folds;
    opt.record_wall_time = spec.record_wall_time;
    opt.fold_execution = fold_execution;
    const std::string tag = job.variant + "_" + to_string(job.config.backbone) + "_dim" +
                            std::to_string(job.config.hidden_dim);
    if (spec.dump_assignments || spec.save_checkpoints) {
      fs::create_directories(dir / "folds");
      opt.on_fold_trained = [&, tag](int fold, const GibSystem& system, const PreparedCorpus& prepared,
                                     const std::vector<int>& test) {
        const auto stem = dir / "folds" / (tag + "_fold" + std::to_string(fold));
        if (spec.dump_assignments) write_assignment_dump(system, prepared, test, stem.string() + "_assignments.csv");
        if (spec.save_checkpoints) save_checkpoint(system, stem.string() + ".gibp");
      };
    }
    auto cv = cross_validate(corpus, job.config, job.axis, opt);
    json seeds = json::array();
    for (int f = 0; f < spec.folds; ++f) seeds.push_back(fold_seed(job.config.seed, f));
    job_log.push_back({{"variant", job.variant},
                       {"backbone", to_string(job.config.backbone)},
                       {"hidden_dim", job.config.hidden_dim},
                       {"beta", job.config.beta},
                       {"alpha", job.config.alpha},
                       {"axis_name", job.axis.name},
                       {"axis_values", job.axis.values},
                       {"fold_model_seeds", seeds}});
    for (auto& r : cv.records) out.records.push_back(std::move(r));
  }

  write_metrics_csv(dir / "metrics.csv", out.records);
  {
    std::ofstream svg(dir / "figure.svg");
    svg << render_figure_svg(out.records);
  }
  {
    std::ofstream md(dir / "tables.md");
    md << "# " << spec.name << "\n\n" << render_tables(out.records);
  }
  const FoldSplit split = kfold_split(corpus, spec.folds, spec.train.seed);
  json manifest;
  manifest["manifest_version"] = 1;
  manifest["command"] = command;
  manifest["spec"] = spec_to_json(spec);
  manifest["corpus"] = {{"name", corpus.name},
                        {"graphs", corpus.graphs.size()},
                        {"class_n", corpus.class_n},
                        {"feature_dim", corpus.feature_dim},
                        {"checksum", hex(checksum(corpus, all_indices(corpus)))}};
  manifest["fold_assignments"] = split.assignments;
  manifest["split_seed"] = spec.train.seed;
  manifest["jobs"] = job_log;
  manifest["snr_convention"] = "snr_db = 10*log10(1/sigma^2) with unit mean per-symbol signal power";
  manifest["outputs"] = {"metrics.csv", "figure.svg", "tables.md", "manifest.json"};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  return out;
}

std::string beta_variant(double beta) { return "beta=" + format_number(beta); }

}  // namespace

RunOutput run_experiment(const ExperimentSpec& spec) {
  std::vector<Job> jobs;
  const TrainConfig base = apply_drops(spec.train, spec.drop_mi, spec.drop_con);
  if (spec.sweep_axis == "beta") {
    for (double b : spec.sweep_values) {
      TrainConfig c = base;
      c.beta = b;
      jobs.push_back(Job{beta_variant(b), c, EvalAxis{spec.eval_axis, spec.eval_values}});
    }
  } else {
    std::string variant = "full";
    if (spec.drop_mi && spec.drop_con) {
      variant = "no_mi_no_con";
    } else if (spec.drop_mi) {
      variant = "no_mi";
    } else if (spec.drop_con) {
      variant = "no_con";
    }
    jobs.push_back(Job{variant, base, EvalAxis{spec.sweep_axis, spec.sweep_values}});
  }
  return execute(spec, "run", jobs);
}

RunOutput run_ablation(const ExperimentSpec& spec) {
  const EvalAxis axis = spec.sweep_axis == "beta" ? EvalAxis{spec.eval_axis, spec.eval_values}
                                                  : EvalAxis{spec.sweep_axis, spec.sweep_values};
  std::vector<int> dims = spec.hidden_dims;
  if (dims.empty()) dims.push_back(spec.train.hidden_dim);
  std::vector<Job> jobs;
  for (int dim : dims) {
    TrainConfig base = spec.train;
    base.hidden_dim = dim;
    for (const auto& v : spec.variants) {
      if (v == "full") {
        jobs.push_back(Job{"full", base, axis});
      } else if (v == "no_mi") {
        jobs.push_back(Job{"no_mi", apply_drops(base, true, false), axis});
      } else if (v == "no_con") {
        jobs.push_back(Job{"no_con", apply_drops(base, false, true), axis});
      } else {
        for (double b : spec.beta_values) {
          TrainConfig c = base;
          c.beta = b;
          jobs.push_back(Job{beta_variant(b), c, axis});
        }
      }
    }
  }
  return execute(spec, "ablate", jobs);
}

}  // namespace gib
