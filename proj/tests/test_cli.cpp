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

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gib/experiment.hpp"
#include "support.hpp"

using namespace gib;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Outcome {
  int code = -1;
  std::string err;
};

// Runs the CLI with `args`; `env` is prefixed to the command line.
Outcome cli(const std::string& args, const std::string& env = "") {
  const auto dir = gibtest::temp_dir("cli_io");
  const auto err = dir / "stderr.txt";
  const std::string cmd = env + " '" GIBCOMM_BIN "' " + args + " > '" + (dir / "stdout.txt").string() +
                          "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return Outcome{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* const kTinySpec = R"({
  "name": "cli_tiny",
  "synthetic_graphs": 20,
  "batch_size": 5,
  "learning_rate": 0.005,
  "alpha": 1.0,
  "epochs": 1,
  "folds": 2,
  "sweep_values": [0, 20]
})";

}  // namespace

TEST_CASE("cli: usage errors exit 2, help exits 0") {
  CHECK(cli("").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("run").code == 2);
  CHECK(cli("--help").code == 0);
  CHECK(cli("gen-synthetic /tmp/x --n notanumber").code == 2);
}

TEST_CASE("cli: spec validation errors exit 2 with a line-numbered message") {
  const auto dir = gibtest::temp_dir("cli_validation");
  write_text(dir / "bad.json", "{\n  \"name\": \"x\",\n  \"epochs\": -4\n}\n");
  const auto bad = cli("run '" + (dir / "bad.json").string() + "'");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("bad.json:3: epochs: must be >= 0") != std::string::npos);
  CHECK(cli("run '" + (dir / "missing.json").string() + "'").code == 2);
  write_text(dir / "ok.json", kTinySpec);
  const auto over = cli("run '" + (dir / "ok.json").string() + "' --set folds=1");
  CHECK(over.code == 2);
  CHECK(over.err.find("--set folds") != std::string::npos);
}

TEST_CASE("cli: a missing dataset is a runtime failure") {
  const auto dir = gibtest::temp_dir("cli_runtime");
  write_text(dir / "tu.json", R"({"corpus": "tudataset", "dataset_root": "/nonexistent/PROTEINS", "dataset_name": "PROTEINS"})");
  const auto r = cli("run '" + (dir / "tu.json").string() + "' --out '" + (dir / "out").string() + "'");
  CHECK(r.code == 3);
  CHECK(r.err.find("PROTEINS") != std::string::npos);
}

TEST_CASE("cli: run honours the output-root variable and plot regenerates the figure") {
  const auto dir = gibtest::temp_dir("cli_run");
  write_text(dir / "spec.json", kTinySpec);
  const auto r = cli("run '" + (dir / "spec.json").string() + "' --no-timing --workers 1",
                     "GIBCOMM_OUTPUT_ROOT='" + (dir / "root").string() + "'");
  REQUIRE(r.code == 0);
  const auto out = dir / "root" / "cli_tiny";
  for (const char* f : {"metrics.csv", "figure.svg", "tables.md", "manifest.json"}) CHECK(std::filesystem::exists(out / f));
  CHECK(read_metrics_csv(out / "metrics.csv").size() == 4);

  const auto again = cli("run '" + (out / "manifest.json").string() + "' --no-timing --out '" + (dir / "again").string() + "'");
  REQUIRE(again.code == 0);
  CHECK(slurp(out / "metrics.csv") == slurp(dir / "again" / "metrics.csv"));

  CHECK(cli("plot '" + (out / "metrics.csv").string() + "' --out '" + (dir / "fig.svg").string() + "'").code == 0);
  CHECK(slurp(dir / "fig.svg") == slurp(out / "figure.svg"));
  write_text(dir / "junk.csv", "not,a,metrics,file\n");
  CHECK(cli("plot '" + (dir / "junk.csv").string() + "'").code == 2);
}

TEST_CASE("cli: gen-synthetic writes a readable TUDataset directory") {
  const auto dir = gibtest::temp_dir("cli_gen");
  REQUIRE(cli("gen-synthetic '" + (dir / "syn").string() + "' --n 20 --seed 4").code == 0);
  const Corpus expected = generate_synthetic(20, 4);
  const Corpus read = parse_tudataset(dir / "syn", expected.name);
  REQUIRE(read.graphs.size() == 20);
  CHECK(checksum(read, std::vector<int>{0, 5, 19}) == checksum(expected, std::vector<int>{0, 5, 19}));
  CHECK(cli("gen-synthetic '" + (dir / "odd").string() + "' --n 21").code == 2);
}
