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

#include "gib/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "gib/rng.hpp"

namespace gib {
namespace {

namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

struct Line {
  std::size_t number;
  std::vector<std::string> fields;
};

/// Non-empty lines of a comma-separated file, CRLF tolerated.
std::vector<Line> read_rows(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.filename().string());
  std::vector<Line> rows;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    Line row{number, {}};
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      row.fields.push_back(trim(std::string_view(line).substr(
          start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

long parse_int(const std::string& s, const fs::path& file, std::size_t line) {
  long v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw IngestionError(file.filename().string() + ":" + std::to_string(line) +
                         ": expected integer, got '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, const fs::path& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IngestionError(file.filename().string() + ":" + std::to_string(line) +
                         ": expected number, got '" + s + "'");
  }
}

fs::path required(const fs::path& root, const std::string& name,
                  const std::string& suffix) {
  fs::path p = root / (name + suffix);
  if (!fs::exists(p)) {
    throw IngestionError("missing mandatory file " + p.filename().string() +
                         " in " + root.string());
  }
  return p;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<int> Graph::degrees() const {
  std::vector<int> deg(static_cast<std::size_t>(node_count), 0);
  for (const auto& [i, j] : edges) {
    ++deg[static_cast<std::size_t>(i)];
    ++deg[static_cast<std::size_t>(j)];
  }
  return deg;
}

Graph make_graph(int node_count, const std::vector<std::pair<int, int>>& edges,
                 Matrix features, int label) {
  if (node_count <= 0) throw ShapeError("graph must have at least one node");
  if (features.rows() != node_count) {
    throw ShapeError("feature rows do not match node count");
  }
  std::set<std::pair<int, int>> unique;
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= node_count || j >= node_count) {
      throw ShapeError("edge endpoint out of range");
    }
    if (i == j) continue;
    unique.emplace(std::min(i, j), std::max(i, j));
  }
  Graph g;
  g.node_count = node_count;
  g.edges.assign(unique.begin(), unique.end());
  g.adjacency = Matrix::Zero(node_count, node_count);
  for (const auto& [i, j] : g.edges) {
    g.adjacency(i, j) = 1.0;
    g.adjacency(j, i) = 1.0;
  }
  g.features = std::move(features);
  g.label = label;
  return g;
}

std::vector<int> Corpus::class_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(std::max(class_n, 0)), 0);
  for (const auto& g : graphs) {
    if (g.label >= 0 && g.label < class_n) ++counts[static_cast<std::size_t>(g.label)];
  }
  return counts;
}

void Corpus::validate() const {
  if (class_n < 2) throw StructuralError("corpus needs at least two classes");
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const auto& g = graphs[k];
    const std::string where = "graph " + std::to_string(k);
    if (g.features.rows() != g.node_count || g.features.cols() != feature_dim) {
      throw StructuralError(where + ": feature shape mismatch");
    }
    if (g.label < 0 || g.label >= class_n) {
      throw StructuralError(where + ": label out of range");
    }
    if (!g.adjacency.isApprox(g.adjacency.transpose(), 0.0) ||
        g.adjacency.diagonal().cwiseAbs().maxCoeff() != 0.0) {
      throw StructuralError(where + ": adjacency not symmetric with zero diagonal");
    }
  }
  for (int c : class_counts()) {
    if (c == 0) throw StructuralError("a class index has no graphs");
  }
}

Corpus parse_tudataset(const fs::path& root, const std::string& name) {
  const fs::path a_path = required(root, name, "_A.txt");
  const fs::path ind_path = required(root, name, "_graph_indicator.txt");
  const fs::path lab_path = required(root, name, "_graph_labels.txt");
  const fs::path node_lab_path = root / (name + "_node_labels.txt");
  const fs::path attr_path = root / (name + "_node_attributes.txt");

  // Graph membership of every (1-based) node.
  const auto ind_rows = read_rows(ind_path);
  const std::size_t n_nodes = ind_rows.size();
  std::vector<int> node_graph(n_nodes);
  std::vector<int> node_local(n_nodes);
  std::map<long, int> graph_index;  // file graph id -> dense index
  std::vector<int> sizes;
  for (std::size_t v = 0; v < n_nodes; ++v) {
    const long gid = parse_int(ind_rows[v].fields.at(0), ind_path, ind_rows[v].number);
    auto [it, inserted] = graph_index.emplace(gid, static_cast<int>(graph_index.size()));
    if (inserted) sizes.push_back(0);
    node_graph[v] = it->second;
    node_local[v] = sizes[static_cast<std::size_t>(it->second)]++;
  }
  // Dense indices follow sorted graph ids, the order of _graph_labels.txt.
  {
    std::vector<int> remap(graph_index.size());
    int rank = 0;
    for (auto& [gid, idx] : graph_index) remap[static_cast<std::size_t>(idx)] = rank++;
    std::vector<int> sorted_sizes(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      sorted_sizes[static_cast<std::size_t>(remap[i])] = sizes[i];
    }
    sizes = std::move(sorted_sizes);
    for (auto& g : node_graph) g = remap[static_cast<std::size_t>(g)];
  }
  const std::size_t n_graphs = sizes.size();

  const auto lab_rows = read_rows(lab_path);
  if (lab_rows.size() != n_graphs) {
    throw StructuralError(lab_path.filename().string() + ": expected " +
                          std::to_string(n_graphs) + " labels, found " +
                          std::to_string(lab_rows.size()));
  }
  std::vector<long> raw_labels;
  for (const auto& r : lab_rows) raw_labels.push_back(parse_int(r.fields.at(0), lab_path, r.number));
  std::vector<long> distinct(raw_labels);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<std::vector<std::pair<int, int>>> edges(n_graphs);
  for (const auto& r : read_rows(a_path)) {
    if (r.fields.size() != 2) {
      throw StructuralError(a_path.filename().string() + ":" + std::to_string(r.number) +
                            ": expected two node ids");
    }
    const long u = parse_int(r.fields[0], a_path, r.number);
    const long v = parse_int(r.fields[1], a_path, r.number);
    if (u < 1 || v < 1 || static_cast<std::size_t>(u) > n_nodes ||
        static_cast<std::size_t>(v) > n_nodes) {
      throw StructuralError(a_path.filename().string() + ":" + std::to_string(r.number) +
                            ": node id outside 1.." + std::to_string(n_nodes));
    }
    const auto ui = static_cast<std::size_t>(u - 1);
    const auto vi = static_cast<std::size_t>(v - 1);
    if (node_graph[ui] != node_graph[vi]) {
      throw StructuralError(a_path.filename().string() + ":" + std::to_string(r.number) +
                            ": edge (" + std::to_string(u) + "," + std::to_string(v) +
                            ") references a node outside its graph");
    }
    edges[static_cast<std::size_t>(node_graph[ui])].emplace_back(node_local[ui], node_local[vi]);
  }

  // Node features: one-hot node labels and/or attributes, else degree features.
  std::optional<std::vector<long>> node_labels;
  std::vector<long> node_label_values;
  if (fs::exists(node_lab_path)) {
    const auto rows = read_rows(node_lab_path);
    if (rows.size() != n_nodes) {
      throw StructuralError(node_lab_path.filename().string() + ": expected " +
                            std::to_string(n_nodes) + " rows");
    }
    node_labels.emplace();
    for (const auto& r : rows) node_labels->push_back(parse_int(r.fields.at(0), node_lab_path, r.number));
    node_label_values = *node_labels;
    std::sort(node_label_values.begin(), node_label_values.end());
    node_label_values.erase(std::unique(node_label_values.begin(), node_label_values.end()),
                            node_label_values.end());
  }
  std::optional<std::vector<std::vector<double>>> attributes;
  std::size_t attr_dim = 0;
  if (fs::exists(attr_path)) {
    const auto rows = read_rows(attr_path);
    if (rows.size() != n_nodes) {
      throw StructuralError(attr_path.filename().string() + ": expected " +
                            std::to_string(n_nodes) + " rows");
    }
    attributes.emplace();
    attr_dim = rows.empty() ? 0 : rows.front().fields.size();
    for (const auto& r : rows) {
      if (r.fields.size() != attr_dim) {
        throw StructuralError(attr_path.filename().string() + ":" + std::to_string(r.number) +
                              ": inconsistent attribute count");
      }
      std::vector<double> values;
      for (const auto& f : r.fields) values.push_back(parse_double(f, attr_path, r.number));
      attributes->push_back(std::move(values));
    }
  }
  const bool derived = !node_labels && !attributes;
  const int feature_dim =
      derived ? 2 : static_cast<int>(node_label_values.size() + attr_dim);

  std::vector<Matrix> features(n_graphs);
  for (std::size_t g = 0; g < n_graphs; ++g) features[g] = Matrix::Zero(sizes[g], feature_dim);
  if (!derived) {
    for (std::size_t v = 0; v < n_nodes; ++v) {
      auto row = features[static_cast<std::size_t>(node_graph[v])].row(node_local[v]);
      Eigen::Index col = 0;
      if (node_labels) {
        const auto pos = std::lower_bound(node_label_values.begin(), node_label_values.end(),
                                          (*node_labels)[v]);
        row(pos - node_label_values.begin()) = 1.0;
        col = static_cast<Eigen::Index>(node_label_values.size());
      }
      if (attributes) {
        for (std::size_t a = 0; a < attr_dim; ++a) {
          row(col + static_cast<Eigen::Index>(a)) = (*attributes)[v][a];
        }
      }
    }
  }

  Corpus corpus;
  corpus.name = name;
  corpus.class_n = static_cast<int>(distinct.size());
  corpus.feature_dim = feature_dim;
  corpus.graphs.reserve(n_graphs);
  for (std::size_t g = 0; g < n_graphs; ++g) {
    const int label = static_cast<int>(
        std::lower_bound(distinct.begin(), distinct.end(), raw_labels[g]) - distinct.begin());
    corpus.graphs.push_back(make_graph(sizes[g], edges[g], std::move(features[g]), label));
  }
  if (derived) assign_degree_features(corpus.graphs);
  corpus.validate();
  return corpus;
}

void write_tudataset(const Corpus& corpus, const fs::path& root) {
  fs::create_directories(root);
  const std::string& n = corpus.name;
  std::ofstream a(root / (n + "_A.txt"));
  std::ofstream ind(root / (n + "_graph_indicator.txt"));
  std::ofstream lab(root / (n + "_graph_labels.txt"));
  std::ofstream attr(root / (n + "_node_attributes.txt"));
  if (!a || !ind || !lab || !attr) {
    throw IngestionError("cannot write TUDataset files under " + root.string());
  }
  long offset = 1;
  for (std::size_t k = 0; k < corpus.graphs.size(); ++k) {
    const auto& g = corpus.graphs[k];
    std::vector<std::pair<int, int>> directed;
    for (auto [i, j] : g.edges) {
      directed.emplace_back(i, j);
      directed.emplace_back(j, i);
    }
    std::sort(directed.begin(), directed.end());
    for (auto [i, j] : directed) a << offset + i << ", " << offset + j << '\n';
    for (int v = 0; v < g.node_count; ++v) {
      ind << k + 1 << '\n';
      for (Eigen::Index c = 0; c < g.features.cols(); ++c) {
        attr << (c ? ", " : "") << format_double(g.features(v, c));
      }
      attr << '\n';
    }
    lab << g.label << '\n';
    offset += g.node_count;
  }
}

void assign_degree_features(std::vector<Graph>& graphs) {
  int max_deg = 0;
  for (const auto& g : graphs) {
    for (int d : g.degrees()) max_deg = std::max(max_deg, d);
  }
  for (auto& g : graphs) {
    const auto deg = g.degrees();
    g.features = Matrix(g.node_count, 2);
    for (int v = 0; v < g.node_count; ++v) {
      g.features(v, 0) = 1.0;
      g.features(v, 1) = max_deg > 0 ? static_cast<double>(deg[static_cast<std::size_t>(v)]) / max_deg : 0.0;
    }
  }
}

Vector clustering_coefficients(const Graph& g) {
  const Matrix& a = g.adjacency;
  const Vector closed = (a * a).cwiseProduct(a).rowwise().sum();
  Vector out = Vector::Zero(g.node_count);
  for (int v = 0; v < g.node_count; ++v) {
    const double d = a.row(v).sum();
    if (d >= 2.0) out(v) = closed(v) / (d * (d - 1.0));
  }
  return out;
}

Corpus generate_synthetic(int graph_count, std::uint64_t seed) {
  if (graph_count < 20 || graph_count % 2 != 0) {
    throw ArgumentError("generate_synthetic: graph_count must be even and >= 20, got " +
                        std::to_string(graph_count));
  }
  constexpr int kNodes = 20;
  constexpr int kCommunity = 6;
  constexpr double kIntra = 0.9;
  constexpr double kNoise = 0.1;
  constexpr double kBackground = 0.15;

  Rng rng = make_rng(seed, {0x5e7});
  std::vector<int> labels(static_cast<std::size_t>(graph_count));
  for (int i = 0; i < graph_count; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
  std::shuffle(labels.begin(), labels.end(), rng);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Graph> graphs;
  graphs.reserve(labels.size());
  for (int label : labels) {
    std::vector<bool> in_community(kNodes, false);
    if (label == 1) {
      std::vector<int> order(kNodes);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (int c = 0; c < kCommunity; ++c) in_community[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])] = true;
    }
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < kNodes; ++i) {
      for (int j = i + 1; j < kNodes; ++j) {
        double p = kBackground;
        if (label == 1) p = (in_community[static_cast<std::size_t>(i)] && in_community[static_cast<std::size_t>(j)]) ? kIntra : kNoise;
        if (unif(rng) < p) edges.emplace_back(i, j);
      }
    }
    graphs.push_back(make_graph(kNodes, edges, Matrix::Zero(kNodes, 2), label));
  }
  assign_degree_features(graphs);
  for (auto& g : graphs) {
    const Vector cc = clustering_coefficients(g);
    g.features.conservativeResize(Eigen::NoChange, 3);
    g.features.col(2) = cc;
  }

  Corpus corpus;
  corpus.name = "SYNTHETIC";
  corpus.graphs = std::move(graphs);
  corpus.class_n = 2;
  corpus.feature_dim = 3;
  corpus.validate();
  return corpus;
}

std::vector<int> FoldSplit::test_indices(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> FoldSplit::train_indices(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(static_cast<int>(i));
  }
  return out;
}

FoldSplit kfold_split(const Corpus& corpus, int k, std::uint64_t seed) {
  if (k < 2) throw SplitError("kfold_split: k must be at least 2");
  std::vector<std::vector<int>> members(static_cast<std::size_t>(corpus.class_n));
  for (std::size_t i = 0; i < corpus.graphs.size(); ++i) {
    members.at(static_cast<std::size_t>(corpus.graphs[i].label)).push_back(static_cast<int>(i));
  }
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (static_cast<int>(members[c].size()) < k) {
      throw SplitError("kfold_split: class " + std::to_string(c) + " has " +
                       std::to_string(members[c].size()) + " graphs, fewer than k=" +
                       std::to_string(k));
    }
  }
  FoldSplit split;
  split.fold_count = k;
  split.assignments.assign(corpus.graphs.size(), -1);
  Rng rng = make_rng(seed, {0xf01d});
  // Round-robin per class, continuing the fold cursor across classes so fold
  // sizes differ by at most one.
  int cursor = 0;
  for (auto& group : members) {
    std::shuffle(group.begin(), group.end(), rng);
    for (int idx : group) {
      split.assignments[static_cast<std::size_t>(idx)] = cursor;
      cursor = (cursor + 1) % k;
    }
  }
  return split;
}

std::uint64_t checksum(const Corpus& corpus, const std::vector<int>& indices) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (int idx : indices) {
    const auto& g = corpus.graphs.at(static_cast<std::size_t>(idx));
    mix(&g.node_count, sizeof g.node_count);
    mix(&g.label, sizeof g.label);
    mix(g.adjacency.data(), sizeof(double) * static_cast<std::size_t>(g.adjacency.size()));
    mix(g.features.data(), sizeof(double) * static_cast<std::size_t>(g.features.size()));
  }
  return h;
}

}  // namespace gib
