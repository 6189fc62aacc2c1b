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

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gib/params.hpp"

namespace gib {

/// Raised when a TUDataset directory cannot be read (missing file, bad number).
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when file contents are inconsistent (edge crossing graphs, etc.).
/// The message carries the file name and 1-based line number.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Graph {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;  // undirected, i < j, sorted, unique
  Matrix adjacency;                        // m x m, symmetric 0/1, zero diagonal
  Matrix features;                         // m x d
  int label = 0;

  std::vector<int> degrees() const;
};

/// Builds a Graph from an edge list, dropping self loops and duplicates.
Graph make_graph(int node_count, const std::vector<std::pair<int, int>>& edges,
                 Matrix features, int label);

struct Corpus {
  std::string name;
  std::vector<Graph> graphs;
  int class_n = 0;
  int feature_dim = 0;

  std::vector<int> class_counts() const;
  /// Throws StructuralError if any documented invariant is violated.
  void validate() const;
};

/// Reads `<name>_A.txt`, `<name>_graph_indicator.txt`, `<name>_graph_labels.txt`
/// and the optional node label / attribute files from `root`.
Corpus parse_tudataset(const std::filesystem::path& root, const std::string& name);

/// Writes `corpus` in TUDataset layout. Features are written as node attributes
/// so that parse_tudataset reproduces the corpus exactly.
void write_tudataset(const Corpus& corpus, const std::filesystem::path& root);

/// [1, deg(v)/max_deg] node features, max_deg taken over the whole corpus.
void assign_degree_features(std::vector<Graph>& graphs);

/// Local clustering coefficient per node (0 for degree < 2).
Vector clustering_coefficients(const Graph& g);

/// Two balanced classes of 20-node graphs; class 1 carries a planted dense
/// 6-node community. Node features are the degree pair plus the clustering
/// coefficient. graph_count must be even and at least 20.
Corpus generate_synthetic(int graph_count, std::uint64_t seed);

struct FoldSplit {
  int fold_count = 0;
  std::vector<int> assignments;  // fold index per graph

  std::vector<int> test_indices(int fold) const;
  std::vector<int> train_indices(int fold) const;
};

/// Stratified k-fold assignment, deterministic under `seed`.
FoldSplit kfold_split(const Corpus& corpus, int k, std::uint64_t seed);

/// Order-sensitive FNV-1a digest of the graphs at `indices`; used to assert
/// that training never touches held-out data.
std::uint64_t checksum(const Corpus& corpus, const std::vector<int>& indices);

}  // namespace gib
