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
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "gib/trainer.hpp"

namespace gib {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Name → shape-tagged float64 array, iterated in name order.
using Archive = std::map<std::string, Matrix>;

/// Binary layout (little-endian):
///   "GIBARCH1"                       8-byte magic
///   u32 entry count
///   per entry, in name order:
///     u32 name length, name bytes (UTF-8)
///     u64 rows, u64 cols
///     rows*cols f64 values, column-major
void write_archive(const Archive& archive, const std::filesystem::path& path);
Archive read_archive(const std::filesystem::path& path);

/// Entries "phi/<block>", "theta/<block>", "kappa/<block>" and, when a
/// codebook is present, "codebook/entries|counts|sums|meta"
/// (meta = [K, d, decay, smoothing]).
Archive to_archive(const ModelParams& params, const std::optional<Codebook>& codebook);

/// Loads parameters (and codebook if the system has one) into `system`.
/// Every expected block must be present with a matching shape.
void restore_from_archive(GibSystem& system, const Archive& archive);

void save_checkpoint(const GibSystem& system, const std::filesystem::path& path);
void load_checkpoint(GibSystem& system, const std::filesystem::path& path);

}  // namespace gib
