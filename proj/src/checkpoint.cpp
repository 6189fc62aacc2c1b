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


#include "gib/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace gib {

namespace {

constexpr char kMagic[8] = {'G', 'I', 'B', 'A', 'R', 'C', 'H', '1'};

static_assert(std::endian::native == std::endian::little, "archive I/O assumes little-endian");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ArchiveError("truncated archive: " + path.string());
  }
  return v;
}

void add_params(Archive& out, const std::string& group, const ParamSet& params) {
  for (std::size_t i = 0; i < params.blocks().size(); ++i) {
    out[group + "/" + params.blocks()[i].name] = params.view(BlockId{i});
  }
}

void load_params(const Archive& archive, const std::string& group, ParamSet& params) {
  for (std::size_t i = 0; i < params.blocks().size(); ++i) {
    const auto& b = params.blocks()[i];
    const auto key = group + "/" + b.name;
    auto it = archive.find(key);
    if (it == archive.end()) throw ArchiveError("archive is missing '" + key + "'");
    if (it->second.rows() != b.rows || it->second.cols() != b.cols) {
      throw ArchiveError("archive entry '" + key + "' has shape " + std::to_string(it->second.rows()) +
                         "x" + std::to_string(it->second.cols()) + ", expected " +
                         std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
    params.view(BlockId{i}) = it->second;
  }
}

const Matrix& require(const Archive& archive, const std::string& key) {
  auto it = archive.find(key);
  if (it == archive.end()) throw ArchiveError("archive is missing '" + key + "'");
  return it->second;
}

}  // namespace

void write_archive(const Archive& archive, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArchiveError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(archive.size()));
  for (const auto& [name, m] : archive) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * static_cast<Eigen::Index>(sizeof(double))));
  }
  if (!out) throw ArchiveError("write failed: " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ArchiveError("not a parameter archive: " + path.string());
  }
  Archive archive;
  const auto count = get<std::uint32_t>(in, path);
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto len = get<std::uint32_t>(in, path);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw ArchiveError("truncated archive: " + path.string());
    const auto rows = get<std::uint64_t>(in, path);
    const auto cols = get<std::uint64_t>(in, path);
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw ArchiveError("implausible shape in " + path.string());
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (!in.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(m.size() * static_cast<Eigen::Index>(sizeof(double))))) {
      throw ArchiveError("truncated archive: " + path.string());
    }
    if (!archive.emplace(std::move(name), std::move(m)).second) {
      throw ArchiveError("duplicate entry in " + path.string());
    }
  }
  return archive;
}

Archive to_archive(const ModelParams& params, const std::optional<Codebook>& codebook) {
  Archive out;
  add_params(out, "phi", params.phi);
  add_params(out, "theta", params.theta);
  add_params(out, "kappa", params.kappa);
  if (codebook) {
    out["codebook/entries"] = codebook->entries();
    out["codebook/counts"] = codebook->counts();
    out["codebook/sums"] = codebook->sums();
    Matrix meta(1, 4);
    meta << codebook->size(), codebook->dim(), codebook->decay(), codebook->smoothing();
    out["codebook/meta"] = meta;
  }
  return out;
}

void restore_from_archive(GibSystem& system, const Archive& archive) {
  ModelParams p = system.snapshot();
  load_params(archive, "phi", p.phi);
  load_params(archive, "theta", p.theta);
  load_params(archive, "kappa", p.kappa);
  if (auto& cb = system.codebook()) {
    const Matrix& entries = require(archive, "codebook/entries");
    const Matrix& counts = require(archive, "codebook/counts");
    const Matrix& sums = require(archive, "codebook/sums");
    if (entries.rows() != cb->size() || entries.cols() != cb->dim()) {
      throw ArchiveError("codebook shape does not match the configured system");
    }
    if (counts.cols() != 1 || counts.rows() != cb->size()) {
      throw ArchiveError("codebook/counts must be a column of " + std::to_string(cb->size()) + " values");
    }
    if (sums.rows() != entries.rows() || sums.cols() != entries.cols()) {
      throw ArchiveError("codebook/sums shape does not match codebook/entries");
    }
    system.restore(p);
    cb->set_state(entries, counts.col(0), sums);
    return;
  }
  system.restore(p);
}

void save_checkpoint(const GibSystem& system, const std::filesystem::path& path) {
  write_archive(to_archive(system.snapshot(), system.codebook()), path);
}

void load_checkpoint(GibSystem& system, const std::filesystem::path& path) {
  restore_from_archive(system, read_archive(path));
}

}  // namespace gib
