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

#include <exception>
#include <mutex>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gib/params.hpp"

namespace gib {

/// Selects the OpenMP kernel or the serial reference loop. Both visit the
/// same indices and write disjoint per-index slots, so their results are
/// bit-identical; reductions happen afterwards in index order.
enum class Execution { serial, parallel };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <class Fn>
void for_each_index(Execution ex, int n, Fn&& fn) {
  if (ex == Execution::serial || n < 2) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

/// Deterministic left-to-right sum of equally sized vectors.
inline Vector sum_in_order(std::span<const Vector> parts, Eigen::Index size) {
  Vector total = Vector::Zero(size);
  for (const auto& p : parts) total += p;
  return total;
}

}  // namespace gib
