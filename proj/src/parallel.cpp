// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace gvt {

int configure_threads() {
  if (const char* env = std::getenv("GVT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) omp_set_num_threads(n);
    } catch (const std::exception&) {
      // Ignore malformed values and keep the OpenMP default.
    }
  }
  return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace gvt
