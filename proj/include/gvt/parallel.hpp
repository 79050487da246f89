// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace gvt {

/// Applies GVT_THREADS (a positive integer) as the OpenMP thread bound.
/// Returns the thread count in effect.
int configure_threads();
int max_threads();

}  // namespace gvt
