// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "moslora/adapter.hpp"

namespace moslora::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  double max_err = 0.0;
  std::string detail;
};

using GradFn = std::function<GradTriple(const Adapter&, const Mat&)>;

/// Analytic gradients vs central finite differences (h = 1e-5) on random
/// instances with d1, d2 <= 16 and r <= 4, across every mixer kind.
/// `fn` exists so a deliberately broken gradient can be fed in by tests;
/// the default is the library implementation.
CheckResult check_gradients(const GradFn& fn = nullptr, int instances = 120);

/// Zero mixer + zero B: 100 SGD steps leave parameters bit-identical and the
/// loss sequence constant.
CheckResult check_stagnation();

/// Identity mixer reproduces the plain down-up product exactly; the butterfly
/// mixer matches the two-subspaces-mixing branch within 1e-12 on 1000 random
/// instances; nonzero rank-1 term counts are r, 2r and r^2.
CheckResult check_unification();

/// One-step SGD:
///  - merged-vs-learnable difference matches its closed form within 1e-12,
///  - a fixed orthogonal mixer makes the merged and unmerged updates equal
///    within 1e-12,
///  - with a learnable mixer and nonzero B the one-step weights differ by
///    more than 1e-8 in at least 99 of 100 seeds (eta = 0.1).
CheckResult check_trajectory();

/// ||forward(x) - x*merge||_inf <= 1e-10 on random instances, both in memory
/// and through the on-disk merge path.
CheckResult check_merge();

/// Parameter accounting: (d1+d2)r fixed, (d1+d2+r)r learnable; the mixer
/// overhead at d1=d2=4096, r=16 is exactly r^2 = 256.
CheckResult check_params();

/// Checkpoint roundtrips are bit-exact for every mixer kind and the file
/// length matches the header+payload arithmetic.
CheckResult check_checkpoint();

/// Identical seeds give byte-identical sweep CSVs and bitwise identical
/// initializations.
CheckResult check_determinism();

/// Runs every check whose name contains `filter` (all when empty).
std::vector<CheckResult> run_checks(std::string_view filter = {});

/// Prints one PASS/FAIL line per result; returns 0 iff all passed.
int report(const std::vector<CheckResult>& results);

}  // namespace moslora::verify
