// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "moslora/errors.hpp"
#include "moslora/init.hpp"
#include "moslora/rng.hpp"

using namespace moslora;

TEST_CASE("identical seed and stream label reproduce the draw sequence") {
  Rng a = Rng(123).stream("A");
  Rng b = Rng(123).stream("A");
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different stream labels decorrelate") {
  Rng root(123);
  Rng a = root.stream("A");
  Rng b = root.stream("B");
  int same = 0;
  for (int i = 0; i < 64; ++i) same += (a.next_u64() == b.next_u64());
  CHECK(same == 0);
}

TEST_CASE("uniform01 stays in [0,1)") {
  Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("zeros and identity init") {
  Rng rng(1);
  Mat z = init_matrix(InitKind::Zeros, 2, 3, rng);
  CHECK(z.rows() == 2);
  CHECK(z.cols() == 3);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);

  Mat id = init_matrix(InitKind::Identity, 3, 3, rng);
  CHECK(bit_equal(id, Mat(Mat::Identity(3, 3))));

  CHECK_THROWS_AS(init_matrix(InitKind::Identity, 2, 3, rng), ShapeError);
  CHECK_THROWS_AS(init_matrix(InitKind::Orthogonal, 2, 3, rng), ShapeError);
}

TEST_CASE("orthogonal init is orthogonal to 1e-10 for many seeds") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    const Index n = 2 + static_cast<Index>(seed % 7);
    Mat q = init_matrix(InitKind::Orthogonal, n, n, rng);
    Mat id = Mat::Identity(n, n);
    CHECK(max_abs_diff(matmul(q, transpose(q)), id) <= 1e-10);
    CHECK(max_abs_diff(matmul(transpose(q), q), id) <= 1e-10);
  }
}

TEST_CASE("kaiming uniform bound is 1/sqrt(fan_in)") {
  Rng rng(77);
  Mat m = init_matrix(InitKind::KaimingUniform, 100, 100, rng);
  CHECK(m.cwiseAbs().maxCoeff() <= 0.1);
  // Not degenerate: draws spread over the interval.
  CHECK(m.cwiseAbs().maxCoeff() > 0.05);
}

TEST_CASE("normal init has the right scale") {
  Rng rng(31);
  Mat m = init_matrix(InitKind::Normal, 100, 100, rng);
  const double mean = m.mean();
  const double var = (m.array() - mean).square().mean();
  CHECK(std::abs(mean) < 1e-3);
  CHECK(std::sqrt(var) == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("init_matrix is bitwise reproducible per seed") {
  for (InitKind kind : {InitKind::Normal, InitKind::Orthogonal,
                        InitKind::KaimingUniform}) {
    Rng r1 = Rng(2024).stream("w");
    Rng r2 = Rng(2024).stream("w");
    Mat a = init_matrix(kind, 6, 6, r1);
    Mat b = init_matrix(kind, 6, 6, r2);
    CHECK(bit_equal(a, b));
  }
}
