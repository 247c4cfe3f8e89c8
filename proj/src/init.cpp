// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#include "moslora/init.hpp"

#include <Eigen/QR>
#include <cmath>

#include "moslora/errors.hpp"

namespace moslora {

std::string_view init_name(InitKind kind) {
  switch (kind) {
    case InitKind::Zeros: return "zeros";
    case InitKind::Identity: return "identity";
    case InitKind::Normal: return "normal";
    case InitKind::Orthogonal: return "orthogonal";
    case InitKind::KaimingUniform: return "kaiming";
  }
  return "?";
}

InitKind parse_init(std::string_view name) {
  if (name == "zeros") return InitKind::Zeros;
  if (name == "identity") return InitKind::Identity;
  if (name == "normal") return InitKind::Normal;
  if (name == "orthogonal") return InitKind::Orthogonal;
  if (name == "kaiming") return InitKind::KaimingUniform;
  throw ConfigError("unknown init kind: '" + std::string(name) +
                    "' (expected zeros|identity|normal|orthogonal|kaiming)");
}

namespace {

Mat fill_normal(Index rows, Index cols, double std_dev, Rng& rng) {
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = std_dev * rng.normal();
    }
  }
  return m;
}

Mat haar_orthogonal(Index n, Rng& rng) {
  Mat g = fill_normal(n, n, 1.0, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fixing the sign of R's diagonal makes the factorization unique and the
  // sample Haar-distributed.
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

Mat init_matrix(InitKind kind, Index rows, Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) {
    throw ShapeError("init_matrix: dimensions must be positive, got " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  switch (kind) {
    case InitKind::Zeros:
      return Mat::Zero(rows, cols);
    case InitKind::Identity:
      if (rows != cols) {
        throw ShapeError("init_matrix: Identity requires a square shape, got " +
                         std::to_string(rows) + "x" + std::to_string(cols));
      }
      return Mat::Identity(rows, cols);
    case InitKind::Normal:
      return fill_normal(rows, cols, 0.02, rng);
    case InitKind::Orthogonal:
      if (rows != cols) {
        throw ShapeError(
            "init_matrix: Orthogonal requires a square shape, got " +
            std::to_string(rows) + "x" + std::to_string(cols));
      }
      return haar_orthogonal(rows, rng);
    case InitKind::KaimingUniform: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
      Mat m(rows, cols);
      for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
          m(i, j) = rng.uniform(-bound, bound);
        }
      }
      return m;
    }
  }
  throw ConfigError("init_matrix: unknown InitKind");
}

}  // namespace moslora
