// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#include "moslora/matrix.hpp"

#include <bit>
#include <cmath>
#include <cstdint>

#include "moslora/errors.hpp"

namespace moslora {

std::string shape_str(const Eigen::Ref<const Mat>& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Mat matmul(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a) + " * " +
                     shape_str(b));
  }
  Mat out = Mat::Zero(a.rows(), b.cols());
  // i-k-j loop: every out(i,j) accumulates terms in increasing k.
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (Index j = 0; j < b.cols(); ++j) {
        out(i, j) += aik * b(k, j);
      }
    }
  }
  return out;
}

Mat transpose(const Eigen::Ref<const Mat>& a) {
  return a.transpose();
}

double max_abs_diff(const Eigen::Ref<const Mat>& a,
                    const Eigen::Ref<const Mat>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("max_abs_diff: shape mismatch " + shape_str(a) + " vs " +
                     shape_str(b));
  }
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

bool all_finite(const Eigen::Ref<const Mat>& m) {
  return m.allFinite();
}

bool bit_equal(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (std::bit_cast<std::uint64_t>(a(i, j)) !=
          std::bit_cast<std::uint64_t>(b(i, j))) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace moslora
