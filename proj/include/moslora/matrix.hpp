// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <string>

namespace moslora {

/// Dense row-major matrix, templated on the scalar.
template <typename Scalar>
using DenseMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Working type of the whole library: 64-bit reals.
using Mat = DenseMatrix<double>;
using Index = Eigen::Index;

/// "3x4" — for error messages.
std::string shape_str(const Eigen::Ref<const Mat>& m);

/// Matrix product with a pinned accumulation order: each output entry sums
/// its terms in increasing k, rows first. The per-entry operation sequence is
/// therefore identical across runs and optimization levels, which the
/// exact-equality contracts elsewhere in the library rely on.
///
/// Throws ShapeError when a.cols() != b.rows().
Mat matmul(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b);

Mat transpose(const Eigen::Ref<const Mat>& a);

/// Infinity-norm of a - b. Throws ShapeError on shape mismatch.
double max_abs_diff(const Eigen::Ref<const Mat>& a,
                    const Eigen::Ref<const Mat>& b);

bool all_finite(const Eigen::Ref<const Mat>& m);

/// Bitwise equality of two matrices (shape and payload).
bool bit_equal(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b);

}  // namespace moslora
