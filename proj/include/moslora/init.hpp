// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

#include "moslora/matrix.hpp"
#include "moslora/rng.hpp"

namespace moslora {

/// The five weight-initialization kinds. Ordinals are part of the
/// checkpoint format; do not reorder.
enum class InitKind : std::uint8_t {
  Zeros = 0,
  Identity = 1,
  Normal = 2,
  Orthogonal = 3,
  KaimingUniform = 4,
};

std::string_view init_name(InitKind kind);

/// Parses the names emitted by init_name ("zeros", "kaiming", ...).
/// Throws ConfigError on unknown names.
InitKind parse_init(std::string_view name);

/// Draws a rows x cols matrix:
///  - Zeros / Identity: constants (Identity requires a square shape).
///  - Normal: i.i.d. N(0, 0.02^2).
///  - KaimingUniform: i.i.d. uniform on [-1/sqrt(rows), +1/sqrt(rows)];
///    rows are the fan-in under post-multiplication (x * M).
///  - Orthogonal: square Haar sample — i.i.d. standard normals, Householder
///    QR, then column j of Q flipped to the sign of R(j,j).
///
/// Entries are filled row-major from `rng`, so a given (seed, stream) is
/// bitwise reproducible. Throws ShapeError on a non-square Identity or
/// Orthogonal request.
Mat init_matrix(InitKind kind, Index rows, Index cols, Rng& rng);

}  // namespace moslora
