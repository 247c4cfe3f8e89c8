// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>

#include "moslora/adapter.hpp"

namespace moslora {

// Adapter checkpoint, little-endian throughout:
//   magic   "MSLA"                      4 bytes
//   version u32 = 1                     4 bytes
//   d1, d2, r  u32 each                12 bytes
//   mixer_tag  u8 (MixerTag ordinal)    1 byte
//   init_tag   u8 (InitKind ordinal; 255 for fixed mixers)
//   alpha   f64                         8 bytes
//   payload A then W then B, row-major f64
// The construction seed is not model state and is not persisted.
inline constexpr std::size_t kCheckpointHeaderBytes = 30;
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes the checkpoint atomically (temp file + rename).
void save_checkpoint(const Adapter& adapter, const std::filesystem::path& path);

/// Validates magic, version and length arithmetic before reading the payload.
/// Throws FormatError with a distinct message for each violation.
Adapter load_checkpoint(const std::filesystem::path& path);

// Raw matrix file: rows u32 LE, cols u32 LE, payload row-major f64 LE.
void save_matrix_raw(const Mat& m, const std::filesystem::path& path);
Mat load_matrix_raw(const std::filesystem::path& path);

/// Reads a raw base weight and a checkpoint, writes base + s*A*W*B in the
/// raw format. Throws ShapeError when the base shape does not match.
void cmd_merge(const std::filesystem::path& base_path,
               const std::filesystem::path& adapter_path,
               const std::filesystem::path& out_path);

}  // namespace moslora
