// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#include "moslora/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "moslora/errors.hpp"

namespace moslora {
namespace {

constexpr char kMagic[4] = {'M', 'S', 'L', 'A'};
constexpr std::uint8_t kNoInitTag = 255;

// Byte-level little-endian writers; independent of host endianness.
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void put_matrix(std::string& out, const Mat& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
  }
}

Mat get_matrix(const unsigned char*& p, Index rows, Index cols) {
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = get_f64(p);
      p += 8;
    }
  }
  return m;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() +
                  "': " + ec.message());
  }
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace

void save_checkpoint(const Adapter& adapter, const std::filesystem::path& path) {
  const auto& cfg = adapter.config;
  std::string bytes;
  bytes.reserve(kCheckpointHeaderBytes +
                8 * static_cast<std::size_t>(cfg.d1 * cfg.r + cfg.r * cfg.r +
                                             cfg.r * cfg.d2));
  bytes.append(kMagic, 4);
  put_u32(bytes, kCheckpointVersion);
  put_u32(bytes, static_cast<std::uint32_t>(cfg.d1));
  put_u32(bytes, static_cast<std::uint32_t>(cfg.d2));
  put_u32(bytes, static_cast<std::uint32_t>(cfg.r));
  bytes.push_back(static_cast<char>(cfg.mixer.tag));
  bytes.push_back(static_cast<char>(cfg.mixer.tag == MixerTag::Learnable
                                        ? static_cast<std::uint8_t>(cfg.mixer.init)
                                        : kNoInitTag));
  put_f64(bytes, cfg.alpha);
  put_matrix(bytes, adapter.A);
  put_matrix(bytes, adapter.W);
  put_matrix(bytes, adapter.B);
  write_file_atomic(path, bytes);
}

Adapter load_checkpoint(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  if (bytes.size() < kCheckpointHeaderBytes) {
    throw FormatError("checkpoint '" + path.string() + "': truncated header (" +
                      std::to_string(bytes.size()) + " bytes)");
  }
  const unsigned char* p = bytes.data();
  if (std::memcmp(p, kMagic, 4) != 0) {
    throw FormatError("checkpoint '" + path.string() + "': bad magic");
  }
  p += 4;
  const std::uint32_t version = get_u32(p);
  p += 4;
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint '" + path.string() + "': unsupported version " +
                      std::to_string(version));
  }
  const std::uint32_t d1 = get_u32(p); p += 4;
  const std::uint32_t d2 = get_u32(p); p += 4;
  const std::uint32_t r = get_u32(p); p += 4;
  const std::uint8_t mixer_tag = *p++;
  const std::uint8_t init_tag = *p++;
  const double alpha = get_f64(p);
  p += 8;

  if (mixer_tag > static_cast<std::uint8_t>(MixerTag::Learnable)) {
    throw FormatError("checkpoint '" + path.string() + "': unknown mixer tag " +
                      std::to_string(mixer_tag));
  }
  const std::size_t expected_payload =
      8 * (static_cast<std::size_t>(d1) * r + static_cast<std::size_t>(r) * r +
           static_cast<std::size_t>(r) * d2);
  if (bytes.size() != kCheckpointHeaderBytes + expected_payload) {
    throw FormatError("checkpoint '" + path.string() + "': length mismatch (" +
                      std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(kCheckpointHeaderBytes + expected_payload) +
                      ")");
  }

  Adapter a;
  a.config.d1 = d1;
  a.config.d2 = d2;
  a.config.r = r;
  a.config.mixer.tag = static_cast<MixerTag>(mixer_tag);
  if (a.config.mixer.tag == MixerTag::Learnable) {
    if (init_tag > static_cast<std::uint8_t>(InitKind::KaimingUniform)) {
      throw FormatError("checkpoint '" + path.string() + "': unknown init tag " +
                        std::to_string(init_tag));
    }
    a.config.mixer.init = static_cast<InitKind>(init_tag);
  }
  a.config.alpha = alpha;
  a.config.seed = 0;  // not persisted
  a.config.validate();
  a.A = get_matrix(p, d1, r);
  a.W = get_matrix(p, r, r);
  a.B = get_matrix(p, r, d2);
  a.w_trainable = a.config.mixer.trainable();
  a.zero_mixer_warning = a.w_trainable && a.config.mixer.init == InitKind::Zeros;
  return a;
}

void save_matrix_raw(const Mat& m, const std::filesystem::path& path) {
  std::string bytes;
  bytes.reserve(8 + 8 * static_cast<std::size_t>(m.size()));
  put_u32(bytes, static_cast<std::uint32_t>(m.rows()));
  put_u32(bytes, static_cast<std::uint32_t>(m.cols()));
  put_matrix(bytes, m);
  write_file_atomic(path, bytes);
}

Mat load_matrix_raw(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  if (bytes.size() < 8) {
    throw FormatError("matrix file '" + path.string() + "': truncated header");
  }
  const unsigned char* p = bytes.data();
  const std::uint32_t rows = get_u32(p); p += 4;
  const std::uint32_t cols = get_u32(p); p += 4;
  const std::size_t expected = 8 + 8 * static_cast<std::size_t>(rows) * cols;
  if (rows == 0 || cols == 0 || bytes.size() != expected) {
    throw FormatError("matrix file '" + path.string() + "': length mismatch (" +
                      std::to_string(bytes.size()) + " bytes for " +
                      std::to_string(rows) + "x" + std::to_string(cols) + ")");
  }
  return get_matrix(p, rows, cols);
}

void cmd_merge(const std::filesystem::path& base_path,
               const std::filesystem::path& adapter_path,
               const std::filesystem::path& out_path) {
  const Mat base = load_matrix_raw(base_path);
  const Adapter adapter = load_checkpoint(adapter_path);
  save_matrix_raw(merge(adapter, base), out_path);
}

}  // namespace moslora
