// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#include "moslora/checkpoint.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include "moslora/errors.hpp"
#include "moslora/rng.hpp"

using namespace moslora;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const char* stem) {
  return fs::temp_directory_path() / (std::string("moslora_ckpt_") + stem);
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void dump(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Adapter sample_adapter(MixerKind mixer, std::uint64_t seed = 41) {
  AdapterConfig cfg;
  cfg.d1 = 5;
  cfg.d2 = 7;
  cfg.r = 2;
  cfg.mixer = mixer;
  cfg.alpha = 12.5;
  cfg.seed = seed;
  Adapter a = new_adapter(cfg);
  Rng rng(seed + 1);
  for (Index i = 0; i < a.B.rows(); ++i)
    for (Index j = 0; j < a.B.cols(); ++j) a.B(i, j) = rng.normal();
  return a;
}

}  // namespace

TEST_CASE("checkpoint roundtrip is bit-exact for every mixer kind") {
  const fs::path path = temp_path("roundtrip");
  const fs::path path2 = temp_path("roundtrip2");
  for (MixerKind mixer :
       {MixerKind::fixed_identity(), MixerKind::fixed_butterfly(),
        MixerKind::fixed_orthogonal(), MixerKind::learnable(InitKind::Zeros),
        MixerKind::learnable(InitKind::Orthogonal),
        MixerKind::learnable(InitKind::KaimingUniform)}) {
    Adapter a = sample_adapter(mixer);
    save_checkpoint(a, path);
    Adapter b = load_checkpoint(path);
    CHECK(bit_equal(a.A, b.A));
    CHECK(bit_equal(a.W, b.W));
    CHECK(bit_equal(a.B, b.B));
    CHECK(b.config.d1 == a.config.d1);
    CHECK(b.config.d2 == a.config.d2);
    CHECK(b.config.r == a.config.r);
    CHECK(b.config.mixer == a.config.mixer);
    CHECK(b.config.alpha == a.config.alpha);
    CHECK(b.w_trainable == a.w_trainable);

    // save(load(f)) reproduces the file bytes exactly.
    save_checkpoint(b, path2);
    CHECK(slurp(path) == slurp(path2));
  }
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("checkpoint file size follows the layout arithmetic") {
  AdapterConfig cfg;
  cfg.d1 = 2;
  cfg.d2 = 2;
  cfg.r = 2;
  cfg.mixer = MixerKind::fixed_identity();
  cfg.seed = 1;
  Adapter a = new_adapter(cfg);
  const fs::path path = temp_path("size");
  save_checkpoint(a, path);
  // 30-byte header + 8 * (4 + 4 + 4) payload bytes.
  CHECK(fs::file_size(path) == kCheckpointHeaderBytes + 96);
  fs::remove(path);
}

TEST_CASE("load_checkpoint rejects malformed files distinctly") {
  const fs::path path = temp_path("malformed");
  Adapter a = sample_adapter(MixerKind::learnable(InitKind::KaimingUniform));
  save_checkpoint(a, path);
  const std::vector<char> good = slurp(path);

  SUBCASE("truncated") {
    dump(path, std::vector<char>(good.begin(), good.begin() + 10));
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("truncated"),
                         FormatError);
  }
  SUBCASE("bad magic") {
    auto bytes = good;
    bytes[0] = 'X';
    dump(path, bytes);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("bad magic"),
                         FormatError);
  }
  SUBCASE("unsupported version") {
    auto bytes = good;
    bytes[4] = 2;
    dump(path, bytes);
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("unsupported version"), FormatError);
  }
  SUBCASE("length mismatch") {
    auto bytes = good;
    bytes.push_back(0);
    dump(path, bytes);
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("length mismatch"), FormatError);
  }
  SUBCASE("missing file") {
    fs::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  fs::remove(path);
}

TEST_CASE("raw matrix files roundtrip") {
  Rng rng(55);
  Mat m(3, 4);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j) m(i, j) = rng.normal();
  const fs::path path = temp_path("raw");
  save_matrix_raw(m, path);
  CHECK(fs::file_size(path) == 8 + 8 * 12);
  CHECK(bit_equal(load_matrix_raw(path), m));

  auto bytes = slurp(path);
  bytes.pop_back();
  dump(path, bytes);
  CHECK_THROWS_WITH_AS(load_matrix_raw(path), doctest::Contains("length mismatch"),
                       FormatError);
  fs::remove(path);
}

TEST_CASE("cmd_merge with a zero branch copies the base payload") {
  const fs::path base = temp_path("base");
  const fs::path ckpt = temp_path("adapter");
  const fs::path out = temp_path("merged");

  AdapterConfig cfg;
  cfg.d1 = 5;
  cfg.d2 = 7;
  cfg.r = 2;
  cfg.mixer = MixerKind::learnable(InitKind::KaimingUniform);
  cfg.seed = 4;
  Adapter fresh = new_adapter(cfg);  // B = 0

  Rng rng(66);
  Mat w0(5, 7);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 7; ++j) w0(i, j) = rng.normal();

  save_matrix_raw(w0, base);
  save_checkpoint(fresh, ckpt);
  cmd_merge(base, ckpt, out);
  CHECK(slurp(out) == slurp(base));

  fs::remove(base);
  fs::remove(ckpt);
  fs::remove(out);
}

TEST_CASE("cmd_merge output drives the same forward pass") {
  const fs::path base = temp_path("base2");
  const fs::path ckpt = temp_path("adapter2");
  const fs::path out = temp_path("merged2");

  Adapter a = sample_adapter(MixerKind::fixed_butterfly());
  Rng rng(67);
  Mat w0(5, 7);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 7; ++j) w0(i, j) = rng.normal();
  Mat x(3, 5);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 5; ++j) x(i, j) = rng.normal();

  save_matrix_raw(w0, base);
  save_checkpoint(a, ckpt);
  cmd_merge(base, ckpt, out);
  Mat merged = load_matrix_raw(out);
  CHECK(max_abs_diff(matmul(x, merged), forward(a, w0, x)) <= 1e-10);
  // Identical arithmetic path as the in-memory merge: zero ULP apart.
  CHECK(bit_equal(merged, merge(a, w0)));

  fs::remove(base);
  fs::remove(ckpt);
  fs::remove(out);
}

TEST_CASE("cmd_merge rejects a base with the wrong shape") {
  const fs::path base = temp_path("base3");
  const fs::path ckpt = temp_path("adapter3");
  const fs::path out = temp_path("merged3");

  Adapter a = sample_adapter(MixerKind::fixed_identity());
  save_matrix_raw(Mat::Zero(4, 7), base);  // d1 mismatch: adapter wants 5x7
  save_checkpoint(a, ckpt);
  CHECK_THROWS_AS(cmd_merge(base, ckpt, out), ShapeError);

  fs::remove(base);
  fs::remove(ckpt);
}
