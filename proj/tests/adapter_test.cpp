// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#include "moslora/adapter.hpp"

#include <doctest.h>

#include "moslora/errors.hpp"
#include "moslora/rng.hpp"
#include "moslora/training.hpp"

using namespace moslora;

namespace {

Mat from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m(static_cast<Index>(rows.size()),
        static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Mat random_mat(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

AdapterConfig small_config(MixerKind mixer, Index d1 = 6, Index d2 = 5,
                           Index r = 2, double alpha = 0.0,
                           std::uint64_t seed = 3) {
  AdapterConfig cfg;
  cfg.d1 = d1;
  cfg.d2 = d2;
  cfg.r = r;
  cfg.mixer = mixer;
  cfg.alpha = alpha;
  cfg.seed = seed;
  return cfg;
}

/// Adapter with explicit factor values; config shapes derived from them.
Adapter handmade(Mat A, Mat W, Mat B, double alpha = 0.0) {
  Adapter a;
  a.config.d1 = A.rows();
  a.config.r = A.cols();
  a.config.d2 = B.cols();
  a.config.mixer = MixerKind::learnable(InitKind::KaimingUniform);
  a.config.alpha = alpha;
  a.A = std::move(A);
  a.W = std::move(W);
  a.B = std::move(B);
  a.w_trainable = true;
  return a;
}

}  // namespace

TEST_CASE("new_adapter starts with a zero branch") {
  for (MixerKind mixer :
       {MixerKind::fixed_identity(), MixerKind::fixed_butterfly(),
        MixerKind::fixed_orthogonal(),
        MixerKind::learnable(InitKind::KaimingUniform)}) {
    Adapter a = new_adapter(small_config(mixer, 8, 7, 4, 16.0));
    CHECK(delta_weight(a).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.w_trainable == (mixer.tag == MixerTag::Learnable));
  }
}

TEST_CASE("fixed identity mixer is the identity matrix") {
  Adapter a = new_adapter(small_config(MixerKind::fixed_identity(), 8, 8, 4));
  CHECK(bit_equal(a.W, Mat(Mat::Identity(4, 4))));
}

TEST_CASE("butterfly mixer rejects odd rank") {
  CHECK_THROWS_AS(new_adapter(small_config(MixerKind::fixed_butterfly(), 8, 8, 3)),
                  ConfigError);
}

TEST_CASE("zero-initialized learnable mixer carries a warning flag") {
  Adapter a = new_adapter(small_config(MixerKind::learnable(InitKind::Zeros)));
  CHECK(a.zero_mixer_warning);
  CHECK(a.w_trainable);
  Adapter b = new_adapter(small_config(MixerKind::learnable(InitKind::Identity)));
  CHECK_FALSE(b.zero_mixer_warning);
}

TEST_CASE("config validation") {
  AdapterConfig cfg = small_config(MixerKind::fixed_identity());
  cfg.r = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(param_count(cfg), ConfigError);
  cfg.r = 2;
  cfg.alpha = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("scaling is alpha over r with zero meaning one") {
  AdapterConfig cfg = small_config(MixerKind::fixed_identity(), 8, 8, 16, 32.0);
  CHECK(scaling(cfg) == 2.0);
  cfg.alpha = 0.0;
  CHECK(scaling(cfg) == 1.0);
  cfg.alpha = 16.0;
  CHECK(scaling(cfg) == 1.0);
}

TEST_CASE("delta_weight hand cases") {
  Mat id2 = Mat::Identity(2, 2);
  Mat b = from_rows({{1, 2}, {3, 4}});

  Adapter identity_factors = handmade(id2, id2, b);
  CHECK(max_abs_diff(delta_weight(identity_factors), b) == 0.0);

  Adapter ones_mixer = handmade(id2, from_rows({{1, 1}, {1, 1}}), b);
  CHECK(max_abs_diff(delta_weight(ones_mixer), from_rows({{4, 6}, {4, 6}})) == 0.0);
}

TEST_CASE("fresh adapter forward equals the frozen path exactly") {
  Rng rng(8);
  Adapter a = new_adapter(small_config(MixerKind::fixed_identity(), 6, 5, 2, 8.0));
  Mat w0 = random_mat(rng, 6, 5);
  Mat x = random_mat(rng, 3, 6);
  CHECK(bit_equal(forward(a, w0, x), matmul(x, w0)));
}

TEST_CASE("identity mixer matches vanilla LoRA bit for bit") {
  Rng rng(9);
  for (double alpha : {0.0, 8.0}) {
    Adapter a = new_adapter(small_config(MixerKind::fixed_identity(), 7, 6, 4, alpha));
    a.B = random_mat(rng, 4, 6);
    Mat w0 = random_mat(rng, 7, 6);
    Mat x = random_mat(rng, 3, 7);

    // Vanilla branch computed in the same operation order, without the mixer.
    Mat vanilla_branch = matmul(matmul(x, a.A), a.B);
    vanilla_branch *= scaling(a.config);
    Mat vanilla = matmul(x, w0) + vanilla_branch;
    CHECK(bit_equal(forward(a, w0, x), vanilla));

    Mat vanilla_delta = matmul(a.A, a.B);
    vanilla_delta *= scaling(a.config);
    CHECK(bit_equal(delta_weight(a), vanilla_delta));
  }
}

TEST_CASE("forward agrees with merge within 1e-10") {
  Rng rng(10);
  for (int t = 0; t < 30; ++t) {
    const Index d1 = 2 + static_cast<Index>(rng.next_u64() % 10);
    const Index d2 = 2 + static_cast<Index>(rng.next_u64() % 10);
    const Index r = 2 * (1 + static_cast<Index>(rng.next_u64() % 2));
    MixerKind mixer = (t % 2 == 0) ? MixerKind::fixed_butterfly()
                                   : MixerKind::learnable(InitKind::Orthogonal);
    Adapter a = new_adapter(small_config(mixer, d1, d2, r, 2.0 * r, rng.next_u64()));
    a.B = random_mat(rng, r, d2);
    Mat w0 = random_mat(rng, d1, d2);
    Mat x = random_mat(rng, 4, d1);
    CHECK(max_abs_diff(forward(a, w0, x), matmul(x, merge(a, w0))) <= 1e-10);
  }
}

TEST_CASE("forward and merge validate shapes") {
  Adapter a = new_adapter(small_config(MixerKind::fixed_identity()));
  Mat w0 = Mat::Zero(6, 5);
  CHECK_THROWS_AS(forward(a, Mat::Zero(5, 5), Mat::Zero(1, 6)), ShapeError);
  CHECK_THROWS_AS(forward(a, w0, Mat::Zero(1, 7)), ShapeError);
  CHECK_THROWS_AS(merge(a, Mat::Zero(7, 5)), ShapeError);
}

TEST_CASE("merge with a zero branch returns the base unchanged") {
  Rng rng(11);
  Adapter a = new_adapter(small_config(MixerKind::fixed_orthogonal()));
  Mat w0 = random_mat(rng, 6, 5);
  CHECK(max_abs_diff(merge(a, w0), w0) == 0.0);

  a.B = random_mat(rng, 2, 5);
  Mat recovered = merge(a, w0) - delta_weight(a);
  CHECK(max_abs_diff(recovered, w0) <= 1e-12);
}

TEST_CASE("two-subspace decomposition splits and reassembles") {
  Adapter a = handmade(Mat::Identity(2, 2), Mat::Identity(2, 2),
                       from_rows({{1, 2}, {3, 4}}));
  SubspacePair p = decompose_two_subspaces(a);
  CHECK(bit_equal(p.A1, from_rows({{1}, {0}})));
  CHECK(bit_equal(p.A2, from_rows({{0}, {1}})));
  CHECK(bit_equal(p.B1, from_rows({{1, 2}})));
  CHECK(bit_equal(p.B2, from_rows({{3, 4}})));
  Mat sum = matmul(p.A1, p.B1) + matmul(p.A2, p.B2);
  CHECK(max_abs_diff(sum, from_rows({{1, 2}, {3, 4}})) == 0.0);
}

TEST_CASE("decomposition reconstructs A*B for random adapters") {
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    const Index r = 2 * (1 + static_cast<Index>(rng.next_u64() % 4));
    Adapter a = new_adapter(
        small_config(MixerKind::fixed_butterfly(), 9, 7, r, 0.0, rng.next_u64()));
    a.B = random_mat(rng, r, 7);
    SubspacePair p = decompose_two_subspaces(a);
    Mat sum = matmul(p.A1, p.B1) + matmul(p.A2, p.B2);
    CHECK(max_abs_diff(sum, matmul(a.A, a.B)) <= 1e-12);

    // Reassembled blocks are the original matrices bit for bit.
    Mat a_re(a.A.rows(), a.A.cols());
    a_re << p.A1, p.A2;
    Mat b_re(a.B.rows(), a.B.cols());
    b_re << p.B1, p.B2;
    CHECK(bit_equal(a_re, a.A));
    CHECK(bit_equal(b_re, a.B));
  }
}

TEST_CASE("odd rank cannot be decomposed") {
  Adapter a = new_adapter(small_config(MixerKind::fixed_identity(), 6, 5, 3));
  CHECK_THROWS_AS(decompose_two_subspaces(a), ConfigError);
}

TEST_CASE("ts_mix_delta hand case and degenerate half") {
  Adapter a = handmade(Mat::Identity(2, 2), Mat::Identity(2, 2),
                       from_rows({{1, 2}, {3, 4}}));
  SubspacePair p = decompose_two_subspaces(a);
  CHECK(max_abs_diff(ts_mix_delta(p), from_rows({{4, 6}, {4, 6}})) == 0.0);

  p.A2.setZero();
  p.B2.setZero();
  CHECK(max_abs_diff(ts_mix_delta(p), matmul(p.A1, p.B1)) == 0.0);
}

TEST_CASE("ts mixing equals the butterfly mixer") {
  Rng rng(13);
  for (int t = 0; t < 200; ++t) {
    const Index d1 = 2 + static_cast<Index>(rng.next_u64() % 8);
    const Index d2 = 2 + static_cast<Index>(rng.next_u64() % 8);
    const Index r = 2 * (1 + static_cast<Index>(rng.next_u64() % 3));
    Adapter a = new_adapter(
        small_config(MixerKind::fixed_butterfly(), d1, d2, r, 0.0, rng.next_u64()));
    a.B = random_mat(rng, r, d2);
    Mat via_mixer = delta_weight(a);
    Mat via_split = ts_mix_delta(decompose_two_subspaces(a));
    CHECK(max_abs_diff(via_mixer, via_split) <= 1e-12);
  }
}

TEST_CASE("butterfly_mixer layout") {
  CHECK(bit_equal(butterfly_mixer(2), from_rows({{1, 1}, {1, 1}})));

  Mat b4 = butterfly_mixer(4);
  CHECK(b4.sum() == 8.0);
  for (Index i = 0; i < 2; ++i) {
    CHECK(b4(i, i) == 1.0);
    CHECK(b4(i, i + 2) == 1.0);
    CHECK(b4(i + 2, i) == 1.0);
    CHECK(b4(i + 2, i + 2) == 1.0);
  }

  CHECK_THROWS_AS(butterfly_mixer(5), ConfigError);
}

TEST_CASE("rank1_expand term counts distinguish the three methods") {
  const Index r = 4;
  Adapter lora = new_adapter(small_config(MixerKind::fixed_identity(), 8, 8, r));
  Adapter ts = new_adapter(small_config(MixerKind::fixed_butterfly(), 8, 8, r));
  Adapter mos = new_adapter(
      small_config(MixerKind::learnable(InitKind::KaimingUniform), 8, 8, r));
  CHECK(rank1_expand(lora).size() == static_cast<std::size_t>(r));
  CHECK(rank1_expand(ts).size() == static_cast<std::size_t>(2 * r));
  CHECK(rank1_expand(mos).size() == static_cast<std::size_t>(r * r));
}

TEST_CASE("rank1_expand reconstructs the mixed product") {
  Rng rng(14);
  for (int t = 0; t < 20; ++t) {
    MixerKind mixer = (t % 3 == 0) ? MixerKind::fixed_butterfly()
                      : (t % 3 == 1)
                          ? MixerKind::fixed_orthogonal()
                          : MixerKind::learnable(InitKind::Normal);
    const Index r = 4;
    Adapter a = new_adapter(small_config(mixer, 7, 6, r, 0.0, rng.next_u64()));
    a.B = random_mat(rng, r, 6);
    if (a.w_trainable) a.W = random_mat(rng, r, r);

    Mat sum = Mat::Zero(7, 6);
    for (const Rank1Term& term : rank1_expand(a)) {
      sum += term.weight * matmul(a.A.col(term.i), a.B.row(term.j));
    }
    CHECK(max_abs_diff(sum, matmul(matmul(a.A, a.W), a.B)) <= 1e-12);
  }
}

TEST_CASE("grad vanishes at the double-zero stationary point") {
  Adapter a = handmade(from_rows({{1, 2}, {3, 4}}), Mat::Zero(2, 2), Mat::Zero(2, 2));
  Rng rng(15);
  Mat upstream = random_mat(rng, 2, 2);
  GradTriple g = grad(a, upstream);
  CHECK(g.gA.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.gW.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.gB.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grad with zero B feeds only B") {
  Rng rng(16);
  Mat A = random_mat(rng, 5, 2);
  Mat W = random_mat(rng, 2, 2);
  Adapter a = handmade(A, W, Mat::Zero(2, 4));
  Mat upstream = random_mat(rng, 5, 4);
  GradTriple g = grad(a, upstream);
  CHECK(g.gA.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.gW.cwiseAbs().maxCoeff() == 0.0);
  Mat expected = matmul(matmul(transpose(W), transpose(A)), upstream);
  CHECK(max_abs_diff(g.gB, expected) == 0.0);
}

TEST_CASE("grad matches finite differences on random instances") {
  Rng rng(17);
  for (int t = 0; t < 30; ++t) {
    const Index d1 = 2 + static_cast<Index>(rng.next_u64() % 10);
    const Index d2 = 2 + static_cast<Index>(rng.next_u64() % 10);
    const Index r = 1 + static_cast<Index>(rng.next_u64() % 3);
    Adapter a = new_adapter(small_config(
        MixerKind::learnable(InitKind::KaimingUniform), d1, d2, r, 2.0 * r,
        rng.next_u64()));
    a.B = random_mat(rng, r, d2);
    a.W = random_mat(rng, r, r);
    Mat w0 = random_mat(rng, d1, d2, 0.5);
    Mat x = random_mat(rng, 3, d1);
    Mat y = random_mat(rng, 3, d2);

    GradTriple an = grad(a, mse_loss_and_upstream(a, w0, x, y).delta);
    GradTriple fd = finite_diff_grads(a, w0, x, y, 1e-5);
    const auto rel = [](const Mat& g, const Mat& ref) {
      const double denom = std::max(
          {g.cwiseAbs().maxCoeff(), ref.cwiseAbs().maxCoeff(), 1e-3});
      return (g - ref).cwiseAbs().maxCoeff() / denom;
    };
    CHECK(rel(an.gA, fd.gA) <= 1e-6);
    CHECK(rel(an.gW, fd.gW) <= 1e-6);
    CHECK(rel(an.gB, fd.gB) <= 1e-6);
  }
}

TEST_CASE("grad marks the mixer gradient inert for fixed mixers") {
  Rng rng(18);
  Adapter fixed = new_adapter(small_config(MixerKind::fixed_orthogonal()));
  fixed.B = random_mat(rng, 2, 5);
  Mat upstream = random_mat(rng, 6, 5);
  CHECK_FALSE(grad(fixed, upstream).w_active);

  Adapter learn = new_adapter(
      small_config(MixerKind::learnable(InitKind::KaimingUniform)));
  CHECK(grad(learn, upstream).w_active);

  CHECK_THROWS_AS(grad(fixed, Mat::Zero(3, 3)), ShapeError);
}

TEST_CASE("param_count formulas") {
  AdapterConfig fixed = small_config(MixerKind::fixed_identity(), 8, 8, 2);
  CHECK(param_count(fixed) == 32);
  AdapterConfig learn = small_config(
      MixerKind::learnable(InitKind::KaimingUniform), 8, 8, 2);
  CHECK(param_count(learn) == 36);

  learn.d1 = 4096;
  learn.d2 = 4096;
  learn.r = 16;
  CHECK(param_count(learn) == 131328);
}
