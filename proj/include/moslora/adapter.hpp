// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "moslora/init.hpp"
#include "moslora/matrix.hpp"

namespace moslora {

// A low-rank adapter is the branch s * A * W * B added to a frozen base
// weight W0, where A (d1 x r) projects down, B (r x d2) projects up, and the
// r x r mixer W fuses the rank-1 subspaces A_i B_j. The mixer choice selects
// the method:
//   - fixed identity   -> vanilla LoRA            (r   rank-1 subspaces)
//   - fixed butterfly  -> two-subspaces mixing    (2r  rank-1 subspaces)
//   - learnable dense  -> MoSLoRA                 (r^2 rank-1 subspaces)

/// Mixer selection. Ordinals are part of the checkpoint format.
enum class MixerTag : std::uint8_t {
  FixedIdentity = 0,
  FixedButterfly = 1,
  FixedOrthogonal = 2,
  Learnable = 3,
};

struct MixerKind {
  MixerTag tag = MixerTag::FixedIdentity;
  /// Initialization of the mixer weight; meaningful only when Learnable.
  InitKind init = InitKind::KaimingUniform;

  static MixerKind fixed_identity() { return {MixerTag::FixedIdentity, InitKind::Identity}; }
  static MixerKind fixed_butterfly() { return {MixerTag::FixedButterfly, InitKind::Identity}; }
  static MixerKind fixed_orthogonal() { return {MixerTag::FixedOrthogonal, InitKind::Orthogonal}; }
  static MixerKind learnable(InitKind init) { return {MixerTag::Learnable, init}; }

  bool trainable() const { return tag == MixerTag::Learnable; }

  /// The init field only distinguishes learnable mixers.
  friend bool operator==(const MixerKind& x, const MixerKind& y) {
    if (x.tag != y.tag) return false;
    return x.tag != MixerTag::Learnable || x.init == y.init;
  }
};

std::string_view mixer_name(MixerTag tag);
MixerTag parse_mixer(std::string_view name);

struct AdapterConfig {
  Index d1 = 0;  ///< input width
  Index d2 = 0;  ///< output width
  Index r = 0;   ///< rank
  MixerKind mixer;
  double alpha = 0.0;  ///< scaling numerator; 0 means "no scaling" (s = 1)
  std::uint64_t seed = 0;

  /// Throws ConfigError when d1, d2 or r < 1, alpha < 0, or a butterfly
  /// mixer is requested with odd r.
  void validate() const;
};

struct Adapter {
  AdapterConfig config;
  Mat A;  ///< d1 x r
  Mat W;  ///< r x r mixer
  Mat B;  ///< r x d2
  bool w_trainable = false;
  /// Set when the mixer was initialized to exact zeros: together with the
  /// zero B this is a stationary point of every loss, so training stalls.
  bool zero_mixer_warning = false;
};

/// A down/up pair split into column halves of A and row halves of B.
struct SubspacePair {
  Mat A1, B1, A2, B2;
};

struct GradTriple {
  Mat gA, gW, gB;
  /// False for fixed mixers: gW is reported but must not be applied.
  bool w_active = true;
};

/// Builds the adapter: A ~ Kaiming uniform (fan-in d1), B = 0 (so the branch
/// starts at exactly zero), W per the mixer kind. Deterministic in config.seed.
Adapter new_adapter(const AdapterConfig& config);

/// Branch scale s = alpha / r, with alpha = 0 meaning s = 1.
double scaling(const AdapterConfig& config);

/// s * A * W * B, shape d1 x d2.
Mat delta_weight(const Adapter& adapter);

/// x * W0 + s * x * A * W * B for a batch x of shape n x d1.
Mat forward(const Adapter& adapter, const Mat& w0, const Mat& x);

/// W0 + delta_weight(adapter): the zero-latency inference form.
Mat merge(const Adapter& adapter, const Mat& w0);

/// Splits A by column and B by row into two half-rank subspaces.
/// Requires even r.
SubspacePair decompose_two_subspaces(const Adapter& adapter);

/// (A1 + A2)(B1 + B2): the two-subspaces-mixing branch, which adds the
/// cross terms A1 B2 and A2 B1 on top of A1 B1 + A2 B2.
Mat ts_mix_delta(const SubspacePair& pair);

/// The r x r block matrix [[I, I], [I, I]] in r/2 blocks. As a mixer it
/// reproduces two-subspaces mixing exactly. Requires even r.
Mat butterfly_mixer(Index r);

struct Rank1Term {
  double weight;  ///< W(i, j)
  Index i;        ///< column of A
  Index j;        ///< row of B
};

/// All nonzero mixer entries as weighted rank-1 subspaces:
/// A * W * B == sum of weight * A.col(i) * B.row(j).
std::vector<Rank1Term> rank1_expand(const Adapter& adapter);

/// Analytic gradients of the branch given upstream = dLoss/dW_merge:
///   gA = (s*U) B^T W^T,  gW = A^T (s*U) B^T,  gB = W^T A^T (s*U).
/// The scale s is folded into the upstream before the products.
GradTriple grad(const Adapter& adapter, const Mat& upstream);

/// Trainable-parameter count: (d1 + d2) * r for fixed mixers,
/// (d1 + d2 + r) * r when the mixer is learnable.
std::int64_t param_count(const AdapterConfig& config);

}  // namespace moslora
