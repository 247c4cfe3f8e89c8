// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#include "moslora/adapter.hpp"

#include <string>

#include "moslora/errors.hpp"
#include "moslora/rng.hpp"

namespace moslora {

std::string_view mixer_name(MixerTag tag) {
  switch (tag) {
    case MixerTag::FixedIdentity: return "identity";
    case MixerTag::FixedButterfly: return "butterfly";
    case MixerTag::FixedOrthogonal: return "orthogonal";
    case MixerTag::Learnable: return "learnable";
  }
  return "?";
}

MixerTag parse_mixer(std::string_view name) {
  if (name == "identity") return MixerTag::FixedIdentity;
  if (name == "butterfly") return MixerTag::FixedButterfly;
  if (name == "orthogonal") return MixerTag::FixedOrthogonal;
  if (name == "learnable") return MixerTag::Learnable;
  throw ConfigError("unknown mixer kind: '" + std::string(name) +
                    "' (expected identity|butterfly|orthogonal|learnable)");
}

void AdapterConfig::validate() const {
  if (d1 < 1 || d2 < 1 || r < 1) {
    throw ConfigError("adapter config: d1, d2 and r must be >= 1, got d1=" +
                      std::to_string(d1) + " d2=" + std::to_string(d2) +
                      " r=" + std::to_string(r));
  }
  if (alpha < 0.0) {
    throw ConfigError("adapter config: alpha must be >= 0, got " +
                      std::to_string(alpha));
  }
  if (mixer.tag == MixerTag::FixedButterfly && r % 2 != 0) {
    throw ConfigError("adapter config: butterfly mixer requires even rank, got r=" +
                      std::to_string(r));
  }
}

Adapter new_adapter(const AdapterConfig& config) {
  config.validate();
  Adapter a;
  a.config = config;
  Rng root(config.seed);

  Rng a_stream = root.stream("A");
  a.A = init_matrix(InitKind::KaimingUniform, config.d1, config.r, a_stream);
  a.B = Mat::Zero(config.r, config.d2);

  switch (config.mixer.tag) {
    case MixerTag::FixedIdentity:
      a.W = Mat::Identity(config.r, config.r);
      break;
    case MixerTag::FixedButterfly:
      a.W = butterfly_mixer(config.r);
      break;
    case MixerTag::FixedOrthogonal: {
      Rng w_stream = root.stream("W");
      a.W = init_matrix(InitKind::Orthogonal, config.r, config.r, w_stream);
      break;
    }
    case MixerTag::Learnable: {
      Rng w_stream = root.stream("W");
      a.W = init_matrix(config.mixer.init, config.r, config.r, w_stream);
      a.zero_mixer_warning = (config.mixer.init == InitKind::Zeros);
      break;
    }
  }
  a.w_trainable = config.mixer.trainable();
  return a;
}

double scaling(const AdapterConfig& config) {
  if (config.alpha == 0.0) return 1.0;
  return config.alpha / static_cast<double>(config.r);
}

Mat delta_weight(const Adapter& adapter) {
  Mat d = matmul(matmul(adapter.A, adapter.W), adapter.B);
  d *= scaling(adapter.config);
  return d;
}

Mat forward(const Adapter& adapter, const Mat& w0, const Mat& x) {
  const auto& cfg = adapter.config;
  if (w0.rows() != cfg.d1 || w0.cols() != cfg.d2) {
    throw ShapeError("forward: base weight is " + shape_str(w0) +
                     ", adapter expects " + std::to_string(cfg.d1) + "x" +
                     std::to_string(cfg.d2));
  }
  if (x.cols() != cfg.d1) {
    throw ShapeError("forward: input is " + shape_str(x) + ", expected n x " +
                     std::to_string(cfg.d1));
  }
  Mat branch = matmul(matmul(matmul(x, adapter.A), adapter.W), adapter.B);
  branch *= scaling(cfg);
  return matmul(x, w0) + branch;
}

Mat merge(const Adapter& adapter, const Mat& w0) {
  const auto& cfg = adapter.config;
  if (w0.rows() != cfg.d1 || w0.cols() != cfg.d2) {
    throw ShapeError("merge: base weight is " + shape_str(w0) +
                     ", adapter expects " + std::to_string(cfg.d1) + "x" +
                     std::to_string(cfg.d2));
  }
  return w0 + delta_weight(adapter);
}

SubspacePair decompose_two_subspaces(const Adapter& adapter) {
  const Index r = adapter.config.r;
  if (r % 2 != 0) {
    throw ConfigError("decompose_two_subspaces: requires even rank, got r=" +
                      std::to_string(r));
  }
  const Index h = r / 2;
  SubspacePair p;
  p.A1 = adapter.A.leftCols(h);
  p.A2 = adapter.A.rightCols(h);
  p.B1 = adapter.B.topRows(h);
  p.B2 = adapter.B.bottomRows(h);
  return p;
}

Mat ts_mix_delta(const SubspacePair& pair) {
  return matmul(pair.A1 + pair.A2, pair.B1 + pair.B2);
}

Mat butterfly_mixer(Index r) {
  if (r < 2 || r % 2 != 0) {
    throw ConfigError("butterfly_mixer: requires even rank >= 2, got r=" +
                      std::to_string(r));
  }
  const Index h = r / 2;
  Mat w = Mat::Zero(r, r);
  for (Index i = 0; i < h; ++i) {
    w(i, i) = 1.0;
    w(i, i + h) = 1.0;
    w(i + h, i) = 1.0;
    w(i + h, i + h) = 1.0;
  }
  return w;
}

std::vector<Rank1Term> rank1_expand(const Adapter& adapter) {
  std::vector<Rank1Term> terms;
  const Index r = adapter.config.r;
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < r; ++j) {
      const double w = adapter.W(i, j);
      if (w != 0.0) terms.push_back({w, i, j});
    }
  }
  return terms;
}

GradTriple grad(const Adapter& adapter, const Mat& upstream) {
  const auto& cfg = adapter.config;
  if (upstream.rows() != cfg.d1 || upstream.cols() != cfg.d2) {
    throw ShapeError("grad: upstream is " + shape_str(upstream) +
                     ", expected " + std::to_string(cfg.d1) + "x" +
                     std::to_string(cfg.d2));
  }
  Mat scaled = upstream * scaling(cfg);
  Mat at = transpose(adapter.A);
  Mat wt = transpose(adapter.W);
  Mat bt = transpose(adapter.B);

  GradTriple g;
  g.gA = matmul(matmul(scaled, bt), wt);
  g.gW = matmul(matmul(at, scaled), bt);
  g.gB = matmul(matmul(wt, at), scaled);
  g.w_active = adapter.w_trainable;
  return g;
}

std::int64_t param_count(const AdapterConfig& config) {
  config.validate();
  const auto d1 = static_cast<std::int64_t>(config.d1);
  const auto d2 = static_cast<std::int64_t>(config.d2);
  const auto r = static_cast<std::int64_t>(config.r);
  if (config.mixer.trainable()) return (d1 + d2 + r) * r;
  return (d1 + d2) * r;
}

}  // namespace moslora
