// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "moslora/adapter.hpp"
#include "moslora/matrix.hpp"

namespace moslora {

enum class LossKind { MSE };

struct TrainConfig {
  double eta = 0.01;  ///< learning rate
  int steps = 0;
  LossKind loss = LossKind::MSE;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One-step SGD comparison of the three branch parameterizations starting
/// from the same A, W, B and upstream gradient:
///   w_lora       — A, W, B all updated (learnable mixer),
///   w_hat        — the merged form (A*W, B) updated,
///   w_fixed_orth — A, B updated with W held fixed.
/// The three coincide at eta = 0; w_fixed_orth equals w_hat whenever W is
/// orthogonal, while w_hat - w_lora has the closed form below.
struct TrajectoryReport {
  Mat w_lora;
  Mat w_hat;
  Mat w_fixed_orth;
  Mat diff_learnable_vs_merged;  ///< w_hat - w_lora, entrywise
  Mat diff_closed_form;          ///< eta*((A-eta*U*B^T*W^T)*A^T*U*B^T + U*B^T*(W^T*W-I))*(B-eta*W^T*A^T*U)
  /// True when the supplied W satisfied ||W W^T - I||_inf <= 1e-8; the
  /// w_fixed_orth output is meaningful only in that case.
  bool fixed_orth_valid = false;
};

struct StepRecord {
  int step;
  double loss;
  double ga_norm;  ///< Frobenius norms of the three gradients
  double gw_norm;
  double gb_norm;
};

struct TrainLog {
  /// steps + 1 records (step 0 included). Losses are finite unless the run
  /// diverged, in which case the last record is the diagnostic one.
  std::vector<StepRecord> records;
  Adapter final_adapter;
  bool diverged = false;
};

struct LossAndUpstream {
  double loss;
  Mat delta;  ///< dLoss/dW_merge, shape d1 x d2
};

/// A' = A - eta*gA, B' = B - eta*gB; W moves only when the mixer is
/// trainable. Throws NumericError on non-finite gradient entries.
Adapter sgd_step(const Adapter& adapter, const GradTriple& grads, double eta);

/// Full-batch MSE: loss = ||x*(W0 + s*A*W*B) - y||_F^2 / (n*d2) and its
/// gradient with respect to the merged weight,
/// delta = (2/(n*d2)) * x^T * (y_hat - y).
LossAndUpstream mse_loss_and_upstream(const Adapter& adapter, const Mat& w0,
                                      const Mat& x, const Mat& y_target);

/// See TrajectoryReport. W must be square and shapes consistent with
/// A (d1 x r), B (r x d2), delta (d1 x d2).
TrajectoryReport one_step_trajectory(const Mat& A, const Mat& W, const Mat& B,
                                     const Mat& delta, double eta);

/// Central finite differences of the MSE loss over every entry of A, W, B.
/// Throws ConfigError when h <= 0.
GradTriple finite_diff_grads(const Adapter& adapter, const Mat& w0,
                             const Mat& x, const Mat& y_target, double h);

/// Full-batch SGD for cfg.steps steps; deterministic given the inputs.
/// Stops early with a diagnostic record if the loss leaves the finite range.
TrainLog train(const Adapter& adapter, const Mat& w0, const Mat& x,
               const Mat& y_target, const TrainConfig& cfg);

}  // namespace moslora
