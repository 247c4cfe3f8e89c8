// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#include "moslora/training.hpp"

#include <cmath>
#include <string>

#include "moslora/errors.hpp"

namespace moslora {

void TrainConfig::validate() const {
  if (!std::isfinite(eta) || eta <= 0.0) {
    throw ConfigError("train config: eta must be finite and positive, got " +
                      std::to_string(eta));
  }
  if (steps < 0) {
    throw ConfigError("train config: steps must be >= 0, got " +
                      std::to_string(steps));
  }
}

Adapter sgd_step(const Adapter& adapter, const GradTriple& grads, double eta) {
  if (grads.gA.rows() != adapter.A.rows() || grads.gA.cols() != adapter.A.cols() ||
      grads.gW.rows() != adapter.W.rows() || grads.gW.cols() != adapter.W.cols() ||
      grads.gB.rows() != adapter.B.rows() || grads.gB.cols() != adapter.B.cols()) {
    throw ShapeError("sgd_step: gradient shapes (" + shape_str(grads.gA) + ", " +
                     shape_str(grads.gW) + ", " + shape_str(grads.gB) +
                     ") do not match adapter (" + shape_str(adapter.A) + ", " +
                     shape_str(adapter.W) + ", " + shape_str(adapter.B) + ")");
  }
  if (!all_finite(grads.gA) || !all_finite(grads.gW) || !all_finite(grads.gB)) {
    throw NumericError("sgd_step: non-finite gradient entries");
  }
  Adapter next = adapter;
  next.A = adapter.A - eta * grads.gA;
  next.B = adapter.B - eta * grads.gB;
  if (adapter.w_trainable) {
    next.W = adapter.W - eta * grads.gW;
  }
  return next;
}

LossAndUpstream mse_loss_and_upstream(const Adapter& adapter, const Mat& w0,
                                      const Mat& x, const Mat& y_target) {
  if (y_target.rows() != x.rows() || y_target.cols() != adapter.config.d2) {
    throw ShapeError("mse_loss_and_upstream: target is " + shape_str(y_target) +
                     ", expected " + std::to_string(x.rows()) + "x" +
                     std::to_string(adapter.config.d2));
  }
  Mat y_hat = forward(adapter, w0, x);  // validates x and w0 shapes
  Mat resid = y_hat - y_target;
  const double denom =
      static_cast<double>(x.rows()) * static_cast<double>(y_target.cols());
  LossAndUpstream out;
  out.loss = resid.squaredNorm() / denom;
  out.delta = matmul(transpose(x), resid) * (2.0 / denom);
  return out;
}

TrajectoryReport one_step_trajectory(const Mat& A, const Mat& W, const Mat& B,
                                     const Mat& delta, double eta) {
  const Index d1 = A.rows();
  const Index r = A.cols();
  const Index d2 = B.cols();
  if (W.rows() != r || W.cols() != r) {
    throw ShapeError("one_step_trajectory: mixer is " + shape_str(W) +
                     ", expected " + std::to_string(r) + "x" + std::to_string(r));
  }
  if (B.rows() != r) {
    throw ShapeError("one_step_trajectory: B is " + shape_str(B) +
                     ", expected " + std::to_string(r) + " rows");
  }
  if (delta.rows() != d1 || delta.cols() != d2) {
    throw ShapeError("one_step_trajectory: upstream is " + shape_str(delta) +
                     ", expected " + std::to_string(d1) + "x" +
                     std::to_string(d2));
  }

  Mat at = transpose(A);
  Mat wt = transpose(W);
  Mat bt = transpose(B);

  Mat delta_bt = matmul(delta, bt);             // d1 x r
  Mat a_new = A - eta * matmul(delta_bt, wt);   // A - eta*U*B^T*W^T
  Mat at_delta = matmul(at, delta);             // r x d2
  Mat w_new = W - eta * matmul(at_delta, bt);   // W - eta*A^T*U*B^T
  Mat b_new = B - eta * matmul(wt, at_delta);   // B - eta*W^T*A^T*U
  Mat a_hat_new = matmul(A, W) - eta * delta_bt;

  TrajectoryReport rep;
  rep.w_lora = matmul(matmul(a_new, w_new), b_new);
  rep.w_hat = matmul(a_hat_new, b_new);
  rep.w_fixed_orth = matmul(matmul(a_new, W), b_new);
  rep.diff_learnable_vs_merged = rep.w_hat - rep.w_lora;

  Mat gram_residual = matmul(wt, W) - Mat::Identity(r, r);
  Mat lead = eta * matmul(a_new, matmul(at, delta_bt)) +
             eta * matmul(delta_bt, gram_residual);
  rep.diff_closed_form = matmul(lead, b_new);

  Mat orth_residual = matmul(W, wt) - Mat::Identity(r, r);
  rep.fixed_orth_valid = orth_residual.cwiseAbs().maxCoeff() <= 1e-8;
  return rep;
}

GradTriple finite_diff_grads(const Adapter& adapter, const Mat& w0,
                             const Mat& x, const Mat& y_target, double h) {
  if (!(h > 0.0)) {
    throw ConfigError("finite_diff_grads: h must be > 0, got " +
                      std::to_string(h));
  }
  Adapter probe = adapter;
  const auto loss_at = [&](const Adapter& a) {
    return mse_loss_and_upstream(a, w0, x, y_target).loss;
  };
  const auto central = [&](Mat& field) {
    Mat g(field.rows(), field.cols());
    for (Index i = 0; i < field.rows(); ++i) {
      for (Index j = 0; j < field.cols(); ++j) {
        const double saved = field(i, j);
        field(i, j) = saved + h;
        const double up = loss_at(probe);
        field(i, j) = saved - h;
        const double down = loss_at(probe);
        field(i, j) = saved;
        g(i, j) = (up - down) / (2.0 * h);
      }
    }
    return g;
  };

  GradTriple g;
  g.gA = central(probe.A);
  g.gW = central(probe.W);
  g.gB = central(probe.B);
  g.w_active = adapter.w_trainable;
  return g;
}

TrainLog train(const Adapter& adapter, const Mat& w0, const Mat& x,
               const Mat& y_target, const TrainConfig& cfg) {
  cfg.validate();
  TrainLog log;
  log.records.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  Adapter current = adapter;

  for (int step = 0; step <= cfg.steps; ++step) {
    LossAndUpstream lu = mse_loss_and_upstream(current, w0, x, y_target);
    GradTriple g = grad(current, lu.delta);
    log.records.push_back({step, lu.loss, g.gA.norm(), g.gW.norm(), g.gB.norm()});
    if (!std::isfinite(lu.loss) || !all_finite(g.gA) || !all_finite(g.gW) ||
        !all_finite(g.gB)) {
      log.diverged = true;
      break;
    }
    if (step < cfg.steps) {
      current = sgd_step(current, g, cfg.eta);
    }
  }
  log.final_adapter = current;
  return log;
}

}  // namespace moslora
