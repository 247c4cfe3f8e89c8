// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#include "moslora/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "moslora/checkpoint.hpp"
#include "moslora/errors.hpp"
#include "moslora/harness.hpp"
#include "moslora/rng.hpp"
#include "moslora/training.hpp"

namespace moslora::verify {
namespace {

Mat random_normal(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

double inf_norm(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

/// Adapter at a generic point: fresh construction, then B (and W when
/// learnable) moved off their starting values so gradients are nontrivial.
Adapter generic_adapter(const AdapterConfig& cfg, Rng& rng) {
  Adapter a = new_adapter(cfg);
  a.B = random_normal(rng, cfg.r, cfg.d2);
  if (a.w_trainable) a.W = random_normal(rng, cfg.r, cfg.r);
  return a;
}

MixerKind nth_mixer(int n) {
  switch (n % 6) {
    case 0: return MixerKind::fixed_identity();
    case 1: return MixerKind::fixed_butterfly();
    case 2: return MixerKind::fixed_orthogonal();
    case 3: return MixerKind::learnable(InitKind::KaimingUniform);
    case 4: return MixerKind::learnable(InitKind::Orthogonal);
    default: return MixerKind::learnable(InitKind::Normal);
  }
}

std::filesystem::path temp_file(const char* stem) {
  return std::filesystem::temp_directory_path() /
         (std::string("moslora_verify_") + stem + "_" +
          std::to_string(::getpid()));
}

}  // namespace

CheckResult check_gradients(const GradFn& fn, int instances) {
  const GradFn grad_fn = fn ? fn : [](const Adapter& a, const Mat& u) {
    return grad(a, u);
  };
  Rng rng(20260811);
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    AdapterConfig cfg;
    cfg.d1 = 2 + static_cast<Index>(rng.next_u64() % 15);  // 2..16
    cfg.d2 = 2 + static_cast<Index>(rng.next_u64() % 15);
    cfg.mixer = nth_mixer(t);
    cfg.r = 1 + static_cast<Index>(rng.next_u64() % 4);  // 1..4
    if (cfg.mixer.tag == MixerTag::FixedButterfly && cfg.r % 2 != 0) ++cfg.r;
    cfg.alpha = (t % 3 == 0) ? 0.0 : 2.0 * static_cast<double>(cfg.r);
    cfg.seed = rng.next_u64();

    Adapter a = generic_adapter(cfg, rng);
    const Index n = 1 + static_cast<Index>(rng.next_u64() % 4);
    Mat w0 = random_normal(rng, cfg.d1, cfg.d2, 0.5);
    Mat x = random_normal(rng, n, cfg.d1);
    Mat y = random_normal(rng, n, cfg.d2);

    GradTriple analytic = grad_fn(a, mse_loss_and_upstream(a, w0, x, y).delta);
    GradTriple fd = finite_diff_grads(a, w0, x, y, 1e-5);
    // Near-zero gradients fall back to an absolute comparison at 1e-3*tol,
    // above the finite-difference noise floor but far below any real signal.
    const auto rel = [](const Mat& g, const Mat& ref) {
      return inf_norm(g - ref) /
             std::max({inf_norm(ref), inf_norm(g), 1e-3});
    };
    worst = std::max({worst, rel(analytic.gA, fd.gA), rel(analytic.gW, fd.gW),
                      rel(analytic.gB, fd.gB)});
  }
  CheckResult res;
  res.name = "gradients";
  res.max_err = worst;
  res.pass = worst <= 1e-6;
  res.detail = std::to_string(instances) + " random instances, h=1e-5, tol 1e-6";
  return res;
}

CheckResult check_stagnation() {
  AdapterConfig cfg;
  cfg.d1 = 12;
  cfg.d2 = 10;
  cfg.r = 4;
  cfg.mixer = MixerKind::learnable(InitKind::Zeros);
  cfg.alpha = 8.0;
  cfg.seed = 7;
  Adapter start = new_adapter(cfg);

  TaskSpec task_spec;
  task_spec.d1 = cfg.d1;
  task_spec.d2 = cfg.d2;
  task_spec.k = 2;
  task_spec.n_train = 32;
  task_spec.n_eval = 0;
  task_spec.seed = 11;
  TaskData task = make_task(task_spec);

  TrainConfig tc;
  tc.eta = 0.05;
  tc.steps = 100;
  TrainLog log = train(start, task.w0, task.x_train, task.y_train, tc);

  bool constant = log.records.size() == 101;
  for (const auto& rec : log.records) {
    if (std::memcmp(&rec.loss, &log.records.front().loss, sizeof(double)) != 0)
      constant = false;
  }
  const bool frozen = bit_equal(log.final_adapter.A, start.A) &&
                      bit_equal(log.final_adapter.W, start.W) &&
                      bit_equal(log.final_adapter.B, start.B);

  CheckResult res;
  res.name = "stagnation";
  res.pass = constant && frozen && start.zero_mixer_warning;
  res.max_err = 0.0;
  res.detail = "zero mixer + zero B: 100 steps, bit-frozen parameters, constant loss";
  return res;
}

CheckResult check_unification() {
  Rng rng(4242);
  double worst_identity = 0.0;
  double worst_butterfly = 0.0;
  bool counts_ok = true;

  for (int t = 0; t < 1000; ++t) {
    const Index d1 = 2 + static_cast<Index>(rng.next_u64() % 11);
    const Index d2 = 2 + static_cast<Index>(rng.next_u64() % 11);
    const Index r = 2 * (1 + static_cast<Index>(rng.next_u64() % 4));  // 2..8 even

    AdapterConfig cfg;
    cfg.d1 = d1;
    cfg.d2 = d2;
    cfg.r = r;
    cfg.alpha = 0.0;
    cfg.seed = rng.next_u64();

    cfg.mixer = MixerKind::fixed_identity();
    Adapter id = generic_adapter(cfg, rng);
    Mat vanilla = matmul(id.A, id.B);
    worst_identity = std::max(worst_identity, max_abs_diff(delta_weight(id), vanilla));

    cfg.mixer = MixerKind::fixed_butterfly();
    Adapter bf = new_adapter(cfg);
    bf.B = id.B;
    bf.A = id.A;
    worst_butterfly = std::max(
        worst_butterfly,
        max_abs_diff(delta_weight(bf), ts_mix_delta(decompose_two_subspaces(bf))));

    if (t < 20) {
      cfg.mixer = MixerKind::learnable(InitKind::KaimingUniform);
      Adapter mos = generic_adapter(cfg, rng);
      const auto n_id = rank1_expand(id).size();
      const auto n_bf = rank1_expand(bf).size();
      const auto n_mos = rank1_expand(mos).size();
      if (n_id != static_cast<std::size_t>(r) ||
          n_bf != static_cast<std::size_t>(2 * r) ||
          n_mos != static_cast<std::size_t>(r * r)) {
        counts_ok = false;
      }
    }
  }

  CheckResult res;
  res.name = "unification";
  res.max_err = std::max(worst_identity, worst_butterfly);
  res.pass = worst_identity == 0.0 && worst_butterfly <= 1e-12 && counts_ok;
  res.detail = "identity exact, butterfly vs two-subspaces <= 1e-12 over 1000 "
               "instances, term counts r/2r/r^2";
  return res;
}

CheckResult check_trajectory() {
  Rng rng(991);
  double worst_closed = 0.0;
  double worst_orth = 0.0;
  int distinct = 0;
  const int seeds = 100;

  for (int t = 0; t < seeds; ++t) {
    const Index d1 = 2 + static_cast<Index>(rng.next_u64() % 9);   // 2..10
    const Index d2 = 2 + static_cast<Index>(rng.next_u64() % 9);
    const Index r = 1 + static_cast<Index>(rng.next_u64() % 6);    // 1..6
    Mat a = random_normal(rng, d1, r);
    Mat w = random_normal(rng, r, r);
    Mat b = random_normal(rng, r, d2);
    Mat delta = random_normal(rng, d1, d2, 0.5);

    TrajectoryReport rep = one_step_trajectory(a, w, b, delta, 0.1);
    worst_closed = std::max(
        worst_closed, max_abs_diff(rep.diff_learnable_vs_merged, rep.diff_closed_form));
    if (inf_norm(rep.diff_learnable_vs_merged) > 1e-8) ++distinct;

    Rng orng = rng.stream("orth" + std::to_string(t));
    Mat q = init_matrix(InitKind::Orthogonal, r, r, orng);
    TrajectoryReport orep = one_step_trajectory(a, q, b, delta, 0.1);
    worst_orth = std::max(worst_orth, max_abs_diff(orep.w_fixed_orth, orep.w_hat));
    if (!orep.fixed_orth_valid) worst_orth = 1.0;
  }

  CheckResult res;
  res.name = "trajectory";
  res.max_err = std::max(worst_closed, worst_orth);
  res.pass = worst_closed <= 1e-12 && worst_orth <= 1e-12 && distinct >= 99;
  res.detail = "closed-form diff <= 1e-12, fixed-orthogonal match <= 1e-12, "
               "one-step weights distinct in " + std::to_string(distinct) + "/" +
               std::to_string(seeds) + " seeds";
  return res;
}

CheckResult check_merge() {
  Rng rng(555);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    AdapterConfig cfg;
    cfg.d1 = 2 + static_cast<Index>(rng.next_u64() % 15);
    cfg.d2 = 2 + static_cast<Index>(rng.next_u64() % 15);
    cfg.r = 1 + static_cast<Index>(rng.next_u64() % 4);
    cfg.mixer = nth_mixer(t);
    if (cfg.mixer.tag == MixerTag::FixedButterfly && cfg.r % 2 != 0) ++cfg.r;
    cfg.alpha = 2.0 * static_cast<double>(cfg.r);
    cfg.seed = rng.next_u64();
    Adapter a = generic_adapter(cfg, rng);
    Mat w0 = random_normal(rng, cfg.d1, cfg.d2);
    Mat x = random_normal(rng, 4, cfg.d1);
    worst = std::max(worst, max_abs_diff(forward(a, w0, x), matmul(x, merge(a, w0))));
  }

  // Same comparison through the raw-file merge path.
  const auto base_path = temp_file("base");
  const auto ckpt_path = temp_file("ckpt");
  const auto out_path = temp_file("merged");
  AdapterConfig cfg;
  cfg.d1 = 8;
  cfg.d2 = 8;
  cfg.r = 2;
  cfg.mixer = MixerKind::learnable(InitKind::KaimingUniform);
  cfg.alpha = 4.0;
  cfg.seed = 99;
  Adapter a = generic_adapter(cfg, rng);
  Mat w0 = random_normal(rng, 8, 8);
  Mat x = random_normal(rng, 4, 8);
  save_matrix_raw(w0, base_path);
  save_checkpoint(a, ckpt_path);
  cmd_merge(base_path, ckpt_path, out_path);
  Mat merged = load_matrix_raw(out_path);
  worst = std::max(worst, max_abs_diff(forward(a, w0, x), matmul(x, merged)));
  std::filesystem::remove(base_path);
  std::filesystem::remove(ckpt_path);
  std::filesystem::remove(out_path);

  CheckResult res;
  res.name = "merge";
  res.max_err = worst;
  res.pass = worst <= 1e-10;
  res.detail = "forward vs x*merge <= 1e-10 in memory and via the raw-file path";
  return res;
}

CheckResult check_params() {
  bool ok = true;
  AdapterConfig cfg;
  cfg.d1 = 8;
  cfg.d2 = 8;
  cfg.r = 2;
  cfg.mixer = MixerKind::fixed_identity();
  ok &= param_count(cfg) == 32;
  cfg.mixer = MixerKind::learnable(InitKind::KaimingUniform);
  ok &= param_count(cfg) == 36;

  cfg.d1 = 4096;
  cfg.d2 = 4096;
  cfg.r = 16;
  ok &= param_count(cfg) == 131328;
  cfg.mixer = MixerKind::fixed_identity();
  ok &= param_count(cfg) == 131072;
  ok &= (131328 - 131072) == 16 * 16;

  CheckResult res;
  res.name = "params";
  res.pass = ok;
  res.max_err = 0.0;
  res.detail = "(d1+d2)r fixed, (d1+d2+r)r learnable; 4096/16 overhead is 256";
  return res;
}

CheckResult check_checkpoint() {
  Rng rng(31337);
  bool ok = true;
  for (int t = 0; t < 6; ++t) {
    AdapterConfig cfg;
    cfg.d1 = 5;
    cfg.d2 = 7;
    cfg.r = 2;
    cfg.mixer = nth_mixer(t);
    cfg.alpha = 3.5;
    cfg.seed = 1000 + static_cast<std::uint64_t>(t);
    Adapter a = generic_adapter(cfg, rng);

    const auto path = temp_file("roundtrip");
    save_checkpoint(a, path);
    Adapter back = load_checkpoint(path);
    ok &= bit_equal(a.A, back.A) && bit_equal(a.W, back.W) && bit_equal(a.B, back.B);
    ok &= back.config.mixer == a.config.mixer && back.config.alpha == a.config.alpha;

    const auto size = std::filesystem::file_size(path);
    const auto expected = kCheckpointHeaderBytes +
                          8 * static_cast<std::size_t>(cfg.d1 * cfg.r +
                                                       cfg.r * cfg.r +
                                                       cfg.r * cfg.d2);
    ok &= size == expected;
    std::filesystem::remove(path);
  }

  CheckResult res;
  res.name = "checkpoint";
  res.pass = ok;
  res.max_err = 0.0;
  res.detail = "bit-exact roundtrip for every mixer kind; file length matches layout";
  return res;
}

CheckResult check_determinism() {
  SweepSpec spec;
  spec.methods = {Method::LoRA, Method::MoSLoRALearnable};
  spec.inits = {InitKind::KaimingUniform};
  spec.ranks = {2};
  spec.seeds = {1, 2};
  spec.train.eta = 0.05;
  spec.train.steps = 20;
  spec.task.d1 = 8;
  spec.task.d2 = 8;
  spec.task.k = 2;
  spec.task.n_train = 32;
  spec.task.n_eval = 0;
  spec.task.seed = 5;

  const std::string csv1 = to_csv(run_sweep(spec));
  const std::string csv2 = to_csv(run_sweep(spec));

  Rng r1(77);
  Rng r2(77);
  Rng s1 = r1.stream("A");
  Rng s2 = r2.stream("A");
  Mat m1 = init_matrix(InitKind::KaimingUniform, 6, 3, s1);
  Mat m2 = init_matrix(InitKind::KaimingUniform, 6, 3, s2);

  // Same seed, two constructions, two files: identical bytes.
  AdapterConfig cfg;
  cfg.d1 = 6;
  cfg.d2 = 4;
  cfg.r = 2;
  cfg.mixer = MixerKind::learnable(InitKind::Orthogonal);
  cfg.alpha = 4.0;
  cfg.seed = 123;
  const auto p1 = temp_file("det1");
  const auto p2 = temp_file("det2");
  save_checkpoint(new_adapter(cfg), p1);
  save_checkpoint(new_adapter(cfg), p2);
  const auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f),
                       std::istreambuf_iterator<char>());
  };
  const bool ckpt_same = slurp(p1) == slurp(p2) && !slurp(p1).empty();
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);

  CheckResult res;
  res.name = "determinism";
  res.pass = csv1 == csv2 && bit_equal(m1, m2) && ckpt_same;
  res.max_err = 0.0;
  res.detail =
      "sweep CSV bytes, initializations and checkpoints identical across runs";
  return res;
}

std::vector<CheckResult> run_checks(std::string_view filter) {
  using Entry = std::pair<std::string_view, CheckResult (*)()>;
  static const Entry entries[] = {
      {"gradients", [] { return check_gradients(); }},
      {"stagnation", check_stagnation},
      {"unification", check_unification},
      {"trajectory", check_trajectory},
      {"merge", check_merge},
      {"params", check_params},
      {"checkpoint", check_checkpoint},
      {"determinism", check_determinism},
  };
  std::vector<CheckResult> results;
  for (const auto& [name, fn] : entries) {
    if (!filter.empty() && name.find(filter) == std::string_view::npos) continue;
    results.push_back(fn());
  }
  return results;
}

int report(const std::vector<CheckResult>& results) {
  bool all = true;
  for (const auto& r : results) {
    std::printf("%s %-13s max err %.3e  %s\n", r.pass ? "PASS" : "FAIL",
                r.name.c_str(), r.max_err, r.detail.c_str());
    all &= r.pass;
  }
  if (results.empty()) {
    std::printf("no checks matched the filter\n");
    return 1;
  }
  return all ? 0 : 1;
}

}  // namespace moslora::verify
