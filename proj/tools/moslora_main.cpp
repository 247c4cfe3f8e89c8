// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>
#include <string>

#include "moslora/checkpoint.hpp"
#include "moslora/errors.hpp"
#include "moslora/harness.hpp"
#include "moslora/training.hpp"
#include "moslora/verify.hpp"

namespace {

using namespace moslora;

int run_train(Index d1, Index d2, Index rank, const std::string& mixer,
              const std::string& mixer_init, double alpha, double lr, int steps,
              std::uint64_t seed, const std::string& task_kind,
              const std::string& out_path) {
  AdapterConfig cfg;
  cfg.d1 = d1;
  cfg.d2 = d2;
  cfg.r = rank;
  cfg.mixer.tag = parse_mixer(mixer);
  if (cfg.mixer.tag == MixerTag::Learnable) cfg.mixer.init = parse_init(mixer_init);
  cfg.alpha = alpha;
  cfg.seed = seed;
  Adapter adapter = new_adapter(cfg);
  if (adapter.zero_mixer_warning) {
    std::printf("warning: zero-initialized mixer with zero B is a stationary "
                "point; training will not move\n");
  }

  TaskSpec task_spec;
  task_spec.d1 = d1;
  task_spec.d2 = d2;
  task_spec.k = std::min(rank, std::min(d1, d2));
  if (task_kind == "plain") {
    task_spec.target_kind = TargetKind::LowRankPlain;
  } else if (task_kind == "mixed") {
    task_spec.target_kind = TargetKind::LowRankMixed;
    task_spec.noise_std = 0.01;
  } else {
    throw ConfigError("--task must be plain or mixed, got '" + task_kind + "'");
  }
  task_spec.seed = seed;
  TaskData task = make_task(task_spec);

  TrainConfig tc;
  tc.eta = lr;
  tc.steps = steps;
  tc.seed = seed;
  TrainLog log = train(adapter, task.w0, task.x_train, task.y_train, tc);

  double best = log.records.front().loss;
  std::int64_t to90 = -1;
  for (const auto& rec : log.records) {
    if (std::isfinite(rec.loss) && rec.loss < best) best = rec.loss;
    if (to90 < 0 && rec.loss <= 0.1 * log.records.front().loss) to90 = rec.step;
  }
  std::printf("initial train mse %.17g\n", log.records.front().loss);
  std::printf("final   train mse %.17g\n", log.records.back().loss);
  std::printf("best    train mse %.17g\n", best);
  if (to90 >= 0) std::printf("steps to 90%% improvement %" PRId64 "\n", to90);
  else std::printf("steps to 90%% improvement never\n");
  if (log.diverged) std::printf("diverged: loss left the finite range\n");
  if (task_spec.n_eval > 0) {
    const double eval =
        mse_loss_and_upstream(log.final_adapter, task.w0, task.x_eval, task.y_eval)
            .loss;
    std::printf("final   eval  mse %.17g\n", eval);
  }
  if (!out_path.empty()) {
    save_checkpoint(log.final_adapter, out_path);
    std::printf("checkpoint written to %s\n", out_path.c_str());
  }
  return 0;
}

int run_sweep_cmd(const std::string& spec_path) {
  std::string out_path;
  SweepSpec spec = parse_sweep_file(spec_path, &out_path);
  Report report = run_sweep(spec);
  emit_csv(report, out_path);
  std::printf("%zu rows written to %s\n", report.rows.size(), out_path.c_str());
  return 0;
}

int run_inspect(const std::string& path) {
  Adapter a = load_checkpoint(path);
  const auto& cfg = a.config;
  std::printf("d1 x d2        %" PRId64 " x %" PRId64 "\n",
              static_cast<std::int64_t>(cfg.d1), static_cast<std::int64_t>(cfg.d2));
  std::printf("rank           %" PRId64 "\n", static_cast<std::int64_t>(cfg.r));
  std::printf("mixer          %s\n", std::string(mixer_name(cfg.mixer.tag)).c_str());
  if (cfg.mixer.tag == MixerTag::Learnable) {
    std::printf("mixer init     %s\n", std::string(init_name(cfg.mixer.init)).c_str());
  }
  std::printf("alpha          %.17g (scale %.17g)\n", cfg.alpha, scaling(cfg));
  std::printf("trainable mixer %s\n", a.w_trainable ? "yes" : "no");
  std::printf("param count    %" PRId64 "\n", param_count(cfg));
  std::printf("rank-1 terms   %zu nonzero of %" PRId64 "\n", rank1_expand(a).size(),
              static_cast<std::int64_t>(cfg.r * cfg.r));
  if (a.zero_mixer_warning) std::printf("warning        zero-initialized mixer\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank adapters with subspace mixers: LoRA, two-subspaces "
               "mixing, and MoSLoRA"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one adapter on a synthetic task");
  Index d1 = 16, d2 = 16, rank = 4;
  std::string mixer = "learnable", mixer_init = "kaiming";
  double alpha = 0.0, lr = 0.05;
  int steps = 1000;
  std::uint64_t seed = 0;
  std::string task_kind = "plain", out_path;
  train_cmd->add_option("--d1", d1, "input width");
  train_cmd->add_option("--d2", d2, "output width");
  train_cmd->add_option("--rank", rank, "adapter rank");
  train_cmd->add_option("--mixer", mixer, "identity|butterfly|orthogonal|learnable");
  train_cmd->add_option("--mixer-init", mixer_init,
                        "zeros|identity|normal|orthogonal|kaiming (learnable mixer)");
  train_cmd->add_option("--alpha", alpha, "scaling numerator; 0 means scale 1");
  train_cmd->add_option("--lr", lr, "SGD learning rate");
  train_cmd->add_option("--steps", steps, "SGD steps");
  train_cmd->add_option("--seed", seed, "seed for task and adapter");
  train_cmd->add_option("--task", task_kind, "plain|mixed planted target");
  train_cmd->add_option("--out", out_path, "checkpoint output path");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a method/init/rank/seed sweep");
  std::string spec_path;
  sweep_cmd->add_option("--spec", spec_path, "key=value sweep spec file")->required();

  // verify
  auto* verify_cmd =
      app.add_subcommand("verify", "Check the library's algebraic properties");
  std::string filter;
  verify_cmd->add_option("--filter", filter, "run only checks whose name contains this");

  // merge
  auto* merge_cmd = app.add_subcommand("merge", "Fold an adapter into a base weight file");
  std::string base_path, adapter_path, merge_out;
  merge_cmd->add_option("--base", base_path, "raw base matrix file")->required();
  merge_cmd->add_option("--adapter", adapter_path, "adapter checkpoint")->required();
  merge_cmd->add_option("--out", merge_out, "raw output matrix file")->required();

  // inspect
  auto* inspect_cmd = app.add_subcommand("inspect", "Print checkpoint metadata");
  std::string inspect_path;
  inspect_cmd->add_option("ckpt", inspect_path, "checkpoint path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      return run_train(d1, d2, rank, mixer, mixer_init, alpha, lr, steps, seed,
                       task_kind, out_path);
    }
    if (*sweep_cmd) return run_sweep_cmd(spec_path);
    if (*verify_cmd) return moslora::verify::report(moslora::verify::run_checks(filter));
    if (*merge_cmd) {
      moslora::cmd_merge(base_path, adapter_path, merge_out);
      std::printf("merged weight written to %s\n", merge_out.c_str());
      return 0;
    }
    if (*inspect_cmd) return run_inspect(inspect_path);
  } catch (const moslora::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
