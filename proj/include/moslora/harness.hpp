// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moslora/adapter.hpp"
#include "moslora/matrix.hpp"
#include "moslora/training.hpp"

namespace moslora {

/// Planted-low-rank teacher: y = x * (W0 + A* W* B*) + noise.
enum class TargetKind { LowRankPlain, LowRankMixed };

struct TaskSpec {
  Index d1 = 16;
  Index d2 = 16;
  Index n_train = 256;
  Index n_eval = 64;
  Index k = 4;  ///< planted rank
  TargetKind target_kind = TargetKind::LowRankPlain;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TaskData {
  Mat w0;       ///< d1 x d2, entries N(0, 1/d1)
  Mat x_train;  ///< n_train x d1
  Mat y_train;
  Mat x_eval;   ///< n_eval x d1
  Mat y_eval;
};

/// The four comparable methods. Declaration order is the report sort order.
enum class Method {
  LoRA,             ///< fixed identity mixer
  TSMixing,         ///< fixed butterfly mixer
  MoSLoRAFixedOrth, ///< fixed orthogonal mixer
  MoSLoRALearnable, ///< learnable mixer, one row per init
};

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

struct SweepSpec {
  std::vector<Method> methods;
  std::vector<InitKind> inits;  ///< mixer inits for the learnable method
  std::vector<Index> ranks;
  std::vector<std::uint64_t> seeds;  ///< adapter seeds, one run per seed
  TrainConfig train;
  TaskSpec task;
  /// Branch-scale numerator; default is 2*rank per cell.
  std::optional<double> alpha;
  /// When false (default) wall_ms is reported as 0 so report bytes are
  /// reproducible run to run.
  bool record_timings = false;

  void validate() const;
};

constexpr std::int64_t kStepsNever = -1;

struct ReportRow {
  Method method;
  std::optional<InitKind> mixer_init;  ///< empty for fixed-mixer methods
  Index rank;
  std::uint64_t seed;
  double final_loss;
  double best_loss;
  std::int64_t steps_to_90pct;  ///< first step with loss <= 0.1*loss0; kStepsNever if none
  std::int64_t param_count;
  std::int64_t wall_ms;
  bool diverged;  ///< encoded in the CSV as a non-finite final_loss
};

struct Report {
  std::vector<ReportRow> rows;
};

/// Deterministic synthetic regression task; bitwise reproducible per seed.
/// Throws ConfigError when k > min(d1, d2) or n_train < 1.
TaskData make_task(const TaskSpec& spec);

/// Trains every (method, init, rank, seed) cell on the task and collects one
/// row each, sorted by (method, init, rank, seed).
Report run_sweep(const SweepSpec& spec);

/// CSV with header
/// method,mixer_init,rank,seed,final_loss,best_loss,steps_to_90pct,param_count,wall_ms
/// Reals carry 17 significant digits; lines end with LF.
std::string to_csv(const Report& report);
void emit_csv(const Report& report, const std::filesystem::path& path);

/// Parses a sweep spec from the key=value file format accepted by the CLI.
SweepSpec parse_sweep_file(const std::filesystem::path& path,
                           std::string* out_csv_path = nullptr);

}  // namespace moslora
