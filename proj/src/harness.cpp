// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#include "moslora/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <tuple>

#include "moslora/errors.hpp"
#include "moslora/rng.hpp"

namespace moslora {

void TaskSpec::validate() const {
  if (d1 < 1 || d2 < 1) {
    throw ConfigError("task spec: d1 and d2 must be >= 1");
  }
  if (k < 1 || k > std::min(d1, d2)) {
    throw ConfigError("task spec: k must satisfy 1 <= k <= min(d1, d2), got k=" +
                      std::to_string(k) + " with d1=" + std::to_string(d1) +
                      " d2=" + std::to_string(d2));
  }
  if (n_train < 1) {
    throw ConfigError("task spec: n_train must be >= 1");
  }
  if (n_eval < 0) {
    throw ConfigError("task spec: n_eval must be >= 0");
  }
  if (noise_std < 0.0) {
    throw ConfigError("task spec: noise_std must be >= 0");
  }
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::LoRA: return "lora";
    case Method::TSMixing: return "ts-mixing";
    case Method::MoSLoRAFixedOrth: return "moslora-fixed-orth";
    case Method::MoSLoRALearnable: return "moslora-learnable";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "lora") return Method::LoRA;
  if (name == "ts-mixing") return Method::TSMixing;
  if (name == "moslora-fixed-orth") return Method::MoSLoRAFixedOrth;
  if (name == "moslora-learnable") return Method::MoSLoRALearnable;
  throw ConfigError("unknown method: '" + std::string(name) +
                    "' (expected lora|ts-mixing|moslora-fixed-orth|moslora-learnable)");
}

void SweepSpec::validate() const {
  if (methods.empty()) throw ConfigError("sweep spec: methods must be non-empty");
  if (ranks.empty()) throw ConfigError("sweep spec: ranks must be non-empty");
  if (seeds.empty()) throw ConfigError("sweep spec: seeds must be non-empty");
  const bool has_learnable =
      std::find(methods.begin(), methods.end(), Method::MoSLoRALearnable) !=
      methods.end();
  if (has_learnable && inits.empty()) {
    throw ConfigError("sweep spec: inits must be non-empty when moslora-learnable is swept");
  }
  const bool has_butterfly =
      std::find(methods.begin(), methods.end(), Method::TSMixing) != methods.end();
  if (has_butterfly) {
    for (Index r : ranks) {
      if (r % 2 != 0) {
        throw ConfigError("sweep spec: ts-mixing requires even ranks, got r=" +
                          std::to_string(r));
      }
    }
  }
  train.validate();
  task.validate();
}

namespace {

Mat fill_normal_stream(Rng stream, Index rows, Index cols, double std_dev) {
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = std_dev * stream.normal();
    }
  }
  return m;
}

}  // namespace

TaskData make_task(const TaskSpec& spec) {
  spec.validate();
  Rng root(spec.seed);

  TaskData t;
  const double w0_std = 1.0 / std::sqrt(static_cast<double>(spec.d1));
  t.w0 = fill_normal_stream(root.stream("w0"), spec.d1, spec.d2, w0_std);

  Mat a_star = fill_normal_stream(root.stream("a_star"), spec.d1, spec.k, 1.0);
  Mat b_star = fill_normal_stream(root.stream("b_star"), spec.k, spec.d2, 1.0);
  Mat w_star = spec.target_kind == TargetKind::LowRankPlain
                   ? Mat(Mat::Identity(spec.k, spec.k))
                   : fill_normal_stream(root.stream("w_star"), spec.k, spec.k, 1.0);
  Mat planted = matmul(matmul(a_star, w_star), b_star);
  Mat teacher = t.w0 + planted;

  t.x_train = fill_normal_stream(root.stream("x_train"), spec.n_train, spec.d1, 1.0);
  t.y_train = matmul(t.x_train, teacher);
  if (spec.noise_std > 0.0) {
    t.y_train += fill_normal_stream(root.stream("noise_train"), spec.n_train,
                                    spec.d2, spec.noise_std);
  }
  if (spec.n_eval > 0) {
    t.x_eval = fill_normal_stream(root.stream("x_eval"), spec.n_eval, spec.d1, 1.0);
    t.y_eval = matmul(t.x_eval, teacher);
    if (spec.noise_std > 0.0) {
      t.y_eval += fill_normal_stream(root.stream("noise_eval"), spec.n_eval,
                                     spec.d2, spec.noise_std);
    }
  }
  return t;
}

namespace {

struct Cell {
  Method method;
  std::optional<InitKind> init;
  Index rank;
  std::uint64_t seed;
};

MixerKind cell_mixer(const Cell& cell) {
  switch (cell.method) {
    case Method::LoRA: return MixerKind::fixed_identity();
    case Method::TSMixing: return MixerKind::fixed_butterfly();
    case Method::MoSLoRAFixedOrth: return MixerKind::fixed_orthogonal();
    case Method::MoSLoRALearnable: return MixerKind::learnable(*cell.init);
  }
  throw ConfigError("unknown method");
}

std::int64_t steps_to_90pct(const TrainLog& log) {
  if (log.records.empty()) return kStepsNever;
  const double threshold = 0.1 * log.records.front().loss;
  for (const auto& rec : log.records) {
    if (std::isfinite(rec.loss) && rec.loss <= threshold) return rec.step;
  }
  return kStepsNever;
}

}  // namespace

Report run_sweep(const SweepSpec& spec) {
  spec.validate();
  TaskData task = make_task(spec.task);

  std::vector<Cell> cells;
  for (Method m : spec.methods) {
    if (m == Method::MoSLoRALearnable) {
      for (InitKind init : spec.inits) {
        for (Index r : spec.ranks) {
          for (std::uint64_t s : spec.seeds) cells.push_back({m, init, r, s});
        }
      }
    } else {
      for (Index r : spec.ranks) {
        for (std::uint64_t s : spec.seeds) cells.push_back({m, std::nullopt, r, s});
      }
    }
  }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    const auto key = [](const Cell& c) {
      return std::make_tuple(static_cast<int>(c.method),
                             c.init ? static_cast<int>(*c.init) : -1, c.rank,
                             c.seed);
    };
    return key(a) < key(b);
  });

  Report report;
  report.rows.reserve(cells.size());
  for (const Cell& cell : cells) {
    AdapterConfig cfg;
    cfg.d1 = spec.task.d1;
    cfg.d2 = spec.task.d2;
    cfg.r = cell.rank;
    cfg.mixer = cell_mixer(cell);
    cfg.alpha = spec.alpha.value_or(2.0 * static_cast<double>(cell.rank));
    cfg.seed = cell.seed;
    Adapter adapter = new_adapter(cfg);

    const auto start = std::chrono::steady_clock::now();
    TrainLog log = train(adapter, task.w0, task.x_train, task.y_train, spec.train);
    const auto end = std::chrono::steady_clock::now();

    ReportRow row;
    row.method = cell.method;
    row.mixer_init = cell.init;
    row.rank = cell.rank;
    row.seed = cell.seed;
    row.final_loss = log.records.back().loss;
    row.best_loss = std::numeric_limits<double>::infinity();
    for (const auto& rec : log.records) {
      if (std::isfinite(rec.loss)) row.best_loss = std::min(row.best_loss, rec.loss);
    }
    row.steps_to_90pct = steps_to_90pct(log);
    row.param_count = param_count(cfg);
    row.wall_ms =
        spec.record_timings
            ? std::chrono::duration_cast<std::chrono::milliseconds>(end - start)
                  .count()
            : 0;
    row.diverged = log.diverged;
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_csv(const Report& report) {
  std::string out =
      "method,mixer_init,rank,seed,final_loss,best_loss,steps_to_90pct,"
      "param_count,wall_ms\n";
  for (const auto& row : report.rows) {
    out += method_name(row.method);
    out += ',';
    out += row.mixer_init ? init_name(*row.mixer_init) : std::string_view("-");
    out += ',';
    out += std::to_string(row.rank);
    out += ',';
    out += std::to_string(row.seed);
    out += ',';
    out += fmt_real(row.final_loss);
    out += ',';
    out += fmt_real(row.best_loss);
    out += ',';
    out += row.steps_to_90pct == kStepsNever ? "never"
                                             : std::to_string(row.steps_to_90pct);
    out += ',';
    out += std::to_string(row.param_count);
    out += ',';
    out += std::to_string(row.wall_ms);
    out += '\n';
  }
  return out;
}

void emit_csv(const Report& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("emit_csv: cannot open '" + path.string() + "' for writing");
  const std::string body = to_csv(report);
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!f) throw IoError("emit_csv: write failed for '" + path.string() + "'");
}

namespace {

std::string trim(std::string s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.erase(s.begin());
  while (!s.empty() && is_space(s.back())) s.pop_back();
  return s;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace

SweepSpec parse_sweep_file(const std::filesystem::path& path,
                           std::string* out_csv_path) {
  std::ifstream f(path);
  if (!f) throw IoError("sweep spec: cannot open '" + path.string() + "'");

  SweepSpec spec;
  spec.train.eta = 0.05;
  spec.train.steps = 1000;
  if (out_csv_path) *out_csv_path = "sweep.csv";

  bool noise_given = false;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("sweep spec " + path.string() + ":" +
                        std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "methods") {
        for (const auto& name : split_list(value))
          spec.methods.push_back(parse_method(name));
      } else if (key == "inits") {
        for (const auto& name : split_list(value))
          spec.inits.push_back(parse_init(name));
      } else if (key == "ranks") {
        for (const auto& item : split_list(value))
          spec.ranks.push_back(std::stoll(item));
      } else if (key == "seeds") {
        for (const auto& item : split_list(value))
          spec.seeds.push_back(std::stoull(item));
      } else if (key == "eta") {
        spec.train.eta = std::stod(value);
      } else if (key == "steps") {
        spec.train.steps = std::stoi(value);
      } else if (key == "train_seed") {
        spec.train.seed = std::stoull(value);
      } else if (key == "d1") {
        spec.task.d1 = std::stoll(value);
      } else if (key == "d2") {
        spec.task.d2 = std::stoll(value);
      } else if (key == "n_train") {
        spec.task.n_train = std::stoll(value);
      } else if (key == "n_eval") {
        spec.task.n_eval = std::stoll(value);
      } else if (key == "k") {
        spec.task.k = std::stoll(value);
      } else if (key == "target") {
        if (value == "plain") spec.task.target_kind = TargetKind::LowRankPlain;
        else if (value == "mixed") spec.task.target_kind = TargetKind::LowRankMixed;
        else throw ConfigError("target must be plain|mixed, got '" + value + "'");
      } else if (key == "noise") {
        spec.task.noise_std = std::stod(value);
        noise_given = true;
      } else if (key == "task_seed") {
        spec.task.seed = std::stoull(value);
      } else if (key == "alpha") {
        spec.alpha = std::stod(value);
      } else if (key == "timings") {
        spec.record_timings = (value == "true" || value == "1");
      } else if (key == "out") {
        if (out_csv_path) *out_csv_path = value;
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("sweep spec " + path.string() + ":" +
                        std::to_string(line_no) + ": bad value for '" + key +
                        "': " + e.what());
    }
  }
  // Plain targets default to noiseless exact recovery; mixed-target
  // comparisons carry a little observation noise unless the file pins it.
  if (!noise_given && spec.task.target_kind == TargetKind::LowRankMixed) {
    spec.task.noise_std = 0.01;
  }
  return spec;
}

}  // namespace moslora
