#pragma once

#include <string>
#include <vector>

#include "ma2/policy.hpp"
#include "ma2/reports.hpp"

namespace ma2 {

struct EvalOptions {
  int n_trials = 50;
  int distractor_count = 0;
  // Wall-clock timing breaks byte-identical re-runs, so eval reports
  // latency_ms = 0 unless explicitly enabled; the benchmark measures real
  // timing separately.
  bool collect_timing = false;
};

// n_trials closed-loop rollouts with per-trial seeds derived from
// (seed, task, variant, sampler, trial index).
ResultsRow evaluate_policy(const SceneConfig& scene, const TaskSpec& task,
                           const Checkpoint& ckpt, std::uint64_t seed,
                           const EvalOptions& opts);

// Demonstration budget per task (30 for the two short tasks, 50 for the
// six-stage drawer task).
int default_demo_count(const std::string& task_name);

// Dataset generation + training for one condition. epochs < 0 uses the
// optimizer default (150); epochs == 0 returns the untrained initialization.
Checkpoint train_variant(const SceneConfig& scene, const TaskSpec& task,
                         const VariantSpec& variant, const SamplerConfig& sampler,
                         std::uint64_t seed, int epochs = -1,
                         TrainingLog* log = nullptr);

struct BenchRow {
  std::string variant;
  double median_decision_ms = 0.0;
  double median_field_ms = 0.0;  // incremental field/raster upkeep, tf only
  long params = 0;
  long cond_pixels = 0;   // conditioned-input length (memory proxy)
  long cond_length = 0;   // full conditioning vector length
};

// Median per-decision latency over >= n_decisions warmed-up decisions of a
// live closed-loop run; field upkeep is timed separately.
BenchRow bench_decisions(const SceneConfig& scene, const TaskSpec& task,
                         const Checkpoint& ckpt, int n_decisions, int warmup,
                         std::uint64_t seed);

}  // namespace ma2
