#include "ma2/experiments.hpp"

#include <algorithm>
#include <chrono>

#include "ma2/config.hpp"

namespace ma2 {

ResultsRow evaluate_policy(const SceneConfig& scene, const TaskSpec& task,
                           const Checkpoint& ckpt, std::uint64_t seed,
                           const EvalOptions& opts) {
  if (opts.n_trials < 1) throw std::invalid_argument("evaluate_policy: n_trials >= 1");
  ResultsRow row;
  row.task = task.name;
  row.variant = to_string(ckpt.variant.kind);
  row.sampler = to_string(ckpt.sampler.kind);
  row.trials = opts.n_trials;
  row.params = ckpt.params.count();

  const std::uint64_t condition =
      fnv1a(task.name + '/' + row.variant + '/' + row.sampler + '/' +
            std::to_string(opts.distractor_count));
  double stage_sum = 0.0;
  double latency_sum = 0.0;
  long latency_n = 0;
  RolloutOptions ropts;
  ropts.distractor_count = opts.distractor_count;
  ropts.collect_timing = opts.collect_timing;
  for (int trial = 0; trial < opts.n_trials; ++trial) {
    const RolloutResult result =
        rollout(scene, task, ckpt, mix_seed(seed, condition, trial), ropts);
    if (result.success) ++row.successes;
    stage_sum += result.stages_completed;
    for (double ms : result.per_step_ms) {
      latency_sum += ms;
      ++latency_n;
    }
  }
  row.success_rate =
      static_cast<double>(row.successes) / static_cast<double>(row.trials);
  row.mean_stages = stage_sum / static_cast<double>(row.trials);
  row.latency_ms = latency_n > 0 ? latency_sum / static_cast<double>(latency_n)
                                 : 0.0;
  return row;
}

int default_demo_count(const std::string& task_name) {
  // The drawer task has twice as many stages as the others, so its default
  // dataset is proportionally larger.
  return task_name == "two_drawer" ? 50 : 30;
}

Checkpoint train_variant(const SceneConfig& scene, const TaskSpec& task,
                         const VariantSpec& variant, const SamplerConfig& sampler,
                         std::uint64_t seed, int epochs, TrainingLog* log) {
  const int n_demos = default_demo_count(task.name);
  const std::vector<Demonstration> demos = generate_dataset(
      scene, task, n_demos, mix_seed(seed, fnv1a("demos/" + task.name)),
      scene.demo_noise);
  OptConfig opt;
  if (epochs >= 0) {
    opt.epochs = epochs;
  } else {
    // Demonstrations are short, so a fixed epoch count would leave small
    // datasets with far fewer gradient updates than large ones. Size the
    // epoch count to a flat optimizer-update budget instead.
    constexpr long kTargetUpdates = 30000;
    long n_samples = 0;
    for (const auto& demo : demos) {
      n_samples += static_cast<long>(demo.actions.size());
    }
    const long updates_per_epoch =
        std::max<long>(1, (n_samples + opt.batch_size - 1) / opt.batch_size);
    opt.epochs = static_cast<int>(
        (kTargetUpdates + updates_per_epoch - 1) / updates_per_epoch);
  }
  return train_policy(scene, demos, variant, sampler, NetShape{}, opt,
                      mix_seed(seed, fnv1a("train/" + task.name + '/' +
                                           to_string(variant.kind) + '/' +
                                           to_string(sampler.kind))),
                      /*dataset_hash=*/0, log);
}

BenchRow bench_decisions(const SceneConfig& scene, const TaskSpec& task,
                         const Checkpoint& ckpt, int n_decisions, int warmup,
                         std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  BenchRow bench;
  bench.variant = to_string(ckpt.variant.kind);
  bench.params = ckpt.params.count();
  bench.cond_pixels =
      conditioned_pixels(ckpt.variant, ckpt.image_width, ckpt.image_height);
  bench.cond_length =
      conditioned_length(ckpt.variant, ckpt.image_width, ckpt.image_height);

  const NoiseSchedule sched = cosine_schedule(ckpt.sampler.train_steps);
  const bool needs_trace = ckpt.variant.kind == VariantKind::TfTrace ||
                           ckpt.variant.kind == VariantKind::TfFull;
  Rng rng(mix_seed(seed, /*stream=*/0xBE7C));
  EnvState state = reset(scene, task, seed, /*distractor_count=*/0);
  MotionTrace trace;
  trace.append(0, state.ee);
  FocusField field = FocusField::empty(scene.width, scene.height, ckpt.field);
  GrayImage raster = GrayImage::Zero(scene.height, scene.width);
  Pixel last_px;
  bool has_px = false;
  std::vector<double> field_ms_acc;  // one entry per decision
  double pending_field_ms = 0.0;
  auto extend_with = [&](const Point3& p) {
    if (!needs_trace) return;
    const auto t0 = clock::now();
    const Point3 p_cam = world_to_camera(scene.global_cam.world_to_camera, p);
    if (p_cam.z() > 1e-9) {
      const Pixel px = project(scene.global_cam, p_cam);
      field = extend_field(field, px, ckpt.field);
      rasterize_extend(raster, has_px ? &last_px : nullptr, px);
      last_px = px;
      has_px = true;
    }
    pending_field_ms +=
        std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  extend_with(state.ee);

  std::deque<Observation> window;
  window.push_back(observe(scene, task, state));
  std::vector<Point3> executed;
  std::vector<double> decision_ms;
  decision_ms.reserve(n_decisions);
  for (int d = 0; d < warmup + n_decisions; ++d) {
    const auto t0 = clock::now();
    const double field_ms_before = pending_field_ms;
    std::vector<Observation> win(
        window.end() -
            std::min<std::ptrdiff_t>(ckpt.variant.obs_history, window.size()),
        window.end());
    ConditionedObservation cond =
        build_conditioned(ckpt.variant, win, trace, scene.global_cam,
                          ckpt.field, needs_trace ? &field : nullptr,
                          needs_trace ? &raster : nullptr);
    if (ckpt.variant.append_past_actions) {
      cond.past_actions.assign(ckpt.variant.obs_history, state.ee);
    }
    const Eigen::VectorXd vec = conditioned_to_vector(cond, ckpt.norm);
    const ActionChunk chunk = sample_chunk(ckpt, vec, sched, rng);
    const double ms =
        std::chrono::duration<double, std::milli>(clock::now() - t0).count();

    pending_field_ms = 0.0;
    for (int j = 0; j < ckpt.variant.exec_horizon; ++j) {
      const Point3 target = ckpt.norm.denormalize(chunk.segment<3>(3 * j));
      executed.push_back(target);
      state = step(scene, task, state, target);
      trace.append(state.step_count, state.ee);
      extend_with(state.ee);
      window.push_back(observe(scene, task, state));
      while (static_cast<int>(window.size()) > ckpt.variant.obs_history) {
        window.pop_front();
      }
    }
    if (d >= warmup) {
      decision_ms.push_back(ms + field_ms_before);
      field_ms_acc.push_back(field_ms_before);
    }
  }

  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n == 0 ? 0.0
                  : (n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
  };
  bench.median_decision_ms = median(decision_ms);
  bench.median_field_ms = needs_trace ? median(field_ms_acc) : 0.0;
  return bench;
}

}  // namespace ma2
