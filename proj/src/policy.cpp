#include "ma2/policy.hpp"

#include <chrono>
#include <cmath>

namespace ma2 {

VariantKind variant_kind_from_string(const std::string& s) {
  if (s == "dp") return VariantKind::Dp;
  if (s == "dp_histact") return VariantKind::DpHistAct;
  if (s == "tf_trace") return VariantKind::TfTrace;
  if (s == "tf_full") return VariantKind::TfFull;
  throw std::invalid_argument("unknown policy variant: " + s);
}

std::string to_string(VariantKind kind) {
  switch (kind) {
    case VariantKind::Dp: return "dp";
    case VariantKind::DpHistAct: return "dp_histact";
    case VariantKind::TfTrace: return "tf_trace";
    case VariantKind::TfFull: return "tf_full";
  }
  throw std::invalid_argument("bad variant kind");
}

VariantSpec VariantSpec::defaults(VariantKind kind) {
  VariantSpec v;
  v.kind = kind;
  v.obs_history = (kind == VariantKind::DpHistAct) ? 8 : 1;
  return v;
}

int VariantSpec::channel_count() const {
  switch (kind) {
    case VariantKind::Dp: return 2;
    case VariantKind::DpHistAct: return 2 * obs_history;
    case VariantKind::TfTrace:
    case VariantKind::TfFull: return 3;
  }
  throw std::invalid_argument("bad variant kind");
}

void VariantSpec::validate() const {
  if (obs_history < 1) throw std::invalid_argument("VariantSpec: obs_history >= 1");
  if (pred_horizon < 1 || exec_horizon < 1 || exec_horizon > pred_horizon) {
    throw std::invalid_argument("VariantSpec: need 1 <= exec <= pred horizon");
  }
}

NormStats NormStats::fit(const std::vector<Demonstration>& demos) {
  Eigen::Vector3d mn = Eigen::Vector3d::Constant(
      std::numeric_limits<double>::infinity());
  Eigen::Vector3d mx = -mn;
  for (const auto& demo : demos) {
    for (const auto& a : demo.actions) {
      mn = mn.cwiseMin(a);
      mx = mx.cwiseMax(a);
    }
  }
  NormStats stats;
  // Dimensions whose span is dominated by demonstration jitter (e.g. a task
  // confined to a plane) must not be stretched to the full [-1,1] range, or
  // the denoiser spends its capacity fitting noise. Floor every span at a
  // workspace-scale minimum.
  constexpr double kMinRange = 0.05;
  for (int i = 0; i < 3; ++i) {
    const double range = mx[i] - mn[i];
    if (!std::isfinite(range)) {
      stats.lo[i] = -0.5;
      stats.hi[i] = 0.5;
      continue;
    }
    double lo = mn[i] - 0.05 * range;
    double hi = mx[i] + 0.05 * range;
    if (hi - lo < kMinRange) {
      const double c = 0.5 * (lo + hi);
      lo = c - 0.5 * kMinRange;
      hi = c + 0.5 * kMinRange;
    }
    stats.lo[i] = lo;
    stats.hi[i] = hi;
  }
  return stats;
}

Eigen::Vector3d NormStats::normalize(const Eigen::Vector3d& p) const {
  return 2.0 * (p - lo).cwiseQuotient(hi - lo) - Eigen::Vector3d::Ones();
}

Eigen::Vector3d NormStats::denormalize(const Eigen::Vector3d& p) const {
  return lo + 0.5 * (p + Eigen::Vector3d::Ones()).cwiseProduct(hi - lo);
}

ConditionedObservation build_conditioned(const VariantSpec& variant,
                                         const std::vector<Observation>& obs_window,
                                         const MotionTrace& trace,
                                         const CameraModel& cam,
                                         const FieldConfig& field_cfg,
                                         const FocusField* field,
                                         const GrayImage* trace_raster) {
  variant.validate();
  if (obs_window.empty()) {
    throw std::invalid_argument("build_conditioned: empty observation window");
  }
  if (static_cast<int>(obs_window.size()) > variant.obs_history) {
    throw std::invalid_argument("build_conditioned: window longer than history");
  }

  ConditionedObservation cond;
  // Short windows (episode start) repeat the earliest observation.
  std::vector<const Observation*> window;
  const int pad = variant.obs_history - static_cast<int>(obs_window.size());
  cond.padded = pad > 0;
  for (int i = 0; i < pad; ++i) window.push_back(&obs_window.front());
  for (const auto& o : obs_window) window.push_back(&o);

  const Observation& current = *window.back();
  const bool needs_trace = variant.kind == VariantKind::TfTrace ||
                           variant.kind == VariantKind::TfFull;

  GrayImage raster;
  FocusField focus;
  if (needs_trace) {
    if (trace_raster != nullptr) {
      raster = *trace_raster;
    } else {
      raster = rasterize_trace(project_trace(cam, trace).pixels, cam.width,
                               cam.height);
    }
    if (variant.kind == VariantKind::TfFull) {
      if (field != nullptr) {
        focus = *field;
      } else {
        focus = render_field(project_trace(cam, trace).pixels, field_cfg,
                             cam.width, cam.height);
      }
    }
  }

  switch (variant.kind) {
    case VariantKind::Dp:
      cond.channels = {current.global, current.aux};
      break;
    case VariantKind::DpHistAct:
      for (const Observation* o : window) {
        cond.channels.push_back(o->global);
        cond.channels.push_back(o->aux);
      }
      break;
    case VariantKind::TfTrace:
      cond.channels = {current.global, current.aux, raster};
      break;
    case VariantKind::TfFull:
      cond.channels = {apply_field(current.global, focus), current.aux, raster};
      break;
  }
  for (const Observation* o : window) cond.ee_history.push_back(o->ee);
  return cond;
}

Eigen::VectorXd conditioned_to_vector(const ConditionedObservation& cond,
                                      const NormStats& norm) {
  long len = 0;
  for (const auto& ch : cond.channels) len += ch.size();
  len += 3 * static_cast<long>(cond.ee_history.size());
  len += 3 * static_cast<long>(cond.past_actions.size());
  Eigen::VectorXd v(len);
  long off = 0;
  for (const auto& ch : cond.channels) {
    v.segment(off, ch.size()) =
        Eigen::Map<const Eigen::VectorXd>(ch.data(), ch.size());
    off += ch.size();
  }
  for (const auto& p : cond.ee_history) {
    v.segment<3>(off) = norm.normalize(p);
    off += 3;
  }
  for (const auto& p : cond.past_actions) {
    v.segment<3>(off) = norm.normalize(p);
    off += 3;
  }
  return v;
}

long conditioned_pixels(const VariantSpec& variant, int width, int height) {
  return static_cast<long>(variant.channel_count()) * width * height;
}

long conditioned_length(const VariantSpec& variant, int width, int height) {
  long len = conditioned_pixels(variant, width, height) + 3L * variant.obs_history;
  if (variant.append_past_actions) len += 3L * variant.obs_history;
  return len;
}

namespace {

std::vector<Observation> trailing_window(const std::deque<Observation>& window,
                                         int obs_history) {
  const int n = std::min<int>(obs_history, static_cast<int>(window.size()));
  return {window.end() - n, window.end()};
}

std::vector<Point3> trailing_actions(const std::vector<Point3>& executed,
                                     const Point3& fallback, int obs_history) {
  std::vector<Point3> out;
  out.reserve(obs_history);
  for (int j = 0; j < obs_history; ++j) {
    const long idx = static_cast<long>(executed.size()) - obs_history + j;
    out.push_back(idx >= 0 ? executed[idx]
                           : (executed.empty() ? fallback : executed.front()));
  }
  return out;
}

}  // namespace

Checkpoint train_policy(const SceneConfig& scene,
                        const std::vector<Demonstration>& demos,
                        const VariantSpec& variant, const SamplerConfig& sampler,
                        const NetShape& shape, const OptConfig& opt,
                        std::uint64_t seed, std::uint64_t dataset_hash,
                        TrainingLog* log) {
  variant.validate();
  sampler.validate();
  opt.validate();
  if (demos.empty()) throw std::invalid_argument("train_policy: empty dataset");

  Checkpoint ckpt;
  ckpt.variant = variant;
  ckpt.sampler = sampler;
  ckpt.field = scene.field;
  ckpt.norm = NormStats::fit(demos);
  ckpt.scene_hash = scene.hash();
  ckpt.dataset_hash = dataset_hash;
  ckpt.image_width = scene.width;
  ckpt.image_height = scene.height;

  const int chunk_dim = 3 * variant.pred_horizon;
  const long cond_dim = conditioned_length(variant, scene.width, scene.height);
  ckpt.net.layer_widths.clear();
  ckpt.net.layer_widths.push_back(static_cast<int>(
      cond_dim + shape.timestep_embed_dim + chunk_dim));
  for (int h : shape.hidden) ckpt.net.layer_widths.push_back(h);
  ckpt.net.layer_widths.push_back(chunk_dim);
  ckpt.net.activation = shape.activation;
  ckpt.net.timestep_embed_dim = shape.timestep_embed_dim;
  ckpt.net.validate();

  ckpt.params = init_params(ckpt.net, mix_seed(seed, /*stream=*/0x1417));
  ckpt.opt = AdamState::zeros_like(ckpt.params);

  const NoiseSchedule sched = cosine_schedule(sampler.train_steps);

  // Precompute conditioning vectors and normalized targets for every
  // (demo, step) pair; the field is built open-loop from the recorded
  // demonstration trace.
  long n_samples = 0;
  for (const auto& demo : demos) n_samples += demo.actions.size();
  // Stored single-precision: the conditioning inputs are pixel intensities
  // and normalized coordinates, and the matrix dominates training memory.
  Eigen::MatrixXf conds(cond_dim, n_samples);
  Eigen::MatrixXd chunks(chunk_dim, n_samples);
  long col = 0;
  for (const auto& demo : demos) {
    const long T = static_cast<long>(demo.actions.size());
    MotionTrace prefix;
    std::deque<Observation> window;
    FocusField field =
        FocusField::empty(scene.width, scene.height, scene.field);
    GrayImage raster = GrayImage::Zero(scene.height, scene.width);
    Pixel last_px;
    bool has_px = false;
    for (long t = 0; t < T; ++t) {
      prefix.append(demo.trace.points[t].timestep, demo.trace.points[t].position);
      const Point3 p_cam = world_to_camera(
          scene.global_cam.world_to_camera, demo.trace.points[t].position);
      if (p_cam.z() > 1e-9) {
        const Pixel px = project(scene.global_cam, p_cam);
        field = extend_field(field, px, scene.field);
        rasterize_extend(raster, has_px ? &last_px : nullptr, px);
        last_px = px;
        has_px = true;
      }
      window.push_back(demo.observations[t]);
      while (static_cast<int>(window.size()) > variant.obs_history) {
        window.pop_front();
      }
      ConditionedObservation cond = build_conditioned(
          variant, trailing_window(window, variant.obs_history), prefix,
          scene.global_cam, scene.field, &field, &raster);
      if (variant.append_past_actions) {
        std::vector<Point3> executed(demo.actions.begin(),
                                     demo.actions.begin() + t);
        cond.past_actions = trailing_actions(executed, demo.observations[0].ee,
                                             variant.obs_history);
      }
      conds.col(col) = conditioned_to_vector(cond, ckpt.norm).cast<float>();
      for (int j = 0; j < variant.pred_horizon; ++j) {
        const long idx = std::min(t + j, T - 1);
        chunks.col(col).segment<3>(3 * j) = ckpt.norm.normalize(demo.actions[idx]);
      }
      ++col;
    }
  }

  const int embed_dim = ckpt.net.timestep_embed_dim;
  const long input_dim = ckpt.net.input_width();
  Rng rng(mix_seed(seed, /*stream=*/0x7124));
  std::vector<long> order(n_samples);
  for (long i = 0; i < n_samples; ++i) order[i] = i;

  // The optimization loop runs entirely in single precision: wide
  // conditioning makes training memory-bandwidth bound, so halving the
  // bytes of the parameters, gradients, and Adam moments roughly halves
  // the wall-clock per epoch. Parameters are widened back at the end.
  ParamsF params_f = cast_params(ckpt.params);
  AdamStateF opt_f = AdamStateF::zeros_like(params_f);

  if (log != nullptr) log->epoch_loss.clear();
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (long start = 0; start < n_samples; start += opt.batch_size) {
      const long B = std::min<long>(opt.batch_size, n_samples - start);
      Eigen::MatrixXf inputs(input_dim, B);
      Eigen::MatrixXf targets(chunk_dim, B);
      for (long b = 0; b < B; ++b) {
        const long i = order[start + b];
        inputs.col(b).head(cond_dim) = conds.col(i);
        const Eigen::VectorXd eps = rng.normal_vector(chunk_dim);
        if (sampler.kind == SamplerKind::FlowMatching) {
          const double t = rng.uniform();
          inputs.col(b).segment(cond_dim, embed_dim) =
              embed_fraction(t, embed_dim).cast<float>();
          inputs.col(b).tail(chunk_dim) =
              ((1.0 - t) * eps + t * chunks.col(i)).cast<float>();
          targets.col(b) = (chunks.col(i) - eps).cast<float>();
        } else {
          const int k = 1 + static_cast<int>(rng.uniform_int(sched.K));
          inputs.col(b).segment(cond_dim, embed_dim) =
              embed_timestep(k, sched.K, embed_dim).cast<float>();
          inputs.col(b).tail(chunk_dim) =
              add_noise(chunks.col(i), k, eps, sched).cast<float>();
          targets.col(b) = eps.cast<float>();
        }
      }
      BatchCacheF cache;
      const Eigen::MatrixXf out = forward_batch(ckpt.net, params_f, inputs, &cache);
      const Eigen::MatrixXf diff = out - targets;
      const double loss =
          static_cast<double>(diff.squaredNorm()) / static_cast<double>(B);
      if (!std::isfinite(loss)) {
        throw NonFiniteLoss("train_policy: non-finite loss at epoch " +
                            std::to_string(epoch) + ", batch offset " +
                            std::to_string(start));
      }
      epoch_loss += loss * static_cast<double>(B);
      const GradsF grads = backward_batch(
          ckpt.net, params_f, cache,
          (2.0f / static_cast<float>(B)) * diff);
      adamw_step(params_f, grads, opt, opt_f);
    }
    if (log != nullptr) {
      log->epoch_loss.push_back(epoch_loss / static_cast<double>(n_samples));
    }
  }
  ckpt.params = widen_params(params_f);
  ckpt.opt.m = widen_params(opt_f.m);
  ckpt.opt.v = widen_params(opt_f.v);
  ckpt.opt.step = opt_f.step;
  return ckpt;
}

ActionChunk sample_chunk(const Checkpoint& ckpt, const Eigen::VectorXd& cond,
                         const NoiseSchedule& sched, Rng& rng) {
  const int dim = 3 * ckpt.variant.pred_horizon;
  switch (ckpt.sampler.kind) {
    case SamplerKind::Ddpm:
      return ddpm_sample(net_noise_predictor(ckpt.net, ckpt.params, cond, sched),
                         sched, rng, dim);
    case SamplerKind::Ddim:
      return ddim_sample(net_noise_predictor(ckpt.net, ckpt.params, cond, sched),
                         sched, ckpt.sampler.sample_steps,
                         rng.normal_vector(dim));
    case SamplerKind::FlowMatching:
      return fm_sample(net_velocity_field(ckpt.net, ckpt.params, cond),
                       ckpt.sampler.sample_steps, rng.normal_vector(dim));
  }
  throw std::invalid_argument("bad sampler kind");
}

RolloutResult rollout(const SceneConfig& scene, const TaskSpec& task,
                      const Checkpoint& ckpt, std::uint64_t seed,
                      const RolloutOptions& options) {
  if (ckpt.scene_hash != scene.hash()) throw SceneMismatch();
  const NoiseSchedule sched = cosine_schedule(ckpt.sampler.train_steps);
  const int max_steps =
      options.max_steps > 0 ? options.max_steps : task.horizon_cap;
  const int n_stages = static_cast<int>(task.visit_order.size());

  Rng rng(mix_seed(seed, /*stream=*/0x2011));
  RolloutResult result;
  EnvState state = reset(scene, task, seed, options.distractor_count);
  result.trajectory.push_back(state);
  result.trace.append(0, state.ee);

  FocusField field = FocusField::empty(scene.width, scene.height, ckpt.field);
  GrayImage raster = GrayImage::Zero(scene.height, scene.width);
  Pixel last_px;
  bool has_px = false;
  auto extend_with = [&](const Point3& p) {
    const Point3 p_cam = world_to_camera(scene.global_cam.world_to_camera, p);
    if (p_cam.z() <= 1e-9) return;
    const Pixel px = project(scene.global_cam, p_cam);
    field = extend_field(field, px, ckpt.field);
    rasterize_extend(raster, has_px ? &last_px : nullptr, px);
    last_px = px;
    has_px = true;
  };
  extend_with(state.ee);

  std::deque<Observation> window;
  window.push_back(observe(scene, task, state));
  std::vector<Point3> executed;

  while (state.step_count < max_steps && state.stage_index < n_stages) {
    const auto t0 = std::chrono::steady_clock::now();
    ConditionedObservation cond = build_conditioned(
        ckpt.variant, trailing_window(window, ckpt.variant.obs_history),
        result.trace, scene.global_cam, ckpt.field, &field, &raster);
    if (ckpt.variant.append_past_actions) {
      cond.past_actions =
          trailing_actions(executed, state.ee, ckpt.variant.obs_history);
    }
    const Eigen::VectorXd vec = conditioned_to_vector(cond, ckpt.norm);
    const ActionChunk chunk = sample_chunk(ckpt, vec, sched, rng);
    if (options.collect_timing) {
      const auto t1 = std::chrono::steady_clock::now();
      result.per_step_ms.push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());
    }

    for (int j = 0; j < ckpt.variant.exec_horizon &&
                    state.step_count < max_steps && state.stage_index < n_stages;
         ++j) {
      const Point3 target =
          ckpt.norm.denormalize(chunk.segment<3>(3 * j));
      executed.push_back(target);
      state = step(scene, task, state, target);
      result.trajectory.push_back(state);
      result.trace.append(state.step_count, state.ee);
      extend_with(state.ee);
      window.push_back(observe(scene, task, state));
      while (static_cast<int>(window.size()) > ckpt.variant.obs_history) {
        window.pop_front();
      }
      for (int s : options.snapshot_steps) {
        if (s == state.step_count) {
          result.field_snapshots.emplace_back(s, field);
        }
      }
    }
  }

  const SuccessResult sr = check_success(result.trajectory, task);
  result.success = sr.success;
  result.stages_completed = sr.stages_completed;
  return result;
}

AmbiguityContext ambiguity_context(const SceneConfig& scene, const TaskSpec& task,
                                   const AmbiguitySpec& amb) {
  const Point3 waypoint = task.waypoints.at(amb.waypoint);
  AmbiguityContext ctx;
  ctx.successor_a = task.waypoints.at(amb.successor_a);
  ctx.successor_b = task.waypoints.at(amb.successor_b);

  // Noiseless expert replay; capture the execution history at each visit.
  Rng rng(0);
  EnvState state = reset(scene, task, /*seed=*/0, /*distractor_count=*/0);
  MotionTrace trace;
  trace.append(0, state.ee);
  auto capture = [&](int stage) {
    MotionTrace t = trace;
    t.points.back().position = waypoint;  // snap to the exact waypoint
    return t;
  };
  bool have_a = false, have_b = false;
  if (amb.stage_a == 0) {
    ctx.trace_a = capture(0);
    have_a = true;
  }
  const int n_stages = static_cast<int>(task.visit_order.size());
  while (state.stage_index < n_stages && (!have_a || !have_b)) {
    const Point3 action = expert_policy(scene, task, state, rng, /*noise=*/0.0);
    state = step(scene, task, state, action);
    trace.append(state.step_count, state.ee);
    if (!have_a && state.stage_index == amb.stage_a &&
        (state.ee - waypoint).norm() <= task.success_tolerance) {
      ctx.trace_a = capture(amb.stage_a);
      have_a = true;
    }
    if (!have_b && state.stage_index == amb.stage_b &&
        (state.ee - waypoint).norm() <= task.success_tolerance) {
      ctx.trace_b = capture(amb.stage_b);
      have_b = true;
    }
  }
  if (!have_a || !have_b) {
    throw std::runtime_error("ambiguity_context: expert replay never reached "
                             "the requested stages");
  }
  ctx.state = reset(scene, task, /*seed=*/0, /*distractor_count=*/0);
  ctx.state.ee = waypoint;
  ctx.state.stage_index = amb.stage_a;
  return ctx;
}

ModePurity mode_purity(const SceneConfig& scene, const TaskSpec& task,
                       const Checkpoint& ckpt, const AmbiguityContext& ctx,
                       int n_samples, std::uint64_t seed,
                       bool first_step_metric) {
  if (ckpt.scene_hash != scene.hash()) throw SceneMismatch();
  if ((ctx.successor_a - ctx.successor_b).norm() <= task.success_tolerance) {
    throw DegenerateModes();
  }
  const NoiseSchedule sched = cosine_schedule(ckpt.sampler.train_steps);
  const Observation obs = observe(scene, task, ctx.state);

  auto run = [&](const MotionTrace& trace, const Point3& correct,
                 const Point3& other, std::uint64_t stream) {
    // Reconstruct the observation window from the trace tail; states along
    // the history differ only in EE position.
    std::vector<Observation> window;
    const int h = ckpt.variant.obs_history;
    const long n = static_cast<long>(trace.points.size());
    for (long i = std::max<long>(0, n - h); i + 1 < n; ++i) {
      EnvState past = ctx.state;
      past.ee = trace.points[i].position;
      window.push_back(observe(scene, task, past));
    }
    window.push_back(obs);
    ConditionedObservation cond =
        build_conditioned(ckpt.variant, window, trace, scene.global_cam,
                          ckpt.field);
    if (ckpt.variant.append_past_actions) {
      std::vector<Point3> past;
      for (long i = std::max<long>(1, n - h); i < n; ++i) {
        past.push_back(trace.points[i].position);
      }
      cond.past_actions = trailing_actions(past, ctx.state.ee, h);
    }
    const Eigen::VectorXd vec = conditioned_to_vector(cond, ckpt.norm);
    Rng rng(mix_seed(seed, stream));
    int hits = 0;
    for (int i = 0; i < n_samples; ++i) {
      const ActionChunk chunk = sample_chunk(ckpt, vec, sched, rng);
      double d_correct, d_other;
      if (first_step_metric) {
        const Point3 first = ckpt.norm.denormalize(chunk.segment<3>(0));
        const Point3 dir = (first - ctx.state.ee).normalized();
        d_correct = -dir.dot((correct - ctx.state.ee).normalized());
        d_other = -dir.dot((other - ctx.state.ee).normalized());
      } else {
        const Point3 final_pos = ckpt.norm.denormalize(
            chunk.segment<3>(3 * (ckpt.variant.pred_horizon - 1)));
        d_correct = (final_pos - correct).norm();
        d_other = (final_pos - other).norm();
      }
      if (d_correct < d_other) ++hits;
    }
    return static_cast<double>(hits) / n_samples;
  };

  ModePurity purity;
  purity.purity_a = run(ctx.trace_a, ctx.successor_a, ctx.successor_b, 1);
  purity.purity_b = run(ctx.trace_b, ctx.successor_b, ctx.successor_a, 2);
  return purity;
}

}  // namespace ma2
