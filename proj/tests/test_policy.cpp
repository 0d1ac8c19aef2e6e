#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ma2/checkpoint_io.hpp"
#include "ma2/dataset_io.hpp"
#include "ma2/serial.hpp"
#include "ma2/policy.hpp"

using namespace ma2;

namespace {

const SceneConfig& scene() {
  static const SceneConfig s = SceneConfig::default_scene();
  return s;
}

const TaskSpec& task1() { return scene().task("alternating_place"); }

const std::vector<Demonstration>& demos() {
  static const std::vector<Demonstration> d =
      generate_dataset(scene(), task1(), 5, 17, scene().demo_noise);
  return d;
}

Checkpoint train_tiny(VariantKind kind, int epochs, std::uint64_t seed,
                      TrainingLog* log = nullptr) {
  const VariantSpec variant = VariantSpec::defaults(kind);
  SamplerConfig sampler;
  OptConfig opt;
  opt.epochs = epochs;
  return train_policy(scene(), demos(), variant, sampler, NetShape{}, opt,
                      seed, /*dataset_hash=*/42, log);
}

const Checkpoint& untrained_tf() {
  static const Checkpoint c = train_tiny(VariantKind::TfFull, 0, 9);
  return c;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("variant defaults and channel counts") {
  CHECK(VariantSpec::defaults(VariantKind::Dp).channel_count() == 2);
  CHECK(VariantSpec::defaults(VariantKind::DpHistAct).channel_count() == 16);
  CHECK(VariantSpec::defaults(VariantKind::TfTrace).channel_count() == 3);
  CHECK(VariantSpec::defaults(VariantKind::TfFull).channel_count() == 3);
  CHECK(VariantSpec::defaults(VariantKind::Dp).obs_history == 1);
  CHECK(VariantSpec::defaults(VariantKind::DpHistAct).obs_history == 8);
  for (auto kind : {VariantKind::Dp, VariantKind::DpHistAct,
                    VariantKind::TfTrace, VariantKind::TfFull}) {
    CHECK_NOTHROW(VariantSpec::defaults(kind).validate());
    CHECK(variant_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS(variant_kind_from_string("mystery"));
}

TEST_CASE("conditioned input length ratios hold by construction") {
  const int w = scene().width, h = scene().height;
  const long dp = conditioned_pixels(VariantSpec::defaults(VariantKind::Dp), w, h);
  const long hist =
      conditioned_pixels(VariantSpec::defaults(VariantKind::DpHistAct), w, h);
  const long tf =
      conditioned_pixels(VariantSpec::defaults(VariantKind::TfFull), w, h);
  CHECK(hist == 8 * dp);
  CHECK(2 * tf == 3 * dp);  // 1.5x
  // Vector length = pixels + normalized EE history (+ past actions).
  CHECK(conditioned_length(VariantSpec::defaults(VariantKind::Dp), w, h) ==
        dp + 3);
}

TEST_CASE("plain variant is blind to the execution trace") {
  const VariantSpec dp = VariantSpec::defaults(VariantKind::Dp);
  const EnvState s = reset(scene(), task1(), 3, 0);
  const std::vector<Observation> win = {observe(scene(), task1(), s)};
  MotionTrace short_trace;
  short_trace.append(0, s.ee);
  MotionTrace long_trace = short_trace;
  long_trace.append(1, s.ee + Point3(0.05, 0.0, 0.0));
  long_trace.append(2, s.ee + Point3(0.10, 0.0, 0.0));
  FieldConfig fc;
  const auto a = build_conditioned(dp, win, short_trace, scene().global_cam, fc);
  const auto b = build_conditioned(dp, win, long_trace, scene().global_cam, fc);
  const NormStats norm = NormStats::fit(demos());
  const Eigen::VectorXd va = conditioned_to_vector(a, norm);
  const Eigen::VectorXd vb = conditioned_to_vector(b, norm);
  CHECK((va - vb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trace variants react to the execution trace") {
  const VariantSpec tf = VariantSpec::defaults(VariantKind::TfTrace);
  const EnvState s = reset(scene(), task1(), 3, 0);
  const std::vector<Observation> win = {observe(scene(), task1(), s)};
  MotionTrace short_trace;
  short_trace.append(0, s.ee);
  MotionTrace long_trace = short_trace;
  long_trace.append(1, s.ee + Point3(0.05, 0.0, 0.0));
  FieldConfig fc;
  const auto a = build_conditioned(tf, win, short_trace, scene().global_cam, fc);
  const auto b = build_conditioned(tf, win, long_trace, scene().global_cam, fc);
  const NormStats norm = NormStats::fit(demos());
  CHECK((conditioned_to_vector(a, norm) - conditioned_to_vector(b, norm))
            .cwiseAbs()
            .maxCoeff() > 0.0);
}

TEST_CASE("focus modulation only attenuates the global view") {
  const VariantSpec tf = VariantSpec::defaults(VariantKind::TfFull);
  const VariantSpec tr = VariantSpec::defaults(VariantKind::TfTrace);
  const EnvState s = reset(scene(), task1(), 3, 0);
  const std::vector<Observation> win = {observe(scene(), task1(), s)};
  MotionTrace trace;
  trace.append(0, s.ee);
  FieldConfig fc;
  const auto full = build_conditioned(tf, win, trace, scene().global_cam, fc);
  const auto tronly = build_conditioned(tr, win, trace, scene().global_cam, fc);
  REQUIRE(full.channels.size() == 3);
  REQUIRE(tronly.channels.size() == 3);
  // Channel 0: modulated global never exceeds the raw global.
  CHECK(((tronly.channels[0] - full.channels[0]).array() >= -1e-15).all());
  CHECK(full.channels[0].maxCoeff() > 0.0);  // field keeps the EE visible
  // Channels 1-2 (aux view, trace raster) are shared between the variants.
  CHECK((full.channels[1] - tronly.channels[1]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((full.channels[2] - tronly.channels[2]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("short observation windows are padded and flagged") {
  const VariantSpec hist = VariantSpec::defaults(VariantKind::DpHistAct);
  const EnvState s = reset(scene(), task1(), 3, 0);
  const std::vector<Observation> win = {observe(scene(), task1(), s)};
  MotionTrace trace;
  trace.append(0, s.ee);
  FieldConfig fc;
  const auto cond = build_conditioned(hist, win, trace, scene().global_cam, fc);
  CHECK(cond.padded);
  REQUIRE(static_cast<int>(cond.ee_history.size()) == hist.obs_history);
  // Every padded slot repeats the earliest available observation.
  for (const auto& p : cond.ee_history) CHECK((p - s.ee).norm() == 0.0);
  REQUIRE(cond.channels.size() == 16);
  for (int i = 0; i < 8; ++i) {
    CHECK((cond.channels[2 * i] - cond.channels[0]).cwiseAbs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("normalization maps the dataset range into the unit box") {
  const NormStats norm = NormStats::fit(demos());
  for (const auto& demo : demos()) {
    for (const auto& a : demo.actions) {
      const Eigen::Vector3d n = norm.normalize(a);
      CHECK(n.cwiseAbs().maxCoeff() <= 1.0);
      CHECK((norm.denormalize(n) - a).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  // Spans are floored so jitter-dominated dimensions are not stretched to
  // the full box.
  for (int i = 0; i < 3; ++i) CHECK(norm.hi[i] - norm.lo[i] >= 0.05 - 1e-12);
}

TEST_CASE("degenerate action dimensions receive a fixed span") {
  Demonstration flat;
  EnvState s = reset(scene(), task1(), 0, 0);
  for (int t = 0; t < 4; ++t) {
    flat.observations.push_back(observe(scene(), task1(), s));
    flat.actions.emplace_back(0.2, 0.125, 0.05);
    flat.trace.append(t, s.ee);
  }
  const NormStats norm = NormStats::fit({flat});
  for (int i = 0; i < 3; ++i) {
    CHECK(norm.hi[i] - norm.lo[i] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(norm.normalize(flat.actions[0])[i] == doctest::Approx(0.0));
  }
}

TEST_CASE("dataset file round trip preserves every recorded quantity") {
  Dataset ds;
  ds.scene_hash = scene().hash();
  ds.task = task1().name;
  ds.width = scene().width;
  ds.height = scene().height;
  ds.demos = demos();
  const auto path = temp_file("policy_roundtrip.ma2d");
  write_dataset(ds, path.string());
  const Dataset back = read_dataset(path.string());
  CHECK(back.scene_hash == ds.scene_hash);
  CHECK(back.task == ds.task);
  REQUIRE(back.demos.size() == ds.demos.size());
  for (std::size_t i = 0; i < ds.demos.size(); ++i) {
    const auto& a = ds.demos[i];
    const auto& b = back.demos[i];
    REQUIRE(a.actions.size() == b.actions.size());
    for (std::size_t t = 0; t < a.actions.size(); ++t) {
      // Storage is 32-bit; values survive within float precision.
      CHECK((a.actions[t].cast<float>().cast<double>() - b.actions[t])
                .cwiseAbs()
                .maxCoeff() == 0.0);
      CHECK((a.observations[t].global.cast<float>().cast<double>() -
             b.observations[t].global)
                .cwiseAbs()
                .maxCoeff() == 0.0);
      CHECK(b.trace.points[t].position == b.observations[t].ee);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint file round trip is stable") {
  const Checkpoint& ckpt = untrained_tf();
  const auto p1 = temp_file("policy_ckpt1.ma2w");
  const auto p2 = temp_file("policy_ckpt2.ma2w");
  write_checkpoint(ckpt, p1.string());
  const Checkpoint back = read_checkpoint(p1.string());
  CHECK(back.variant.kind == ckpt.variant.kind);
  CHECK(back.net.layer_widths == ckpt.net.layer_widths);
  CHECK(back.scene_hash == ckpt.scene_hash);
  CHECK(back.dataset_hash == ckpt.dataset_hash);
  CHECK((back.norm.lo - ckpt.norm.lo).cwiseAbs().maxCoeff() == 0.0);
  // Write -> read -> write reproduces the file byte for byte.
  write_checkpoint(back, p2.string());
  CHECK(hash_file(p1.string()) == hash_file(p2.string()));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("training is deterministic in its seed") {
  TrainingLog log_a, log_b;
  const Checkpoint a = train_tiny(VariantKind::Dp, 2, 5, &log_a);
  const Checkpoint b = train_tiny(VariantKind::Dp, 2, 5, &log_b);
  REQUIRE(log_a.epoch_loss.size() == 2);
  CHECK(log_a.epoch_loss == log_b.epoch_loss);
  for (std::size_t l = 0; l < a.params.weights.size(); ++l) {
    CHECK((a.params.weights[l] - b.params.weights[l]).cwiseAbs().maxCoeff() ==
          0.0);
  }
  const Checkpoint c = train_tiny(VariantKind::Dp, 2, 6);
  CHECK((a.params.weights[0] - c.params.weights[0]).cwiseAbs().maxCoeff() >
        0.0);
}

TEST_CASE("training loss trends downward") {
  // Individual epochs are noisy (random diffusion step and noise draws), so
  // compare averages of the first and last thirds of the curve.
  TrainingLog log;
  (void)train_tiny(VariantKind::TfFull, 30, 3, &log);
  REQUIRE(log.epoch_loss.size() == 30);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 10; ++i) {
    head += log.epoch_loss[i];
    tail += log.epoch_loss[20 + i];
  }
  CHECK(tail < head);
}

TEST_CASE("zero-epoch training returns a usable untrained checkpoint") {
  const Checkpoint& ckpt = untrained_tf();
  CHECK(ckpt.opt.step == 0);
  CHECK(ckpt.params.count() > 0);
  CHECK(ckpt.net.layer_widths.back() == 12);
}

TEST_CASE("rollout bookkeeping: one trace point per simulator step") {
  const Checkpoint& ckpt = untrained_tf();
  RolloutOptions opts;
  opts.max_steps = 21;
  const RolloutResult r = rollout(scene(), task1(), ckpt, 7, opts);
  CHECK(r.trajectory.size() == r.trace.size());
  CHECK(static_cast<int>(r.trajectory.size()) ==
        r.trajectory.back().step_count + 1);
  // Timing is opt-in.
  CHECK(r.per_step_ms.empty());
}

TEST_CASE("rollout is deterministic in its seed") {
  const Checkpoint& ckpt = untrained_tf();
  RolloutOptions opts;
  opts.max_steps = 12;
  const RolloutResult a = rollout(scene(), task1(), ckpt, 11, opts);
  const RolloutResult b = rollout(scene(), task1(), ckpt, 11, opts);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK((a.trajectory[i].ee - b.trajectory[i].ee).norm() == 0.0);
  }
  const RolloutResult c = rollout(scene(), task1(), ckpt, 12, opts);
  bool same = a.trajectory.size() == c.trajectory.size();
  if (same) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
      d = std::max(d, (a.trajectory[i].ee - c.trajectory[i].ee).norm());
    }
    same = d == 0.0;
  }
  CHECK(!same);
}

TEST_CASE("incremental field along a rollout matches the batch render") {
  const Checkpoint& ckpt = untrained_tf();
  RolloutOptions opts;
  opts.max_steps = 24;
  opts.snapshot_steps = {4, 9, 16, 24};
  const RolloutResult r = rollout(scene(), task1(), ckpt, 5, opts);
  REQUIRE(!r.field_snapshots.empty());
  for (const auto& [step, snap] : r.field_snapshots) {
    // Re-render the field from scratch using the trace prefix up to `step`.
    std::vector<Pixel> pts;
    for (const auto& tp : r.trace.points) {
      if (tp.timestep > step) break;
      const Point3 cam_p =
          world_to_camera(scene().global_cam.world_to_camera, tp.position);
      if (cam_p.z() > 1e-9) pts.push_back(project(scene().global_cam, cam_p));
    }
    const FocusField direct =
        render_field(pts, ckpt.field, scene().width, scene().height);
    CHECK((snap.values - direct.values).abs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("rollout rejects a checkpoint from a different scene") {
  Checkpoint ckpt = untrained_tf();
  ckpt.scene_hash ^= 0xdeadbeefULL;
  CHECK_THROWS_AS((void)rollout(scene(), task1(), ckpt, 1), SceneMismatch);
}

TEST_CASE("ambiguity context pins the state to the revisited waypoint") {
  const auto ambs = find_ambiguities(task1());
  REQUIRE(!ambs.empty());
  const AmbiguitySpec& amb = ambs.front();
  const AmbiguityContext ctx = ambiguity_context(scene(), task1(), amb);
  const Point3 waypoint = task1().waypoints.at(amb.waypoint);
  CHECK((ctx.state.ee - waypoint).norm() == 0.0);
  CHECK(ctx.trace_a.size() < ctx.trace_b.size());
  CHECK((ctx.trace_a.points.back().position - waypoint).norm() == 0.0);
  CHECK((ctx.trace_b.points.back().position - waypoint).norm() == 0.0);
  CHECK((ctx.successor_a - ctx.successor_b).norm() >
        task1().success_tolerance);
  // The two execution histories must render to different trace channels
  // even though the instantaneous observation is identical.
  EnvState sa = ctx.state, sb = ctx.state;
  sa.stage_index = amb.stage_a;
  sb.stage_index = amb.stage_b;
  const GrayImage ia = render(scene(), task1(), sa, scene().global_cam);
  const GrayImage ib = render(scene(), task1(), sb, scene().global_cam);
  CHECK((ia - ib).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mode purity rejects coincident successor modes") {
  const auto ambs = find_ambiguities(task1());
  AmbiguityContext ctx = ambiguity_context(scene(), task1(), ambs.front());
  ctx.successor_b = ctx.successor_a;
  CHECK_THROWS_AS(
      (void)mode_purity(scene(), task1(), untrained_tf(), ctx, 4, 1),
      DegenerateModes);
}

TEST_CASE("mode purity is a fraction and deterministic in its seed") {
  const auto ambs = find_ambiguities(task1());
  const AmbiguityContext ctx = ambiguity_context(scene(), task1(), ambs.front());
  const ModePurity a = mode_purity(scene(), task1(), untrained_tf(), ctx, 16, 3);
  const ModePurity b = mode_purity(scene(), task1(), untrained_tf(), ctx, 16, 3);
  CHECK(a.purity_a == b.purity_a);
  CHECK(a.purity_b == b.purity_b);
  CHECK(a.purity_a >= 0.0);
  CHECK(a.purity_a <= 1.0);
  CHECK(a.purity_b >= 0.0);
  CHECK(a.purity_b <= 1.0);
}
