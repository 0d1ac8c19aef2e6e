#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "ma2/genmodel.hpp"
#include "ma2/simenv.hpp"

namespace ma2 {

enum class VariantKind : std::uint8_t {
  Dp = 0,        // instantaneous observations only
  DpHistAct = 1, // stacked window of past observations
  TfTrace = 2,   // + rasterized execution trace
  TfFull = 3,    // + focus-field-modulated global view
};

VariantKind variant_kind_from_string(const std::string& s);
std::string to_string(VariantKind kind);

struct VariantSpec {
  VariantKind kind = VariantKind::Dp;
  int obs_history = 1;  // 8 for DpHistAct
  int pred_horizon = 4;
  int exec_horizon = 4;
  // Alternative reading of history conditioning: also append the past
  // obs_history actions. Off by default.
  bool append_past_actions = false;

  static VariantSpec defaults(VariantKind kind);

  int channel_count() const;
  void validate() const;
};

struct ConditionedObservation {
  std::vector<GrayImage> channels;
  std::vector<Point3> ee_history;    // oldest first, length obs_history
  std::vector<Point3> past_actions;  // only with append_past_actions
  bool padded = false;               // window was short and repeated its head
};

// Affine map between workspace coordinates and the [-1,1] training range,
// fitted per dimension from dataset actions with a 5% margin.
struct NormStats {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(1.0);

  static NormStats fit(const std::vector<Demonstration>& demos);

  Eigen::Vector3d normalize(const Eigen::Vector3d& p) const;
  Eigen::Vector3d denormalize(const Eigen::Vector3d& p) const;
};

// Hidden architecture; input/output widths are derived from the variant
// and image size.
struct NetShape {
  std::vector<int> hidden = {256, 256};
  int timestep_embed_dim = 32;
  Activation activation = Activation::Tanh;
};

struct Checkpoint {
  VariantSpec variant;
  NetSpec net;
  SamplerConfig sampler;
  FieldConfig field;
  NormStats norm;
  std::uint64_t scene_hash = 0;
  std::uint64_t dataset_hash = 0;
  int image_width = 0, image_height = 0;
  Params params;
  AdamState opt;
};

struct SceneMismatch : std::runtime_error {
  SceneMismatch() : std::runtime_error("checkpoint scene hash does not match "
                                       "the environment") {}
};

struct NonFiniteLoss : std::runtime_error {
  explicit NonFiniteLoss(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateModes : std::runtime_error {
  DegenerateModes() : std::runtime_error("ambiguity successors coincide") {}
};

// Assembles the variant's conditioning channels. When field/raster are
// provided (closed loop) they are used as-is; otherwise both are rendered
// from the given trace (open loop).
ConditionedObservation build_conditioned(const VariantSpec& variant,
                                         const std::vector<Observation>& obs_window,
                                         const MotionTrace& trace,
                                         const CameraModel& cam,
                                         const FieldConfig& field_cfg,
                                         const FocusField* field = nullptr,
                                         const GrayImage* trace_raster = nullptr);

// Flattened channels + normalized ee history (+ normalized past actions).
Eigen::VectorXd conditioned_to_vector(const ConditionedObservation& cond,
                                      const NormStats& norm);

// Conditioning vector length for a variant at a given image size.
long conditioned_length(const VariantSpec& variant, int width, int height);
// The channel-pixel memory proxy reported by the benchmark.
long conditioned_pixels(const VariantSpec& variant, int width, int height);

struct TrainingLog {
  std::vector<double> epoch_loss;  // mean per-sample loss per epoch
};

// Supervised diffusion / flow-matching training over open-loop
// demonstrations; returns the final-epoch checkpoint.
Checkpoint train_policy(const SceneConfig& scene,
                        const std::vector<Demonstration>& demos,
                        const VariantSpec& variant, const SamplerConfig& sampler,
                        const NetShape& shape, const OptConfig& opt,
                        std::uint64_t seed, std::uint64_t dataset_hash = 0,
                        TrainingLog* log = nullptr);

struct RolloutResult {
  std::vector<EnvState> trajectory;  // initial state + one entry per step
  bool success = false;
  int stages_completed = 0;
  MotionTrace trace;
  std::vector<double> per_step_ms;   // wall-clock per decision
  std::vector<std::pair<int, FocusField>> field_snapshots;
};

struct RolloutOptions {
  int max_steps = 0;  // 0 -> task horizon cap
  int distractor_count = 0;
  bool collect_timing = false;
  std::vector<int> snapshot_steps;  // record the incremental field here
};

// Closed-loop receding-horizon execution with incremental trace and field
// accumulation.
RolloutResult rollout(const SceneConfig& scene, const TaskSpec& task,
                      const Checkpoint& ckpt, std::uint64_t seed,
                      const RolloutOptions& options = {});

struct AmbiguityContext {
  EnvState state;        // ee exactly at the ambiguity waypoint
  MotionTrace trace_a;   // execution history of the earlier visit
  MotionTrace trace_b;   // execution history of the later visit
  Point3 successor_a, successor_b;
};

AmbiguityContext ambiguity_context(const SceneConfig& scene, const TaskSpec& task,
                                   const AmbiguitySpec& amb);

struct ModePurity {
  double purity_a = 0.0;
  double purity_b = 0.0;
};

// Samples n chunks under each trace variant of an ambiguity state and
// scores the fraction consistent with the stage-correct successor. The
// default classifier uses the chunk's final position; the alternative uses
// the first-step direction.
ModePurity mode_purity(const SceneConfig& scene, const TaskSpec& task,
                       const Checkpoint& ckpt, const AmbiguityContext& ctx,
                       int n_samples, std::uint64_t seed,
                       bool first_step_metric = false);

// One action chunk from the checkpoint's sampler for a prepared
// conditioning vector (shared by rollout, purity, and the benchmark).
ActionChunk sample_chunk(const Checkpoint& ckpt, const Eigen::VectorXd& cond,
                         const NoiseSchedule& sched, Rng& rng);

}  // namespace ma2
