#pragma once

#include <functional>

#include "ma2/net.hpp"
#include "ma2/rng.hpp"

namespace ma2 {

// Action chunks are flat pred_horizon x 3 vectors normalized to [-1,1].
using ActionChunk = Eigen::VectorXd;

enum class SamplerKind : std::uint8_t { Ddpm = 0, Ddim = 1, FlowMatching = 2 };

SamplerKind sampler_kind_from_string(const std::string& s);
std::string to_string(SamplerKind kind);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::Ddpm;
  int train_steps = 100;   // K
  int sample_steps = 100;  // ddpm: K; ddim/fm: 10

  void validate() const {
    if (train_steps < 2) throw std::invalid_argument("SamplerConfig: K must be >= 2");
    if (sample_steps < 1 || (kind != SamplerKind::FlowMatching &&
                             sample_steps > train_steps)) {
      throw std::invalid_argument("SamplerConfig: bad sample step count");
    }
  }
};

struct NoiseSchedule {
  int K = 0;
  Eigen::VectorXd alpha_bar;  // index 0..K, alpha_bar[0] = 1, strictly decreasing

  double alpha(int k) const { return alpha_bar[k] / alpha_bar[k - 1]; }
  double beta(int k) const { return 1.0 - alpha(k); }
};

// Cosine alpha-bar (s = 0.008) with per-step beta clipped to <= 0.999.
NoiseSchedule cosine_schedule(int K);

// Forward diffusion: sqrt(ab_k) a + sqrt(1-ab_k) eps.
ActionChunk add_noise(const ActionChunk& a, int k, const Eigen::VectorXd& eps,
                      const NoiseSchedule& sched);

// Noise predictor abstraction: the trained net, or an analytic oracle in
// tests. Arguments: noisy chunk, diffusion step k.
using NoisePredictor = std::function<ActionChunk(const ActionChunk&, int)>;
// Velocity field for flow matching: (state, time in [0,1]).
using VelocityField = std::function<ActionChunk(const ActionChunk&, double)>;

struct LossGrads {
  double loss = 0.0;
  Grads grads;
};

// ||eps - net([cond; embed(k); noisy])||^2 with exact gradients.
LossGrads ddpm_loss(const NetSpec& spec, const Params& params,
                    const Eigen::VectorXd& cond, const ActionChunk& a, int k,
                    const Eigen::VectorXd& eps, const NoiseSchedule& sched);

// ||v_net([cond; embed(t); x_t]) - (a - eps)||^2 on the linear path
// x_t = (1-t) eps + t a.
LossGrads fm_loss(const NetSpec& spec, const Params& params,
                  const Eigen::VectorXd& cond, const ActionChunk& a, double t,
                  const Eigen::VectorXd& eps);

// Ancestral sampler with posterior variance; z = 0 at the last step.
// Result is clipped to [-1,1].
ActionChunk ddpm_sample(const NoisePredictor& predictor,
                        const NoiseSchedule& sched, Rng& rng, int dim);

// Deterministic (eta = 0) strided sampler from a given initial noise.
ActionChunk ddim_sample(const NoisePredictor& predictor,
                        const NoiseSchedule& sched, int steps,
                        const ActionChunk& initial_noise);

// Euler integration of the velocity field from x(0) = initial_noise.
ActionChunk fm_sample(const VelocityField& velocity, int steps,
                      const ActionChunk& initial_noise);

// Noise/velocity predictors backed by the net, with the conditioning
// projection cached across denoising steps.
NoisePredictor net_noise_predictor(const NetSpec& spec, const Params& params,
                                   const Eigen::VectorXd& cond,
                                   const NoiseSchedule& sched);
VelocityField net_velocity_field(const NetSpec& spec, const Params& params,
                                 const Eigen::VectorXd& cond);

}  // namespace ma2
