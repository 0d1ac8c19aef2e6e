#include "ma2/genmodel.hpp"

#include <cmath>
#include <memory>

namespace ma2 {

SamplerKind sampler_kind_from_string(const std::string& s) {
  if (s == "ddpm") return SamplerKind::Ddpm;
  if (s == "ddim") return SamplerKind::Ddim;
  if (s == "fm") return SamplerKind::FlowMatching;
  throw std::invalid_argument("unknown sampler kind: " + s);
}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Ddpm: return "ddpm";
    case SamplerKind::Ddim: return "ddim";
    case SamplerKind::FlowMatching: return "fm";
  }
  throw std::invalid_argument("bad sampler kind");
}

NoiseSchedule cosine_schedule(int K) {
  if (K < 2) throw std::invalid_argument("cosine_schedule: K must be >= 2");
  NoiseSchedule sched;
  sched.K = K;
  sched.alpha_bar.resize(K + 1);
  const double s = 0.008;
  auto f = [&](double k) {
    const double x = ((k / K + s) / (1.0 + s)) * M_PI / 2.0;
    const double c = std::cos(x);
    return c * c;
  };
  const double norm = f(0.0);
  sched.alpha_bar[0] = 1.0;
  double prev_raw = 1.0;
  for (int k = 1; k <= K; ++k) {
    const double raw = f(static_cast<double>(k)) / norm;
    const double beta = std::min(1.0 - raw / prev_raw, 0.999);
    prev_raw = raw;
    sched.alpha_bar[k] = sched.alpha_bar[k - 1] * (1.0 - beta);
  }
  return sched;
}

ActionChunk add_noise(const ActionChunk& a, int k, const Eigen::VectorXd& eps,
                      const NoiseSchedule& sched) {
  if (eps.rows() != a.rows()) throw ShapeMismatch("add_noise: eps size mismatch");
  if (k < 0 || k > sched.K) {
    throw std::invalid_argument("add_noise: k out of range");
  }
  const double ab = sched.alpha_bar[k];
  return std::sqrt(ab) * a + std::sqrt(1.0 - ab) * eps;
}

namespace {

Eigen::VectorXd assemble_input(const Eigen::VectorXd& cond,
                               const Eigen::VectorXd& embed,
                               const Eigen::VectorXd& x) {
  Eigen::VectorXd input(cond.rows() + embed.rows() + x.rows());
  input << cond, embed, x;
  return input;
}

LossGrads squared_error_loss(const NetSpec& spec, const Params& params,
                             const Eigen::VectorXd& input,
                             const Eigen::VectorXd& target) {
  ForwardCache cache;
  const Eigen::VectorXd out = forward(spec, params, input, &cache);
  if (out.rows() != target.rows()) {
    throw ShapeMismatch("loss target does not match net output");
  }
  const Eigen::VectorXd diff = out - target;
  LossGrads result;
  result.loss = diff.squaredNorm();
  result.grads = backward(spec, params, cache, 2.0 * diff);
  return result;
}

ActionChunk clip_chunk(ActionChunk x) {
  return x.cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace

LossGrads ddpm_loss(const NetSpec& spec, const Params& params,
                    const Eigen::VectorXd& cond, const ActionChunk& a, int k,
                    const Eigen::VectorXd& eps, const NoiseSchedule& sched) {
  const Eigen::VectorXd input = assemble_input(
      cond, embed_timestep(k, sched.K, spec.timestep_embed_dim),
      add_noise(a, k, eps, sched));
  return squared_error_loss(spec, params, input, eps);
}

LossGrads fm_loss(const NetSpec& spec, const Params& params,
                  const Eigen::VectorXd& cond, const ActionChunk& a, double t,
                  const Eigen::VectorXd& eps) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("fm_loss: t out of [0,1]");
  const Eigen::VectorXd x_t = (1.0 - t) * eps + t * a;
  const Eigen::VectorXd input =
      assemble_input(cond, embed_fraction(t, spec.timestep_embed_dim), x_t);
  return squared_error_loss(spec, params, input, a - eps);
}

ActionChunk ddpm_sample(const NoisePredictor& predictor,
                        const NoiseSchedule& sched, Rng& rng, int dim) {
  ActionChunk x = rng.normal_vector(dim);
  for (int k = sched.K; k >= 1; --k) {
    const ActionChunk eps_hat = predictor(x, k);
    const double ab = sched.alpha_bar[k];
    const double alpha = sched.alpha(k);
    const double beta = 1.0 - alpha;
    const double ab_prev = sched.alpha_bar[k - 1];
    // Posterior mean computed through the clipped clean-sample estimate.
    // Without the clip, the 1/sqrt(alpha) factor at the noisiest steps
    // amplifies predictor error without bound and the chain diverges.
    const ActionChunk x0_hat =
        clip_chunk((x - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab));
    ActionChunk mean = (std::sqrt(ab_prev) * beta / (1.0 - ab)) * x0_hat +
                       (std::sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab)) * x;
    if (k > 1) {
      const double sigma = std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta);
      x = mean + sigma * rng.normal_vector(dim);
    } else {
      x = std::move(mean);
    }
  }
  return clip_chunk(std::move(x));
}

ActionChunk ddim_sample(const NoisePredictor& predictor,
                        const NoiseSchedule& sched, int steps,
                        const ActionChunk& initial_noise) {
  if (steps < 1 || steps > sched.K) {
    throw std::invalid_argument("ddim_sample: steps must be in [1, K]");
  }
  ActionChunk x = initial_noise;
  for (int i = 0; i < steps; ++i) {
    // Uniform stride over {K, ..., 0}.
    const int k = static_cast<int>(
        std::lround(static_cast<double>(sched.K) * (steps - i) / steps));
    const int k_next = static_cast<int>(
        std::lround(static_cast<double>(sched.K) * (steps - i - 1) / steps));
    const ActionChunk eps_hat = predictor(x, k);
    const double ab = sched.alpha_bar[k];
    // Clipping the clean-sample estimate keeps the deterministic trajectory
    // bounded under imperfect noise predictions (mirrors the ancestral
    // sampler's stabilisation).
    const ActionChunk a0_hat =
        clip_chunk((x - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab));
    const double ab_next = sched.alpha_bar[k_next];
    x = std::sqrt(ab_next) * a0_hat + std::sqrt(1.0 - ab_next) * eps_hat;
  }
  return clip_chunk(std::move(x));
}

ActionChunk fm_sample(const VelocityField& velocity, int steps,
                      const ActionChunk& initial_noise) {
  if (steps < 1) throw std::invalid_argument("fm_sample: steps must be >= 1");
  ActionChunk x = initial_noise;
  const double h = 1.0 / steps;
  for (int i = 0; i < steps; ++i) {
    x += h * velocity(x, i * h);
  }
  return clip_chunk(std::move(x));
}

NoisePredictor net_noise_predictor(const NetSpec& spec, const Params& params,
                                   const Eigen::VectorXd& cond,
                                   const NoiseSchedule& sched) {
  auto cache = std::make_shared<CondCache>(precompute_cond(params, cond));
  const int K = sched.K;
  return [&spec, &params, cache, K](const ActionChunk& x, int k) {
    Eigen::VectorXd rest(spec.timestep_embed_dim + x.rows());
    rest << embed_timestep(k, K, spec.timestep_embed_dim), x;
    return forward_cached(spec, params, *cache, rest);
  };
}

VelocityField net_velocity_field(const NetSpec& spec, const Params& params,
                                 const Eigen::VectorXd& cond) {
  auto cache = std::make_shared<CondCache>(precompute_cond(params, cond));
  return [&spec, &params, cache](const ActionChunk& x, double t) {
    Eigen::VectorXd rest(spec.timestep_embed_dim + x.rows());
    rest << embed_fraction(t, spec.timestep_embed_dim), x;
    return forward_cached(spec, params, *cache, rest);
  };
}

}  // namespace ma2
