#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ma2/genmodel.hpp"

using namespace ma2;

namespace {

NetSpec small_spec(int in, int out) {
  NetSpec spec;
  spec.layer_widths = {in, 16, out};
  spec.activation = Activation::Tanh;
  spec.timestep_embed_dim = 8;
  return spec;
}

// Closed-form cosine alpha-bar before beta clipping.
double cosine_alpha_bar(int k, int K) {
  const double s = 0.008;
  auto f = [&](double t) {
    const double v = std::cos((t / K + s) / (1.0 + s) * M_PI / 2.0);
    return v * v;
  };
  return f(static_cast<double>(k)) / f(0.0);
}

// Exact noise predictor for a point-mass data distribution at a0.
NoisePredictor point_mass_predictor(const ActionChunk& a0,
                                    const NoiseSchedule& sched) {
  return [a0, &sched](const ActionChunk& x, int k) -> ActionChunk {
    const double ab = sched.alpha_bar[k];
    return (x - std::sqrt(ab) * a0) / std::sqrt(1.0 - ab);
  };
}

}  // namespace

TEST_CASE("cosine schedule endpoints and monotonicity") {
  const NoiseSchedule sched = cosine_schedule(100);
  CHECK(sched.K == 100);
  CHECK(sched.alpha_bar.size() == 101);
  CHECK(sched.alpha_bar[0] == 1.0);
  for (int k = 1; k <= 100; ++k) {
    CHECK(sched.alpha_bar[k] < sched.alpha_bar[k - 1]);
    CHECK(sched.beta(k) > 0.0);
    CHECK(sched.beta(k) <= 0.999 + 1e-12);
  }
  CHECK(sched.alpha_bar[100] < 0.01);
}

TEST_CASE("cosine schedule matches the closed form where betas are unclipped") {
  const NoiseSchedule sched = cosine_schedule(100);
  for (int k = 0; k <= 100; ++k) {
    const double direct = cosine_alpha_bar(k, 100);
    // The beta clip only raises alpha_bar above the closed form near k = K.
    if (1.0 - direct / cosine_alpha_bar(k - 1 > 0 ? k - 1 : 0, 100) < 0.999 ||
        k == 0) {
      CHECK(sched.alpha_bar[k] ==
            doctest::Approx(direct).epsilon(1e-9));
    } else {
      CHECK(sched.alpha_bar[k] >= direct - 1e-12);
    }
  }
}

TEST_CASE("forward diffusion at k = 0 is the identity") {
  const NoiseSchedule sched = cosine_schedule(50);
  Rng rng(3);
  const ActionChunk a = rng.normal_vector(6);
  const Eigen::VectorXd eps = rng.normal_vector(6);
  CHECK((add_noise(a, 0, eps, sched) - a).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward diffusion matches the mixing formula") {
  const NoiseSchedule sched = cosine_schedule(100);
  Rng rng(4);
  const ActionChunk a = rng.normal_vector(12);
  const Eigen::VectorXd eps = rng.normal_vector(12);
  for (int k : {1, 17, 50, 100}) {
    const double ab = sched.alpha_bar[k];
    const ActionChunk want = std::sqrt(ab) * a + std::sqrt(1.0 - ab) * eps;
    CHECK((add_noise(a, k, eps, sched) - want).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("terminal forward marginal is near standard normal") {
  const NoiseSchedule sched = cosine_schedule(100);
  Rng rng(5);
  const ActionChunk a = ActionChunk::Constant(1, 0.7);
  const int n = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd eps(1);
    eps[0] = rng.normal();
    const double x = add_noise(a, 100, eps, sched)[0];
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  // Mean shifted by sqrt(ab_K)*0.7 < 0.004; variance 1 - ab_K*0.49 ~ 1.
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)) + 0.01);
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n) + 0.01);
}

TEST_CASE("ddpm loss for a zero network equals the squared noise norm") {
  const NoiseSchedule sched = cosine_schedule(20);
  const int chunk = 6, cond_dim = 3;
  const NetSpec spec = small_spec(cond_dim + 8 + chunk, chunk);
  Params params = init_params(spec, 1);
  params.set_zero();
  Rng rng(6);
  const Eigen::VectorXd cond = rng.normal_vector(cond_dim);
  const ActionChunk a = rng.normal_vector(chunk);
  const Eigen::VectorXd eps = rng.normal_vector(chunk);
  const LossGrads lg = ddpm_loss(spec, params, cond, a, 7, eps, sched);
  CHECK(lg.loss == doctest::Approx(eps.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("ddpm loss value matches a manual forward pass") {
  const NoiseSchedule sched = cosine_schedule(30);
  const int chunk = 6, cond_dim = 4;
  const NetSpec spec = small_spec(cond_dim + 8 + chunk, chunk);
  const Params params = init_params(spec, 11);
  Rng rng(7);
  const Eigen::VectorXd cond = rng.normal_vector(cond_dim);
  const ActionChunk a = rng.normal_vector(chunk);
  const Eigen::VectorXd eps = rng.normal_vector(chunk);
  const int k = 12;
  Eigen::VectorXd input(spec.input_width());
  input << cond, embed_timestep(k, sched.K, 8), add_noise(a, k, eps, sched);
  const Eigen::VectorXd out = forward(spec, params, input);
  const LossGrads lg = ddpm_loss(spec, params, cond, a, k, eps, sched);
  CHECK(lg.loss == doctest::Approx((eps - out).squaredNorm()).epsilon(1e-12));
}

TEST_CASE("ddpm loss gradients match finite differences") {
  const NoiseSchedule sched = cosine_schedule(25);
  const int chunk = 3, cond_dim = 2;
  const NetSpec spec = small_spec(cond_dim + 8 + chunk, chunk);
  Params params = init_params(spec, 21);
  Rng rng(8);
  const Eigen::VectorXd cond = rng.normal_vector(cond_dim);
  const ActionChunk a = rng.normal_vector(chunk);
  const Eigen::VectorXd eps = rng.normal_vector(chunk);
  const int k = 9;
  const Grads grads = ddpm_loss(spec, params, cond, a, k, eps, sched).grads;
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < params.weights[l].size(); i += 5) {
      double* p = params.weights[l].data() + i;
      const double orig = *p;
      *p = orig + h;
      const double up = ddpm_loss(spec, params, cond, a, k, eps, sched).loss;
      *p = orig - h;
      const double dn = ddpm_loss(spec, params, cond, a, k, eps, sched).loss;
      *p = orig;
      const double fd = (up - dn) / (2.0 * h);
      const double an = grads.weights[l].data()[i];
      worst = std::max(worst,
                       std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("flow matching loss for a zero network is the squared target norm") {
  const int chunk = 5, cond_dim = 2;
  const NetSpec spec = small_spec(cond_dim + 8 + chunk, chunk);
  Params params = init_params(spec, 31);
  params.set_zero();
  Rng rng(9);
  const Eigen::VectorXd cond = rng.normal_vector(cond_dim);
  const ActionChunk a = rng.normal_vector(chunk);
  const Eigen::VectorXd eps = rng.normal_vector(chunk);
  const LossGrads lg = fm_loss(spec, params, cond, a, 0.3, eps);
  CHECK(lg.loss == doctest::Approx((a - eps).squaredNorm()).epsilon(1e-12));
}

TEST_CASE("flow matching loss gradients match finite differences") {
  const int chunk = 3, cond_dim = 2;
  const NetSpec spec = small_spec(cond_dim + 8 + chunk, chunk);
  Params params = init_params(spec, 41);
  Rng rng(10);
  const Eigen::VectorXd cond = rng.normal_vector(cond_dim);
  const ActionChunk a = rng.normal_vector(chunk);
  const Eigen::VectorXd eps = rng.normal_vector(chunk);
  const Grads grads = fm_loss(spec, params, cond, a, 0.6, eps).grads;
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < params.weights[l].size(); i += 7) {
      double* p = params.weights[l].data() + i;
      const double orig = *p;
      *p = orig + h;
      const double up = fm_loss(spec, params, cond, a, 0.6, eps).loss;
      *p = orig - h;
      const double dn = fm_loss(spec, params, cond, a, 0.6, eps).loss;
      *p = orig;
      const double fd = (up - dn) / (2.0 * h);
      const double an = grads.weights[l].data()[i];
      worst = std::max(worst,
                       std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("ancestral sampler recovers a point mass with the exact predictor") {
  const NoiseSchedule sched = cosine_schedule(100);
  ActionChunk a0(4);
  a0 << 0.3, -0.7, 0.05, 0.9;
  const NoisePredictor pred = point_mass_predictor(a0, sched);
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const ActionChunk x = ddpm_sample(pred, sched, rng, 4);
    CHECK((x - a0).cwiseAbs().maxCoeff() < 0.05);
  }
}

TEST_CASE("ddim recovers a point mass and is deterministic in its seed noise") {
  const NoiseSchedule sched = cosine_schedule(100);
  ActionChunk a0(3);
  a0 << -0.2, 0.6, 0.0;
  const NoisePredictor pred = point_mass_predictor(a0, sched);
  Rng rng(13);
  const ActionChunk z = rng.normal_vector(3);
  const ActionChunk x10 = ddim_sample(pred, sched, 10, z);
  const ActionChunk x10b = ddim_sample(pred, sched, 10, z);
  const ActionChunk xfull = ddim_sample(pred, sched, 100, z);
  CHECK((x10 - x10b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((x10 - a0).cwiseAbs().maxCoeff() < 0.05);
  CHECK((xfull - a0).cwiseAbs().maxCoeff() < 0.05);
  // Strided and full-length deterministic trajectories stay close.
  CHECK((x10 - xfull).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("ddim rejects invalid step counts") {
  const NoiseSchedule sched = cosine_schedule(10);
  const NoisePredictor pred = [](const ActionChunk& x, int) { return x; };
  ActionChunk z = ActionChunk::Zero(2);
  CHECK_THROWS(ddim_sample(pred, sched, 0, z));
  CHECK_THROWS(ddim_sample(pred, sched, 11, z));
}

TEST_CASE("samplers clip their output to the unit box") {
  const NoiseSchedule sched = cosine_schedule(100);
  // A predictor that always claims zero noise leaves x near its start value,
  // which for a large seed lies far outside the box.
  const NoisePredictor zero_pred = [](const ActionChunk& x, int) {
    return ActionChunk::Zero(x.size());
  };
  ActionChunk big = ActionChunk::Constant(3, 50.0);
  const ActionChunk x = ddim_sample(zero_pred, sched, 10, big);
  CHECK(x.cwiseAbs().maxCoeff() <= 1.0);
  Rng rng(14);
  const ActionChunk y = ddpm_sample(zero_pred, sched, rng, 3);
  CHECK(y.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("euler integration of a constant field is exact") {
  ActionChunk c(2);
  c << 0.4, -0.3;
  const VelocityField vel = [&](const ActionChunk&, double) { return c; };
  ActionChunk x0(2);
  x0 << 0.1, 0.2;
  for (int steps : {1, 3, 10}) {
    const ActionChunk x = fm_sample(vel, steps, x0);
    CHECK((x - (x0 + c)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("euler integration of the point-mass velocity lands on the target") {
  ActionChunk a0(3);
  a0 << 0.25, -0.55, 0.8;
  // Rectified-flow velocity for a point mass: v(x, t) = (a0 - x) / (1 - t).
  const VelocityField vel = [&](const ActionChunk& x, double t) -> ActionChunk {
    return (a0 - x) / (1.0 - t);
  };
  Rng rng(15);
  for (int t = 0; t < 5; ++t) {
    const ActionChunk z = rng.normal_vector(3);
    const ActionChunk x = fm_sample(vel, 10, z);
    CHECK((x - a0).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("net-backed predictors agree with direct forward passes") {
  const NoiseSchedule sched = cosine_schedule(40);
  const int chunk = 4, cond_dim = 5;
  NetSpec spec = small_spec(cond_dim + 8 + chunk, chunk);
  const Params params = init_params(spec, 51);
  Rng rng(16);
  const Eigen::VectorXd cond = rng.normal_vector(cond_dim);
  const NoisePredictor pred = net_noise_predictor(spec, params, cond, sched);
  const VelocityField vel = net_velocity_field(spec, params, cond);
  for (int t = 0; t < 5; ++t) {
    const ActionChunk x = rng.normal_vector(chunk);
    const int k = 1 + static_cast<int>(rng.uniform_int(40));
    Eigen::VectorXd in1(spec.input_width());
    in1 << cond, embed_timestep(k, sched.K, 8), x;
    CHECK((pred(x, k) - forward(spec, params, in1)).cwiseAbs().maxCoeff() <
          1e-12);
    const double tt = rng.uniform();
    Eigen::VectorXd in2(spec.input_width());
    in2 << cond, embed_fraction(tt, 8), x;
    CHECK((vel(x, tt) - forward(spec, params, in2)).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("sampler kind string round trip") {
  for (auto kind : {SamplerKind::Ddpm, SamplerKind::Ddim,
                    SamplerKind::FlowMatching}) {
    CHECK(sampler_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS(sampler_kind_from_string("nope"));
}

TEST_CASE("sampler config validation") {
  SamplerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.sample_steps = 101;
  CHECK_THROWS(cfg.validate());
  cfg.kind = SamplerKind::FlowMatching;
  CHECK_NOTHROW(cfg.validate());  // fm step count is independent of K
  cfg.train_steps = 1;
  CHECK_THROWS(cfg.validate());
}
