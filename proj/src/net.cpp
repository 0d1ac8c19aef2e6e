#include "ma2/net.hpp"

#include <cmath>

namespace ma2 {

long Params::count() const {
  long n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

bool Params::all_finite() const {
  for (const auto& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

void Params::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

AdamState AdamState::zeros_like(const Params& params) {
  AdamState s;
  s.m = params;
  s.v = params;
  s.m.set_zero();
  s.v.set_zero();
  s.step = 0;
  return s;
}

Eigen::VectorXd embed_fraction(double s, int dim) {
  if (dim <= 0 || dim % 2 != 0) {
    throw std::invalid_argument("embed_fraction: dim must be positive and even");
  }
  Eigen::VectorXd e(dim);
  const int half = dim / 2;
  double omega = M_PI / 2.0;
  for (int j = 0; j < half; ++j) {
    e[2 * j] = std::sin(omega * s);
    e[2 * j + 1] = std::cos(omega * s);
    omega *= 2.0;
  }
  return e;
}

Params init_params(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(mix_seed(seed, /*stream=*/0x11717));
  Params params;
  const std::size_t n_layers = spec.layer_widths.size() - 1;
  params.weights.reserve(n_layers);
  params.biases.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int fan_in = spec.layer_widths[l];
    const int fan_out = spec.layer_widths[l + 1];
    const double bound = std::sqrt(1.0 / fan_in);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = rng.uniform(-bound, bound);
    }
    Eigen::VectorXd b(fan_out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  return params;
}

namespace {

void check_shapes(const NetSpec& spec, const Params& params, Eigen::Index in_rows) {
  if (params.weights.size() + 1 != spec.layer_widths.size() ||
      params.biases.size() != params.weights.size()) {
    throw ShapeMismatch("params do not match net spec");
  }
  if (in_rows != spec.input_width()) {
    throw ShapeMismatch("input width " + std::to_string(in_rows) +
                        " != " + std::to_string(spec.input_width()));
  }
}

}  // namespace

Eigen::VectorXd forward(const NetSpec& spec, const Params& params,
                        const Eigen::VectorXd& input, ForwardCache* cache) {
  check_shapes(spec, params, input.rows());
  if (cache != nullptr) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Eigen::VectorXd a = input;
  const std::size_t last = params.weights.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    Eigen::VectorXd z = params.weights[l] * a + params.biases[l];
    if (l < last && spec.activation == Activation::Tanh) {
      a = z.array().tanh().matrix();
    } else {
      a = std::move(z);
    }
    if (cache != nullptr) cache->activations.push_back(a);
  }
  return a;
}

Grads backward(const NetSpec& spec, const Params& params,
               const ForwardCache& cache, const Eigen::VectorXd& grad_output,
               Eigen::VectorXd* grad_input) {
  if (cache.activations.size() != params.weights.size() + 1) {
    throw ShapeMismatch("stale forward cache");
  }
  Grads grads;
  grads.weights.resize(params.weights.size());
  grads.biases.resize(params.biases.size());
  Eigen::VectorXd delta = grad_output;
  for (std::size_t l = params.weights.size(); l-- > 0;) {
    grads.weights[l] = delta * cache.activations[l].transpose();
    grads.biases[l] = delta;
    if (l > 0 || grad_input != nullptr) {
      Eigen::VectorXd prev = params.weights[l].transpose() * delta;
      if (l > 0 && spec.activation == Activation::Tanh) {
        prev.array() *= 1.0 - cache.activations[l].array().square();
      }
      delta = std::move(prev);
    }
  }
  if (grad_input != nullptr) *grad_input = delta;
  return grads;
}

Eigen::MatrixXd forward_batch(const NetSpec& spec, const Params& params,
                              const Eigen::MatrixXd& inputs, BatchCache* cache) {
  check_shapes(spec, params, inputs.rows());
  if (cache != nullptr) {
    cache->activations.clear();
    cache->activations.push_back(inputs);
  }
  Eigen::MatrixXd a = inputs;
  const std::size_t last = params.weights.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    Eigen::MatrixXd z =
        (params.weights[l] * a).colwise() + params.biases[l];
    if (l < last && spec.activation == Activation::Tanh) {
      a = z.array().tanh().matrix();
    } else {
      a = std::move(z);
    }
    if (cache != nullptr) cache->activations.push_back(a);
  }
  return a;
}

Grads backward_batch(const NetSpec& spec, const Params& params,
                     const BatchCache& cache,
                     const Eigen::MatrixXd& grad_outputs) {
  if (cache.activations.size() != params.weights.size() + 1) {
    throw ShapeMismatch("stale forward cache");
  }
  Grads grads;
  grads.weights.resize(params.weights.size());
  grads.biases.resize(params.biases.size());
  Eigen::MatrixXd delta = grad_outputs;
  for (std::size_t l = params.weights.size(); l-- > 0;) {
    grads.weights[l] = delta * cache.activations[l].transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd prev = params.weights[l].transpose() * delta;
      if (spec.activation == Activation::Tanh) {
        prev.array() *= 1.0 - cache.activations[l].array().square();
      }
      delta = std::move(prev);
    }
  }
  return grads;
}

void ParamsF::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

ParamsF cast_params(const Params& params) {
  ParamsF out;
  out.weights.reserve(params.weights.size());
  out.biases.reserve(params.biases.size());
  for (const auto& w : params.weights) out.weights.push_back(w.cast<float>());
  for (const auto& b : params.biases) out.biases.push_back(b.cast<float>());
  return out;
}

Params widen_params(const ParamsF& params) {
  Params out;
  out.weights.reserve(params.weights.size());
  out.biases.reserve(params.biases.size());
  for (const auto& w : params.weights) out.weights.push_back(w.cast<double>());
  for (const auto& b : params.biases) out.biases.push_back(b.cast<double>());
  return out;
}

AdamStateF AdamStateF::zeros_like(const ParamsF& params) {
  AdamStateF s;
  s.m = params;
  s.v = params;
  s.m.set_zero();
  s.v.set_zero();
  s.step = 0;
  return s;
}

Eigen::MatrixXf forward_batch(const NetSpec& spec, const ParamsF& params,
                              const Eigen::MatrixXf& inputs, BatchCacheF* cache) {
  if (params.weights.empty() || inputs.rows() != params.weights[0].cols()) {
    throw ShapeMismatch("forward_batch: input width mismatch");
  }
  if (cache != nullptr) {
    cache->activations.clear();
    cache->activations.push_back(inputs);
  }
  Eigen::MatrixXf a = inputs;
  const std::size_t last = params.weights.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    Eigen::MatrixXf z =
        (params.weights[l] * a).colwise() + params.biases[l];
    if (l < last && spec.activation == Activation::Tanh) {
      a = z.array().tanh().matrix();
    } else {
      a = std::move(z);
    }
    if (cache != nullptr) cache->activations.push_back(a);
  }
  return a;
}

GradsF backward_batch(const NetSpec& spec, const ParamsF& params,
                      const BatchCacheF& cache,
                      const Eigen::MatrixXf& grad_outputs) {
  if (cache.activations.size() != params.weights.size() + 1) {
    throw ShapeMismatch("stale forward cache");
  }
  GradsF grads;
  grads.weights.resize(params.weights.size());
  grads.biases.resize(params.biases.size());
  Eigen::MatrixXf delta = grad_outputs;
  for (std::size_t l = params.weights.size(); l-- > 0;) {
    grads.weights[l] = delta * cache.activations[l].transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXf prev = params.weights[l].transpose() * delta;
      if (spec.activation == Activation::Tanh) {
        prev.array() *= 1.0f - cache.activations[l].array().square();
      }
      delta = std::move(prev);
    }
  }
  return grads;
}

CondCache precompute_cond(const Params& params, const Eigen::VectorXd& cond) {
  if (params.weights.empty() || cond.rows() > params.weights[0].cols()) {
    throw ShapeMismatch("cond longer than the first layer input");
  }
  CondCache cache;
  cache.cond_dim = cond.rows();
  cache.first_layer_cond = params.weights[0].leftCols(cond.rows()) * cond;
  return cache;
}

Eigen::VectorXd forward_cached(const NetSpec& spec, const Params& params,
                               const CondCache& cond_cache,
                               const Eigen::VectorXd& rest) {
  if (cond_cache.cond_dim + rest.rows() != spec.input_width()) {
    throw ShapeMismatch("cond + rest does not cover the input layer");
  }
  Eigen::VectorXd a = cond_cache.first_layer_cond +
                      params.weights[0].rightCols(rest.rows()) * rest +
                      params.biases[0];
  const std::size_t last = params.weights.size() - 1;
  if (last >= 1 && spec.activation == Activation::Tanh) {
    a = a.array().tanh().matrix();
  }
  for (std::size_t l = 1; l <= last; ++l) {
    Eigen::VectorXd z = params.weights[l] * a + params.biases[l];
    if (l < last && spec.activation == Activation::Tanh) {
      a = z.array().tanh().matrix();
    } else {
      a = std::move(z);
    }
  }
  return a;
}

void adamw_step(Params& params, const Grads& grads, const OptConfig& cfg,
                AdamState& state) {
  cfg.validate();
  if (grads.weights.size() != params.weights.size()) {
    throw ShapeMismatch("grads do not match params");
  }
  if (!params.all_finite()) throw NonFinite("adamw_step: non-finite parameter");
  if (!grads.all_finite()) throw NonFinite("adamw_step: non-finite gradient");

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  auto update = [&](Eigen::Ref<Eigen::MatrixXd> p, const Eigen::MatrixXd& g,
                    Eigen::Ref<Eigen::MatrixXd> m, Eigen::Ref<Eigen::MatrixXd> v) {
    p -= cfg.lr * cfg.weight_decay * p;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v.array() = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square();
    p.array() -=
        cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
  };

  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], grads.weights[l], state.m.weights[l],
           state.v.weights[l]);
    update(params.biases[l], grads.biases[l], state.m.biases[l],
           state.v.biases[l]);
  }
}

void adamw_step(ParamsF& params, const GradsF& grads, const OptConfig& cfg,
                AdamStateF& state) {
  cfg.validate();
  if (grads.weights.size() != params.weights.size()) {
    throw ShapeMismatch("grads do not match params");
  }
  ++state.step;
  const float lr = static_cast<float>(cfg.lr);
  const float wd = static_cast<float>(cfg.weight_decay);
  const float b1 = static_cast<float>(cfg.beta1);
  const float b2 = static_cast<float>(cfg.beta2);
  const float eps = static_cast<float>(cfg.eps);
  const float bc1 =
      1.0f - std::pow(b1, static_cast<float>(state.step));
  const float bc2 =
      1.0f - std::pow(b2, static_cast<float>(state.step));

  auto update = [&](Eigen::Ref<Eigen::MatrixXf> p, const Eigen::MatrixXf& g,
                    Eigen::Ref<Eigen::MatrixXf> m, Eigen::Ref<Eigen::MatrixXf> v) {
    if (!p.allFinite()) throw NonFinite("adamw_step: non-finite parameter");
    if (!g.allFinite()) throw NonFinite("adamw_step: non-finite gradient");
    p -= lr * wd * p;
    m = b1 * m + (1.0f - b1) * g;
    v.array() = b2 * v.array() + (1.0f - b2) * g.array().square();
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  };

  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], grads.weights[l], state.m.weights[l],
           state.v.weights[l]);
    update(params.biases[l], grads.biases[l], state.m.biases[l],
           state.v.biases[l]);
  }
}

}  // namespace ma2
