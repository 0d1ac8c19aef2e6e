#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "ma2/rng.hpp"

namespace ma2 {

struct ShapeMismatch : std::invalid_argument {
  explicit ShapeMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct NonFinite : std::runtime_error {
  explicit NonFinite(const std::string& what) : std::runtime_error(what) {}
};

enum class Activation : std::uint8_t { Tanh = 0, Identity = 1 };

// Fully-connected net: affine + activation per hidden layer, affine output.
// The smooth activation keeps finite-difference checks valid everywhere.
struct NetSpec {
  std::vector<int> layer_widths;  // input -> hidden... -> output
  Activation activation = Activation::Tanh;
  int timestep_embed_dim = 32;

  void validate() const {
    if (layer_widths.size() < 2) {
      throw std::invalid_argument("NetSpec: need at least input and output layers");
    }
    for (int w : layer_widths) {
      if (w <= 0) throw std::invalid_argument("NetSpec: widths must be positive");
    }
    if (timestep_embed_dim <= 0 || timestep_embed_dim % 2 != 0) {
      throw std::invalid_argument("NetSpec: embed dim must be positive and even");
    }
  }

  int input_width() const { return layer_widths.front(); }
  int output_width() const { return layer_widths.back(); }
};

struct Params {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  long count() const;
  bool all_finite() const;
  void set_zero();
};

using Grads = Params;

struct OptConfig {
  double lr = 1e-4;
  double beta1 = 0.95;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-6;
  int batch_size = 32;
  int epochs = 150;

  void validate() const {
    if (lr <= 0.0) throw std::invalid_argument("OptConfig: lr must be > 0");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
      throw std::invalid_argument("OptConfig: betas must be in (0,1)");
    }
    if (batch_size < 1 || epochs < 0) {
      throw std::invalid_argument("OptConfig: batch size >= 1, epochs >= 0");
    }
  }
};

struct AdamState {
  Grads m, v;
  long step = 0;

  static AdamState zeros_like(const Params& params);
};

// Sinusoidal features of k/K: dim/2 geometric frequencies, sin and cos
// interleaved.
Eigen::VectorXd embed_fraction(double s, int dim);

inline Eigen::VectorXd embed_timestep(int k, int K, int dim) {
  if (k < 0 || k > K) throw std::invalid_argument("embed_timestep: k out of range");
  return embed_fraction(static_cast<double>(k) / K, dim);
}

// Uniform +-sqrt(1/fan_in) initialization, seeded.
Params init_params(const NetSpec& spec, std::uint64_t seed);

struct ForwardCache {
  std::vector<Eigen::VectorXd> activations;  // activations[0] = input
};

Eigen::VectorXd forward(const NetSpec& spec, const Params& params,
                        const Eigen::VectorXd& input, ForwardCache* cache = nullptr);

// Exact reverse-mode gradients of output . grad_output w.r.t. every
// parameter; optionally also w.r.t. the input.
Grads backward(const NetSpec& spec, const Params& params,
               const ForwardCache& cache, const Eigen::VectorXd& grad_output,
               Eigen::VectorXd* grad_input = nullptr);

// Column-per-sample batched variants used by the training loop.
struct BatchCache {
  std::vector<Eigen::MatrixXd> activations;
};

Eigen::MatrixXd forward_batch(const NetSpec& spec, const Params& params,
                              const Eigen::MatrixXd& inputs,
                              BatchCache* cache = nullptr);

Grads backward_batch(const NetSpec& spec, const Params& params,
                     const BatchCache& cache, const Eigen::MatrixXd& grad_outputs);

// Single-precision path used by the batched training loop. Wide-conditioning
// variants are bound by GEMM throughput and by the memory traffic of the
// gradients and optimizer moments, so the whole training state runs in
// float; trained parameters are widened back to double once at the end.
struct ParamsF {
  std::vector<Eigen::MatrixXf> weights;
  std::vector<Eigen::VectorXf> biases;

  void set_zero();
};

using GradsF = ParamsF;

ParamsF cast_params(const Params& params);
Params widen_params(const ParamsF& params);

struct AdamStateF {
  GradsF m, v;
  long step = 0;

  static AdamStateF zeros_like(const ParamsF& params);
};

struct BatchCacheF {
  std::vector<Eigen::MatrixXf> activations;
};

Eigen::MatrixXf forward_batch(const NetSpec& spec, const ParamsF& params,
                              const Eigen::MatrixXf& inputs,
                              BatchCacheF* cache = nullptr);

GradsF backward_batch(const NetSpec& spec, const ParamsF& params,
                      const BatchCacheF& cache,
                      const Eigen::MatrixXf& grad_outputs);

void adamw_step(ParamsF& params, const GradsF& grads, const OptConfig& cfg,
                AdamStateF& state);

// The conditioning prefix of the input is constant across the denoising
// steps of one decision, so its first-layer projection is computed once.
struct CondCache {
  Eigen::Index cond_dim = 0;
  Eigen::VectorXd first_layer_cond;  // W0[:, :cond_dim] * cond
};

CondCache precompute_cond(const Params& params, const Eigen::VectorXd& cond);

Eigen::VectorXd forward_cached(const NetSpec& spec, const Params& params,
                               const CondCache& cond_cache,
                               const Eigen::VectorXd& rest);

// Decoupled weight decay, then bias-corrected Adam moments. Aborts on any
// non-finite parameter or gradient.
void adamw_step(Params& params, const Grads& grads, const OptConfig& cfg,
                AdamState& state);

}  // namespace ma2
