#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "tcrl/rng.hpp"

namespace tcrl {

// H x d_a continuous action chunk, row-major.
struct ActionChunk {
  int horizon = 0;
  int dim = 0;
  std::vector<double> values;

  double at(int h, int d) const { return values[static_cast<size_t>(h) * dim + d]; }
  double& ref(int h, int d) { return values[static_cast<size_t>(h) * dim + d]; }
  size_t size() const { return values.size(); }
};

ActionChunk zero_chunk(int horizon, int dim);

struct FlowState {
  double tau = 0.0;
  ActionChunk noised;
  ActionChunk eps;
};

// noised = tau * clean + (1 - tau) * eps. Throws ValidationError on shape
// mismatch or tau outside [0, 1].
FlowState interpolate(const ActionChunk& clean, const ActionChunk& eps, double tau);

struct FlowConfig {
  int horizon = 1;
  int action_dim = 1;
  int cond_dim = 1;
  int hidden_dim = 32;
  double init_sigma = 0.05;

  int input_dim() const { return horizon * action_dim + 1 + cond_dim; }
  int output_dim() const { return horizon * action_dim; }
};

// Velocity regressor: tanh MLP on [noised chunk, tau, condition], flat theta
// laid out [w1 | b1 | w2 | b2].
struct FlowParams {
  FlowConfig config;
  std::vector<double> theta;

  size_t w1_offset() const { return 0; }
  size_t b1_offset() const {
    return static_cast<size_t>(config.hidden_dim) * config.input_dim();
  }
  size_t w2_offset() const { return b1_offset() + config.hidden_dim; }
  size_t b2_offset() const {
    return w2_offset() + static_cast<size_t>(config.output_dim()) * config.hidden_dim;
  }
  size_t num_params() const { return b2_offset() + config.output_dim(); }
};

FlowParams init_flow(const FlowConfig& config, uint64_t seed);

// Predicted velocity field, flattened H*d_a.
std::vector<double> flow_velocity(const FlowParams& params, const ActionChunk& noised, double tau,
                                  std::span<const double> cond);

struct FlowLossGrad {
  double loss = 0.0;
  std::vector<double> dtheta;
};

// Mean squared error between the predicted velocity and (clean - eps), with
// the analytic parameter gradient. Throws NumericError on non-finite output.
FlowLossGrad fm_loss(const FlowParams& params, const ActionChunk& clean, const ActionChunk& eps,
                     double tau, std::span<const double> cond);

// Generic Euler integrator from tau=0 (noise) to tau=1: x += (1/steps) * v(x, tau_k).
// The field is evaluated at tau_k = k/steps. x0 is standard normal from the seed.
using VelocityField = std::function<std::vector<double>(const ActionChunk& x, double tau)>;
ActionChunk euler_sample(const VelocityField& field, int horizon, int dim, int steps,
                         uint64_t seed);

ActionChunk sample_chunk(const FlowParams& params, std::span<const double> cond, int steps,
                         uint64_t seed);

struct FlowTrainConfig {
  int steps = 2000;
  double learning_rate = 1e-2;
  // > 0 ramps the rate linearly down to this value over the run.
  double final_learning_rate = 0.0;
  uint64_t seed = 1;
};

// Fits the velocity model on (condition, clean chunk) pairs with fresh noise
// and uniform tau each step.
FlowParams train_flow(const std::vector<std::pair<std::vector<double>, ActionChunk>>& data,
                      const FlowConfig& config, const FlowTrainConfig& train);

}  // namespace tcrl
