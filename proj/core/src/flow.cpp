#include "tcrl/flow.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "tcrl/errors.hpp"
#include "tcrl/optim.hpp"

namespace tcrl {

ActionChunk zero_chunk(int horizon, int dim) {
  if (horizon < 1 || dim < 1) throw ValidationError("chunk: horizon and dim must be >= 1");
  return {horizon, dim, std::vector<double>(static_cast<size_t>(horizon) * dim, 0.0)};
}

FlowState interpolate(const ActionChunk& clean, const ActionChunk& eps, double tau) {
  if (clean.horizon != eps.horizon || clean.dim != eps.dim ||
      clean.values.size() != eps.values.size())
    throw ValidationError("interpolate: chunk shapes differ");
  if (tau < 0.0 || tau > 1.0) throw ValidationError("interpolate: tau must be in [0, 1]");
  FlowState st;
  st.tau = tau;
  st.eps = eps;
  st.noised = clean;
  for (size_t i = 0; i < clean.values.size(); ++i)
    st.noised.values[i] = tau * clean.values[i] + (1.0 - tau) * eps.values[i];
  return st;
}

FlowParams init_flow(const FlowConfig& config, uint64_t seed) {
  if (config.horizon < 1 || config.action_dim < 1 || config.cond_dim < 0 ||
      config.hidden_dim < 1)
    throw ValidationError("flow: bad dimensions");
  FlowParams p;
  p.config = config;
  p.theta.resize(p.num_params());
  Rng rng(seed);
  for (double& v : p.theta) v = config.init_sigma * rng.normal();
  return p;
}

namespace {

void forward(const FlowParams& p, const ActionChunk& noised, double tau,
             std::span<const double> cond, std::vector<double>& input,
             std::vector<double>& hidden, std::vector<double>& out) {
  const FlowConfig& c = p.config;
  if (noised.horizon != c.horizon || noised.dim != c.action_dim)
    throw ValidationError("flow: chunk shape does not match the model");
  if (static_cast<int>(cond.size()) != c.cond_dim)
    throw ValidationError("flow: condition dimension mismatch");

  input.clear();
  input.insert(input.end(), noised.values.begin(), noised.values.end());
  input.push_back(tau);
  input.insert(input.end(), cond.begin(), cond.end());

  const int in = c.input_dim(), hid = c.hidden_dim, od = c.output_dim();
  const double* w1 = p.theta.data() + p.w1_offset();
  const double* b1 = p.theta.data() + p.b1_offset();
  const double* w2 = p.theta.data() + p.w2_offset();
  const double* b2 = p.theta.data() + p.b2_offset();

  hidden.resize(hid);
  for (int k = 0; k < hid; ++k) {
    double s = b1[k];
    const double* row = w1 + static_cast<size_t>(k) * in;
    for (int i = 0; i < in; ++i) s += row[i] * input[i];
    hidden[k] = std::tanh(s);
  }
  out.resize(od);
  for (int d = 0; d < od; ++d) {
    double s = b2[d];
    const double* row = w2 + static_cast<size_t>(d) * hid;
    for (int k = 0; k < hid; ++k) s += row[k] * hidden[k];
    out[d] = s;
  }
}

}  // namespace

std::vector<double> flow_velocity(const FlowParams& params, const ActionChunk& noised, double tau,
                                  std::span<const double> cond) {
  std::vector<double> input, hidden, out;
  forward(params, noised, tau, cond, input, hidden, out);
  return out;
}

FlowLossGrad fm_loss(const FlowParams& params, const ActionChunk& clean, const ActionChunk& eps,
                     double tau, std::span<const double> cond) {
  FlowState st = interpolate(clean, eps, tau);
  std::vector<double> input, hidden, pred;
  forward(params, st.noised, tau, cond, input, hidden, pred);

  const FlowConfig& c = params.config;
  const int in = c.input_dim(), hid = c.hidden_dim, od = c.output_dim();

  FlowLossGrad out;
  out.dtheta.assign(params.theta.size(), 0.0);
  std::vector<double> dout(od);
  for (int d = 0; d < od; ++d) {
    double target = clean.values[d] - eps.values[d];
    double diff = pred[d] - target;
    if (!std::isfinite(diff)) throw NumericError("fm_loss: non-finite prediction");
    out.loss += diff * diff;
    dout[d] = 2.0 * diff / od;
  }
  out.loss /= od;

  double* gw1 = out.dtheta.data() + params.w1_offset();
  double* gb1 = out.dtheta.data() + params.b1_offset();
  double* gw2 = out.dtheta.data() + params.w2_offset();
  double* gb2 = out.dtheta.data() + params.b2_offset();
  const double* w2 = params.theta.data() + params.w2_offset();

  std::vector<double> dh(hid, 0.0);
  for (int d = 0; d < od; ++d) {
    gb2[d] += dout[d];
    double* gw2_row = gw2 + static_cast<size_t>(d) * hid;
    const double* w2_row = w2 + static_cast<size_t>(d) * hid;
    for (int k = 0; k < hid; ++k) {
      gw2_row[k] += dout[d] * hidden[k];
      dh[k] += w2_row[k] * dout[d];
    }
  }
  for (int k = 0; k < hid; ++k) {
    double dpre = dh[k] * (1.0 - hidden[k] * hidden[k]);
    gb1[k] += dpre;
    double* gw1_row = gw1 + static_cast<size_t>(k) * in;
    for (int i = 0; i < in; ++i) gw1_row[i] += dpre * input[i];
  }
  return out;
}

ActionChunk euler_sample(const VelocityField& field, int horizon, int dim, int steps,
                         uint64_t seed) {
  if (steps < 1) throw ValidationError("euler_sample: steps must be >= 1");
  ActionChunk x = zero_chunk(horizon, dim);
  Rng rng(seed);
  for (double& v : x.values) v = rng.normal();
  const double dt = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    std::vector<double> v = field(x, k * dt);
    if (v.size() != x.values.size())
      throw ValidationError("euler_sample: velocity size mismatch");
    for (size_t i = 0; i < x.values.size(); ++i) x.values[i] += dt * v[i];
  }
  return x;
}

ActionChunk sample_chunk(const FlowParams& params, std::span<const double> cond, int steps,
                         uint64_t seed) {
  return euler_sample(
      [&](const ActionChunk& x, double tau) { return flow_velocity(params, x, tau, cond); },
  params.config.horizon, params.config.action_dim, steps, seed);
}

FlowParams train_flow(const std::vector<std::pair<std::vector<double>, ActionChunk>>& data,
                      const FlowConfig& config, const FlowTrainConfig& train) {
  if (data.empty()) throw ValidationError("train_flow: empty dataset");
  FlowParams params = init_flow(config, train.seed);
  Rng rng(train.seed + 0x9e3779b97f4a7c15ull);
  AdamState adam;
  for (int step = 0; step < train.steps; ++step) {
    const auto& [cond, clean] = data[rng.uniform_int(static_cast<int>(data.size()))];
    ActionChunk eps = zero_chunk(config.horizon, config.action_dim);
    for (double& v : eps.values) v = rng.normal();
    double tau = rng.uniform();
    FlowLossGrad lg = fm_loss(params, clean, eps, tau, cond);
    if (!std::isfinite(lg.loss))
      throw NumericError("train_flow: non-finite loss at step " + std::to_string(step));
    double lr = train.learning_rate;
    if (train.final_learning_rate > 0.0 && train.steps > 1)
      lr += (train.final_learning_rate - train.learning_rate) * step / (train.steps - 1);
    adam.apply(params.theta, lg.dtheta, lr);
  }
  return params;
}

}  // namespace tcrl
