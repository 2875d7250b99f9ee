#include "tcrl/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "tcrl/errors.hpp"
#include "tcrl/linalg.hpp"

namespace tcrl {

NormalizationMode normalization_from_string(const std::string& name) {
  if (name == "raw") return NormalizationMode::kRaw;
  if (name == "l2_temp") return NormalizationMode::kL2Temp;
  throw ValidationError("unknown normalization mode: " + name);
}

std::string normalization_to_string(NormalizationMode mode) {
  return mode == NormalizationMode::kRaw ? "raw" : "l2_temp";
}

namespace {

void check_config(const EncoderConfig& c) {
  if (c.num_states < 1 || c.num_actions < 1 || c.num_goals < 1)
    throw ValidationError("encoder: state, action, and goal counts must be positive");
  if (c.embed_dim < 2) throw ValidationError("encoder: embed_dim must be >= 2");
  if (c.hidden_dim < 1) throw ValidationError("encoder: hidden_dim must be >= 1");
}

void check_sa(const EncoderConfig& c, int state, int action) {
  if (state < 0 || state >= c.num_states)
    throw ValidationError("encoder: state " + std::to_string(state) + " outside [0, " +
                          std::to_string(c.num_states) + ")");
  if (action < 0 || action >= c.num_actions)
    throw ValidationError("encoder: action " + std::to_string(action) + " outside [0, " +
                          std::to_string(c.num_actions) + ")");
}

// hidden = tanh(w1[:, state] + w1[:, S + action] + b1); phi = w2 hidden + b2.
void sa_forward(const EncoderParams& p, int state, int action, std::vector<double>& hidden,
                std::vector<double>& phi_raw) {
  const EncoderConfig& c = p.config;
  const int in = c.input_dim();
  const double* w1 = p.theta.data() + p.w1_offset();
  const double* b1 = p.theta.data() + p.b1_offset();
  const double* w2 = p.theta.data() + p.w2_offset();
  const double* b2 = p.theta.data() + p.b2_offset();

  hidden.resize(c.hidden_dim);
  for (int k = 0; k < c.hidden_dim; ++k)
    hidden[k] = std::tanh(w1[static_cast<size_t>(k) * in + state] +
                          w1[static_cast<size_t>(k) * in + c.num_states + action] + b1[k]);
  phi_raw.assign(c.embed_dim, 0.0);
  for (int d = 0; d < c.embed_dim; ++d) {
    double s = b2[d];
    const double* row = w2 + static_cast<size_t>(d) * c.hidden_dim;
    for (int k = 0; k < c.hidden_dim; ++k) s += row[k] * hidden[k];
    phi_raw[d] = s;
  }
}

std::vector<double> normalize(const std::vector<double>& v) {
  double n = l2_norm(v);
  if (!(n > 1e-300)) throw NumericError("encoder: zero-norm embedding cannot be normalized");
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

}  // namespace

EncoderParams init_encoder(const EncoderConfig& config, uint64_t seed) {
  check_config(config);
  EncoderParams p;
  p.config = config;
  p.theta.resize(p.num_params());
  Rng rng(seed);
  for (size_t i = 0; i < p.temp_offset(); ++i) p.theta[i] = config.init_sigma * rng.normal();
  p.theta[p.temp_offset()] = config.init_log_temperature;
  return p;
}

std::vector<double> encode_sa(const EncoderParams& params, int state, int action) {
  check_sa(params.config, state, action);
  std::vector<double> hidden, phi;
  sa_forward(params, state, action, hidden, phi);
  return params.config.mode == NormalizationMode::kL2Temp ? normalize(phi) : phi;
}

std::vector<double> encode_goal(const EncoderParams& params, int goal_id) {
  const EncoderConfig& c = params.config;
  if (goal_id < 0 || goal_id >= c.num_goals)
    throw ValidationError("encoder: goal " + std::to_string(goal_id) + " outside [0, " +
                          std::to_string(c.num_goals) + ")");
  const double* row = params.theta.data() + params.goal_offset() +
                      static_cast<size_t>(goal_id) * c.embed_dim;
  std::vector<double> psi(row, row + c.embed_dim);
  return c.mode == NormalizationMode::kL2Temp ? normalize(psi) : psi;
}

double pair_score(const EncoderParams& params, int state, int action, int goal_id) {
  std::vector<double> phi = encode_sa(params, state, action);
  std::vector<double> psi = encode_goal(params, goal_id);
  return params.temperature() * dot(phi, psi);
}

EncoderForward encoder_forward(const EncoderParams& params, const Batch& batch) {
  const EncoderConfig& c = params.config;
  const int b = batch.size(), u = batch.num_unique();
  const bool norm = c.mode == NormalizationMode::kL2Temp;

  EncoderForward f;
  f.temperature = params.temperature();
  f.hidden.resize(static_cast<size_t>(b) * c.hidden_dim);
  f.phi_raw.resize(static_cast<size_t>(b) * c.embed_dim);
  f.phi.resize(static_cast<size_t>(b) * c.embed_dim);

  std::vector<double> hidden, phi;
  for (int j = 0; j < b; ++j) {
    check_sa(c, batch.samples[j].state, batch.samples[j].action);
    sa_forward(params, batch.samples[j].state, batch.samples[j].action, hidden, phi);
    std::copy(hidden.begin(), hidden.end(), f.hidden.begin() + static_cast<size_t>(j) * c.hidden_dim);
    std::copy(phi.begin(), phi.end(), f.phi_raw.begin() + static_cast<size_t>(j) * c.embed_dim);
    std::vector<double> used = norm ? normalize(phi) : phi;
    std::copy(used.begin(), used.end(), f.phi.begin() + static_cast<size_t>(j) * c.embed_dim);
  }

  f.psi_raw.resize(static_cast<size_t>(u) * c.embed_dim);
  f.psi.resize(static_cast<size_t>(u) * c.embed_dim);
  for (int col = 0; col < u; ++col) {
    int g = batch.unique_goals[col];
    if (g < 0 || g >= c.num_goals)
      throw ValidationError("encoder: batch goal " + std::to_string(g) +
                            " outside the goal table");
    const double* row = params.theta.data() + params.goal_offset() +
                        static_cast<size_t>(g) * c.embed_dim;
    std::vector<double> psi(row, row + c.embed_dim);
    std::copy(psi.begin(), psi.end(), f.psi_raw.begin() + static_cast<size_t>(col) * c.embed_dim);
    std::vector<double> used = norm ? normalize(psi) : psi;
    std::copy(used.begin(), used.end(), f.psi.begin() + static_cast<size_t>(col) * c.embed_dim);
  }

  f.sim.batch_size = b;
  f.sim.num_goals = u;
  f.sim.logits.resize(static_cast<size_t>(b) * u);
  for (int j = 0; j < b; ++j) {
    std::span<const double> phi_j(f.phi.data() + static_cast<size_t>(j) * c.embed_dim,
                                  static_cast<size_t>(c.embed_dim));
    for (int col = 0; col < u; ++col) {
      std::span<const double> psi_c(f.psi.data() + static_cast<size_t>(col) * c.embed_dim,
                                    static_cast<size_t>(c.embed_dim));
      f.sim.ref(j, col) = f.temperature * dot(phi_j, psi_c);
    }
  }
  return f;
}

std::vector<double> encoder_backward(const EncoderParams& params, const Batch& batch,
                                     const EncoderForward& fwd,
                                     const std::vector<double>& dlogits) {
  const EncoderConfig& c = params.config;
  const int b = batch.size(), u = batch.num_unique();
  const int in = c.input_dim();
  const bool norm = c.mode == NormalizationMode::kL2Temp;
  if (dlogits.size() != static_cast<size_t>(b) * u)
    throw ValidationError("encoder_backward: dlogits shape mismatch");

  std::vector<double> grad(params.theta.size(), 0.0);
  double* gw1 = grad.data() + params.w1_offset();
  double* gb1 = grad.data() + params.b1_offset();
  double* gw2 = grad.data() + params.w2_offset();
  double* gb2 = grad.data() + params.b2_offset();
  double* ggoal = grad.data() + params.goal_offset();
  const double* w2 = params.theta.data() + params.w2_offset();

  // d loss / d used-embeddings; logits are temperature * phi . psi.
  std::vector<double> dphi_used(static_cast<size_t>(b) * c.embed_dim, 0.0);
  std::vector<double> dpsi_used(static_cast<size_t>(u) * c.embed_dim, 0.0);
  double dlog_temp = 0.0;
  for (int j = 0; j < b; ++j) {
    for (int col = 0; col < u; ++col) {
      double dl = dlogits[static_cast<size_t>(j) * u + col];
      if (dl == 0.0) continue;
      if (norm) dlog_temp += dl * fwd.sim.at(j, col);
      for (int d = 0; d < c.embed_dim; ++d) {
        dphi_used[static_cast<size_t>(j) * c.embed_dim + d] +=
            dl * fwd.temperature * fwd.psi[static_cast<size_t>(col) * c.embed_dim + d];
        dpsi_used[static_cast<size_t>(col) * c.embed_dim + d] +=
            dl * fwd.temperature * fwd.phi[static_cast<size_t>(j) * c.embed_dim + d];
      }
    }
  }
  if (norm) grad[params.temp_offset()] = dlog_temp;

  // Through the normalization: d_raw = (d_hat - (hat . d_hat) hat) / |raw|.
  auto unnormalize = [&](const double* raw, const double* hat, const double* dhat,
                         double* draw) {
    std::span<const double> raw_s(raw, static_cast<size_t>(c.embed_dim));
    double n = l2_norm(raw_s);
    double proj = 0.0;
    for (int d = 0; d < c.embed_dim; ++d) proj += hat[d] * dhat[d];
    for (int d = 0; d < c.embed_dim; ++d) draw[d] = (dhat[d] - proj * hat[d]) / n;
  };

  std::vector<double> dphi_raw(static_cast<size_t>(b) * c.embed_dim);
  std::vector<double> dpsi_raw(static_cast<size_t>(u) * c.embed_dim);
  if (norm) {
    for (int j = 0; j < b; ++j)
      unnormalize(fwd.phi_raw.data() + static_cast<size_t>(j) * c.embed_dim,
                  fwd.phi.data() + static_cast<size_t>(j) * c.embed_dim,
                  dphi_used.data() + static_cast<size_t>(j) * c.embed_dim,
                  dphi_raw.data() + static_cast<size_t>(j) * c.embed_dim);
    for (int col = 0; col < u; ++col)
      unnormalize(fwd.psi_raw.data() + static_cast<size_t>(col) * c.embed_dim,
                  fwd.psi.data() + static_cast<size_t>(col) * c.embed_dim,
                  dpsi_used.data() + static_cast<size_t>(col) * c.embed_dim,
                  dpsi_raw.data() + static_cast<size_t>(col) * c.embed_dim);
  } else {
    dphi_raw = dphi_used;
    dpsi_raw = dpsi_used;
  }

  for (int col = 0; col < u; ++col) {
    int g = batch.unique_goals[col];
    for (int d = 0; d < c.embed_dim; ++d)
      ggoal[static_cast<size_t>(g) * c.embed_dim + d] +=
          dpsi_raw[static_cast<size_t>(col) * c.embed_dim + d];
  }

  std::vector<double> dh(c.hidden_dim);
  for (int j = 0; j < b; ++j) {
    const double* h = fwd.hidden.data() + static_cast<size_t>(j) * c.hidden_dim;
    const double* dphi = dphi_raw.data() + static_cast<size_t>(j) * c.embed_dim;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (int d = 0; d < c.embed_dim; ++d) {
      gb2[d] += dphi[d];
      double* gw2_row = gw2 + static_cast<size_t>(d) * c.hidden_dim;
      const double* w2_row = w2 + static_cast<size_t>(d) * c.hidden_dim;
      for (int k = 0; k < c.hidden_dim; ++k) {
        gw2_row[k] += dphi[d] * h[k];
        dh[k] += w2_row[k] * dphi[d];
      }
    }
    const int state = batch.samples[j].state;
    const int action = batch.samples[j].action;
    for (int k = 0; k < c.hidden_dim; ++k) {
      double dpre = dh[k] * (1.0 - h[k] * h[k]);
      gb1[k] += dpre;
      gw1[static_cast<size_t>(k) * in + state] += dpre;
      gw1[static_cast<size_t>(k) * in + c.num_states + action] += dpre;
    }
  }
  return grad;
}

double finite_diff_check(const EncoderParams& params, const Batch& batch, double gamma,
                         double lambda_crl, double h, int max_coords, Rng& rng) {
  if (h < 1e-7 || h > 1e-3)
    throw ValidationError("finite_diff_check: h must lie in [1e-7, 1e-3]");

  EncoderForward fwd = encoder_forward(params, batch);
  CombinedCrl combined = combined_crl_loss(fwd.sim, batch, gamma, lambda_crl);
  std::vector<double> analytic = encoder_backward(params, batch, fwd, combined.dlogits);

  auto objective = [&](const EncoderParams& p) {
    EncoderForward f = encoder_forward(p, batch);
    return combined_crl_loss(f.sim, batch, gamma, lambda_crl).loss;
  };

  std::vector<size_t> coords;
  const size_t n = params.theta.size();
  if (n <= static_cast<size_t>(max_coords)) {
    for (size_t i = 0; i < n; ++i) coords.push_back(i);
  } else {
    std::set<size_t> chosen;
    while (chosen.size() < static_cast<size_t>(max_coords))
      chosen.insert(static_cast<size_t>(rng.uniform_int(static_cast<int>(n))));
    coords.assign(chosen.begin(), chosen.end());
  }

  EncoderParams probe = params;
  double worst = 0.0;
  for (size_t i : coords) {
    double saved = probe.theta[i];
    probe.theta[i] = saved + h;
    double up = objective(probe);
    probe.theta[i] = saved - h;
    double down = objective(probe);
    probe.theta[i] = saved;
    double fd = (up - down) / (2.0 * h);
    double denom = std::max({1e-8, std::fabs(fd), std::fabs(analytic[i])});
    worst = std::max(worst, std::fabs(fd - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace tcrl
