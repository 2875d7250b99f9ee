#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tcrl/batch.hpp"
#include "tcrl/contrastive.hpp"

namespace tcrl {

enum class NormalizationMode { kRaw, kL2Temp };

NormalizationMode normalization_from_string(const std::string& name);
std::string normalization_to_string(NormalizationMode mode);

struct EncoderConfig {
  int num_states = 0;
  int num_actions = 0;
  int num_goals = 0;
  int hidden_dim = 64;
  int embed_dim = 16;
  NormalizationMode mode = NormalizationMode::kL2Temp;
  double init_sigma = 0.05;
  // No published value exists for this; 1/0.07 follows common contrastive
  // practice and is surfaced in the config echo.
  double init_log_temperature = std::log(1.0 / 0.07);

  int input_dim() const { return num_states + num_actions; }
};

// One flat parameter vector: [w1 | b1 | w2 | b2 | goal_table | log_temp].
// w1 is hidden x input, w2 is embed x hidden, goal_table is num_goals x embed.
struct EncoderParams {
  EncoderConfig config;
  std::vector<double> theta;

  size_t w1_offset() const { return 0; }
  size_t b1_offset() const {
    return static_cast<size_t>(config.hidden_dim) * config.input_dim();
  }
  size_t w2_offset() const { return b1_offset() + config.hidden_dim; }
  size_t b2_offset() const {
    return w2_offset() + static_cast<size_t>(config.embed_dim) * config.hidden_dim;
  }
  size_t goal_offset() const { return b2_offset() + config.embed_dim; }
  size_t temp_offset() const {
    return goal_offset() + static_cast<size_t>(config.num_goals) * config.embed_dim;
  }
  size_t num_params() const { return temp_offset() + 1; }

  double log_temperature() const { return theta[temp_offset()]; }
  double temperature() const {
    return config.mode == NormalizationMode::kRaw ? 1.0 : std::exp(log_temperature());
  }
};

EncoderParams init_encoder(const EncoderConfig& config, uint64_t seed);

// phi(s, a). Unit norm in l2_temp mode. Throws ValidationError on
// out-of-range state or action.
std::vector<double> encode_sa(const EncoderParams& params, int state, int action);

// psi(goal). Unit norm in l2_temp mode.
std::vector<double> encode_goal(const EncoderParams& params, int goal_id);

// Temperature-scaled similarity for a single pair, matching the training-time
// logits exactly.
double pair_score(const EncoderParams& params, int state, int action, int goal_id);

struct EncoderForward {
  std::vector<double> hidden;   // [B][hidden] tanh activations
  std::vector<double> phi_raw;  // [B][embed] pre-normalization
  std::vector<double> phi;      // [B][embed] as used in the logits
  std::vector<double> psi_raw;  // [U][embed]
  std::vector<double> psi;      // [U][embed]
  double temperature = 1.0;
  SimilarityMatrix sim;
};

EncoderForward encoder_forward(const EncoderParams& params, const Batch& batch);

// Backpropagates d loss / d logits to a flat gradient over theta.
std::vector<double> encoder_backward(const EncoderParams& params, const Batch& batch,
                                     const EncoderForward& fwd,
                                     const std::vector<double>& dlogits);

// Central finite differences of the combined objective against the analytic
// gradient. Checks every coordinate when num_params <= max_coords, otherwise
// a random subset of max_coords coordinates. Returns the max relative error.
double finite_diff_check(const EncoderParams& params, const Batch& batch, double gamma,
                         double lambda_crl, double h, int max_coords, Rng& rng);

}  // namespace tcrl
