#include "tcrl/train.hpp"

#include <cmath>
#include <string>

#include "tcrl/errors.hpp"
#include "tcrl/linalg.hpp"
#include "tcrl/optim.hpp"

namespace tcrl {

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "sgd") return Optimizer::kSgd;
  if (name == "adam") return Optimizer::kAdam;
  throw ValidationError("unknown optimizer: " + name);
}

std::string optimizer_to_string(Optimizer opt) {
  return opt == Optimizer::kSgd ? "sgd" : "adam";
}

TrainResult train_encoders(const Corpus& corpus, const TrainConfig& config) {
  if (config.steps < 0) throw ValidationError("train: steps must be >= 0");
  if (config.learning_rate <= 0.0) throw ValidationError("train: learning rate must be > 0");
  if (config.final_learning_rate < 0.0)
    throw ValidationError("train: final learning rate must be >= 0");
  if (config.weight_decay < 0.0) throw ValidationError("train: weight decay must be >= 0");
  if (config.batch_size != 0 && config.batch_size < 2)
    throw ValidationError("train: batch_size must be 0 (full batch) or >= 2");
  if (config.lambda_crl > 0.0 && corpus.config.num_tasks < 2)
    throw ValidationError("train: contrastive training needs at least 2 tasks");
  if (corpus.trajectories.empty()) throw ValidationError("train: corpus has no trajectories");

  EncoderConfig ec;
  ec.num_states = corpus.mdp.num_states;
  ec.num_actions = corpus.mdp.num_actions;
  ec.num_goals = corpus.config.num_tasks;
  ec.hidden_dim = config.hidden_dim;
  ec.embed_dim = config.embed_dim;
  ec.mode = config.mode;

  TrainResult result;
  result.params = init_encoder(ec, config.seed);
  Rng batch_rng(config.seed + 0x9e3779b97f4a7c15ull);
  AdamState adam;
  const int min_tasks = config.lambda_crl > 0.0 ? 2 : 1;
  const bool full_mode = config.batch_size == 0;
  Batch full;
  if (full_mode) full = full_batch(corpus);

  for (int step = 0; step < config.steps; ++step) {
    Batch drawn;
    if (!full_mode) drawn = sample_batch(corpus, config.batch_size, batch_rng, min_tasks);
    const Batch& batch = full_mode ? full : drawn;
    EncoderForward fwd = encoder_forward(result.params, batch);
    CombinedCrl combined = combined_crl_loss(fwd.sim, batch, config.gamma, config.lambda_crl);
    if (combined.no_negatives) result.saw_no_negative_batch = true;

    std::vector<double> grad;
    double grad_norm = 0.0;
    if (config.lambda_crl > 0.0) {
      grad = encoder_backward(result.params, batch, fwd, combined.dlogits);
      grad_norm = l2_norm(grad);
    } else {
      grad.assign(result.params.theta.size(), 0.0);
    }

    if (!std::isfinite(combined.loss) || !std::isfinite(grad_norm))
      throw NumericError("train: non-finite loss or gradient at step " + std::to_string(step) +
                         " (|theta| = " + std::to_string(l2_norm(result.params.theta)) +
                         ", |grad| = " + std::to_string(grad_norm) + ")");

    if ((step % config.record_every) == 0 || step == config.steps - 1)
      result.history.push_back({step + 1, combined.sa_to_l, combined.l_to_sa, 0.0,
                                fwd.temperature, grad_norm});

    double lr = config.learning_rate;
    if (config.final_learning_rate > 0.0 && config.steps > 1)
      lr += (config.final_learning_rate - config.learning_rate) * step / (config.steps - 1);
    if (config.weight_decay > 0.0)
      for (double& v : result.params.theta) v *= 1.0 - lr * config.weight_decay;
    if (config.optimizer == Optimizer::kAdam)
      adam.apply(result.params.theta, grad, lr);
    else
      sgd_apply(result.params.theta, grad, lr);
  }
  return result;
}

}  // namespace tcrl
