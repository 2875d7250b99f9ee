#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcrl/corpus.hpp"
#include "tcrl/encoder.hpp"

namespace tcrl {

enum class Optimizer { kSgd, kAdam };

Optimizer optimizer_from_string(const std::string& name);
std::string optimizer_to_string(Optimizer opt);

struct TrainConfig {
  double gamma = 0.995;
  double lambda_crl = 1.0;
  double learning_rate = 1e-2;
  // > 0 switches on a linear ramp from learning_rate down to this value over
  // the run; 0 keeps the rate constant.
  double final_learning_rate = 0.0;
  // Decoupled weight decay applied before each optimizer step. Keeps the
  // softmax margins finite so the per-goal logit levels stay coupled.
  double weight_decay = 0.0;
  int steps = 1000;
  int batch_size = 0;  // 0: full batch; otherwise >= 2
  uint64_t seed = 1;
  Optimizer optimizer = Optimizer::kAdam;
  NormalizationMode mode = NormalizationMode::kL2Temp;
  int hidden_dim = 64;
  int embed_dim = 16;
  int record_every = 1;
};

struct StepRecord {
  int step = 0;
  double loss_sa_to_l = 0.0;
  double loss_l_to_sa = 0.0;
  double loss_bc = 0.0;  // always 0 here; the field keeps the record shape shared
  double temperature = 1.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  EncoderParams params;
  std::vector<StepRecord> history;
  bool saw_no_negative_batch = false;
};

// Fits the encoders to the combined contrastive objective on the corpus.
// Deterministic given (corpus, config). Throws NumericError with the step
// index and parameter norms if the loss or gradient goes non-finite.
TrainResult train_encoders(const Corpus& corpus, const TrainConfig& config);

}  // namespace tcrl
