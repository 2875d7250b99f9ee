#pragma once

#include <vector>

#include "tcrl/batch.hpp"

namespace tcrl {

// Soft targets q_ij over each anchor's positive set: q_ij proportional to
// gamma^(T_j - t_j) among same-task samples, normalized in log space.
struct TemporalWeightTable {
  int batch_size = 0;
  std::vector<double> q;                        // [B][B]; zero outside S(i)
  std::vector<std::vector<int>> positive_sets;  // [B] -> same-task indices, ascending

  double at(int i, int j) const { return q[static_cast<size_t>(i) * batch_size + j]; }
};

TemporalWeightTable temporal_weights(const Batch& batch, double gamma);

// Temperature-scaled similarity logits between the B state-action embeddings
// (rows) and the U unique goal embeddings (columns).
struct SimilarityMatrix {
  int batch_size = 0;
  int num_goals = 0;
  std::vector<double> logits;  // [B][U]

  double at(int j, int c) const { return logits[static_cast<size_t>(j) * num_goals + c]; }
  double& ref(int j, int c) { return logits[static_cast<size_t>(j) * num_goals + c]; }
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> dlogits;  // same shape as the logits argument
  bool no_negatives = false;    // single-task batch: sa->l loss degenerates to 0
};

// Anchor per sample, softmax over the unique goal columns, each anchor term
// scaled by gamma^(T_i - t_i), averaged over the batch size.
LossGrad loss_sa_to_l(const SimilarityMatrix& sim, const Batch& batch, double gamma);

// Anchor per unique goal, denominator over all B samples, soft targets from
// the weight table, averaged over the number of unique goals.
LossGrad loss_l_to_sa(const SimilarityMatrix& sim, const TemporalWeightTable& weights,
                      const Batch& batch);

struct CombinedCrl {
  double loss = 0.0;      // lambda_crl * (sa_to_l + l_to_sa)
  double sa_to_l = 0.0;   // unscaled component
  double l_to_sa = 0.0;   // unscaled component
  std::vector<double> dlogits;
  bool no_negatives = false;
};

CombinedCrl combined_crl_loss(const SimilarityMatrix& sim, const Batch& batch, double gamma,
                              double lambda_crl);

// Mean next-token cross-entropy over the given logit rows. Throws
// ValidationError on a target outside [0, vocab).
LossGrad bc_token_loss(const std::vector<double>& logit_rows, int num_rows, int vocab,
                       const std::vector<int>& targets);

}  // namespace tcrl
