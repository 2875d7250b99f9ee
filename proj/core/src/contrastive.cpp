#include "tcrl/contrastive.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "tcrl/errors.hpp"
#include "tcrl/linalg.hpp"

namespace tcrl {

TemporalWeightTable temporal_weights(const Batch& batch, double gamma) {
  if (gamma <= 0.0 || gamma >= 1.0)
    throw ValidationError("temporal_weights: gamma must be in (0, 1)");
  const int b = batch.size();
  const double log_gamma = std::log(gamma);

  TemporalWeightTable table;
  table.batch_size = b;
  table.q.assign(static_cast<size_t>(b) * b, 0.0);
  table.positive_sets.resize(b);

  std::vector<double> log_w(b);
  for (int j = 0; j < b; ++j)
    log_w[j] = (batch.samples[j].T - batch.samples[j].t) * log_gamma;

  for (int i = 0; i < b; ++i) {
    std::vector<int>& pos = table.positive_sets[i];
    for (int j = 0; j < b; ++j)
      if (batch.samples[j].task_id == batch.samples[i].task_id) pos.push_back(j);
    // i is always in its own positive set, so this cannot be empty.
    std::vector<double> members(pos.size());
    for (size_t m = 0; m < pos.size(); ++m) members[m] = log_w[pos[m]];
    double lse = log_sum_exp(members);
    for (size_t m = 0; m < pos.size(); ++m)
      table.q[static_cast<size_t>(i) * b + pos[m]] = std::exp(members[m] - lse);
  }
  return table;
}

namespace {

void check_shape(const SimilarityMatrix& sim, const Batch& batch) {
  if (sim.batch_size != batch.size() || sim.num_goals != batch.num_unique())
    throw ValidationError("contrastive: similarity matrix is " + std::to_string(sim.batch_size) +
                          "x" + std::to_string(sim.num_goals) + ", batch wants " +
                          std::to_string(batch.size()) + "x" +
                          std::to_string(batch.num_unique()));
  if (sim.logits.size() != static_cast<size_t>(sim.batch_size) * sim.num_goals)
    throw ValidationError("contrastive: similarity matrix storage size mismatch");
}

}  // namespace

LossGrad loss_sa_to_l(const SimilarityMatrix& sim, const Batch& batch, double gamma) {
  if (gamma <= 0.0 || gamma >= 1.0)
    throw ValidationError("loss_sa_to_l: gamma must be in (0, 1)");
  check_shape(sim, batch);
  const int b = sim.batch_size, u = sim.num_goals;
  const double log_gamma = std::log(gamma);

  LossGrad out;
  out.dlogits.assign(static_cast<size_t>(b) * u, 0.0);
  out.no_negatives = u == 1;

  for (int i = 0; i < b; ++i) {
    const double w = std::exp((batch.samples[i].T - batch.samples[i].t) * log_gamma);
    std::span<const double> row(sim.logits.data() + static_cast<size_t>(i) * u,
                                static_cast<size_t>(u));
    const double lse = log_sum_exp(row);
    const int own = batch.column_of_sample[i];
    out.loss += w * (lse - row[own]);
    for (int c = 0; c < u; ++c) {
      double p = std::exp(row[c] - lse);
      out.dlogits[static_cast<size_t>(i) * u + c] = w / b * (p - (c == own ? 1.0 : 0.0));
    }
  }
  out.loss /= b;
  return out;
}

LossGrad loss_l_to_sa(const SimilarityMatrix& sim, const TemporalWeightTable& weights,
                      const Batch& batch) {
  check_shape(sim, batch);
  if (weights.batch_size != batch.size())
    throw ValidationError("loss_l_to_sa: weight table size mismatch");
  const int b = sim.batch_size, u = sim.num_goals;

  LossGrad out;
  out.dlogits.assign(static_cast<size_t>(b) * u, 0.0);

  std::vector<double> column(b);
  for (int c = 0; c < u; ++c) {
    for (int j = 0; j < b; ++j) column[j] = sim.at(j, c);
    const double lse = log_sum_exp(column);
    // All same-task rows of the weight table are equal; read the first one.
    int anchor = -1;
    for (int j = 0; j < b; ++j) {
      if (batch.column_of_sample[j] == c) {
        anchor = j;
        break;
      }
    }
    for (int j = 0; j < b; ++j) {
      double q = weights.at(anchor, j);
      if (q > 0.0) out.loss += q * (lse - column[j]);
      double p = std::exp(column[j] - lse);
      out.dlogits[static_cast<size_t>(j) * u + c] = (p - q) / u;
    }
  }
  out.loss /= u;
  return out;
}

CombinedCrl combined_crl_loss(const SimilarityMatrix& sim, const Batch& batch, double gamma,
                              double lambda_crl) {
  if (lambda_crl < 0.0) throw ValidationError("combined_crl_loss: lambda_crl must be >= 0");
  TemporalWeightTable weights = temporal_weights(batch, gamma);
  LossGrad sa = loss_sa_to_l(sim, batch, gamma);
  LossGrad ls = loss_l_to_sa(sim, weights, batch);

  CombinedCrl out;
  out.sa_to_l = sa.loss;
  out.l_to_sa = ls.loss;
  out.no_negatives = sa.no_negatives;
  out.loss = lambda_crl * (sa.loss + ls.loss);
  out.dlogits.resize(sa.dlogits.size());
  for (size_t i = 0; i < sa.dlogits.size(); ++i)
    out.dlogits[i] = lambda_crl * (sa.dlogits[i] + ls.dlogits[i]);
  return out;
}

LossGrad bc_token_loss(const std::vector<double>& logit_rows, int num_rows, int vocab,
                       const std::vector<int>& targets) {
  if (num_rows < 1) throw ValidationError("bc_token_loss: need at least one row");
  if (logit_rows.size() != static_cast<size_t>(num_rows) * vocab)
    throw ValidationError("bc_token_loss: logit storage size mismatch");
  if (targets.size() != static_cast<size_t>(num_rows))
    throw ValidationError("bc_token_loss: one target per row required");

  LossGrad out;
  out.dlogits.assign(logit_rows.size(), 0.0);
  for (int r = 0; r < num_rows; ++r) {
    int target = targets[r];
    if (target < 0 || target >= vocab)
      throw ValidationError("bc_token_loss: target " + std::to_string(target) + " at row " +
                            std::to_string(r) + " outside vocabulary of " + std::to_string(vocab));
    std::span<const double> row(logit_rows.data() + static_cast<size_t>(r) * vocab,
                                static_cast<size_t>(vocab));
    const double lse = log_sum_exp(row);
    out.loss += lse - row[target];
    for (int v = 0; v < vocab; ++v) {
      double p = std::exp(row[v] - lse);
      out.dlogits[static_cast<size_t>(r) * vocab + v] =
          (p - (v == target ? 1.0 : 0.0)) / num_rows;
    }
  }
  out.loss /= num_rows;
  return out;
}

}  // namespace tcrl
