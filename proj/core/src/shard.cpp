#include "tcrl/shard.hpp"

#include <cmath>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tcrl/errors.hpp"
#include "tcrl/linalg.hpp"

namespace tcrl {

ShardPlan contiguous_plan(int batch_size, int num_shards) {
  if (num_shards < 1 || num_shards > batch_size)
    throw ValidationError("shard plan: need 1 <= num_shards <= batch_size");
  ShardPlan plan;
  plan.num_shards = num_shards;
  plan.assignment.resize(batch_size);
  for (int i = 0; i < batch_size; ++i)
    plan.assignment[i] = i * num_shards / batch_size;
  return plan;
}

namespace {

struct Partial {
  double loss = 0.0;
  std::vector<double> dlogits;
};

}  // namespace

ShardReport sharded_crl_grad(const SimilarityMatrix& sim, const Batch& batch, double gamma,
                             double lambda_crl, const ShardPlan& plan, bool use_threads) {
  const int b = batch.size(), u = batch.num_unique();
  if (sim.batch_size != b || sim.num_goals != u)
    throw ValidationError("sharded_crl_grad: similarity matrix shape mismatch");
  if (plan.num_shards < 1 || static_cast<int>(plan.assignment.size()) != b)
    throw ValidationError("sharded_crl_grad: plan does not cover the batch");
  std::vector<int> shard_sizes(plan.num_shards, 0);
  for (int i = 0; i < b; ++i) {
    int s = plan.assignment[i];
    if (s < 0 || s >= plan.num_shards)
      throw ValidationError("sharded_crl_grad: sample " + std::to_string(i) +
                            " assigned to shard " + std::to_string(s));
    ++shard_sizes[s];
  }
  for (int s = 0; s < plan.num_shards; ++s)
    if (shard_sizes[s] == 0)
      throw ValidationError("sharded_crl_grad: shard " + std::to_string(s) + " is empty");

  // A goal anchor lives where its first sample lives.
  std::vector<int> anchor_sample(u, -1);
  for (int j = 0; j < b; ++j) {
    int c = batch.column_of_sample[j];
    if (anchor_sample[c] < 0) anchor_sample[c] = j;
  }

  const TemporalWeightTable weights = temporal_weights(batch, gamma);
  const double log_gamma = std::log(gamma);

  // Each shard scores its own sample anchors and goal anchors against the
  // full gathered logit matrix; only the fold below crosses shards.
  auto compute_shard = [&](int shard, Partial& out) {
    out.dlogits.assign(static_cast<size_t>(b) * u, 0.0);
    std::vector<double> column(b);
    for (int i = 0; i < b; ++i) {
      if (plan.assignment[i] != shard) continue;
      const double w = std::exp((batch.samples[i].T - batch.samples[i].t) * log_gamma);
      std::span<const double> row(sim.logits.data() + static_cast<size_t>(i) * u,
                                  static_cast<size_t>(u));
      const double lse = log_sum_exp(row);
      const int own = batch.column_of_sample[i];
      out.loss += lambda_crl * w * (lse - row[own]) / b;
      for (int c = 0; c < u; ++c) {
        double p = std::exp(row[c] - lse);
        out.dlogits[static_cast<size_t>(i) * u + c] +=
            lambda_crl * (w / b) * (p - (c == own ? 1.0 : 0.0));
      }
    }
    for (int c = 0; c < u; ++c) {
      if (plan.assignment[anchor_sample[c]] != shard) continue;
      for (int j = 0; j < b; ++j) column[j] = sim.at(j, c);
      const double lse = log_sum_exp(column);
      for (int j = 0; j < b; ++j) {
        double q = weights.at(anchor_sample[c], j);
        if (q > 0.0) out.loss += lambda_crl * q * (lse - column[j]) / u;
        double p = std::exp(column[j] - lse);
        out.dlogits[static_cast<size_t>(j) * u + c] += lambda_crl * (p - q) / u;
      }
    }
  };

  std::vector<Partial> partials(plan.num_shards);
  if (use_threads) {
    std::vector<std::thread> workers;
    for (int s = 0; s < plan.num_shards; ++s)
      workers.emplace_back([&, s] { compute_shard(s, partials[s]); });
    for (std::thread& w : workers) w.join();
  } else {
    for (int s = 0; s < plan.num_shards; ++s) compute_shard(s, partials[s]);
  }

  ShardReport report;
  report.num_shards = plan.num_shards;
  report.negatives_per_anchor = u;
  report.dlogits.assign(static_cast<size_t>(b) * u, 0.0);
  for (int s = 0; s < plan.num_shards; ++s) {
    report.loss += partials[s].loss;
    for (size_t i = 0; i < report.dlogits.size(); ++i)
      report.dlogits[i] += partials[s].dlogits[i];
  }

  CombinedCrl mono = combined_crl_loss(sim, batch, gamma, lambda_crl);
  report.loss_diff = std::fabs(report.loss - mono.loss);
  for (size_t i = 0; i < report.dlogits.size(); ++i)
    report.max_grad_diff =
        std::max(report.max_grad_diff, std::fabs(report.dlogits[i] - mono.dlogits[i]));
  return report;
}

}  // namespace tcrl
