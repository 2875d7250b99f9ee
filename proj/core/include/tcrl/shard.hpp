#pragma once

#include <vector>

#include "tcrl/contrastive.hpp"

namespace tcrl {

// Partition of batch samples across simulated shards.
struct ShardPlan {
  int num_shards = 0;
  std::vector<int> assignment;  // sample index -> shard id
};

ShardPlan contiguous_plan(int batch_size, int num_shards);

struct ShardReport {
  int num_shards = 0;
  double loss = 0.0;
  std::vector<double> dlogits;
  double max_grad_diff = 0.0;      // vs the monolithic gradient
  double loss_diff = 0.0;          // vs the monolithic loss
  int negatives_per_anchor = 0;    // global unique-goal count, any shard
};

// Splits the combined contrastive computation across shards: each shard owns
// the sample anchors assigned to it and the goal anchors whose first sample
// lives on it, scores them against the full gathered logit matrix, and the
// per-shard results are folded single-threaded in shard order. With
// use_threads the shard computations run on their own threads; the fold stays
// canonical. Throws ValidationError on an invalid or empty-shard plan.
ShardReport sharded_crl_grad(const SimilarityMatrix& sim, const Batch& batch, double gamma,
                             double lambda_crl, const ShardPlan& plan, bool use_threads = false);

}  // namespace tcrl
