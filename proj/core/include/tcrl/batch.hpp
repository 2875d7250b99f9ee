#pragma once

#include <vector>

#include "tcrl/corpus.hpp"
#include "tcrl/rng.hpp"

namespace tcrl {

// One (s_t, a_t) drawn from a trajectory, with the horizon info the temporal
// weights need. task_id and goal_id coincide in the testbed but are carried
// separately so the consistency requirement stays checkable.
struct BatchSample {
  int task_id = 0;
  int goal_id = 0;
  int state = 0;
  int action = 0;
  int t = 1;  // 1-based timestep
  int T = 1;  // trajectory length
};

struct Batch {
  std::vector<BatchSample> samples;
  std::vector<int> unique_goals;      // first-appearance order; defines logit columns
  std::vector<int> column_of_sample;  // sample index -> column of its own goal

  int size() const { return static_cast<int>(samples.size()); }
  int num_unique() const { return static_cast<int>(unique_goals.size()); }

  // Sample indices sharing the goal of the given column, ascending.
  std::vector<int> positives(int column) const;
};

// Validates 1 <= t <= T and the task/goal bijection, then derives the unique
// goal columns. Throws ValidationError.
Batch make_batch(std::vector<BatchSample> samples);

// Uniform draws over (trajectory, timestep). When min_tasks > 1 the whole
// batch is redrawn until it holds at least that many distinct tasks.
Batch sample_batch(const Corpus& corpus, int batch_size, Rng& rng, int min_tasks = 1);

// Every (trajectory, timestep) pair exactly once, corpus order.
Batch full_batch(const Corpus& corpus);

}  // namespace tcrl
