#include "tcrl/batch.hpp"

#include <map>
#include <set>
#include <string>
#include <utility>

#include "tcrl/errors.hpp"

namespace tcrl {

std::vector<int> Batch::positives(int column) const {
  std::vector<int> out;
  for (int j = 0; j < size(); ++j)
    if (column_of_sample[j] == column) out.push_back(j);
  return out;
}

Batch make_batch(std::vector<BatchSample> samples) {
  if (samples.empty()) throw ValidationError("batch: empty");
  std::map<int, int> task_to_goal, goal_to_task;
  for (size_t i = 0; i < samples.size(); ++i) {
    const BatchSample& s = samples[i];
    if (s.t < 1 || s.t > s.T)
      throw ValidationError("batch: sample " + std::to_string(i) + " has t=" +
                            std::to_string(s.t) + " outside [1, " + std::to_string(s.T) + "]");
    auto [it1, fresh1] = task_to_goal.emplace(s.task_id, s.goal_id);
    if (!fresh1 && it1->second != s.goal_id)
      throw ValidationError("batch: task " + std::to_string(s.task_id) +
                            " maps to multiple goal ids");
    auto [it2, fresh2] = goal_to_task.emplace(s.goal_id, s.task_id);
    if (!fresh2 && it2->second != s.task_id)
      throw ValidationError("batch: goal " + std::to_string(s.goal_id) +
                            " maps to multiple task ids");
  }

  Batch batch;
  batch.samples = std::move(samples);
  std::map<int, int> column_of_goal;
  for (const BatchSample& s : batch.samples) {
    auto it = column_of_goal.find(s.goal_id);
    if (it == column_of_goal.end()) {
      it = column_of_goal.emplace(s.goal_id, batch.num_unique()).first;
      batch.unique_goals.push_back(s.goal_id);
    }
    batch.column_of_sample.push_back(it->second);
  }
  return batch;
}

Batch sample_batch(const Corpus& corpus, int batch_size, Rng& rng, int min_tasks) {
  if (batch_size < 1) throw ValidationError("sample_batch: batch_size must be >= 1");
  if (corpus.trajectories.empty()) throw ValidationError("sample_batch: corpus has no trajectories");
  if (min_tasks > corpus.config.num_tasks)
    throw ValidationError("sample_batch: min_tasks exceeds the corpus task count");
  if (min_tasks > batch_size)
    throw ValidationError("sample_batch: min_tasks exceeds batch_size");

  const int num_trajs = static_cast<int>(corpus.trajectories.size());
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<BatchSample> samples;
    std::set<int> tasks;
    for (int i = 0; i < batch_size; ++i) {
      const Trajectory& traj = corpus.trajectories[rng.uniform_int(num_trajs)];
      int t = 1 + rng.uniform_int(traj.length());
      samples.push_back({traj.goal_id, traj.goal_id, traj.states[t - 1], traj.actions[t - 1], t,
                         traj.length()});
      tasks.insert(traj.goal_id);
    }
    if (static_cast<int>(tasks.size()) >= min_tasks) return make_batch(std::move(samples));
  }
  throw ValidationError("sample_batch: could not draw a batch with " + std::to_string(min_tasks) +
                        " distinct tasks");
}

Batch full_batch(const Corpus& corpus) {
  std::vector<BatchSample> samples;
  for (const Trajectory& traj : corpus.trajectories) {
    for (int t = 1; t <= traj.length(); ++t)
      samples.push_back({traj.goal_id, traj.goal_id, traj.states[t - 1], traj.actions[t - 1], t,
                         traj.length()});
  }
  return make_batch(std::move(samples));
}

}  // namespace tcrl
