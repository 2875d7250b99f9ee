#pragma once

#include <string>
#include <vector>

#include "tcrl/mdp.hpp"

namespace tcrl {

enum class MdpFamily { kChain, kGrid, kDag };

MdpFamily family_from_string(const std::string& name);
std::string family_to_string(MdpFamily family);

enum class GridGoalLayout { kRandom, kCorners };

GridGoalLayout grid_goal_layout_from_string(const std::string& name);
std::string grid_goal_layout_to_string(GridGoalLayout layout);

struct CorpusConfig {
  MdpFamily family = MdpFamily::kChain;
  // chain: num_tasks arms of length arm_length off a shared hub.
  // grid:  grid_width x grid_height board, num_tasks goal cells.
  // dag:   dag_interior interior nodes feeding num_tasks sink goals.
  int num_tasks = 2;
  int arm_length = 8;
  int grid_width = 5;
  int grid_height = 5;
  // corners pins the goal cells to the board corners (up to 4 tasks), which
  // makes the tasks exactly interchangeable; random draws them from mdp_seed.
  GridGoalLayout grid_goals = GridGoalLayout::kRandom;
  int dag_interior = 12;
  int trajectories_per_task = 4;
  double gamma = 0.99;
  unsigned long long seed = 1;      // trajectory start sampling
  unsigned long long mdp_seed = 1;  // layout (grid goal cells, dag shortcuts)
  int tokens_per_goal = 3;
  int vocab_size = 32;
};

struct Corpus {
  CorpusConfig config;
  Mdp mdp;
  Policy expert;                // [goal][state] expert actions
  std::vector<GoalSpec> goals;  // one per task, goal_id = index
  std::vector<Trajectory> trajectories;
};

// Builds the MDP family, the per-goal expert policy, goal token sequences, and
// expert rollouts. The first trajectory of every task starts at the start
// state with the longest expert path (ties to the smallest state index); the
// rest sample starts uniformly. Throws ValidationError on bad dimensions.
Corpus generate_corpus(const CorpusConfig& config);

// Line-oriented text format, %.17g doubles, round-trips exactly.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

}  // namespace tcrl
