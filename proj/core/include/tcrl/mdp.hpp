#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tcrl/errors.hpp"

namespace tcrl {

// Finite MDP with a row-stochastic transition kernel and one designated goal
// state per task. Goal semantics (termination on arrival) are applied by the
// occupancy oracle and by episode generation, conditioned on the goal; the
// kernel itself stays goal-independent.
struct Mdp {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> transition;   // [s][a][s'] row-major
  std::map<int, int> goal_states;   // goal id -> state id
  std::vector<int> start_states;

  double prob(int s, int a, int sp) const {
    return transition[(static_cast<size_t>(s) * num_actions + a) * num_states + sp];
  }
  std::span<const double> row(int s, int a) const {
    return {transition.data() + (static_cast<size_t>(s) * num_actions + a) * num_states,
            static_cast<size_t>(num_states)};
  }
  double& prob_ref(int s, int a, int sp) {
    return transition[(static_cast<size_t>(s) * num_actions + a) * num_states + sp];
  }
};

// Deterministic policy map over (state, goal id). Goal ids must be dense 0..G-1.
struct Policy {
  int num_states = 0;
  int num_goals = 0;
  std::vector<int> actions;  // [goal][state]

  int action(int state, int goal_id) const {
    return actions[static_cast<size_t>(goal_id) * num_states + state];
  }
  int& action_ref(int state, int goal_id) {
    return actions[static_cast<size_t>(goal_id) * num_states + state];
  }
};

// Checks row-stochasticity (sum 1 +- 1e-12) and that every goal state is
// reachable from every start state in the directed graph of nonzero
// transitions. Throws ValidationError naming the first offending goal.
void validate_mdp(const Mdp& mdp);

// Synthetic instruction stand-in: goal identity hashed into token symbols.
struct GoalSpec {
  int goal_id = 0;
  std::vector<int> token_seq;
  int target_state = 0;
};

// Expert rollout. states/actions hold s_1..s_T and a_1..a_T; the goal state is
// entered by a_T and is not part of the recorded state list.
struct Trajectory {
  int goal_id = 0;
  std::vector<int> states;
  std::vector<int> actions;

  int length() const { return static_cast<int>(states.size()); }
};

}  // namespace tcrl
