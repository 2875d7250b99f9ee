#pragma once

#include <vector>

#include "tcrl/mdp.hpp"

namespace tcrl {

// r_g(s, a) = (1 - gamma) * p(s' = goal | s, a).
double goal_reaching_reward(const Mdp& mdp, int s, int a, int goal_id, double gamma);

// Ground-truth goal-reaching values under a fixed policy. Two proportional
// forms are recorded:
//   q(s,a,g)         = (1-gamma) * F(s,a,g)   -- first-passage form; equals
//                      (1-gamma)*gamma^(T-t) along deterministic expert paths
//   occupancy(s,a,g) = F(s,a,g)               -- discounted occupancy of an
//                      absorbing goal; equals gamma^(T-t) on the same paths
// where F(s,a,g) = E[gamma^(first goal hit offset - 1)], the conditioned goal
// treated as terminal.
struct OccupancyOracle {
  double gamma = 0.0;
  int num_states = 0;
  int num_actions = 0;
  int num_goals = 0;
  std::vector<double> first_passage;  // [g][s][a]

  double q(int s, int a, int goal_id) const {
    return (1.0 - gamma) * first_passage_at(s, a, goal_id);
  }
  double occupancy(int s, int a, int goal_id) const {
    return first_passage_at(s, a, goal_id);
  }
  double first_passage_at(int s, int a, int goal_id) const {
    return first_passage[(static_cast<size_t>(goal_id) * num_states + s) * num_actions + a];
  }
};

struct OracleOptions {
  int direct_solve_max_states = 512;  // above this, fixed-point iteration
  double residual_tol = 1e-12;
  int max_iters = 200000;
};

// Solves the first-passage system per goal: direct linear solve for small
// state spaces, damped fixed-point iteration otherwise. Throws NumericError
// with the residual if the iteration does not converge.
OccupancyOracle occupancy_oracle(const Mdp& mdp, const Policy& policy, double gamma,
                                 const OracleOptions& opts = {});

// Max over (s, a, g) of |q - (r_g + gamma * E_{s'}[q'])| where the
// continuation value at the conditioned goal state is zero (the convention
// the oracle is built under).
double bellman_residual(const Mdp& mdp, const Policy& policy, const OccupancyOracle& oracle);

}  // namespace tcrl
