#include "tcrl/oracle.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "tcrl/errors.hpp"
#include "tcrl/linalg.hpp"

namespace tcrl {

double goal_reaching_reward(const Mdp& mdp, int s, int a, int goal_id, double gamma) {
  int goal_state = mdp.goal_states.at(goal_id);
  return (1.0 - gamma) * mdp.prob(s, a, goal_state);
}

namespace {

// Policy-conditional state values F_V with the goal column removed:
// F_V(s) = p(goal|s,pi) + gamma * sum_{s' != goal} p(s'|s,pi) F_V(s').
std::vector<double> solve_state_values(const Mdp& mdp, const Policy& policy, double gamma,
                                       int goal_id, int goal_state, const OracleOptions& opts) {
  const int n = mdp.num_states;
  if (n <= opts.direct_solve_max_states) {
    // (I - gamma * Mbar) F = b, with an identity row pinning F(goal) = 0.
    std::vector<double> a(static_cast<size_t>(n) * n, 0.0);
    std::vector<double> b(n, 0.0);
    for (int s = 0; s < n; ++s) {
      a[static_cast<size_t>(s) * n + s] = 1.0;
      if (s == goal_state) continue;
      int act = policy.action(s, goal_id);
      b[s] = mdp.prob(s, act, goal_state);
      for (int sp = 0; sp < n; ++sp) {
        if (sp == goal_state) continue;
        a[static_cast<size_t>(s) * n + sp] -= gamma * mdp.prob(s, act, sp);
      }
    }
    return solve_linear(std::move(a), std::move(b));
  }

  std::vector<double> f(n, 0.0), next(n, 0.0);
  for (int it = 0; it < opts.max_iters; ++it) {
    double delta = 0.0;
    for (int s = 0; s < n; ++s) {
      if (s == goal_state) {
        next[s] = 0.0;
        continue;
      }
      int act = policy.action(s, goal_id);
      double v = mdp.prob(s, act, goal_state);
      auto row = mdp.row(s, act);
      for (int sp = 0; sp < n; ++sp) {
        if (sp == goal_state || row[sp] == 0.0) continue;
        v += gamma * row[sp] * f[sp];
      }
      next[s] = v;
      delta = std::max(delta, std::fabs(v - f[s]));
    }
    f.swap(next);
    if (delta <= opts.residual_tol) return f;
  }
  throw NumericError("occupancy_oracle: fixed-point iteration for goal " +
                     std::to_string(goal_id) + " did not reach tolerance " +
                     std::to_string(opts.residual_tol));
}

}  // namespace

OccupancyOracle occupancy_oracle(const Mdp& mdp, const Policy& policy, double gamma,
                                 const OracleOptions& opts) {
  if (gamma <= 0.0 || gamma >= 1.0)
    throw ValidationError("occupancy_oracle: gamma must be in (0, 1)");
  if (policy.num_states != mdp.num_states)
    throw ValidationError("occupancy_oracle: policy/mdp state count mismatch");
  if (policy.num_goals != static_cast<int>(mdp.goal_states.size()))
    throw ValidationError("occupancy_oracle: policy covers " + std::to_string(policy.num_goals) +
                          " goals, mdp defines " + std::to_string(mdp.goal_states.size()));

  OccupancyOracle out;
  out.gamma = gamma;
  out.num_states = mdp.num_states;
  out.num_actions = mdp.num_actions;
  out.num_goals = static_cast<int>(mdp.goal_states.size());
  out.first_passage.assign(
      static_cast<size_t>(out.num_goals) * out.num_states * out.num_actions, 0.0);

  for (const auto& [goal_id, goal_state] : mdp.goal_states) {
    std::vector<double> fv = solve_state_values(mdp, policy, gamma, goal_id, goal_state, opts);
    for (int s = 0; s < mdp.num_states; ++s) {
      for (int a = 0; a < mdp.num_actions; ++a) {
        double q = mdp.prob(s, a, goal_state);
        auto row = mdp.row(s, a);
        for (int sp = 0; sp < mdp.num_states; ++sp) {
          if (sp == goal_state || row[sp] == 0.0) continue;
          q += gamma * row[sp] * fv[sp];
        }
        if (!std::isfinite(q))
          throw NumericError("occupancy_oracle: non-finite value at goal " +
                             std::to_string(goal_id));
        out.first_passage[(static_cast<size_t>(goal_id) * out.num_states + s) * out.num_actions +
                          a] = q;
      }
    }
  }
  return out;
}

double bellman_residual(const Mdp& mdp, const Policy& policy, const OccupancyOracle& oracle) {
  double worst = 0.0;
  for (const auto& [goal_id, goal_state] : mdp.goal_states) {
    for (int s = 0; s < mdp.num_states; ++s) {
      for (int a = 0; a < mdp.num_actions; ++a) {
        double rhs = goal_reaching_reward(mdp, s, a, goal_id, oracle.gamma);
        auto row = mdp.row(s, a);
        for (int sp = 0; sp < mdp.num_states; ++sp) {
          if (sp == goal_state || row[sp] == 0.0) continue;
          rhs += oracle.gamma * row[sp] * oracle.q(sp, policy.action(sp, goal_id), goal_id);
        }
        worst = std::max(worst, std::fabs(oracle.q(s, a, goal_id) - rhs));
      }
    }
  }
  return worst;
}

}  // namespace tcrl
