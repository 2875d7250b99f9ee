#include "tcrl/mdp.hpp"

#include <cmath>
#include <queue>
#include <vector>

namespace tcrl {

void validate_mdp(const Mdp& mdp) {
  if (mdp.num_states <= 0 || mdp.num_actions <= 0)
    throw ValidationError("mdp: num_states and num_actions must be positive");
  const size_t want = static_cast<size_t>(mdp.num_states) * mdp.num_actions * mdp.num_states;
  if (mdp.transition.size() != want)
    throw ValidationError("mdp: transition table has " + std::to_string(mdp.transition.size()) +
                          " entries, expected " + std::to_string(want));

  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      double sum = 0.0;
      for (int sp = 0; sp < mdp.num_states; ++sp) {
        double p = mdp.prob(s, a, sp);
        if (p < 0.0)
          throw ValidationError("mdp: negative probability at state " + std::to_string(s) +
                                " action " + std::to_string(a));
        sum += p;
      }
      if (std::fabs(sum - 1.0) > 1e-12)
        throw ValidationError("mdp: row (" + std::to_string(s) + ", " + std::to_string(a) +
                              ") sums to " + std::to_string(sum));
    }
  }

  // Forward reachability from each start over nonzero-probability edges.
  for (int start : mdp.start_states) {
    if (start < 0 || start >= mdp.num_states)
      throw ValidationError("mdp: start state " + std::to_string(start) + " out of range");
    std::vector<char> seen(mdp.num_states, 0);
    std::queue<int> frontier;
    seen[start] = 1;
    frontier.push(start);
    while (!frontier.empty()) {
      int s = frontier.front();
      frontier.pop();
      for (int a = 0; a < mdp.num_actions; ++a) {
        for (int sp = 0; sp < mdp.num_states; ++sp) {
          if (!seen[sp] && mdp.prob(s, a, sp) > 0.0) {
            seen[sp] = 1;
            frontier.push(sp);
          }
        }
      }
    }
    for (const auto& [goal_id, goal_state] : mdp.goal_states) {
      if (goal_state < 0 || goal_state >= mdp.num_states)
        throw ValidationError("mdp: goal " + std::to_string(goal_id) + " state out of range");
      if (!seen[goal_state])
        throw ValidationError("mdp: goal " + std::to_string(goal_id) + " (state " +
                              std::to_string(goal_state) + ") unreachable from start " +
                              std::to_string(start));
    }
  }
}

}  // namespace tcrl
