#include "tcrl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tcrl/errors.hpp"
#include "tcrl/rng.hpp"

namespace tcrl {

MdpFamily family_from_string(const std::string& name) {
  if (name == "chain") return MdpFamily::kChain;
  if (name == "grid") return MdpFamily::kGrid;
  if (name == "dag") return MdpFamily::kDag;
  throw ValidationError("unknown mdp family: " + name);
}

std::string family_to_string(MdpFamily family) {
  switch (family) {
    case MdpFamily::kChain: return "chain";
    case MdpFamily::kGrid: return "grid";
    case MdpFamily::kDag: return "dag";
  }
  throw ValidationError("unknown mdp family enum value");
}

GridGoalLayout grid_goal_layout_from_string(const std::string& name) {
  if (name == "random") return GridGoalLayout::kRandom;
  if (name == "corners") return GridGoalLayout::kCorners;
  throw ValidationError("unknown grid goal layout: " + name);
}

std::string grid_goal_layout_to_string(GridGoalLayout layout) {
  switch (layout) {
    case GridGoalLayout::kRandom: return "random";
    case GridGoalLayout::kCorners: return "corners";
  }
  throw ValidationError("unknown grid goal layout enum value");
}

namespace {

struct Built {
  Mdp mdp;
  Policy expert;
  std::vector<GoalSpec> goals;
  std::vector<std::vector<int>> task_starts;  // [task] -> allowed start states, ascending
};

void set_deterministic(Mdp& mdp, int s, int a, int sp) { mdp.prob_ref(s, a, sp) = 1.0; }

// Hub state 0 with num_tasks arms of arm_length states each; the goal of task
// k sits at the far end of arm k. Action 0 walks outward, action 1 inward,
// hub action a enters arm a.
Built build_chain(const CorpusConfig& cfg) {
  const int k = cfg.num_tasks;
  const int len = cfg.arm_length;
  if (len < 1) throw ValidationError("chain: arm_length must be >= 1");

  Built out;
  Mdp& mdp = out.mdp;
  mdp.num_states = 1 + k * len;
  mdp.num_actions = std::max(2, k);
  mdp.transition.assign(
      static_cast<size_t>(mdp.num_states) * mdp.num_actions * mdp.num_states, 0.0);

  auto arm_state = [&](int arm, int depth) { return 1 + arm * len + (depth - 1); };

  for (int a = 0; a < mdp.num_actions; ++a)
    set_deterministic(mdp, 0, a, a < k ? arm_state(a, 1) : 0);
  for (int arm = 0; arm < k; ++arm) {
    for (int depth = 1; depth <= len; ++depth) {
      int s = arm_state(arm, depth);
      for (int a = 0; a < mdp.num_actions; ++a) {
        int sp = s;
        if (depth < len) {
          if (a == 0) sp = arm_state(arm, depth + 1);
          else if (a == 1) sp = depth == 1 ? 0 : arm_state(arm, depth - 1);
        }
        set_deterministic(mdp, s, a, sp);
      }
    }
    mdp.goal_states[arm] = arm_state(arm, len);
  }

  out.expert.num_states = mdp.num_states;
  out.expert.num_goals = k;
  out.expert.actions.assign(static_cast<size_t>(k) * mdp.num_states, 0);
  for (int g = 0; g < k; ++g) {
    out.expert.action_ref(0, g) = g;
    for (int arm = 0; arm < k; ++arm)
      for (int depth = 1; depth <= len; ++depth)
        out.expert.action_ref(arm_state(arm, depth), g) = (arm == g || depth == len) ? 0 : 1;
  }

  out.task_starts.resize(k);
  std::set<int> starts;
  for (int g = 0; g < k; ++g) {
    out.task_starts[g].push_back(0);
    for (int depth = 1; depth < len; ++depth) out.task_starts[g].push_back(arm_state(g, depth));
    starts.insert(out.task_starts[g].begin(), out.task_starts[g].end());
  }
  mdp.start_states.assign(starts.begin(), starts.end());
  return out;
}

// Clamped 4-action board; goal cells are ordinary states, so episodes end only
// when generation or the oracle says the conditioned goal was entered.
Built build_grid(const CorpusConfig& cfg, Rng& layout_rng) {
  const int w = cfg.grid_width, h = cfg.grid_height, k = cfg.num_tasks;
  if (w < 2 || h < 2) throw ValidationError("grid: grid_width and grid_height must be >= 2");
  if (k >= w * h) throw ValidationError("grid: num_tasks must be < grid_width * grid_height");

  Built out;
  Mdp& mdp = out.mdp;
  mdp.num_states = w * h;
  mdp.num_actions = 4;
  mdp.transition.assign(
      static_cast<size_t>(mdp.num_states) * mdp.num_actions * mdp.num_states, 0.0);

  auto cell = [&](int x, int y) { return y * w + x; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int s = cell(x, y);
      set_deterministic(mdp, s, 0, cell(std::min(x + 1, w - 1), y));
      set_deterministic(mdp, s, 1, cell(std::max(x - 1, 0), y));
      set_deterministic(mdp, s, 2, cell(x, std::min(y + 1, h - 1)));
      set_deterministic(mdp, s, 3, cell(x, std::max(y - 1, 0)));
    }
  }

  if (cfg.grid_goals == GridGoalLayout::kCorners) {
    if (k > 4) throw ValidationError("grid: corner goal layout supports at most 4 tasks");
    const int corners[4] = {cell(0, 0), cell(w - 1, 0), cell(0, h - 1), cell(w - 1, h - 1)};
    for (int g = 0; g < k; ++g) mdp.goal_states[g] = corners[g];
  } else {
    std::set<int> used;
    for (int g = 0; g < k; ++g) {
      int c = layout_rng.uniform_int(w * h);
      while (used.count(c)) c = layout_rng.uniform_int(w * h);
      used.insert(c);
      mdp.goal_states[g] = c;
    }
  }

  out.expert.num_states = mdp.num_states;
  out.expert.num_goals = k;
  out.expert.actions.assign(static_cast<size_t>(k) * mdp.num_states, 0);
  for (int g = 0; g < k; ++g) {
    int gx = mdp.goal_states[g] % w, gy = mdp.goal_states[g] / w;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int a = 0;  // x first, then y
        if (x < gx) a = 0;
        else if (x > gx) a = 1;
        else if (y < gy) a = 2;
        else if (y > gy) a = 3;
        out.expert.action_ref(cell(x, y), g) = a;
      }
    }
  }

  out.task_starts.resize(k);
  std::set<int> starts;
  for (int g = 0; g < k; ++g) {
    for (int s = 0; s < mdp.num_states; ++s)
      if (s != mdp.goal_states[g]) out.task_starts[g].push_back(s);
    starts.insert(out.task_starts[g].begin(), out.task_starts[g].end());
  }
  mdp.start_states.assign(starts.begin(), starts.end());
  return out;
}

// Interior states 0..n-1 in topological order. Action 0 advances one step,
// action 1 takes a random forward shortcut, the last interior fans out to the
// absorbing goal sinks (action a -> goal a).
Built build_dag(const CorpusConfig& cfg, Rng& layout_rng) {
  const int n = cfg.dag_interior, k = cfg.num_tasks;
  if (n < 2) throw ValidationError("dag: dag_interior must be >= 2");

  Built out;
  Mdp& mdp = out.mdp;
  mdp.num_states = n + k;
  mdp.num_actions = std::max(2, k);
  mdp.transition.assign(
      static_cast<size_t>(mdp.num_states) * mdp.num_actions * mdp.num_states, 0.0);

  std::vector<int> shortcut(n, n - 1);
  for (int s = 0; s + 2 <= n - 1; ++s) shortcut[s] = s + 2 + layout_rng.uniform_int(n - 1 - (s + 2) + 1);

  for (int s = 0; s < n - 1; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      int sp = s;
      if (a == 0) sp = s + 1;
      else if (a == 1) sp = shortcut[s];
      set_deterministic(mdp, s, a, sp);
    }
  }
  for (int a = 0; a < mdp.num_actions; ++a)
    set_deterministic(mdp, n - 1, a, a < k ? n + a : n - 1);
  for (int g = 0; g < k; ++g) {
    mdp.goal_states[g] = n + g;
    for (int a = 0; a < mdp.num_actions; ++a) set_deterministic(mdp, n + g, a, n + g);
  }

  // Steps to the fan-out state, preferring action 0 on ties.
  std::vector<int> dist(n, 0);
  std::vector<int> choice(n, 0);
  for (int s = n - 2; s >= 0; --s) {
    int via_step = dist[s + 1], via_short = dist[shortcut[s]];
    dist[s] = 1 + std::min(via_step, via_short);
    choice[s] = via_short < via_step ? 1 : 0;
  }

  out.expert.num_states = mdp.num_states;
  out.expert.num_goals = k;
  out.expert.actions.assign(static_cast<size_t>(k) * mdp.num_states, 0);
  for (int g = 0; g < k; ++g) {
    for (int s = 0; s < n - 1; ++s) out.expert.action_ref(s, g) = choice[s];
    out.expert.action_ref(n - 1, g) = g;
  }

  out.task_starts.resize(k);
  for (int g = 0; g < k; ++g)
    for (int s = 0; s < n; ++s) out.task_starts[g].push_back(s);
  for (int s = 0; s < n; ++s) mdp.start_states.push_back(s);
  return out;
}

Built build_family(const CorpusConfig& cfg) {
  if (cfg.num_tasks < 1) throw ValidationError("corpus: num_tasks must be >= 1");
  Rng layout_rng(cfg.mdp_seed);
  Built out;
  switch (cfg.family) {
    case MdpFamily::kChain: out = build_chain(cfg); break;
    case MdpFamily::kGrid: out = build_grid(cfg, layout_rng); break;
    case MdpFamily::kDag: out = build_dag(cfg, layout_rng); break;
  }

  if (cfg.tokens_per_goal < 1) throw ValidationError("corpus: tokens_per_goal must be >= 1");
  if (cfg.vocab_size < 2) throw ValidationError("corpus: vocab_size must be >= 2");
  std::set<std::vector<int>> seen;
  for (int g = 0; g < cfg.num_tasks; ++g) {
    std::vector<int> tokens(cfg.tokens_per_goal);
    int tries = 0;
    do {
      if (++tries > 1000)
        throw ValidationError("corpus: cannot draw distinct goal token sequences; "
                              "raise vocab_size or tokens_per_goal");
      for (int& t : tokens) t = layout_rng.uniform_int(cfg.vocab_size);
    } while (seen.count(tokens));
    seen.insert(tokens);
    out.goals.push_back({g, tokens, out.mdp.goal_states.at(g)});
  }
  return out;
}

int sample_next(const Mdp& mdp, int s, int a, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  auto row = mdp.row(s, a);
  int last = -1;
  for (int sp = 0; sp < mdp.num_states; ++sp) {
    if (row[sp] == 0.0) continue;
    last = sp;
    acc += row[sp];
    if (u < acc) return sp;
  }
  return last;
}

Trajectory roll_expert(const Built& built, int goal_id, int start, Rng& rng) {
  const int goal_state = built.mdp.goal_states.at(goal_id);
  const int max_steps = 4 * built.mdp.num_states + 16;
  Trajectory traj;
  traj.goal_id = goal_id;
  int s = start;
  for (int step = 0; step < max_steps; ++step) {
    if (s == goal_state) return traj;
    int a = built.expert.action(s, goal_id);
    traj.states.push_back(s);
    traj.actions.push_back(a);
    s = sample_next(built.mdp, s, a, rng);
  }
  throw ValidationError("corpus: expert rollout for goal " + std::to_string(goal_id) +
                        " from state " + std::to_string(start) + " did not reach the goal");
}

int farthest_start(const Built& built, int goal_id, Rng& rng) {
  int best_state = built.task_starts[goal_id].front();
  int best_len = -1;
  for (int start : built.task_starts[goal_id]) {
    int len = roll_expert(built, goal_id, start, rng).length();
    if (len > best_len) {
      best_len = len;
      best_state = start;
    }
  }
  return best_state;
}

}  // namespace

Corpus generate_corpus(const CorpusConfig& config) {
  if (config.trajectories_per_task < 1)
    throw ValidationError("corpus: trajectories_per_task must be >= 1");
  if (config.gamma <= 0.0 || config.gamma >= 1.0)
    throw ValidationError("corpus: gamma must be in (0, 1)");

  Built built = build_family(config);
  validate_mdp(built.mdp);

  Corpus corpus;
  corpus.config = config;
  Rng rng(config.seed);
  for (int g = 0; g < config.num_tasks; ++g) {
    // The first rollout per task leaves from the start with the longest
    // expert path so the corpus always contains the full horizon range.
    corpus.trajectories.push_back(roll_expert(built, g, farthest_start(built, g, rng), rng));
    const auto& starts = built.task_starts[g];
    for (int j = 1; j < config.trajectories_per_task; ++j) {
      int start = starts[rng.uniform_int(static_cast<int>(starts.size()))];
      corpus.trajectories.push_back(roll_expert(built, g, start, rng));
    }
  }
  corpus.mdp = std::move(built.mdp);
  corpus.expert = std::move(built.expert);
  corpus.goals = std::move(built.goals);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("save_corpus: cannot open " + path);
  const CorpusConfig& c = corpus.config;
  out << "tcrl-corpus 1\n";
  out << "family " << family_to_string(c.family) << "\n";
  out << "num_tasks " << c.num_tasks << "\n";
  out << "arm_length " << c.arm_length << "\n";
  out << "grid_width " << c.grid_width << "\n";
  out << "grid_height " << c.grid_height << "\n";
  out << "grid_goals " << grid_goal_layout_to_string(c.grid_goals) << "\n";
  out << "dag_interior " << c.dag_interior << "\n";
  out << "trajectories_per_task " << c.trajectories_per_task << "\n";
  out << "gamma " << std::setprecision(17) << c.gamma << "\n";
  out << "seed " << c.seed << "\n";
  out << "mdp_seed " << c.mdp_seed << "\n";
  out << "tokens_per_goal " << c.tokens_per_goal << "\n";
  out << "vocab_size " << c.vocab_size << "\n";
  out << "goals " << corpus.goals.size() << "\n";
  for (const GoalSpec& g : corpus.goals) {
    out << "goal " << g.goal_id << " target " << g.target_state << " tokens";
    for (int t : g.token_seq) out << " " << t;
    out << "\n";
  }
  out << "trajectories " << corpus.trajectories.size() << "\n";
  for (const Trajectory& t : corpus.trajectories) {
    out << "traj " << t.goal_id << " len " << t.length() << "\n";
    out << "states";
    for (int s : t.states) out << " " << s;
    out << "\nactions";
    for (int a : t.actions) out << " " << a;
    out << "\n";
  }
  out << "end\n";
  if (!out) throw ValidationError("save_corpus: write to " + path + " failed");
}

namespace {

void expect(std::istream& in, const std::string& token, const std::string& path) {
  std::string got;
  if (!(in >> got) || got != token)
    throw ValidationError("load_corpus: " + path + ": expected '" + token + "', got '" + got + "'");
}

template <typename T>
T read_value(std::istream& in, const std::string& key, const std::string& path) {
  expect(in, key, path);
  T v{};
  if (!(in >> v)) throw ValidationError("load_corpus: " + path + ": bad value for " + key);
  return v;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_corpus: cannot open " + path);

  expect(in, "tcrl-corpus", path);
  int version = 0;
  in >> version;
  if (version != 1)
    throw ValidationError("load_corpus: " + path + ": unsupported version " +
                          std::to_string(version));

  CorpusConfig c;
  c.family = family_from_string(read_value<std::string>(in, "family", path));
  c.num_tasks = read_value<int>(in, "num_tasks", path);
  c.arm_length = read_value<int>(in, "arm_length", path);
  c.grid_width = read_value<int>(in, "grid_width", path);
  c.grid_height = read_value<int>(in, "grid_height", path);
  c.grid_goals =
      grid_goal_layout_from_string(read_value<std::string>(in, "grid_goals", path));
  c.dag_interior = read_value<int>(in, "dag_interior", path);
  c.trajectories_per_task = read_value<int>(in, "trajectories_per_task", path);
  c.gamma = read_value<double>(in, "gamma", path);
  c.seed = read_value<unsigned long long>(in, "seed", path);
  c.mdp_seed = read_value<unsigned long long>(in, "mdp_seed", path);
  c.tokens_per_goal = read_value<int>(in, "tokens_per_goal", path);
  c.vocab_size = read_value<int>(in, "vocab_size", path);

  Built built = build_family(c);
  validate_mdp(built.mdp);

  Corpus corpus;
  corpus.config = c;
  corpus.mdp = std::move(built.mdp);
  corpus.expert = std::move(built.expert);

  size_t num_goals = read_value<size_t>(in, "goals", path);
  if (num_goals != static_cast<size_t>(c.num_tasks))
    throw ValidationError("load_corpus: " + path + ": goal count does not match num_tasks");
  for (size_t i = 0; i < num_goals; ++i) {
    GoalSpec g;
    g.goal_id = read_value<int>(in, "goal", path);
    g.target_state = read_value<int>(in, "target", path);
    expect(in, "tokens", path);
    g.token_seq.resize(c.tokens_per_goal);
    for (int& t : g.token_seq) {
      if (!(in >> t) || t < 0 || t >= c.vocab_size)
        throw ValidationError("load_corpus: " + path + ": bad token in goal " +
                              std::to_string(g.goal_id));
    }
    auto it = corpus.mdp.goal_states.find(g.goal_id);
    if (it == corpus.mdp.goal_states.end() || it->second != g.target_state)
      throw ValidationError("load_corpus: " + path + ": goal " + std::to_string(g.goal_id) +
                            " target state disagrees with the rebuilt layout");
    corpus.goals.push_back(std::move(g));
  }

  size_t num_trajs = read_value<size_t>(in, "trajectories", path);
  for (size_t i = 0; i < num_trajs; ++i) {
    Trajectory t;
    t.goal_id = read_value<int>(in, "traj", path);
    if (t.goal_id < 0 || t.goal_id >= c.num_tasks)
      throw ValidationError("load_corpus: " + path + ": trajectory goal id out of range");
    int len = read_value<int>(in, "len", path);
    if (len < 1) throw ValidationError("load_corpus: " + path + ": trajectory length must be >= 1");
    expect(in, "states", path);
    t.states.resize(len);
    for (int& s : t.states) {
      if (!(in >> s) || s < 0 || s >= corpus.mdp.num_states)
        throw ValidationError("load_corpus: " + path + ": state out of range in trajectory " +
                              std::to_string(i));
    }
    expect(in, "actions", path);
    t.actions.resize(len);
    for (int& a : t.actions) {
      if (!(in >> a) || a < 0 || a >= corpus.mdp.num_actions)
        throw ValidationError("load_corpus: " + path + ": action out of range in trajectory " +
                              std::to_string(i));
    }
    corpus.trajectories.push_back(std::move(t));
  }
  expect(in, "end", path);
  return corpus;
}

}  // namespace tcrl
