// Command-line front end: corpus generation, encoder and flow training, the
// verification suites, value curves, and mask benches. Every invocation
// writes its artifacts plus the effective config under one run directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tcrl/attention.hpp"
#include "tcrl/batch.hpp"
#include "tcrl/checkpoint.hpp"
#include "tcrl/contrastive.hpp"
#include "tcrl/corpus.hpp"
#include "tcrl/encoder.hpp"
#include "tcrl/errors.hpp"
#include "tcrl/flow.hpp"
#include "tcrl/oracle.hpp"
#include "tcrl/rng.hpp"
#include "tcrl/shard.hpp"
#include "tcrl/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tcrl;

namespace {

// ---------------------------------------------------------------- utilities

std::string timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_buf{};
  localtime_r(&now, &tm_buf);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm_buf);
  return buf;
}

fs::path make_run_dir(const std::string& out, const std::string& sub, const std::string& mode) {
  fs::path base(out);
  if (mode == "flat") {
    fs::create_directories(base);
    return base;
  }
  fs::path dir = base / (timestamp() + "-" + sub);
  for (int n = 2; fs::exists(dir); ++n)
    dir = base / (timestamp() + "-" + sub + "-" + std::to_string(n));
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << text;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ------------------------------------------------------------ config layer

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config: " + std::string(e.what()));
  }
}

void apply_override(json& root, const std::string& kv) {
  size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("--set expects key=value, got '" + kv + "'");
  std::string path = kv.substr(0, eq);
  std::string raw = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // bare words stay strings
  }
  json* node = &root;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ValidationError("--set: empty path component in '" + path + "'");
    parts.push_back(part);
  }
  for (size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
}

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ValidationError("config: unknown key '" + where + "." + it.key() + "'");
}

template <typename T>
void take(const json& obj, const char* key, T& slot) {
  if (obj.contains(key)) {
    try {
      slot = obj.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError("config: bad value for '" + std::string(key) + "': " + e.what());
    }
  }
}

CorpusConfig corpus_from_json(const json& obj) {
  check_keys(obj, "corpus",
             {"family", "num_tasks", "arm_length", "grid_width", "grid_height", "grid_goals",
              "dag_interior", "trajectories_per_task", "gamma", "seed", "mdp_seed",
              "tokens_per_goal", "vocab_size"});
  CorpusConfig cfg;
  std::string family = family_to_string(cfg.family);
  std::string goals = grid_goal_layout_to_string(cfg.grid_goals);
  take(obj, "family", family);
  take(obj, "grid_goals", goals);
  cfg.family = family_from_string(family);
  cfg.grid_goals = grid_goal_layout_from_string(goals);
  take(obj, "num_tasks", cfg.num_tasks);
  take(obj, "arm_length", cfg.arm_length);
  take(obj, "grid_width", cfg.grid_width);
  take(obj, "grid_height", cfg.grid_height);
  take(obj, "dag_interior", cfg.dag_interior);
  take(obj, "trajectories_per_task", cfg.trajectories_per_task);
  take(obj, "gamma", cfg.gamma);
  take(obj, "seed", cfg.seed);
  take(obj, "mdp_seed", cfg.mdp_seed);
  take(obj, "tokens_per_goal", cfg.tokens_per_goal);
  take(obj, "vocab_size", cfg.vocab_size);
  return cfg;
}

json corpus_to_json(const CorpusConfig& cfg) {
  return {{"family", family_to_string(cfg.family)},
          {"num_tasks", cfg.num_tasks},
          {"arm_length", cfg.arm_length},
          {"grid_width", cfg.grid_width},
          {"grid_height", cfg.grid_height},
          {"grid_goals", grid_goal_layout_to_string(cfg.grid_goals)},
          {"dag_interior", cfg.dag_interior},
          {"trajectories_per_task", cfg.trajectories_per_task},
          {"gamma", cfg.gamma},
          {"seed", cfg.seed},
          {"mdp_seed", cfg.mdp_seed},
          {"tokens_per_goal", cfg.tokens_per_goal},
          {"vocab_size", cfg.vocab_size}};
}

TrainConfig train_from_json(const json& obj) {
  check_keys(obj, "train",
             {"gamma", "lambda_crl", "learning_rate", "final_learning_rate", "weight_decay",
              "steps", "batch_size", "seed", "optimizer", "mode", "hidden_dim", "embed_dim",
              "record_every"});
  TrainConfig cfg;
  std::string opt = optimizer_to_string(cfg.optimizer);
  std::string mode = normalization_to_string(cfg.mode);
  take(obj, "optimizer", opt);
  take(obj, "mode", mode);
  cfg.optimizer = optimizer_from_string(opt);
  cfg.mode = normalization_from_string(mode);
  take(obj, "gamma", cfg.gamma);
  take(obj, "lambda_crl", cfg.lambda_crl);
  take(obj, "learning_rate", cfg.learning_rate);
  take(obj, "final_learning_rate", cfg.final_learning_rate);
  take(obj, "weight_decay", cfg.weight_decay);
  take(obj, "steps", cfg.steps);
  take(obj, "batch_size", cfg.batch_size);
  take(obj, "seed", cfg.seed);
  take(obj, "hidden_dim", cfg.hidden_dim);
  take(obj, "embed_dim", cfg.embed_dim);
  take(obj, "record_every", cfg.record_every);
  return cfg;
}

json train_to_json(const TrainConfig& cfg) {
  return {{"gamma", cfg.gamma},
          {"lambda_crl", cfg.lambda_crl},
          {"learning_rate", cfg.learning_rate},
          {"final_learning_rate", cfg.final_learning_rate},
          {"weight_decay", cfg.weight_decay},
          {"steps", cfg.steps},
          {"batch_size", cfg.batch_size},
          {"seed", cfg.seed},
          {"optimizer", optimizer_to_string(cfg.optimizer)},
          {"mode", normalization_to_string(cfg.mode)},
          {"hidden_dim", cfg.hidden_dim},
          {"embed_dim", cfg.embed_dim},
          {"record_every", cfg.record_every}};
}

struct FlowSpec {
  FlowConfig config;
  FlowTrainConfig train;
  std::vector<std::pair<std::vector<double>, ActionChunk>> data;
};

FlowSpec flow_from_json(const json& obj) {
  check_keys(obj, "flow",
             {"horizon", "action_dim", "cond_dim", "hidden_dim", "steps", "learning_rate",
              "final_learning_rate", "seed", "data"});
  FlowSpec spec;
  take(obj, "horizon", spec.config.horizon);
  take(obj, "action_dim", spec.config.action_dim);
  take(obj, "cond_dim", spec.config.cond_dim);
  take(obj, "hidden_dim", spec.config.hidden_dim);
  take(obj, "steps", spec.train.steps);
  take(obj, "learning_rate", spec.train.learning_rate);
  take(obj, "final_learning_rate", spec.train.final_learning_rate);
  take(obj, "seed", spec.train.seed);
  if (!obj.contains("data") || !obj.at("data").is_array() || obj.at("data").empty())
    throw ValidationError("config: flow.data must be a non-empty array");
  for (const json& item : obj.at("data")) {
    check_keys(item, "flow.data[]", {"cond", "chunk"});
    std::vector<double> cond, flat;
    take(item, "cond", cond);
    take(item, "chunk", flat);
    if (static_cast<int>(cond.size()) != spec.config.cond_dim)
      throw ValidationError("config: flow.data cond length does not match cond_dim");
    if (static_cast<int>(flat.size()) != spec.config.output_dim())
      throw ValidationError("config: flow.data chunk length does not match horizon*action_dim");
    ActionChunk chunk = zero_chunk(spec.config.horizon, spec.config.action_dim);
    chunk.values = flat;
    spec.data.emplace_back(std::move(cond), std::move(chunk));
  }
  return spec;
}

json flow_to_json(const FlowSpec& spec) {
  json data = json::array();
  for (const auto& [cond, chunk] : spec.data)
    data.push_back({{"cond", cond}, {"chunk", chunk.values}});
  return {{"horizon", spec.config.horizon},
          {"action_dim", spec.config.action_dim},
          {"cond_dim", spec.config.cond_dim},
          {"hidden_dim", spec.config.hidden_dim},
          {"steps", spec.train.steps},
          {"learning_rate", spec.train.learning_rate},
          {"final_learning_rate", spec.train.final_learning_rate},
          {"seed", spec.train.seed},
          {"data", data}};
}

std::string run_mode_from_json(const json& root) {
  std::string mode = "timestamped";
  if (root.contains("run")) {
    check_keys(root.at("run"), "run", {"dir_mode"});
    take(root.at("run"), "dir_mode", mode);
  }
  if (mode != "timestamped" && mode != "flat")
    throw ValidationError("config: run.dir_mode must be 'timestamped' or 'flat'");
  return mode;
}

void check_sections(const json& root, const std::set<std::string>& allowed) {
  check_keys(root, "top level", allowed);
}

// ----------------------------------------------------------------- svg plot

struct Series {
  std::string name;
  std::string color;
  std::vector<std::pair<double, double>> pts;
};

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series) {
  const double W = 640, H = 400, L = 64, R = 20, T = 36, B = 46;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Series& s : series)
    for (auto [x, y] : s.pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmin > xmax) { xmin = 0; xmax = 1; }
  if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
  if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }
  auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
      << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\" "
         "font-family=\"sans-serif\">" << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double xv = xmin + (xmax - xmin) * i / 5.0;
    double yv = ymin + (ymax - ymin) * i / 5.0;
    char xb[32], yb[32];
    std::snprintf(xb, sizeof xb, "%g", xv);
    std::snprintf(yb, sizeof yb, "%.3g", yv);
    out << "<line x1=\"" << sx(xv) << "\" y1=\"" << H - B << "\" x2=\"" << sx(xv) << "\" y2=\""
        << H - B + 4 << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << sx(xv) << "\" y=\"" << H - B + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << xb
        << "</text>\n"
        << "<line x1=\"" << L - 4 << "\" y1=\"" << sy(yv) << "\" x2=\"" << L << "\" y2=\""
        << sy(yv) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << L - 7 << "\" y=\"" << sy(yv) + 4
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << yb
        << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << x_label
      << "</text>\n"
      << "<text x=\"16\" y=\"" << (T + H - B) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 16 " << (T + H - B) / 2 << ")\">" << y_label << "</text>\n";
  double ly = T + 10;
  for (const Series& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : s.pts) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(x), sy(y));
      out << buf;
    }
    out << "\"/>\n"
        << "<line x1=\"" << W - R - 130 << "\" y1=\"" << ly << "\" x2=\"" << W - R - 110
        << "\" y2=\"" << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"/>\n"
        << "<text x=\"" << W - R - 104 << "\" y=\"" << ly + 4
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << s.name << "</text>\n";
    ly += 16;
  }
  out << "</svg>\n";
  return out.str();
}

// ------------------------------------------------------------- subcommands

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "runs";
  std::vector<std::string> sets;
  long long seed = -1;  // -1: keep config values
};

json effective_base(const CommonArgs& args) {
  json root = args.config_path.empty() ? json::object() : load_config_file(args.config_path);
  if (!root.is_object()) throw ValidationError("config: top level must be an object");
  for (const std::string& kv : args.sets) apply_override(root, kv);
  return root;
}

fs::path open_run_dir(const json& root, const CommonArgs& args, const std::string& sub) {
  fs::path dir = make_run_dir(args.out_dir, sub, run_mode_from_json(root));
  std::cout << "run_dir: " << dir.string() << "\n";
  return dir;
}

void echo_config(const fs::path& dir, const json& effective) {
  write_text(dir / "config.json", effective.dump(2) + "\n");
  std::cout << "config: " << (dir / "config.json").string() << "\n";
}

int cmd_gen(const CommonArgs& args) {
  json root = effective_base(args);
  check_sections(root, {"corpus", "run"});
  if (args.seed >= 0) root["corpus"]["seed"] = args.seed;
  CorpusConfig cfg = corpus_from_json(root.value("corpus", json::object()));
  Corpus corpus = generate_corpus(cfg);
  fs::path dir = open_run_dir(root, args, "gen");
  json effective = {{"corpus", corpus_to_json(cfg)}, {"run", {{"dir_mode", run_mode_from_json(root)}}}};
  echo_config(dir, effective);
  save_corpus(corpus, (dir / "corpus.txt").string());
  Batch batch = full_batch(corpus);
  std::cout << "corpus: " << (dir / "corpus.txt").string() << "\n"
            << "tasks=" << corpus.goals.size() << " trajectories=" << corpus.trajectories.size()
            << " samples=" << batch.size() << "\n";
  return 0;
}

Corpus corpus_for(const json& root) {
  const bool has_path = root.contains("corpus_path");
  const bool has_inline = root.contains("corpus");
  if (has_path && has_inline)
    throw ValidationError("config: give either corpus_path or corpus, not both");
  if (has_path) return load_corpus(root.at("corpus_path").get<std::string>());
  return generate_corpus(corpus_from_json(root.value("corpus", json::object())));
}

int cmd_train(const CommonArgs& args) {
  json root = effective_base(args);
  check_sections(root, {"corpus", "corpus_path", "train", "flow", "run"});
  if (args.seed >= 0) {
    root["train"]["seed"] = args.seed;
    if (root.contains("flow")) root["flow"]["seed"] = args.seed;
  }
  Corpus corpus = corpus_for(root);
  TrainConfig tc = train_from_json(root.value("train", json::object()));
  fs::path dir = open_run_dir(root, args, "train");

  json effective = {{"train", train_to_json(tc)}, {"run", {{"dir_mode", run_mode_from_json(root)}}}};
  if (root.contains("corpus_path"))
    effective["corpus_path"] = root.at("corpus_path").get<std::string>();
  else
    effective["corpus"] = corpus_to_json(corpus.config);

  TrainResult result = train_encoders(corpus, tc);

  Checkpoint ckpt;
  ckpt.encoder = result.params;
  if (root.contains("flow")) {
    FlowSpec spec = flow_from_json(root.at("flow"));
    ckpt.flow = train_flow(spec.data, spec.config, spec.train);
    effective["flow"] = flow_to_json(spec);
  }
  echo_config(dir, effective);
  save_checkpoint(ckpt, (dir / "checkpoint.txt").string());

  std::ostringstream hist;
  for (const StepRecord& r : result.history) {
    json line = {{"step", r.step},          {"L_sa_to_l", r.loss_sa_to_l},
                 {"L_l_to_sa", r.loss_l_to_sa}, {"L_bc", r.loss_bc},
                 {"temperature", r.temperature}, {"grad_norm", r.grad_norm}};
    hist << line.dump() << "\n";
  }
  write_text(dir / "history.jsonl", hist.str());

  Series sa{"L_sa_to_l", "#2c7fb8", {}}, ls{"L_l_to_sa", "#d95f0e", {}};
  for (const StepRecord& r : result.history) {
    sa.pts.emplace_back(r.step, r.loss_sa_to_l);
    ls.pts.emplace_back(r.step, r.loss_l_to_sa);
  }
  write_text(dir / "loss_curve.svg", line_chart_svg("training loss", "step", "loss", {sa, ls}));

  std::cout << "checkpoint: " << (dir / "checkpoint.txt").string() << "\n"
            << "history: " << (dir / "history.jsonl").string() << "\n";
  if (!result.history.empty()) {
    const StepRecord& last = result.history.back();
    std::cout << "final: step=" << last.step << " L_sa_to_l=" << fmt17(last.loss_sa_to_l)
              << " L_l_to_sa=" << fmt17(last.loss_l_to_sa) << "\n";
  }
  return 0;
}

// ----------------------------------------------------------- verify suites

struct SuiteResult {
  std::string name;
  double stat = 0.0;
  std::string threshold;
  bool pass = false;
};

PackedSequence extract_segment(const PackedSequence& seq, int segment) {
  PackedSequence out;
  out.feature_dim = seq.feature_dim;
  for (int i = 0; i < seq.length(); ++i) {
    if (seq.segment_ids[i] != segment) continue;
    auto tok = seq.token(i);
    out.features.insert(out.features.end(), tok.begin(), tok.end());
    out.roles.push_back(seq.roles[i]);
    out.segment_ids.push_back(0);
    out.positions.push_back(seq.positions[i]);
    out.ar_targets.push_back(seq.ar_targets[i]);
  }
  return out;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    const int n = static_cast<int>(v.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int x, int y) { return v[x] < v[y]; });
    std::vector<double> r(n);
    int i = 0;
    while (i < n) {
      int j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      double avg = (i + j) / 2.0;
      for (int k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  std::vector<double> ra = ranks(a), rb = ranks(b);
  const int n = static_cast<int>(a.size());
  double ma = 0, mb = 0;
  for (int i = 0; i < n; ++i) { ma += ra[i]; mb += rb[i]; }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (int i = 0; i < n; ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va <= 0 || vb <= 0) return 0.0;
  return cov / std::sqrt(va * vb);
}

std::vector<SuiteResult> run_verify_suites(const Checkpoint& ckpt, const Corpus& corpus,
                                           uint64_t seed) {
  if (!ckpt.encoder) throw ValidationError("verify: checkpoint has no encoder parameters");
  const EncoderParams& params = *ckpt.encoder;
  const double gamma = corpus.config.gamma;
  std::vector<SuiteResult> results;

  Batch batch = full_batch(corpus);
  EncoderForward fwd = encoder_forward(params, batch);
  const int B = batch.size();
  const int U = batch.num_unique();

  {  // residual: per-goal std of logits minus log occupancy values
    std::vector<std::vector<double>> per_goal(U);
    for (int i = 0; i < B; ++i) {
      const BatchSample& s = batch.samples[i];
      double target = std::log(1.0 - gamma) + (s.T - s.t) * std::log(gamma);
      per_goal[batch.column_of_sample[i]].push_back(fwd.sim.at(i, batch.column_of_sample[i]) -
                                                    target);
    }
    double worst = 0.0;
    for (const auto& res : per_goal) {
      if (res.empty()) continue;
      double mean = std::accumulate(res.begin(), res.end(), 0.0) / res.size();
      double var = 0.0;
      for (double v : res) var += (v - mean) * (v - mean);
      worst = std::max(worst, std::sqrt(var / res.size()));
    }
    results.push_back({"residual_std", worst, "< 0.1", worst < 0.1});
  }

  {  // ranking: per goal, scores must order samples by closeness to the goal
    double min_rho = 1.0;
    for (int c = 0; c < U; ++c) {
      std::vector<double> score, closeness;
      for (int i = 0; i < B; ++i) {
        if (batch.column_of_sample[i] != c) continue;
        score.push_back(fwd.sim.at(i, c));
        closeness.push_back(-static_cast<double>(batch.samples[i].T - batch.samples[i].t));
      }
      if (score.size() >= 2) min_rho = std::min(min_rho, spearman(score, closeness));
    }
    results.push_back({"ranking_spearman", min_rho, ">= 0.99", min_rho >= 0.99});
  }

  {  // discrimination: own goal column is the strict row maximum
    int correct = 0;
    for (int i = 0; i < B; ++i) {
      const int own = batch.column_of_sample[i];
      bool strict = true;
      for (int c = 0; c < U; ++c)
        if (c != own && fwd.sim.at(i, c) >= fwd.sim.at(i, own)) strict = false;
      correct += strict;
    }
    double acc = static_cast<double>(correct) / B;
    results.push_back({"goal_discrimination", acc, "== 1.0", correct == B});
  }

  {  // gradient: analytic vs central differences on a small fresh encoder
    Rng rng(seed);
    EncoderConfig cfg = params.config;
    cfg.hidden_dim = 8;
    cfg.embed_dim = 4;
    EncoderParams fresh = init_encoder(cfg, seed + 1);
    Batch small = B <= 24 ? batch : sample_batch(corpus, 24, rng, 2);
    double err = finite_diff_check(fresh, small, gamma, 1.0, 1e-3, 2000, rng);
    results.push_back({"gradient_check", err, "< 1e-5", err < 1e-5});
  }

  {  // isolation: three leakage probes on a role-structured sequence
    Rng rng(seed + 2);
    PackedSequence seq = bench_sequence(192, 32, 17, rng);
    AttentionParams attn = init_attention(32, 4, 17, 0.05, seed + 3);
    RoleMask mask = build_mask(seq);
    IsolationReport report = isolation_check(seq, attn, mask, rng);
    double worst = std::max({report.instruction_to_crl_action, report.any_to_crl_goal,
                             report.crl_removal});
    results.push_back({"isolation", worst, "<= 1e-12", report.passed});
  }

  {  // packing: per-sample BC losses survive greedy packing
    Rng rng(seed + 4);
    AttentionParams attn = init_attention(32, 4, 17, 0.05, seed + 5);
    double worst = 0.0;
    for (int round = 0; round < 10; ++round) {
      std::vector<PackedSequence> singles;
      const int count = 3 + static_cast<int>(rng.uniform_int(4));
      for (int k = 0; k < count; ++k) {
        int vs = 2 + static_cast<int>(rng.uniform_int(4));
        int ar = 2 + static_cast<int>(rng.uniform_int(4));
        singles.push_back(make_segment({{TokenRole::kVisionState, vs},
                                        {TokenRole::kInstruction, 2},
                                        {TokenRole::kArAction, ar},
                                        {TokenRole::kCrlAction, 2},
                                        {TokenRole::kCrlGoal, 2}},
                                       32, 17, rng));
      }
      std::vector<double> alone;
      for (const PackedSequence& s : singles)
        alone.push_back(bc_loss_packed(s, build_mask(s), attn));
      // First-fit can reorder samples across bins, so compare each packed
      // segment against its own extracted standalone loss and then match the
      // sorted loss multisets.
      std::vector<double> in_pack;
      for (const PackedSequence& p : pack(singles, 48)) {
        std::vector<double> seg_losses = per_segment_bc_loss(p, build_mask(p), attn);
        for (size_t k = 0; k < seg_losses.size(); ++k) {
          PackedSequence single = extract_segment(p, static_cast<int>(k));
          worst = std::max(worst,
                           std::abs(seg_losses[k] - bc_loss_packed(single, build_mask(single), attn)));
          in_pack.push_back(seg_losses[k]);
        }
      }
      std::sort(alone.begin(), alone.end());
      std::sort(in_pack.begin(), in_pack.end());
      if (in_pack.size() != alone.size()) {
        worst = std::max(worst, 1.0);
      } else {
        for (size_t k = 0; k < alone.size(); ++k)
          worst = std::max(worst, std::abs(alone[k] - in_pack[k]));
      }
    }
    results.push_back({"packing", worst, "<= 1e-12", worst <= 1e-12});
  }

  {  // shard: gathered-negative gradients match the monolithic path
    double worst = 0.0;
    int negatives = 0;
    for (int shards : {1, 2, 4, 8}) {
      if (shards > B) continue;
      ShardPlan plan = contiguous_plan(B, shards);
      ShardReport report = sharded_crl_grad(fwd.sim, batch, gamma, 1.0, plan);
      worst = std::max({worst, report.max_grad_diff, report.loss_diff});
      negatives = report.negatives_per_anchor;
    }
    (void)negatives;
    results.push_back({"shard", worst, "<= 1e-10", worst <= 1e-10});
  }

  return results;
}

int cmd_verify(const CommonArgs& args) {
  json root = effective_base(args);
  check_sections(root, {"checkpoint", "corpus", "run"});
  if (!root.contains("checkpoint") || !root.contains("corpus"))
    throw ValidationError("verify: config needs 'checkpoint' and 'corpus' paths");
  uint64_t seed = args.seed >= 0 ? static_cast<uint64_t>(args.seed) : 1234;
  Checkpoint ckpt = load_checkpoint(root.at("checkpoint").get<std::string>());
  Corpus corpus = load_corpus(root.at("corpus").get<std::string>());
  fs::path dir = open_run_dir(root, args, "verify");
  json effective = {{"checkpoint", root.at("checkpoint")},
                    {"corpus", root.at("corpus")},
                    {"run", {{"dir_mode", run_mode_from_json(root)}}}};
  echo_config(dir, effective);

  std::vector<SuiteResult> results = run_verify_suites(ckpt, corpus, seed);
  std::ostringstream report;
  bool all_pass = true;
  for (const SuiteResult& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-20s stat=%-12.5g threshold %-8s %s", r.name.c_str(),
                  r.stat, r.threshold.c_str(), r.pass ? "PASS" : "FAIL");
    report << line << "\n";
    all_pass = all_pass && r.pass;
  }
  report << (all_pass ? "verify: all suites passed" : "verify: FAILURES present") << "\n";
  std::cout << report.str();
  write_text(dir / "verify_report.txt", report.str());
  return all_pass ? 0 : 2;
}

// ------------------------------------------------------------- value curve

Trajectory rollout_expert(const Corpus& corpus, int goal_id, int start) {
  const Mdp& mdp = corpus.mdp;
  const int goal_state = mdp.goal_states.at(goal_id);
  Trajectory traj;
  traj.goal_id = goal_id;
  int state = start;
  const int cap = 4 * mdp.num_states + 4;
  while (static_cast<int>(traj.states.size()) < cap) {
    int action = corpus.expert.action(state, goal_id);
    traj.states.push_back(state);
    traj.actions.push_back(action);
    auto row = mdp.row(state, action);
    int next = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (next == goal_state) return traj;
    state = next;
  }
  throw ValidationError("value-curve: expert rollout did not reach goal " +
                        std::to_string(goal_id));
}

int held_out_start(const Corpus& corpus, int goal_id) {
  std::set<int> used;
  for (const Trajectory& t : corpus.trajectories)
    if (t.goal_id == goal_id && !t.states.empty()) used.insert(t.states.front());
  int best = -1, best_len = -1;
  for (int s : corpus.mdp.start_states) {
    if (used.count(s)) continue;
    int len = rollout_expert(corpus, goal_id, s).length();
    if (len > best_len) { best_len = len; best = s; }
  }
  if (best >= 0) return best;
  // every start was seen in training: fall back to the longest path start
  for (int s : corpus.mdp.start_states) {
    int len = rollout_expert(corpus, goal_id, s).length();
    if (len > best_len) { best_len = len; best = s; }
  }
  return best;
}

int cmd_value_curve(const CommonArgs& args) {
  json root = effective_base(args);
  check_sections(root, {"checkpoint", "corpus", "curve", "run"});
  if (!root.contains("checkpoint") || !root.contains("corpus"))
    throw ValidationError("value-curve: config needs 'checkpoint' and 'corpus' paths");
  json curve = root.value("curve", json::object());
  check_keys(curve, "curve", {"correct_task", "wrong_task", "start_state"});
  int correct_task = 0, wrong_task = 1, start_state = -1;
  take(curve, "correct_task", correct_task);
  take(curve, "wrong_task", wrong_task);
  take(curve, "start_state", start_state);

  Checkpoint ckpt = load_checkpoint(root.at("checkpoint").get<std::string>());
  if (!ckpt.encoder) throw ValidationError("value-curve: checkpoint has no encoder parameters");
  Corpus corpus = load_corpus(root.at("corpus").get<std::string>());
  const int tasks = static_cast<int>(corpus.goals.size());
  if (correct_task < 0 || correct_task >= tasks || wrong_task < 0 || wrong_task >= tasks)
    throw ValidationError("value-curve: task ids must lie in [0, " + std::to_string(tasks) + ")");

  fs::path dir = open_run_dir(root, args, "value-curve");
  json effective = {{"checkpoint", root.at("checkpoint")},
                    {"corpus", root.at("corpus")},
                    {"curve",
                     {{"correct_task", correct_task},
                      {"wrong_task", wrong_task},
                      {"start_state", start_state}}},
                    {"run", {{"dir_mode", run_mode_from_json(root)}}}};
  echo_config(dir, effective);

  if (start_state < 0) start_state = held_out_start(corpus, correct_task);
  Trajectory traj = rollout_expert(corpus, correct_task, start_state);

  std::ostringstream csv;
  csv << "t,score_correct,score_wrong\n";
  Series sc{"correct goal", "#2a7d46", {}}, sw{"wrong goal", "#c44536", {}};
  int above = 0;
  for (int t = 1; t <= traj.length(); ++t) {
    double a = pair_score(*ckpt.encoder, traj.states[t - 1], traj.actions[t - 1], correct_task);
    double b = pair_score(*ckpt.encoder, traj.states[t - 1], traj.actions[t - 1], wrong_task);
    csv << t << "," << fmt17(a) << "," << fmt17(b) << "\n";
    sc.pts.emplace_back(t, a);
    sw.pts.emplace_back(t, b);
    above += a >= b;
  }
  write_text(dir / "value_curve.csv", csv.str());
  write_text(dir / "value_curve.svg",
             line_chart_svg("goal scores along the trajectory", "t", "score", {sc, sw}));
  std::cout << "csv: " << (dir / "value_curve.csv").string() << "\n"
            << "plot: " << (dir / "value_curve.svg").string() << "\n"
            << "start_state=" << start_state << " T=" << traj.length() << " correct_above_wrong="
            << above << "/" << traj.length() << " rise="
            << fmt17(sc.pts.back().second - sc.pts.front().second) << "\n";
  return 0;
}

// ------------------------------------------------------------------- bench

int cmd_bench(const CommonArgs& args) {
  json root = effective_base(args);
  check_sections(root, {"bench", "run"});
  json bench = root.value("bench", json::object());
  check_keys(bench, "bench",
             {"seq_lens", "block_size", "model_dim", "num_heads", "warmup", "reps", "seed"});
  MaskBenchConfig cfg;
  take(bench, "seq_lens", cfg.seq_lens);
  take(bench, "block_size", cfg.block_size);
  take(bench, "model_dim", cfg.model_dim);
  take(bench, "num_heads", cfg.num_heads);
  take(bench, "warmup", cfg.warmup);
  take(bench, "reps", cfg.reps);
  take(bench, "seed", cfg.seed);
  if (args.seed >= 0) cfg.seed = static_cast<uint64_t>(args.seed);

  fs::path dir = open_run_dir(root, args, "bench");
  json effective = {{"bench",
                     {{"seq_lens", cfg.seq_lens},
                      {"block_size", cfg.block_size},
                      {"model_dim", cfg.model_dim},
                      {"num_heads", cfg.num_heads},
                      {"warmup", cfg.warmup},
                      {"reps", cfg.reps},
                      {"seed", cfg.seed}}},
                    {"run", {{"dir_mode", run_mode_from_json(root)}}}};
  echo_config(dir, effective);

  std::vector<MaskBenchRow> rows = mask_bench(cfg);
  std::ostringstream jsonl;
  std::printf("%-6s %8s %6s %12s %8s\n", "impl", "seq_len", "block", "median_ms", "skipped");
  for (const MaskBenchRow& r : rows) {
    json line = {{"impl", r.impl},
                 {"seq_len", r.seq_len},
                 {"block_size", r.block_size},
                 {"median_ns", r.median_ns},
                 {"skipped_fraction", r.skipped_fraction}};
    jsonl << line.dump() << "\n";
    std::printf("%-6s %8d %6d %12.3f %8.3f\n", r.impl.c_str(), r.seq_len, r.block_size,
                r.median_ns / 1e6, r.skipped_fraction);
  }
  write_text(dir / "bench.jsonl", jsonl.str());
  std::cout << "table: " << (dir / "bench.jsonl").string() << "\n";
  return 0;
}

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "JSON config file");
  sub->add_option("--seed", args.seed, "override the subcommand's primary seed");
  sub->add_option("--out", args.out_dir, "output directory root")->capture_default_str();
  sub->add_option("--set", args.sets, "dotted-path config override, key=value (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal-contrastive representation testbed"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, verify_args, curve_args, bench_args;
  CLI::App* gen = app.add_subcommand("gen", "generate an expert corpus");
  CLI::App* train = app.add_subcommand("train", "fit the encoders (and optional flow head)");
  CLI::App* verify = app.add_subcommand("verify", "run the verification suites on a checkpoint");
  CLI::App* curve = app.add_subcommand("value-curve", "emit goal scores along a trajectory");
  CLI::App* bench = app.add_subcommand("bench", "time dense vs block-sparse attention");
  add_common(gen, gen_args);
  add_common(train, train_args);
  add_common(verify, verify_args);
  add_common(curve, curve_args);
  add_common(bench, bench_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (verify->parsed()) return cmd_verify(verify_args);
    if (curve->parsed()) return cmd_value_curve(curve_args);
    if (bench->parsed()) return cmd_bench(bench_args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
