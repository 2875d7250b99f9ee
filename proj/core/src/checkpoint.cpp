#include "tcrl/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <string>

#include "tcrl/errors.hpp"

namespace tcrl {

namespace {

void write_theta(std::ostream& out, const std::vector<double>& theta) {
  out << "params " << theta.size() << "\n" << std::setprecision(17);
  for (size_t i = 0; i < theta.size(); ++i)
    out << theta[i] << ((i + 1) % 8 == 0 || i + 1 == theta.size() ? "\n" : " ");
}

void expect(std::istream& in, const std::string& token, const std::string& path) {
  std::string got;
  if (!(in >> got) || got != token)
    throw ValidationError("load_checkpoint: " + path + ": expected '" + token + "', got '" +
                          got + "'");
}

template <typename T>
T read_value(std::istream& in, const std::string& key, const std::string& path) {
  expect(in, key, path);
  T v{};
  if (!(in >> v))
    throw ValidationError("load_checkpoint: " + path + ": bad value for " + key);
  return v;
}

std::vector<double> read_theta(std::istream& in, size_t expected, const std::string& path) {
  size_t n = read_value<size_t>(in, "params", path);
  if (n != expected)
    throw ValidationError("load_checkpoint: " + path + ": parameter count " +
                          std::to_string(n) + " does not match the config (" +
                          std::to_string(expected) + ")");
  std::vector<double> theta(n);
  for (double& v : theta) {
    if (!(in >> v))
      throw ValidationError("load_checkpoint: " + path + ": truncated parameter block");
  }
  return theta;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("save_checkpoint: cannot open " + path);
  out << "tcrl-checkpoint 1\n";
  out << "sections " << (ckpt.encoder.has_value() ? 1 : 0) + (ckpt.flow.has_value() ? 1 : 0)
      << "\n";
  if (ckpt.encoder) {
    const EncoderParams& e = *ckpt.encoder;
    out << "[encoder]\n";
    out << "num_states " << e.config.num_states << "\n";
    out << "num_actions " << e.config.num_actions << "\n";
    out << "num_goals " << e.config.num_goals << "\n";
    out << "hidden_dim " << e.config.hidden_dim << "\n";
    out << "embed_dim " << e.config.embed_dim << "\n";
    out << "mode " << normalization_to_string(e.config.mode) << "\n";
    write_theta(out, e.theta);
  }
  if (ckpt.flow) {
    const FlowParams& f = *ckpt.flow;
    out << "[flow]\n";
    out << "horizon " << f.config.horizon << "\n";
    out << "action_dim " << f.config.action_dim << "\n";
    out << "cond_dim " << f.config.cond_dim << "\n";
    out << "hidden_dim " << f.config.hidden_dim << "\n";
    write_theta(out, f.theta);
  }
  if (!out) throw ValidationError("save_checkpoint: write to " + path + " failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_checkpoint: cannot open " + path);
  expect(in, "tcrl-checkpoint", path);
  int version = 0;
  in >> version;
  if (version != 1)
    throw ValidationError("load_checkpoint: " + path + ": unsupported version " +
                          std::to_string(version));
  int sections = read_value<int>(in, "sections", path);

  Checkpoint ckpt;
  for (int s = 0; s < sections; ++s) {
    std::string tag;
    if (!(in >> tag))
      throw ValidationError("load_checkpoint: " + path + ": missing section header");
    if (tag == "[encoder]") {
      EncoderConfig c;
      c.num_states = read_value<int>(in, "num_states", path);
      c.num_actions = read_value<int>(in, "num_actions", path);
      c.num_goals = read_value<int>(in, "num_goals", path);
      c.hidden_dim = read_value<int>(in, "hidden_dim", path);
      c.embed_dim = read_value<int>(in, "embed_dim", path);
      c.mode = normalization_from_string(read_value<std::string>(in, "mode", path));
      EncoderParams e;
      e.config = c;
      e.theta = read_theta(in, e.num_params(), path);
      ckpt.encoder = std::move(e);
    } else if (tag == "[flow]") {
      FlowConfig c;
      c.horizon = read_value<int>(in, "horizon", path);
      c.action_dim = read_value<int>(in, "action_dim", path);
      c.cond_dim = read_value<int>(in, "cond_dim", path);
      c.hidden_dim = read_value<int>(in, "hidden_dim", path);
      FlowParams f;
      f.config = c;
      f.theta = read_theta(in, f.num_params(), path);
      ckpt.flow = std::move(f);
    } else {
      throw ValidationError("load_checkpoint: " + path + ": unknown section " + tag);
    }
  }
  return ckpt;
}

}  // namespace tcrl
