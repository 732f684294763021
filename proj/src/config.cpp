#include "coreflow/config.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coreflow {

namespace {

// One defaults table for the whole artifact.  "auto" means "resolve from the
// dataset name" (see dataset_defaults in dataset.cpp); everything else is a
// literal.  Keys are grouped by the subsystem that consumes them.
const std::map<std::string, std::string>& default_table() {
  static const std::map<std::string, std::string> table = {
      // data generation
      {"dataset", "ring6"},
      {"n", "10000"},
      {"seed", "0"},
      {"scale", "auto"},        // dataset spatial scale multiplier
      {"ring6_std", "0.1"},     // per-mode standard deviation before scaling
      {"moons_noise", "0.05"},
      {"pinwheel_radial_std", "0.3"},
      {"pinwheel_tangential_std", "0.05"},
      {"pinwheel_rate", "0.25"},
      {"helix_noise", "0.05"},
      // coreset fit
      {"K", "auto"},
      {"rank", "1"},
      {"lambda", "auto"},
      {"fit_iters", "auto"},
      // correction training
      {"train_iters", "20000"},
      {"batch", "128"},
      {"learning_rate", "2e-4"},
      {"adam_beta1", "0.9"},
      {"adam_beta2", "0.999"},
      {"adam_eps", "1e-8"},
      {"ema_decay", "0.9999"},
      {"coupling", "sinkhorn_anchored"},
      {"train_t", "0"},
      {"hidden_width", "128"},
      {"hidden_layers", "3"},
      // generation
      {"J", "1"},
      {"L", "8"},
      {"gen_n", "5000"},
      {"use_ema", "true"},
      // metrics
      {"sw2_projections", "200"},
      {"eval_pool", "auto"},
      {"knn_k", "5"},
      // theory checks
      {"marginal_draws", "100000"},
      {"moment_draws", "1000000"},
      {"gap_pairs", "8"},
      {"gap_pool", "1024"},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig::RunConfig() : values_(default_table()) {}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected `key = value`, got: " + line);
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::runtime_error("unknown config key: " + key);
  }
  it->second = value;
}

bool RunConfig::has(const std::string& key) const {
  return values_.count(key) != 0;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::runtime_error("unknown config key: " + key);
  }
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const std::logic_error&) {
    throw std::runtime_error("config key `" + key + "` is not a number: " +
                             get(key));
  }
}

int RunConfig::get_int(const std::string& key) const {
  try {
    return std::stoi(get(key));
  } catch (const std::logic_error&) {
    throw std::runtime_error("config key `" + key + "` is not an integer: " +
                             get(key));
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  try {
    return std::stoull(get(key));
  } catch (const std::logic_error&) {
    throw std::runtime_error("config key `" + key + "` is not an integer: " +
                             get(key));
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::runtime_error("config key `" + key + "` is not a boolean: " + v);
}

std::string RunConfig::render() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  return out.str();
}

const char* artifact_version() { return "coreflow 0.1.0"; }

}  // namespace coreflow
