#pragma once

// Scenario files: `[section]` headers and `key = value` lines, `#` or `;`
// comments. Every value is validated before anything runs; errors name the
// file line of the offending entry.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pclab/agent.hpp"
#include "pclab/controllers.hpp"
#include "pclab/demand.hpp"
#include "pclab/metrics.hpp"
#include "pclab/mlp.hpp"
#include "pclab/network.hpp"
#include "pclab/simulation.hpp"

namespace pclab {

class IniFile {
public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static IniFile parse(std::istream& is, const std::string& origin = "<config>") {
    IniFile f;
    f.origin_ = origin;
    std::string raw, section;
    int line_no = 0;
    while (std::getline(is, raw)) {
      ++line_no;
      std::string line = trim(strip_comment(raw));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw f.error(line_no, "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty()) throw f.error(line_no, "empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw f.error(line_no, "expected key = value");
      if (section.empty()) throw f.error(line_no, "key outside of any section");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw f.error(line_no, "empty key");
      const std::string full = section + "." + key;
      if (f.entries_.count(full)) throw f.error(line_no, "duplicate key " + full);
      f.entries_[full] = {trim(line.substr(eq + 1)), line_no};
    }
    return f;
  }

  static IniFile load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    return parse(is, path);
  }

  const std::string& origin() const { return origin_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { entries_[key] = {value, 0}; }

  ConfigError error(int line, const std::string& what) const {
    return ConfigError(origin_ + (line > 0 ? ":" + std::to_string(line) : std::string(" (override)")) + ": " + what);
  }

  ConfigError error_for(const std::string& key, const std::string& what) const {
    auto it = entries_.find(key);
    return error(it == entries_.end() ? 0 : it->second.line, key + ": " + what);
  }

  std::string get_string(const std::string& key, const std::string& def) {
    used_.push_back(key);
    auto it = entries_.find(key);
    return it == entries_.end() ? def : it->second.value;
  }

  double get_double(const std::string& key, double def) {
    used_.push_back(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second.value, &pos);
      if (pos != it->second.value.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw error(it->second.line, key + ": expected a number, got '" + it->second.value + "'");
    }
  }

  long long get_int(const std::string& key, long long def) {
    used_.push_back(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(it->second.value, &pos);
      if (pos != it->second.value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw error(it->second.line, key + ": expected an integer, got '" + it->second.value + "'");
    }
  }

  bool get_bool(const std::string& key, bool def) {
    const auto s = get_string(key, def ? "true" : "false");
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw error_for(key, "expected true or false, got '" + s + "'");
  }

  std::vector<long long> get_int_list(const std::string& key, const std::vector<long long>& def) {
    used_.push_back(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    std::vector<long long> out;
    std::stringstream ss(it->second.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      try {
        std::size_t pos = 0;
        out.push_back(std::stoll(item, &pos));
        if (pos != item.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw error(it->second.line, key + ": expected a comma-separated integer list");
      }
    }
    return out;
  }

  /// Keys present in the file that no getter asked for.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
      if (std::find(used_.begin(), used_.end(), k) == used_.end()) out.push_back(k);
    return out;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

private:
  static std::string strip_comment(const std::string& s) {
    const auto p = s.find_first_of("#;");
    return p == std::string::npos ? s : s.substr(0, p);
  }

  std::string origin_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> used_;
};

enum class ControllerKind { fixed, feedback, pi, pi_cordon_queue, rl_semi_model, rl_local };

inline const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::fixed: return "fixed";
    case ControllerKind::feedback: return "feedback";
    case ControllerKind::pi: return "pi";
    case ControllerKind::pi_cordon_queue: return "pi_cordon_queue";
    case ControllerKind::rl_semi_model: return "rl_semi_model";
    case ControllerKind::rl_local: return "rl_local";
  }
  return "?";
}

inline ControllerKind parse_controller(const std::string& s) {
  for (auto k : {ControllerKind::fixed, ControllerKind::feedback, ControllerKind::pi, ControllerKind::pi_cordon_queue,
                 ControllerKind::rl_semi_model, ControllerKind::rl_local})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown controller '" + s + "'");
}

struct ScenarioConfig {
  std::string name = "scenario";
  std::string profile = "desk";  // desk | full

  int rows = 5, cols = 5;
  PnRect pn{1, 1, 3, 3};
  GridSpec grid;

  std::string demand = "demand2";  // demand1 | demand2 | custom | ramp
  double window_length = 450.0;
  int windows = 4;
  double demand_scale = 1.0;
  double rate_lo = 0.0, rate_hi = 0.0;  // custom and ramp
  std::string trips_file;               // custom: replay a trip table instead
  DestinationSplit split;

  SimParams sim;
  int clearance = 1200;
  int action_step = 5;

  int metric_interval = 20;
  EmissionProxy emission;

  ControllerKind controller = ControllerKind::fixed;
  double ttt_crit = 17000.0;
  double k_p = 2.0, k_i = 0.5, k_s = 750.0;
  int control_period = 60;
  FixedPlan plan;

  AgentConfig agent;
  std::vector<int> hidden{64, 64};
  int episodes = 20;
  int epsilon_decay_episodes = 14;
  double epsilon_floor = 0.02;
  double gamma = 0.95;
  OptimizerConfig optimizer;
  int updates_per_episode = 800;
  int batch_size = 64;
  long long replay_capacity = 50000;
  int target_copy_every = 100;
  std::uint64_t train_seed = 7;
  std::uint64_t train_demand_seed = 1000;
  std::string weights_dir;

  std::vector<std::uint64_t> seeds{15000};
  std::string output_dir = "out";

  double demand_horizon() const { return windows * window_length; }
  int horizon() const { return static_cast<int>(std::ceil(demand_horizon())) + clearance; }

  /// Flattened key/value view of the resolved configuration, for manifests.
  std::map<std::string, std::string> resolved() const {
    std::map<std::string, std::string> m;
    auto num = [](double v) {
      std::ostringstream os;
      os.precision(17);
      os << v;
      return os.str();
    };
    m["scenario.name"] = name;
    m["scenario.profile"] = profile;
    m["grid.rows"] = std::to_string(rows);
    m["grid.cols"] = std::to_string(cols);
    m["grid.pn"] = std::to_string(pn.row0) + "," + std::to_string(pn.col0) + "," + std::to_string(pn.rows) + "," +
                   std::to_string(pn.cols);
    m["grid.inner_length"] = num(grid.inner_length);
    m["grid.gate_length"] = num(grid.gate_length);
    m["grid.lanes"] = std::to_string(grid.lanes);
    m["grid.free_flow_speed"] = num(grid.free_flow_speed);
    m["grid.vehicle_length"] = num(grid.vehicle_length);
    m["grid.min_gap"] = num(grid.min_gap);
    m["demand.profile"] = demand;
    m["demand.window_length"] = num(window_length);
    m["demand.windows"] = std::to_string(windows);
    m["demand.scale"] = num(demand_scale);
    m["demand.rate_lo"] = num(rate_lo);
    m["demand.rate_hi"] = num(rate_hi);
    m["demand.trips_file"] = trips_file;
    m["demand.into_pn"] = num(split.into_pn);
    m["demand.across"] = num(split.across);
    m["demand.internal"] = num(split.internal);
    m["demand.turning_share"] = num(split.turning_share);
    m["sim.saturation_flow"] = num(sim.saturation_flow);
    m["sim.interlock"] = std::to_string(sim.interlock);
    m["sim.clearance"] = std::to_string(clearance);
    m["sim.action_step"] = std::to_string(action_step);
    m["metrics.interval"] = std::to_string(metric_interval);
    m["metrics.emission_alpha"] = num(emission.alpha);
    m["metrics.emission_beta"] = num(emission.beta);
    m["control.controller"] = to_string(controller);
    m["control.ttt_crit"] = num(ttt_crit);
    m["control.k_p"] = num(k_p);
    m["control.k_i"] = num(k_i);
    m["control.k_s"] = num(k_s);
    m["control.control_period"] = std::to_string(control_period);
    m["control.green"] = std::to_string(plan.green.at(0)) + "," + std::to_string(plan.green.at(1));
    m["agent.o_crit"] = num(agent.o_crit);
    m["agent.y_crit"] = std::to_string(agent.y_crit);
    std::string h;
    for (std::size_t i = 0; i < hidden.size(); ++i) h += (i ? "," : "") + std::to_string(hidden[i]);
    m["agent.hidden"] = h;
    m["agent.episodes"] = std::to_string(episodes);
    m["agent.epsilon_decay_episodes"] = std::to_string(epsilon_decay_episodes);
    m["agent.epsilon_floor"] = num(epsilon_floor);
    m["agent.gamma"] = num(gamma);
    m["agent.learning_rate"] = num(optimizer.learning_rate);
    m["agent.optimizer"] = to_string(optimizer.kind);
    m["agent.updates_per_episode"] = std::to_string(updates_per_episode);
    m["agent.batch_size"] = std::to_string(batch_size);
    m["agent.replay_capacity"] = std::to_string(replay_capacity);
    m["agent.target_copy_every"] = std::to_string(target_copy_every);
    m["agent.train_seed"] = std::to_string(train_seed);
    m["agent.train_demand_seed"] = std::to_string(train_demand_seed);
    m["agent.weights_dir"] = weights_dir;
    m["agent.state_version"] = std::to_string(kStateVersion);
    return m;
  }
};

namespace detail {

inline std::vector<int> parse_int_csv(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(IniFile::trim(item)));
  return out;
}

}  // namespace detail

/// Reads and validates a scenario. Unknown keys are rejected.
inline ScenarioConfig parse_scenario(IniFile ini) {
  ScenarioConfig c;
  c.name = ini.get_string("scenario.name", c.name);
  c.profile = ini.get_string("scenario.profile", c.profile);
  if (c.profile != "desk" && c.profile != "full") throw ini.error_for("scenario.profile", "expected desk or full");

  c.rows = static_cast<int>(ini.get_int("grid.rows", c.rows));
  c.cols = static_cast<int>(ini.get_int("grid.cols", c.cols));
  c.pn.row0 = static_cast<int>(ini.get_int("grid.pn_row0", c.pn.row0));
  c.pn.col0 = static_cast<int>(ini.get_int("grid.pn_col0", c.pn.col0));
  c.pn.rows = static_cast<int>(ini.get_int("grid.pn_rows", c.pn.rows));
  c.pn.cols = static_cast<int>(ini.get_int("grid.pn_cols", c.pn.cols));
  c.grid.inner_length = ini.get_double("grid.inner_length", c.grid.inner_length);
  c.grid.gate_length = ini.get_double("grid.gate_length", c.grid.gate_length);
  c.grid.lanes = static_cast<int>(ini.get_int("grid.lanes", c.grid.lanes));
  c.grid.free_flow_speed = ini.get_double("grid.free_flow_speed", c.grid.free_flow_speed);
  c.grid.vehicle_length = ini.get_double("grid.vehicle_length", c.grid.vehicle_length);
  c.grid.min_gap = ini.get_double("grid.min_gap", c.grid.min_gap);
  if (c.rows < 3 || c.cols < 3) throw ini.error_for("grid.rows", "grid must be at least 3x3");
  if (!(c.grid.inner_length > 0) || !(c.grid.gate_length > 0)) throw ini.error_for("grid.inner_length", "link lengths must be positive");
  if (c.grid.lanes < 1) throw ini.error_for("grid.lanes", "at least one lane");
  if (!(c.grid.free_flow_speed > 0)) throw ini.error_for("grid.free_flow_speed", "must be positive");
  if (!(c.grid.footprint() > 0)) throw ini.error_for("grid.vehicle_length", "vehicle footprint must be positive");

  c.demand = ini.get_string("demand.profile", c.demand);
  if (c.demand != "demand1" && c.demand != "demand2" && c.demand != "custom" && c.demand != "ramp")
    throw ini.error_for("demand.profile", "expected demand1, demand2, custom or ramp");
  c.window_length = ini.get_double("demand.window_length", c.window_length);
  c.windows = static_cast<int>(ini.get_int("demand.windows", c.windows));
  c.demand_scale = ini.get_double("demand.scale", c.demand_scale);
  c.rate_lo = ini.get_double("demand.rate_lo", c.rate_lo);
  c.rate_hi = ini.get_double("demand.rate_hi", c.rate_hi);
  c.trips_file = ini.get_string("demand.trips_file", c.trips_file);
  c.split.into_pn = ini.get_double("demand.into_pn", c.split.into_pn);
  c.split.across = ini.get_double("demand.across", c.split.across);
  c.split.internal = ini.get_double("demand.internal", c.split.internal);
  c.split.turning_share = ini.get_double("demand.turning_share", c.split.turning_share);
  if (!(c.window_length > 0)) throw ini.error_for("demand.window_length", "must be positive");
  if (c.windows < 1) throw ini.error_for("demand.windows", "at least one window");
  if ((c.demand == "demand1" || c.demand == "demand2") && c.windows != 4)
    throw ini.error_for("demand.windows", "demand1 and demand2 have exactly 4 windows");
  if (c.demand_scale < 0) throw ini.error_for("demand.scale", "must be nonnegative");
  if (c.rate_lo < 0 || c.rate_hi < c.rate_lo) throw ini.error_for("demand.rate_hi", "need 0 <= rate_lo <= rate_hi");
  if (std::abs(c.split.into_pn + c.split.across + c.split.internal - 1.0) > 1e-9)
    throw ini.error_for("demand.into_pn", "destination fractions must sum to 1");
  if (!c.trips_file.empty()) {
    std::ifstream probe(c.trips_file);
    if (!probe) throw ini.error_for("demand.trips_file", "file does not exist");
  }

  c.sim.saturation_flow = ini.get_double("sim.saturation_flow", c.sim.saturation_flow);
  c.sim.interlock = static_cast<int>(ini.get_int("sim.interlock", c.sim.interlock));
  c.clearance = static_cast<int>(ini.get_int("sim.clearance", c.clearance));
  c.action_step = static_cast<int>(ini.get_int("sim.action_step", c.action_step));
  if (!(c.sim.saturation_flow > 0)) throw ini.error_for("sim.saturation_flow", "must be positive");
  if (c.sim.interlock < 0) throw ini.error_for("sim.interlock", "must be nonnegative");
  if (c.clearance < 0) throw ini.error_for("sim.clearance", "must be nonnegative");
  if (c.action_step < 1) throw ini.error_for("sim.action_step", "must be positive");

  c.metric_interval = static_cast<int>(ini.get_int("metrics.interval", c.metric_interval));
  c.emission.alpha = ini.get_double("metrics.emission_alpha", c.emission.alpha);
  c.emission.beta = ini.get_double("metrics.emission_beta", c.emission.beta);
  if (c.metric_interval < 1) throw ini.error_for("metrics.interval", "must be positive");
  if (c.emission.alpha < 0 || c.emission.beta < 0) throw ini.error_for("metrics.emission_alpha", "must be nonnegative");

  try {
    c.controller = parse_controller(ini.get_string("control.controller", to_string(c.controller)));
  } catch (const ConfigError& e) {
    throw ini.error_for("control.controller", e.what());
  }
  c.ttt_crit = ini.get_double("control.ttt_crit", c.ttt_crit);
  c.k_p = ini.get_double("control.k_p", c.k_p);
  c.k_i = ini.get_double("control.k_i", c.k_i);
  c.k_s = ini.get_double("control.k_s", c.k_s);
  c.control_period = static_cast<int>(ini.get_int("control.control_period", c.control_period));
  const auto green = ini.get_int_list("control.green", {30, 30});
  if (green.size() != 2 || green[0] <= 0 || green[1] <= 0) throw ini.error_for("control.green", "expected two positive durations");
  c.plan.green = {static_cast<int>(green[0]), static_cast<int>(green[1])};
  c.plan.interlock = c.sim.interlock;
  if (!(c.ttt_crit > 0)) throw ini.error_for("control.ttt_crit", "must be positive");
  if (!(c.k_p > 0)) throw ini.error_for("control.k_p", "must be positive");
  if (!(c.k_i > 0)) throw ini.error_for("control.k_i", "must be positive");
  if (!(c.k_s > 0)) throw ini.error_for("control.k_s", "must be positive");
  if (c.control_period < 1) throw ini.error_for("control.control_period", "must be positive");
  for (int g : c.plan.green)
    if (g % c.action_step != 0) throw ini.error_for("control.green", "green times must be multiples of the action step");
  if (c.sim.interlock % c.action_step != 0 && c.sim.interlock != 0)
    throw ini.error_for("sim.interlock", "interlock must be a multiple of the action step");
  if (c.control_period % c.action_step != 0)
    throw ini.error_for("control.control_period", "must be a multiple of the action step");

  c.agent.o_crit = ini.get_double("agent.o_crit", c.agent.o_crit);
  c.agent.y_crit = static_cast<int>(ini.get_int("agent.y_crit", c.agent.y_crit));
  c.agent.action_step = c.action_step;
  const auto hidden = ini.get_int_list("agent.hidden", {64, 64});
  c.hidden.clear();
  for (auto h : hidden) {
    if (h <= 0) throw ini.error_for("agent.hidden", "layer widths must be positive");
    c.hidden.push_back(static_cast<int>(h));
  }
  c.episodes = static_cast<int>(ini.get_int("agent.episodes", c.episodes));
  c.epsilon_decay_episodes = static_cast<int>(ini.get_int("agent.epsilon_decay_episodes", c.epsilon_decay_episodes));
  c.epsilon_floor = ini.get_double("agent.epsilon_floor", c.epsilon_floor);
  c.gamma = ini.get_double("agent.gamma", c.gamma);
  c.optimizer.learning_rate = ini.get_double("agent.learning_rate", c.optimizer.learning_rate);
  const auto opt = ini.get_string("agent.optimizer", "sgd");
  if (opt == "sgd") c.optimizer.kind = OptimizerKind::sgd;
  else if (opt == "adam") c.optimizer.kind = OptimizerKind::adam;
  else throw ini.error_for("agent.optimizer", "expected sgd or adam");
  c.updates_per_episode = static_cast<int>(ini.get_int("agent.updates_per_episode", c.updates_per_episode));
  c.batch_size = static_cast<int>(ini.get_int("agent.batch_size", c.batch_size));
  c.replay_capacity = ini.get_int("agent.replay_capacity", c.replay_capacity);
  c.target_copy_every = static_cast<int>(ini.get_int("agent.target_copy_every", c.target_copy_every));
  c.train_seed = static_cast<std::uint64_t>(ini.get_int("agent.train_seed", static_cast<long long>(c.train_seed)));
  c.train_demand_seed =
      static_cast<std::uint64_t>(ini.get_int("agent.train_demand_seed", static_cast<long long>(c.train_demand_seed)));
  c.weights_dir = ini.get_string("agent.weights_dir", c.weights_dir);
  if (c.agent.o_crit <= 0 || c.agent.o_crit > 1) throw ini.error_for("agent.o_crit", "must lie in (0, 1]");
  if (c.agent.y_crit < 0) throw ini.error_for("agent.y_crit", "must be nonnegative");
  if (c.episodes < 0) throw ini.error_for("agent.episodes", "must be nonnegative");
  if (c.epsilon_floor < 0 || c.epsilon_floor > 1) throw ini.error_for("agent.epsilon_floor", "must lie in [0, 1]");
  if (c.gamma < 0 || c.gamma > 1) throw ini.error_for("agent.gamma", "must lie in [0, 1]");
  if (!(c.optimizer.learning_rate > 0)) throw ini.error_for("agent.learning_rate", "must be positive");
  if (c.batch_size < 1) throw ini.error_for("agent.batch_size", "must be positive");
  if (c.replay_capacity < 1) throw ini.error_for("agent.replay_capacity", "must be positive");
  if (c.target_copy_every < 1) throw ini.error_for("agent.target_copy_every", "must be positive");
  if (c.updates_per_episode < 0) throw ini.error_for("agent.updates_per_episode", "must be nonnegative");

  const auto seeds = ini.get_int_list("run.seeds", {15000});
  if (seeds.empty()) throw ini.error_for("run.seeds", "at least one seed");
  c.seeds.clear();
  for (auto s : seeds) c.seeds.push_back(static_cast<std::uint64_t>(s));
  c.output_dir = ini.get_string("run.output_dir", c.output_dir);

  try {
    (void)build_grid(c.rows, c.cols, c.grid, c.pn);
  } catch (const GeometryError& e) {
    throw ini.error_for("grid.pn_row0", e.what());
  }
  if (const auto unused = ini.unused(); !unused.empty()) throw ini.error_for(unused.front(), "unknown key");
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path, const std::map<std::string, std::string>& overrides = {}) {
  auto ini = IniFile::load(path);
  for (const auto& [k, v] : overrides) ini.set(k, v);
  return parse_scenario(std::move(ini));
}

}  // namespace pclab
