#pragma once

// Scenario-level operations behind the command line: run a controller and
// write its outputs, compare finished runs, sweep a parameter, train agents,
// and calibrate the critical TTT.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pclab/agent.hpp"
#include "pclab/config.hpp"
#include "pclab/controllers.hpp"
#include "pclab/demand.hpp"
#include "pclab/metrics.hpp"
#include "pclab/network.hpp"
#include "pclab/pc_integration.hpp"
#include "pclab/runner.hpp"
#include "pclab/training.hpp"

namespace pclab {

inline constexpr const char* kVersion = "pclab 0.1.0";

namespace fs = std::filesystem;

inline Network build_network(const ScenarioConfig& c) { return build_grid(c.rows, c.cols, c.grid, c.pn); }

inline DemandSchedule build_schedule(const ScenarioConfig& c) {
  DemandSchedule s;
  if (c.demand == "demand1") s = demand_profiles::demand1(c.window_length, c.demand_scale);
  else if (c.demand == "demand2") s = demand_profiles::demand2(c.window_length, c.demand_scale);
  else if (c.demand == "ramp")
    s = demand_profiles::ramp(c.windows, c.window_length, c.rate_lo * c.demand_scale, c.rate_hi * c.demand_scale);
  else
    s = demand_profiles::uniform(c.windows, c.window_length, {c.rate_lo * c.demand_scale, c.rate_hi * c.demand_scale});
  s.split = c.split;
  return s;
}

inline std::vector<Trip> make_trips(const ScenarioConfig& c, const Network& net, std::uint64_t seed) {
  if (!c.trips_file.empty()) {
    std::ifstream is(c.trips_file);
    if (!is) throw ConfigError("cannot open trip table " + c.trips_file);
    return read_trips_csv(is, &net);
  }
  return generate_demand(net, build_schedule(c), seed);
}

inline RunOptions run_options(const ScenarioConfig& c) {
  RunOptions o;
  o.horizon = c.horizon();
  o.action_step = c.action_step;
  o.metric_interval = c.metric_interval;
  o.emission = c.emission;
  o.sim = c.sim;
  return o;
}

inline TrainConfig train_config(const ScenarioConfig& c) {
  TrainConfig t;
  t.hidden = c.hidden;
  t.episodes = c.episodes;
  t.epsilon_decay_episodes = c.epsilon_decay_episodes;
  t.epsilon_floor = c.epsilon_floor;
  t.gamma = c.gamma;
  t.optimizer = c.optimizer;
  t.updates_per_episode = c.updates_per_episode;
  t.batch_size = c.batch_size;
  t.replay_capacity = static_cast<std::size_t>(c.replay_capacity);
  t.target_copy_every = c.target_copy_every;
  t.seed = c.train_seed;
  t.demand_seed = c.train_demand_seed;
  t.agent = c.agent;
  t.plan = c.plan;
  t.run = run_options(c);
  return t;
}

// ----------------------------------------------------------------- weights

inline std::string weights_file(const fs::path& dir, std::size_t i) {
  return (dir / ("agent_" + std::to_string(i) + ".weights")).string();
}

inline void save_agents(const fs::path& dir, const std::vector<Mlp>& nets) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < nets.size(); ++i) save_weights(nets[i], weights_file(dir, i));
}

/// Donor networks in edge order, read until the first missing index.
inline std::vector<Mlp> load_agents(const fs::path& dir) {
  std::vector<Mlp> out;
  while (fs::exists(weights_file(dir, out.size()))) out.push_back(load_weights(weights_file(dir, out.size())));
  if (out.empty()) throw ConfigError("no agent weights found in " + dir.string());
  return out;
}

// --------------------------------------------------------------------- run

struct RunArtifacts {
  std::string controller;
  std::uint64_t seed = 0;
  RunResult result;
  std::vector<Command> commands;
  std::vector<Decision> decisions;
};

inline std::unique_ptr<Controller> make_controller(const ScenarioConfig& c, const Network& net,
                                                   const std::vector<Mlp>* donors) {
  MeteringSettings ms{c.k_p, c.k_i, c.ttt_crit, c.control_period, c.plan};
  switch (c.controller) {
    case ControllerKind::fixed: return std::make_unique<FixedController>(c.plan);
    case ControllerKind::feedback: return std::make_unique<FeedbackController>(c.ttt_crit, c.plan);
    case ControllerKind::pi: return std::make_unique<MeteringController>(net, c.sim, ms, MeteringMode::uniform);
    case ControllerKind::pi_cordon_queue:
      return std::make_unique<MeteringController>(net, c.sim, ms, MeteringMode::cordon_queue);
    case ControllerKind::rl_semi_model:
    case ControllerKind::rl_local: {
      if (!donors || donors->empty()) throw ConfigError("controller " + std::string(to_string(c.controller)) + " needs trained weights");
      return std::make_unique<RlSemiModelController>(net, transfer(net, *donors), PcFeedback{0.0, c.ttt_crit, c.k_s},
                                                     c.agent, c.plan, c.controller == ControllerKind::rl_semi_model);
    }
  }
  throw ConfigError("unknown controller");
}

inline RunArtifacts run_scenario(const ScenarioConfig& c, const Network& net, std::uint64_t seed,
                                 const std::vector<Mlp>* donors = nullptr, std::ostream* trace = nullptr,
                                 bool check_invariants = false) {
  auto ctl = make_controller(c, net, donors);
  const auto trips = make_trips(c, net, seed);
  auto opt = run_options(c);
  opt.trace = trace;
  opt.check_invariants = check_invariants;
  RunArtifacts a{ctl->name(), seed, run_controller(net, trips, *ctl, opt), ctl->commands(), {}};
  if (auto* rl = dynamic_cast<RlSemiModelController*>(ctl.get())) a.decisions = rl->decisions();
  return a;
}

inline nlohmann::json summary_json(const RunResult& r) {
  const auto& k = r.metrics.totals();
  nlohmann::json j;
  j["pn_ttt"] = k.pn_ttt;
  j["pn_ttd"] = k.pn_ttd;
  j["en_ttt"] = k.en_ttt;
  j["cordon_queue"] = k.cordon_queue;
  j["emission"] = k.emission;
  j["counts"] = {{"entered", r.entered},         {"exited", r.exited},
                 {"discarded", r.discarded},     {"present_at_end", r.present_at_end},
                 {"waiting_at_end", r.waiting_at_end}};
  return j;
}

inline nlohmann::json manifest_json(const ScenarioConfig& c, const std::string& controller, std::uint64_t seed) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["csv_schema"] = kCsvSchema;
  j["controller"] = controller;
  j["seed"] = seed;
  j["demand"] = c.demand;
  j["config"] = c.resolved();
  j["config"]["control.controller"] = controller;
  return j;
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << s;
}

// --------------------------------------------------------------------- svg

/// MFD scatter next to the PN-TTT time series with the critical TTT marked.
inline std::string render_svg(const MetricsLog& m, double ttt_crit) {
  const auto& recs = m.records();
  std::ostringstream os;
  const double W = 420, H = 300, pad = 45;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  auto panel = [&](double x0, const std::string& title, const std::string& xl, const std::string& yl,
                   const std::vector<std::pair<double, double>>& pts, bool line, std::optional<double> hline) {
    double xmax = 1e-9, ymax = 1e-9;
    for (auto [x, y] : pts) {
      xmax = std::max(xmax, x);
      ymax = std::max(ymax, y);
    }
    if (hline) ymax = std::max(ymax, *hline * 1.1);
    auto X = [&](double x) { return x0 + pad + (W - 2 * pad) * x / xmax; };
    auto Y = [&](double y) { return H - pad - (H - 2 * pad) * y / ymax; };
    os << "<rect x=\"" << x0 + pad << "\" y=\"" << pad << "\" width=\"" << W - 2 * pad << "\" height=\"" << H - 2 * pad
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x0 + W / 2 << "\" y=\"" << pad - 12 << "\" text-anchor=\"middle\">" << title << "</text>\n";
    os << "<text x=\"" << x0 + W / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << xl << " (max " << xmax << ")</text>\n";
    os << "<text x=\"" << x0 + 12 << "\" y=\"" << H / 2 << "\" transform=\"rotate(-90 " << x0 + 12 << ' ' << H / 2
       << ")\" text-anchor=\"middle\">" << yl << " (max " << ymax << ")</text>\n";
    if (line) {
      os << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
      for (auto [x, y] : pts) os << X(x) << ',' << Y(y) << ' ';
      os << "\"/>\n";
    } else {
      for (auto [x, y] : pts) os << "<circle cx=\"" << X(x) << "\" cy=\"" << Y(y) << "\" r=\"2\" fill=\"steelblue\"/>\n";
    }
    if (hline)
      os << "<line x1=\"" << x0 + pad << "\" x2=\"" << x0 + W - pad << "\" y1=\"" << Y(*hline) << "\" y2=\"" << Y(*hline)
         << "\" stroke=\"firebrick\" stroke-dasharray=\"4 3\"/>\n";
  };
  std::vector<std::pair<double, double>> mfd, series;
  for (const auto& r : recs) {
    mfd.emplace_back(r.pn_ttt, r.pn_ttd);
    series.emplace_back(r.interval_start, r.pn_ttt);
  }
  panel(0, "MFD", "PN-TTT per interval (veh*s)", "PN-TTD (veh*m)", mfd, false, std::nullopt);
  panel(W, "PN-TTT over time", "time (s)", "PN-TTT (veh*s)", series, true, ttt_crit);
  os << "</svg>\n";
  return os.str();
}

inline void write_run_outputs(const fs::path& dir, const ScenarioConfig& c, const RunArtifacts& a, bool plot) {
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "mfd.csv", std::ios::binary);
    a.result.metrics.write_mfd_csv(os);
  }
  {
    std::ofstream os(dir / "gates.csv", std::ios::binary);
    a.result.metrics.write_gates_csv(os);
  }
  {
    std::ofstream os(dir / "commands.csv", std::ios::binary);
    write_commands_csv(os, a.commands);
  }
  if (!a.decisions.empty()) {
    std::ofstream os(dir / "decisions.csv", std::ios::binary);
    write_decisions_csv(os, a.decisions);
  }
  write_text(dir / "summary.json", summary_json(a.result).dump(2) + "\n");
  write_text(dir / "manifest.json", manifest_json(c, a.controller, a.seed).dump(2) + "\n");
  std::string diag;
  for (const auto& d : a.result.diagnostics) diag += d + "\n";
  write_text(dir / "diagnostics.log", diag);
  if (plot) write_text(dir / "plots.svg", render_svg(a.result.metrics, c.ttt_crit));
}

// ----------------------------------------------------------------- compare

inline const std::vector<std::string>& kpi_keys() {
  static const std::vector<std::string> k{"pn_ttt", "pn_ttd", "en_ttt", "cordon_queue", "emission"};
  return k;
}

struct CompareRow {
  std::string dir;
  std::string controller;
  std::map<std::string, double> kpi;
  std::map<std::string, double> delta;  // (best benchmark - value) / best benchmark, RL rows only
};

inline nlohmann::json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw ConfigError("missing " + p.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + p.string() + ": " + e.what());
  }
}

/// Every KPI is treated as lower-is-better. Benchmarks are all non-RL controllers.
inline std::vector<CompareRow> compare_runs(const std::vector<std::string>& dirs) {
  if (dirs.size() < 2) throw ConfigError("compare needs at least two run directories");
  std::vector<CompareRow> rows;
  nlohmann::json ref;
  for (const auto& d : dirs) {
    const auto man = read_json(fs::path(d) / "manifest.json");
    const auto sum = read_json(fs::path(d) / "summary.json");
    if (rows.empty()) {
      ref = man;
    } else {
      if (man.at("seed") != ref.at("seed")) throw ConfigError("runs use different seeds: " + dirs.front() + " vs " + d);
      if (man.at("demand") != ref.at("demand")) throw ConfigError("runs use different demand: " + dirs.front() + " vs " + d);
      for (const char* key : {"grid.rows", "grid.cols", "grid.pn", "demand.window_length", "demand.scale", "sim.clearance"})
        if (man.at("config").at(key) != ref.at("config").at(key))
          throw ConfigError(std::string("runs differ in ") + key + ": " + dirs.front() + " vs " + d);
    }
    CompareRow r{d, man.at("controller").get<std::string>(), {}, {}};
    for (const auto& k : kpi_keys()) r.kpi[k] = sum.at(k).get<double>();
    rows.push_back(std::move(r));
  }
  auto is_rl = [](const std::string& c) { return c.rfind("rl_", 0) == 0; };
  std::map<std::string, double> best;
  for (const auto& r : rows)
    if (!is_rl(r.controller))
      for (const auto& k : kpi_keys()) best[k] = best.count(k) ? std::min(best[k], r.kpi.at(k)) : r.kpi.at(k);
  for (auto& r : rows)
    if (is_rl(r.controller) && !best.empty())
      for (const auto& k : kpi_keys())
        r.delta[k] = best[k] != 0 ? (best[k] - r.kpi.at(k)) / best[k] : 0.0;
  return rows;
}

inline std::string format_compare(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %14s %14s %14s %14s %14s\n", "controller", "pn_ttt", "pn_ttd", "en_ttt",
                "cordon_queue", "emission");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-18s %14.6g %14.6g %14.6g %14.6g %14.6g\n", r.controller.c_str(), r.kpi.at("pn_ttt"),
                  r.kpi.at("pn_ttd"), r.kpi.at("en_ttt"), r.kpi.at("cordon_queue"), r.kpi.at("emission"));
    os << buf;
    if (!r.delta.empty()) {
      std::snprintf(buf, sizeof buf, "%-18s %13.2f%% %13.2f%% %13.2f%% %13.2f%% %13.2f%%\n", "  vs best benchmark",
                    100 * r.delta.at("pn_ttt"), 100 * r.delta.at("pn_ttd"), 100 * r.delta.at("en_ttt"),
                    100 * r.delta.at("cordon_queue"), 100 * r.delta.at("emission"));
      os << buf;
    }
  }
  return os.str();
}

inline void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "# " << kCsvSchema << " compare\n";
  os << "controller,dir";
  for (const auto& k : kpi_keys()) os << ',' << k;
  for (const auto& k : kpi_keys()) os << ",delta_" << k;
  os << '\n';
  os.precision(17);
  for (const auto& r : rows) {
    os << r.controller << ',' << r.dir;
    for (const auto& k : kpi_keys()) os << ',' << r.kpi.at(k);
    for (const auto& k : kpi_keys()) {
      os << ',';
      if (r.delta.count(k)) os << r.delta.at(k);
    }
    os << '\n';
  }
}

// ------------------------------------------------------------------- sweep

struct SweepPoint {
  double value = 0.0;
  KpiSummary kpi;
};

struct SweepReport {
  std::string parameter;
  std::vector<SweepPoint> points;
  std::size_t selected = 0;
};

/// Index of the smallest EN-TTT; ties go to the smallest parameter value.
inline std::size_t select_min_en_ttt(const std::vector<SweepPoint>& pts) {
  if (pts.empty()) throw ConfigError("sweep needs at least one value");
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto& a = pts[i];
    const auto& b = pts[best];
    if (a.kpi.en_ttt < b.kpi.en_ttt || (a.kpi.en_ttt == b.kpi.en_ttt && a.value < b.value)) best = i;
  }
  return best;
}

/// One run per value, executed concurrently. `parameter` is k_s or seed.
inline SweepReport sweep(const ScenarioConfig& base, const std::string& parameter, const std::vector<double>& values,
                         const std::vector<Mlp>* donors) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (parameter != "k_s" && parameter != "seed") throw ConfigError("sweep parameter must be k_s or seed");
  const Network net = build_network(base);
  std::vector<std::future<SweepPoint>> jobs;
  for (double v : values) {
    ScenarioConfig c = base;
    std::uint64_t seed = base.seeds.front();
    if (parameter == "k_s") {
      if (!(v > 0)) throw ConfigError("K_s values must be positive");
      c.k_s = v;
    } else {
      if (v < 0) throw ConfigError("seeds must be nonnegative");
      seed = static_cast<std::uint64_t>(v);
    }
    jobs.push_back(std::async(std::launch::async, [c, seed, v, &net, donors] {
      const auto a = run_scenario(c, net, seed, donors);
      return SweepPoint{v, a.result.metrics.totals()};
    }));
  }
  SweepReport rep;
  rep.parameter = parameter;
  for (auto& j : jobs) rep.points.push_back(j.get());
  rep.selected = select_min_en_ttt(rep.points);
  return rep;
}

inline void write_sweep_csv(std::ostream& os, const SweepReport& r) {
  os << "# " << kCsvSchema << " sweep\n";
  os << r.parameter << ",pn_ttt,pn_ttd,en_ttt,cordon_queue,emission,selected\n";
  os.precision(17);
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    os << p.value << ',' << p.kpi.pn_ttt << ',' << p.kpi.pn_ttd << ',' << p.kpi.en_ttt << ',' << p.kpi.cordon_queue << ','
       << p.kpi.emission << ',' << (i == r.selected ? 1 : 0) << '\n';
  }
}

// --------------------------------------------------------------- calibrate

struct CalibrationBin {
  double ttt_lo = 0.0;
  double ttt_hi = 0.0;
  double mean_ttd = 0.0;
  int samples = 0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double plateau_lo = 0.0;
  double plateau_hi = 0.0;
  double midpoint = 0.0;
  double peak_ttd = 0.0;
};

/// Bins (TTT, TTD) interval pairs by TTT, finds the bin with the largest mean
/// TTD and widens it to the contiguous bins within `tolerance` of that peak.
inline CalibrationReport calibrate_from_mfd(const std::vector<std::pair<double, double>>& points, int bins = 20,
                                            double tolerance = 0.05, int min_samples = 3) {
  CalibrationReport rep;
  double tmax = 0.0;
  for (auto [t, d] : points) tmax = std::max(tmax, t);
  if (points.empty() || tmax <= 0) throw std::runtime_error("calibration run produced no PN traffic");
  const double w = tmax / bins;
  rep.bins.resize(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) rep.bins[static_cast<std::size_t>(b)] = {b * w, (b + 1) * w, 0.0, 0};
  for (auto [t, d] : points) {
    auto b = std::min(static_cast<std::size_t>(t / w), static_cast<std::size_t>(bins - 1));
    rep.bins[b].mean_ttd += d;
    ++rep.bins[b].samples;
  }
  std::size_t peak = 0;
  bool found = false;
  for (std::size_t b = 0; b < rep.bins.size(); ++b) {
    auto& bin = rep.bins[b];
    if (bin.samples) bin.mean_ttd /= bin.samples;
    if (bin.samples >= min_samples && (!found || bin.mean_ttd > rep.bins[peak].mean_ttd)) {
      peak = b;
      found = true;
    }
  }
  if (!found) throw std::runtime_error("calibration run has too few samples per TTT bin");
  rep.peak_ttd = rep.bins[peak].mean_ttd;
  std::size_t lo = peak, hi = peak;
  auto ok = [&](std::size_t b) { return rep.bins[b].samples >= min_samples && rep.bins[b].mean_ttd >= (1 - tolerance) * rep.peak_ttd; };
  while (lo > 0 && ok(lo - 1)) --lo;
  while (hi + 1 < rep.bins.size() && ok(hi + 1)) ++hi;
  rep.plateau_lo = rep.bins[lo].ttt_lo;
  rep.plateau_hi = rep.bins[hi].ttt_hi;
  rep.midpoint = 0.5 * (rep.plateau_lo + rep.plateau_hi);
  return rep;
}

/// Fixed control over the configured demand; the MFD of that run is calibrated.
inline CalibrationReport calibrate_ttt(const ScenarioConfig& base) {
  ScenarioConfig c = base;
  c.controller = ControllerKind::fixed;
  const Network net = build_network(c);
  std::vector<std::pair<double, double>> pts;
  for (auto seed : c.seeds) {
    const auto a = run_scenario(c, net, seed);
    for (const auto& r : a.result.metrics.records()) pts.emplace_back(r.pn_ttt, r.pn_ttd);
  }
  return calibrate_from_mfd(pts);
}

}  // namespace pclab
