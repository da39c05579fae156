// pclab: command-line front end.
//
// Exit codes: 0 ok, 2 configuration error, 3 runtime error.
// PCLAB_OUTPUT_ROOT, when set, prefixes every relative output directory.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pclab/pclab.hpp"

namespace fs = std::filesystem;
using namespace pclab;

namespace {

fs::path output_path(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("PCLAB_OUTPUT_ROOT"); root && *root) return fs::path(root) / path;
  return path;
}

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || s.find('.') > eq) throw ConfigError("--set expects section.key=value, got '" + s + "'");
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse sweep value '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perimeter-control laboratory on a mesoscopic grid simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override a config entry, section.key=value");
  };

  auto* build = app.add_subcommand("build-net", "print the network in its text form");
  add_config(build);
  std::string net_out;
  build->add_option("-o,--out", net_out, "write to a file instead of stdout");

  auto* gen = app.add_subcommand("gen-demand", "write the trip table for one seed");
  add_config(gen);
  std::uint64_t gen_seed = 0;
  std::string trips_out = "trips.csv";
  gen->add_option("--seed", gen_seed, "demand seed (default: first run seed)");
  gen->add_option("-o,--out", trips_out, "output CSV");

  auto* train = app.add_subcommand("train", "train the local agents on one cordon edge");
  add_config(train);
  std::string train_out = "agents";
  train->add_option("-o,--out", train_out, "directory for weights, reward curve and manifest");

  auto* run = app.add_subcommand("run", "run one controller for every configured seed");
  add_config(run);
  std::string run_out, run_controller_name, weights_dir;
  std::vector<std::uint64_t> run_seeds;
  bool plot = false, trace = false;
  run->add_option("-o,--out", run_out, "output directory (default: run.output_dir)");
  run->add_option("--controller", run_controller_name, "override control.controller");
  run->add_option("--seed", run_seeds, "override run.seeds");
  run->add_option("--weights", weights_dir, "trained weights directory (default: agent.weights_dir)");
  run->add_flag("--plot", plot, "also write plots.svg");
  run->add_flag("--trace", trace, "also write trace.txt for replay-trace");

  auto* cmp = app.add_subcommand("compare", "KPI table over finished runs");
  std::vector<std::string> cmp_dirs;
  std::string cmp_out;
  cmp->add_option("dirs", cmp_dirs, "run directories")->required();
  cmp->add_option("-o,--out", cmp_out, "also write the table as CSV");

  auto* sw = app.add_subcommand("sweep", "one run per parameter value, select minimum EN-TTT");
  add_config(sw);
  std::string sw_param = "k_s", sw_values = "250,500,750,1000,1250,1500", sw_out = "sweep.csv", sw_weights;
  sw->add_option("--param", sw_param, "k_s or seed");
  sw->add_option("--values", sw_values, "comma-separated values");
  sw->add_option("--weights", sw_weights, "trained weights directory");
  sw->add_option("-o,--out", sw_out, "report CSV");

  auto* cal = app.add_subcommand("calibrate-ttt", "estimate the critical TTT from a fixed-control run");
  add_config(cal);
  std::string cal_out;
  cal->add_option("-o,--out", cal_out, "also write the binned MFD as CSV");

  auto* rep = app.add_subcommand("replay-trace", "rebuild mfd.csv from a recorded trace");
  add_config(rep);
  std::string trace_in, replay_out = "mfd_replay.csv";
  rep->add_option("trace", trace_in, "trace file")->required()->check(CLI::ExistingFile);
  rep->add_option("-o,--out", replay_out, "output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    auto scenario = [&] { return load_scenario(config_path, parse_overrides(sets)); };

    if (*build) {
      const auto c = scenario();
      const auto text = build_network(c).to_text();
      if (net_out.empty()) std::cout << text;
      else write_text(output_path(net_out), text);
    } else if (*gen) {
      const auto c = scenario();
      const auto net = build_network(c);
      const auto trips = make_trips(c, net, gen->count("--seed") ? gen_seed : c.seeds.front());
      const auto p = output_path(trips_out);
      if (p.has_parent_path()) fs::create_directories(p.parent_path());
      std::ofstream os(p);
      write_trips_csv(os, trips);
      std::cout << trips.size() << " trips written to " << p.string() << "\n";
    } else if (*train) {
      const auto c = scenario();
      const auto net = build_network(c);
      const auto dir = output_path(train_out);
      fs::create_directories(dir);
      const auto tc = train_config(c);
      const auto res = train_agents(net, build_schedule(c), tc, [](int e, const auto& r, const auto& l) {
        std::cout << "episode " << e;
        for (std::size_t i = 0; i < r.size(); ++i) std::cout << "  agent" << i << " reward " << r[i] << " loss " << l[i];
        std::cout << "\n";
      });
      save_agents(dir, res.nets);
      std::ofstream curve(dir / "rewards.csv");
      write_reward_curve_csv(curve, res);
      nlohmann::json man = manifest_json(c, "training", c.train_seed);
      man["agents"] = res.agents;
      man["train_calls"] = res.train_calls;
      man["target_copies"] = res.target_copies;
      write_text(dir / "manifest.json", man.dump(2) + "\n");
      std::cout << "weights of " << res.nets.size() << " agents written to " << dir.string() << "\n";
    } else if (*run) {
      auto overrides = parse_overrides(sets);
      if (!run_controller_name.empty()) overrides["control.controller"] = run_controller_name;
      if (!weights_dir.empty()) overrides["agent.weights_dir"] = weights_dir;
      const auto c = load_scenario(config_path, overrides);
      const auto net = build_network(c);
      std::vector<Mlp> donors;
      if (c.controller == ControllerKind::rl_semi_model || c.controller == ControllerKind::rl_local) {
        if (c.weights_dir.empty()) throw ConfigError("agent.weights_dir or --weights is required for RL controllers");
        donors = load_agents(output_path(c.weights_dir));
      }
      const auto seeds = run_seeds.empty() ? c.seeds : run_seeds;
      const auto base = output_path(run_out.empty() ? c.output_dir : run_out);
      for (auto seed : seeds) {
        const auto dir = seeds.size() == 1 ? base : base / ("seed_" + std::to_string(seed));
        fs::create_directories(dir);
        std::ofstream trace_os;
        if (trace) trace_os.open(dir / "trace.txt", std::ios::binary);
        const auto a = run_scenario(c, net, seed, donors.empty() ? nullptr : &donors, trace ? &trace_os : nullptr);
        write_run_outputs(dir, c, a, plot);
        const auto& k = a.result.metrics.totals();
        std::cout << a.controller << " seed " << seed << ": pn_ttt " << k.pn_ttt << " en_ttt " << k.en_ttt
                  << " cordon_queue " << k.cordon_queue << " -> " << dir.string() << "\n";
      }
    } else if (*cmp) {
      const auto rows = compare_runs(cmp_dirs);
      std::cout << format_compare(rows);
      if (!cmp_out.empty()) {
        std::ofstream os(output_path(cmp_out));
        write_compare_csv(os, rows);
      }
    } else if (*sw) {
      const auto c = scenario();
      std::vector<Mlp> donors;
      const std::string wdir = sw_weights.empty() ? c.weights_dir : sw_weights;
      if (c.controller == ControllerKind::rl_semi_model || c.controller == ControllerKind::rl_local) {
        if (wdir.empty()) throw ConfigError("RL sweeps need --weights or agent.weights_dir");
        donors = load_agents(output_path(wdir));
      }
      const auto report = sweep(c, sw_param, parse_values(sw_values), donors.empty() ? nullptr : &donors);
      const auto p = output_path(sw_out);
      if (p.has_parent_path()) fs::create_directories(p.parent_path());
      std::ofstream os(p);
      write_sweep_csv(os, report);
      std::cout << "selected " << sw_param << " = " << report.points[report.selected].value << " (en_ttt "
                << report.points[report.selected].kpi.en_ttt << ")\n";
    } else if (*cal) {
      const auto c = scenario();
      const auto rep_ = calibrate_ttt(c);
      std::cout << "peak interval TTD " << rep_.peak_ttd << " veh*m for TTT in [" << rep_.plateau_lo << ", "
                << rep_.plateau_hi << "] veh*s, midpoint " << rep_.midpoint << "\n";
      if (!cal_out.empty()) {
        std::ofstream os(output_path(cal_out));
        os << "# " << kCsvSchema << " calibration\nttt_lo,ttt_hi,mean_ttd,samples\n";
        for (const auto& b : rep_.bins) os << b.ttt_lo << ',' << b.ttt_hi << ',' << b.mean_ttd << ',' << b.samples << '\n';
      }
    } else if (*rep) {
      const auto c = scenario();
      const auto net = build_network(c);
      std::ifstream is(trace_in, std::ios::binary);
      const auto log = replay_trace(net, is, c.metric_interval, c.emission);
      std::ofstream os(output_path(replay_out), std::ios::binary);
      log.write_mfd_csv(os);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const GeometryError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DemandError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
