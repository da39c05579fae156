#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pclab/experiment.hpp"

using namespace pclab;
namespace fs = std::filesystem;

namespace {

const std::string kDesk = std::string(PCLAB_SOURCE_DIR) + "/scenarios/desk.ini";

ScenarioConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_scenario(IniFile::parse(is, "t.ini"));
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ScenarioConfig short_desk(std::map<std::string, std::string> extra = {}) {
  extra.emplace("demand.window_length", "150");
  extra.emplace("sim.clearance", "300");
  return load_scenario(kDesk, extra);
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pclab_exp_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST(Config, DeskScenarioLoads) {
  const auto c = load_scenario(kDesk);
  EXPECT_EQ(c.rows, 5);
  EXPECT_EQ(c.cols, 5);
  EXPECT_EQ(c.controller, ControllerKind::fixed);
  EXPECT_EQ(c.seeds.size(), 4u);
  EXPECT_EQ(c.horizon(), 4 * 450 + 1200);
  EXPECT_EQ(build_network(c).cordon_signals().size(), 12u);
}

TEST(Config, ErrorsCarryFileAndLine) {
  EXPECT_NE(error_of("[grid]\nrows = 5\nrows = 6\n").find("t.ini:3:"), std::string::npos);
  EXPECT_NE(error_of("[grid]\nrows\n").find("t.ini:2:"), std::string::npos);
  EXPECT_NE(error_of("rows = 5\n").find("t.ini:1:"), std::string::npos);
  const auto unknown = error_of("[grid]\nrows = 5\n\n[control]\nkp = 3\n");
  EXPECT_NE(unknown.find("t.ini:5:"), std::string::npos);
  EXPECT_NE(unknown.find("unknown key"), std::string::npos);
}

TEST(Config, InvalidValuesAreRejected) {
  EXPECT_FALSE(error_of("[control]\ncontroller = magic\n").empty());
  EXPECT_FALSE(error_of("[agent]\noptimizer = rmsprop\n").empty());
  EXPECT_FALSE(error_of("[demand]\nscale = -1\n").empty());
  EXPECT_FALSE(error_of("[grid]\npn_rows = 9\n").empty());
  EXPECT_FALSE(error_of("[grid]\nrows = five\n").empty());
  EXPECT_EQ(error_of("[control]\ncontroller = pi_cordon_queue\n"), "");
}

TEST(Config, OverridesReplaceFileValues) {
  const auto c = load_scenario(kDesk, {{"control.k_s", "1200"}, {"control.controller", "pi"}});
  EXPECT_EQ(c.k_s, 1200.0);
  EXPECT_EQ(c.controller, ControllerKind::pi);
  EXPECT_THROW(load_scenario(kDesk, {{"control.bogus", "1"}}), ConfigError);
  EXPECT_THROW(load_scenario("/nonexistent/x.ini"), ConfigError);
}

TEST(Experiment, SummaryHasEveryKpi) {
  const auto c = short_desk();
  const auto net = build_network(c);
  const auto a = run_scenario(c, net, c.seeds.front());
  const auto j = summary_json(a.result);
  for (const auto& k : kpi_keys()) {
    ASSERT_TRUE(j.contains(k)) << k;
    EXPECT_GT(j.at(k).get<double>(), 0.0) << k;
  }
}

TEST(Experiment, ZeroDemandGivesZeroKpis) {
  const auto c = short_desk({{"demand.scale", "0"}});
  const auto net = build_network(c);
  const auto a = run_scenario(c, net, 1);
  const auto j = summary_json(a.result);
  for (const auto& k : kpi_keys()) EXPECT_EQ(j.at(k).get<double>(), 0.0) << k;
  EXPECT_EQ(a.result.entered, 0u);
}

TEST(Experiment, RepeatedRunsWriteIdenticalFiles) {
  const auto c = short_desk({{"control.controller", "pi"}});
  const auto net = build_network(c);
  const auto d1 = scratch("rep1"), d2 = scratch("rep2");
  write_run_outputs(d1, c, run_scenario(c, net, 15000), true);
  write_run_outputs(d2, c, run_scenario(c, net, 15000), true);
  for (const char* f : {"mfd.csv", "gates.csv", "commands.csv", "summary.json", "manifest.json", "plots.svg"}) {
    ASSERT_TRUE(fs::exists(d1 / f)) << f;
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
  EXPECT_FALSE(fs::exists(d1 / "decisions.csv"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Experiment, RlControllerWithoutWeightsIsAConfigError) {
  const auto c = short_desk({{"control.controller", "rl_semi_model"}});
  const auto net = build_network(c);
  EXPECT_THROW(run_scenario(c, net, 1), ConfigError);
  EXPECT_THROW(load_agents(scratch("noweights")), ConfigError);
}

TEST(Experiment, AgentWeightsRoundTrip) {
  const auto dir = scratch("agents");
  std::vector<Mlp> nets;
  for (int i = 0; i < 3; ++i) nets.push_back(Mlp::initialised({kStateDim, 8, kActionCount}, static_cast<std::uint64_t>(i)));
  save_agents(dir, nets);
  const auto back = load_agents(dir);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(serialize_weights(back[i]), serialize_weights(nets[i]));
  fs::remove_all(dir);
}

TEST(Compare, ReportsEveryRunAndRejectsMismatches) {
  const auto base = short_desk();
  const auto net = build_network(base);
  const auto root = scratch("cmp");
  for (const char* ctl : {"fixed", "feedback"}) {
    auto c = short_desk({{"control.controller", ctl}});
    write_run_outputs(root / ctl, c, run_scenario(c, net, 15000), false);
  }
  write_run_outputs(root / "other_seed", base, run_scenario(base, net, 20000), false);

  const auto rows = compare_runs({(root / "fixed").string(), (root / "feedback").string()});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].controller, "fixed");
  EXPECT_EQ(rows[1].controller, "feedback");
  EXPECT_NE(format_compare(rows).find("feedback"), std::string::npos);
  std::ostringstream csv;
  write_compare_csv(csv, rows);
  const auto text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);

  EXPECT_THROW(compare_runs({(root / "fixed").string()}), ConfigError);
  EXPECT_THROW(compare_runs({(root / "fixed").string(), (root / "other_seed").string()}), ConfigError);
  EXPECT_THROW(compare_runs({(root / "fixed").string(), (root / "missing").string()}), ConfigError);
  fs::remove_all(root);
}

TEST(Sweep, SelectsTheSmallestNetworkTime) {
  std::vector<SweepPoint> pts(3);
  pts[0].value = 500, pts[0].kpi.en_ttt = 10;
  pts[1].value = 250, pts[1].kpi.en_ttt = 10;
  pts[2].value = 750, pts[2].kpi.en_ttt = 12;
  EXPECT_EQ(select_min_en_ttt(pts), 1u);
  EXPECT_THROW(select_min_en_ttt({}), ConfigError);
}

TEST(Sweep, SingleSeedMatchesADirectRun) {
  const auto c = short_desk();
  const auto rep = sweep(c, "seed", {15000}, nullptr);
  ASSERT_EQ(rep.points.size(), 1u);
  EXPECT_EQ(rep.selected, 0u);
  const auto direct = run_scenario(c, build_network(c), 15000);
  EXPECT_EQ(rep.points[0].kpi.en_ttt, direct.result.metrics.totals().en_ttt);
  EXPECT_THROW(sweep(c, "gamma", {1}, nullptr), ConfigError);
  EXPECT_THROW(sweep(c, "k_s", {0}, nullptr), ConfigError);
  EXPECT_THROW(sweep(c, "k_s", {}, nullptr), ConfigError);
}

TEST(Calibration, FindsThePlateauOfASyntheticMfd) {
  // Rises linearly to 10000, flat until 14000, then falls.
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i <= 2000; ++i) {
    const double t = 10.0 * i;
    const double d = t < 10000 ? t * 10 : (t <= 14000 ? 100000 : std::max(0.0, 100000 - 20 * (t - 14000)));
    pts.emplace_back(t, d);
  }
  const auto rep = calibrate_from_mfd(pts, 20, 0.05, 3);
  EXPECT_EQ(rep.bins.size(), 20u);
  EXPECT_GE(rep.plateau_lo, 9000.0);
  EXPECT_LE(rep.plateau_lo, 10000.0);
  EXPECT_GE(rep.plateau_hi, 14000.0);
  EXPECT_LE(rep.plateau_hi, 15000.0);
  EXPECT_NEAR(rep.midpoint, 0.5 * (rep.plateau_lo + rep.plateau_hi), 1e-9);
  EXPECT_THROW(calibrate_from_mfd({}), std::runtime_error);
}
