#pragma once

// Closed-loop driver: controller at every action-step boundary, one simulation
// second per iteration, metrics on every sample. Optionally records a trace
// from which the metrics can be rebuilt.

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pclab/controllers.hpp"
#include "pclab/metrics.hpp"
#include "pclab/simulation.hpp"

namespace pclab {

struct RunOptions {
  int horizon = 3000;      // s simulated
  int action_step = 5;     // s between controller calls
  int metric_interval = 20;
  EmissionProxy emission;
  SimParams sim;
  bool check_invariants = false;
  std::ostream* trace = nullptr;
};

struct RunResult {
  MetricsLog metrics;
  std::uint64_t entered = 0;
  std::uint64_t exited = 0;
  std::uint64_t discarded = 0;
  std::uint64_t present_at_end = 0;
  std::size_t waiting_at_end = 0;
  std::vector<std::string> diagnostics;
  std::vector<std::string> violations;  // first invariant failure per step, if checked
  std::uint64_t steps_checked = 0;
};

namespace detail {

inline void write_trace_step(std::ostream& os, const StepSample& s, const StepEvents& e) {
  char buf[64];
  os << "s " << s.t;
  for (int c : s.count) os << ' ' << c;
  os << " |";
  for (int q : s.queued) os << ' ' << q;
  os << " |";
  for (double d : s.distance) {
    std::snprintf(buf, sizeof buf, " %.17g", d);
    os << buf;
  }
  os << " |";
  for (int p : s.pending_by_gate) os << ' ' << p;
  os << '\n';
  for (const auto& l : e.leaves) os << "l " << l.vehicle << ' ' << l.link << ' ' << l.entry_time << ' ' << l.leave_time << '\n';
  for (const auto& f : e.finished) os << "f " << f.vehicle << ' ' << f.departure << ' ' << f.finish << '\n';
}

}  // namespace detail

inline RunResult run_controller(const Network& net, const std::vector<Trip>& trips, Controller& controller,
                                const RunOptions& opt) {
  if (opt.action_step <= 0 || opt.horizon < 0) throw ConfigError("invalid run horizon or action step");
  Simulation sim(net, trips, opt.sim);
  RunResult res{MetricsLog(net, opt.metric_interval, opt.emission), 0, 0, 0, 0, 0, {}, {}, 0};
  if (opt.trace) *opt.trace << "pclab-trace 1 " << net.links().size() << ' ' << net.gate_links().size() << '\n';
  for (int t = 0; t < opt.horizon; ++t) {
    if (t % opt.action_step == 0) controller.act(sim, {t, res.metrics.last_completed_pn_ttt()});
    sim.step();
    res.metrics.observe(sim.last_sample(), sim.last_events());
    if (opt.trace) detail::write_trace_step(*opt.trace, sim.last_sample(), sim.last_events());
    if (opt.check_invariants) {
      ++res.steps_checked;
      if (auto v = sim.check_invariants(); !v.empty()) res.violations.push_back("t=" + std::to_string(t) + ": " + v);
    }
  }
  res.entered = sim.entered();
  res.exited = sim.exited();
  res.discarded = sim.discarded();
  res.present_at_end = sim.present();
  res.waiting_at_end = sim.waiting();
  res.diagnostics = sim.diagnostics();
  return res;
}

/// Rebuilds the metrics of a run from its trace.
inline MetricsLog replay_trace(const Network& net, std::istream& is, int metric_interval = 20, EmissionProxy emission = {}) {
  MetricsLog log(net, metric_interval, emission);
  std::string line;
  if (!std::getline(is, line) || line.rfind("pclab-trace 1", 0) != 0) throw std::runtime_error("not a pclab trace");
  const std::size_t nl = net.links().size(), ng = net.gate_links().size();
  StepSample s;
  StepEvents e;
  bool have = false;
  auto flush = [&] {
    if (have) log.observe(s, e);
    e.leaves.clear();
    e.finished.clear();
  };
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    char kind = 0;
    ls >> kind;
    if (kind == 's') {
      flush();
      s.count.assign(nl, 0);
      s.queued.assign(nl, 0);
      s.distance.assign(nl, 0.0);
      s.pending_by_gate.assign(ng, 0);
      std::string bar;
      ls >> s.t;
      for (auto& c : s.count) ls >> c;
      ls >> bar;
      for (auto& q : s.queued) ls >> q;
      ls >> bar;
      for (auto& d : s.distance) ls >> d;
      ls >> bar;
      for (auto& p : s.pending_by_gate) ls >> p;
      have = true;
    } else if (kind == 'l') {
      LinkLeave l;
      ls >> l.vehicle >> l.link >> l.entry_time >> l.leave_time;
      e.leaves.push_back(l);
    } else if (kind == 'f') {
      TripEnd f;
      ls >> f.vehicle >> f.departure >> f.finish;
      e.finished.push_back(f);
    }
    if (!ls) throw std::runtime_error("malformed trace line " + std::to_string(line_no));
  }
  flush();
  return log;
}

}  // namespace pclab
