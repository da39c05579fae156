#pragma once

// Test-time fusion of local Q-values with the global perimeter feedback.
//
// For every action a other than the PC action,
//   Q'(a) = Q(a) - (sum of O_m over outflow movements NOT green in a
//                   + sum of O_m over inflow movements green in a) * factor,
//   factor = max((TTT - TTT_crit) / K_s, 0),
// and Q'(a_PC) = Q(a_PC). The networks are only evaluated, never updated.

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pclab/agent.hpp"
#include "pclab/controllers.hpp"
#include "pclab/mlp.hpp"
#include "pclab/network.hpp"
#include "pclab/simulation.hpp"

namespace pclab {

struct PcFeedback {
  double ttt_now = 0.0;
  double ttt_crit = 17000.0;
  double k_s = 750.0;
};

inline double penalty_factor(const PcFeedback& fb) {
  if (!(fb.k_s > 0)) throw ConfigError("K_s must be positive");
  return std::max((fb.ttt_now - fb.ttt_crit) / fb.k_s, 0.0);
}

/// Per-action occupancy weight that multiplies the factor; zero for the PC action.
inline std::vector<double> phase_penalty_weights(const Network& net, NodeId signal,
                                                 const std::function<double(MovementId)>& occupancy) {
  const auto& node = net.node(signal);
  std::vector<double> w(node.phases.size(), 0.0);
  for (const auto& phase : node.phases) {
    if (phase.is_pc_phase) continue;
    const auto ov = net.phase_overlap(phase, signal);
    double s = 0.0;
    for (MovementId m : ov.out_complement) s += occupancy(m);
    for (MovementId m : ov.in_overlap) s += occupancy(m);
    w[static_cast<std::size_t>(phase.index)] = s;
  }
  return w;
}

/// q' from q, the per-action weights and the factor.
inline std::vector<double> modify_q(std::span<const double> q, std::span<const double> weights, int pc_action,
                                    double factor) {
  std::vector<double> out(q.begin(), q.end());
  for (std::size_t a = 0; a < out.size(); ++a)
    if (static_cast<int>(a) != pc_action) out[a] = q[a] - weights[a] * factor;
  return out;
}

inline std::vector<double> modify_q(const Network& net, NodeId signal, std::span<const double> q,
                                    const std::function<double(MovementId)>& occupancy, double factor) {
  const auto w = phase_penalty_weights(net, signal, occupancy);
  return modify_q(q, w, net.node(signal).pc_phase(), factor);
}

struct Decision {
  int t = 0;
  NodeId signal = 0;
  double factor = 0.0;
  std::vector<double> q;
  std::vector<double> penalty;  // weight * factor per action
  std::vector<double> q_mod;
  int action = 0;
  int greedy_action = 0;  // argmax of the unmodified Q-values
  int pc_action = 0;
};

inline Decision decide(const Network& net, NodeId signal, std::span<const double> state, const Mlp& agent,
                       const std::function<double(MovementId)>& occupancy, double factor) {
  Decision d;
  d.signal = signal;
  d.factor = factor;
  d.q = agent.forward(state);
  const auto w = phase_penalty_weights(net, signal, occupancy);
  d.pc_action = net.node(signal).pc_phase();
  d.q_mod = modify_q(d.q, w, d.pc_action, factor);
  for (double x : w) d.penalty.push_back(x * factor);
  d.greedy_action = argmax_lowest(d.q);
  d.action = argmax_lowest(d.q_mod);
  return d;
}

inline void write_decisions_csv(std::ostream& os, const std::vector<Decision>& ds) {
  os << "# " << kCsvSchema << " decisions\n";
  os << "t,signal,factor,q0,q1,q2,penalty0,penalty1,penalty2,qmod0,qmod1,qmod2,action,greedy_action,pc_action\n";
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    os << ',' << buf;
  };
  for (const auto& d : ds) {
    os << d.t << ',' << d.signal;
    num(d.factor);
    for (double x : d.q) num(x);
    for (double x : d.penalty) num(x);
    for (double x : d.q_mod) num(x);
    os << ',' << d.action << ',' << d.greedy_action << ',' << d.pc_action << '\n';
  }
}

/// Every cordon signal runs its agent greedily; with feedback enabled the
/// Q-values are penalised before the argmax. Interior signals run the fixed plan.
class RlSemiModelController : public Controller {
public:
  RlSemiModelController(const Network& net, std::map<NodeId, Mlp> agents, PcFeedback feedback, AgentConfig cfg = {},
                        FixedPlan plan = {}, bool use_feedback = true)
      : agents_(std::move(agents)), fb_(feedback), observer_(net, cfg), plan_(std::move(plan)), use_feedback_(use_feedback) {
    if (!(fb_.k_s > 0)) throw ConfigError("K_s must be positive");
    for (NodeId s : net.cordon_signals())
      if (!agents_.count(s)) throw ConfigError("no trained agent for cordon signal " + std::to_string(s));
  }

  std::string name() const override { return use_feedback_ ? "rl_semi_model" : "rl_local"; }

  void act(Simulation& sim, const ControlContext& ctx) override {
    const auto& net = sim.network();
    drive_interior(sim, ctx.t, plan_);
    observer_.begin_step(sim);
    PcFeedback fb = fb_;
    fb.ttt_now = ctx.ttt_now;
    const double factor = use_feedback_ ? penalty_factor(fb) : 0.0;
    auto occ = [&](MovementId m) { return sim.movement_occupancy(m); };
    std::vector<Decision> batch;
    for (NodeId s : net.cordon_signals()) {
      auto d = decide(net, s, observer_.state(s), agents_.at(s), occ, factor);
      d.t = ctx.t;
      batch.push_back(std::move(d));
    }
    for (const auto& d : batch) {
      const bool interlock = sim.apply_control(d.signal, d.action);
      commands_.push_back({ctx.t, d.signal, d.action});
      observer_.record_action(d.signal, d.action, interlock);
    }
    observer_.commit();
    decisions_.insert(decisions_.end(), batch.begin(), batch.end());
  }

  const std::vector<Decision>& decisions() const { return decisions_; }

private:
  std::map<NodeId, Mlp> agents_;
  PcFeedback fb_;
  CordonObserver observer_;
  FixedPlan plan_;
  bool use_feedback_;
  std::vector<Decision> decisions_;
};

}  // namespace pclab
