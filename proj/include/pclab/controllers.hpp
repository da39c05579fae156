#pragma once

// Benchmark perimeter strategies: fixed time, feedback gating, classical PI
// with uniform metering, and PI with queue-balancing inflow distribution.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pclab/metrics.hpp"
#include "pclab/network.hpp"
#include "pclab/simulation.hpp"

namespace pclab {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------- fixed plan

struct FixedPlan {
  std::vector<int> green{30, 30};  // s per phase, in phase order
  int interlock = 5;

  int period() const { return std::accumulate(green.begin(), green.end(), 0) + interlock * static_cast<int>(green.size()); }
};

struct PlanState {
  int phase = 0;
  bool in_interlock = false;
};

/// Timetable lookup. During an interlock the reported phase is the one that follows it.
inline PlanState fixed_plan(int t, const FixedPlan& plan) {
  if (plan.green.empty()) throw ConfigError("fixed plan needs at least one phase");
  const int period = plan.period();
  int u = ((t % period) + period) % period;
  const int n = static_cast<int>(plan.green.size());
  for (int p = 0; p < n; ++p) {
    if (u < plan.green[static_cast<std::size_t>(p)]) return {p, false};
    u -= plan.green[static_cast<std::size_t>(p)];
    if (u < plan.interlock) return {(p + 1) % n, true};
    u -= plan.interlock;
  }
  return {0, false};
}

// ------------------------------------------------------------------ PI law

struct PIState {
  double q_g_prev = 0.0;  // veh/h
  std::optional<double> ttt_prev;
  double k_p = 2.0;
  double k_i = 0.5;
  double ttt_crit = 17000.0;
  int control_period = 60;      // s
  double q_max = 1e300;          // veh/h
};

/// q_g(k) = q_g(k-1) - K_p [TTT(k) - TTT(k-1)] + K_I [TTT_crit - TTT(k)], clamped to [0, q_max].
/// The first call has no previous measurement and skips the proportional term.
inline double pi_update(PIState& s, double ttt_now) {
  const double prev = s.ttt_prev.value_or(ttt_now);
  double q = s.q_g_prev - s.k_p * (ttt_now - prev) + s.k_i * (s.ttt_crit - ttt_now);
  q = std::clamp(q, 0.0, s.q_max);
  s.q_g_prev = q;
  s.ttt_prev = ttt_now;
  return q;
}

// ------------------------------------------------------------ gate budgets

struct GateBudget {
  std::vector<int> vehicles;  // per gate, this control period

  int total() const { return std::accumulate(vehicles.begin(), vehicles.end(), 0); }
};

/// Turns an inflow limit into integer gate budgets. The fractional part of
/// the total is carried to the next period; the integer remainder is dealt
/// round-robin starting where the previous period stopped.
class UniformMeter {
public:
  GateBudget next(double q_g, std::size_t gates, int period) {
    if (gates == 0) throw std::invalid_argument("uniform metering needs at least one gate");
    if (q_g < 0) throw std::invalid_argument("inflow limit must be nonnegative");
    const double exact = q_g * period / 3600.0 + carry_;
    const auto total = static_cast<long long>(std::floor(exact + 1e-9));
    carry_ = std::max(0.0, exact - static_cast<double>(total));
    GateBudget b;
    const auto n = static_cast<long long>(gates);
    b.vehicles.assign(gates, static_cast<int>(total / n));
    const long long rem = total % n;
    for (long long j = 0; j < rem; ++j) ++b.vehicles[static_cast<std::size_t>((offset_ + j) % n)];
    offset_ = static_cast<std::size_t>((offset_ + static_cast<std::size_t>(rem)) % gates);
    return b;
  }

  double carry() const { return carry_; }

private:
  double carry_ = 0.0;
  std::size_t offset_ = 0;
};

/// Total-only variant of the same accumulator: integer vehicles per period.
class PeriodTotal {
public:
  int next(double q_g, int period) {
    const double exact = q_g * period / 3600.0 + carry_;
    const auto total = static_cast<int>(std::floor(exact + 1e-9));
    carry_ = std::max(0.0, exact - total);
    return total;
  }

private:
  double carry_ = 0.0;
};

// -------------------------------------------- queue-balancing distribution

namespace detail {

/// Marginal objective decrease of the (k+1)-th unit at a gate: (2(w-k)-1)/C^2,
/// returned as an exact fraction.
struct Gain {
  long long num;
  long long den;
};

inline Gain marginal_gain(int w, int k, int c) {
  return {2LL * (w - k) - 1, static_cast<long long>(c) * c};
}

inline int compare_gain(Gain a, Gain b) {
  const __int128 l = static_cast<__int128>(a.num) * b.den;
  const __int128 r = static_cast<__int128>(b.num) * a.den;
  return l < r ? -1 : l > r ? 1 : 0;
}

}  // namespace detail

/// Integer inflows minimising sum ((w_i - x_i)/C_i)^2 subject to
/// sum x = min(q_total, sum min(w_i, q_max_i)) and 0 <= x_i <= min(w_i, q_max_i).
/// The objective is separable and convex, so serving the largest marginal
/// decrease one unit at a time is exact. Equal gains go to the lower index,
/// which selects the lexicographically largest optimum.
inline std::vector<int> cordon_queue_distribution(int q_total, const std::vector<int>& queues,
                                                  const std::vector<int>& q_max, const std::vector<int>& storage) {
  const std::size_t n = queues.size();
  if (q_max.size() != n || storage.size() != n) throw std::invalid_argument("gate vectors differ in length");
  std::vector<int> cap(n);
  long long cap_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (queues[i] < 0 || q_max[i] < 0 || storage[i] <= 0) throw std::invalid_argument("invalid gate data");
    cap[i] = std::min(queues[i], q_max[i]);
    cap_sum += cap[i];
  }
  const long long target = std::min<long long>(std::max(q_total, 0), cap_sum);
  std::vector<int> x(n, 0);
  for (long long u = 0; u < target; ++u) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] >= cap[i]) continue;
      if (best == n || detail::compare_gain(detail::marginal_gain(queues[i], x[i], storage[i]),
                                            detail::marginal_gain(queues[best], x[best], storage[best])) > 0)
        best = i;
    }
    ++x[best];
  }
  return x;
}

/// Discrete optimality check: no unit can move from one gate to another and
/// strictly lower the objective, and the total matches the truncated demand.
inline bool satisfies_kkt(const std::vector<int>& x, int q_total, const std::vector<int>& queues,
                          const std::vector<int>& q_max, const std::vector<int>& storage) {
  const std::size_t n = x.size();
  long long cap_sum = 0, sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int cap = std::min(queues[i], q_max[i]);
    if (x[i] < 0 || x[i] > cap) return false;
    cap_sum += cap;
    sum += x[i];
  }
  if (sum != std::min<long long>(std::max(q_total, 0), cap_sum)) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] >= std::min(queues[i], q_max[i])) continue;
    const auto add = detail::marginal_gain(queues[i], x[i], storage[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || x[j] == 0) continue;
      const auto keep = detail::marginal_gain(queues[j], x[j] - 1, storage[j]);
      if (detail::compare_gain(add, keep) > 0) return false;
    }
  }
  return true;
}

// ------------------------------------------------------------- feedback law

/// Close every gate for the next action step iff TTT is strictly above critical.
inline bool feedback_gate(double ttt_now, double ttt_crit) { return ttt_now > ttt_crit; }

// -------------------------------------------------------- controller plumbing

struct Command {
  int t = 0;
  NodeId signal = 0;
  int phase = 0;
};

inline void write_commands_csv(std::ostream& os, const std::vector<Command>& cmds) {
  os << "# " << kCsvSchema << " commands\n";
  os << "t,signal,phase\n";
  for (const auto& c : cmds) os << c.t << ',' << c.signal << ',' << c.phase << '\n';
}

struct ControlContext {
  int t = 0;
  double ttt_now = 0.0;  // PN-TTT of the last completed measurement interval
};

class Controller {
public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Called at every action-step boundary before the simulation steps.
  virtual void act(Simulation& sim, const ControlContext& ctx) = 0;

  const std::vector<Command>& commands() const { return commands_; }

protected:
  void command(Simulation& sim, int t, NodeId signal, int phase) {
    sim.apply_control(signal, phase);
    commands_.push_back({t, signal, phase});
  }

  /// Fixed plan on every signalized node that is not a cordon signal.
  void drive_interior(Simulation& sim, int t, const FixedPlan& plan) {
    for (const auto& n : sim.network().intersections())
      if (n.is_signalized() && n.kind != NodeKind::cordon) command(sim, t, n.id, fixed_plan(t, plan).phase);
  }

  std::vector<Command> commands_;
};

class FixedController : public Controller {
public:
  explicit FixedController(FixedPlan plan = {}) : plan_(std::move(plan)) {}
  std::string name() const override { return "fixed"; }
  void act(Simulation& sim, const ControlContext& ctx) override {
    drive_interior(sim, ctx.t, plan_);
    for (NodeId s : sim.network().cordon_signals()) command(sim, ctx.t, s, fixed_plan(ctx.t, plan_).phase);
  }

private:
  FixedPlan plan_;
};

class FeedbackController : public Controller {
public:
  FeedbackController(double ttt_crit, FixedPlan plan = {}) : crit_(ttt_crit), plan_(std::move(plan)) {}
  std::string name() const override { return "feedback"; }
  void act(Simulation& sim, const ControlContext& ctx) override {
    drive_interior(sim, ctx.t, plan_);
    const bool close = feedback_gate(ctx.ttt_now, crit_);
    for (NodeId s : sim.network().cordon_signals()) {
      const int phase = close ? sim.network().node(s).pc_phase() : fixed_plan(ctx.t, plan_).phase;
      command(sim, ctx.t, s, phase);
    }
  }

private:
  double crit_;
  FixedPlan plan_;
};

enum class MeteringMode { uniform, cordon_queue };

struct MeteringSettings {
  double k_p = 2.0;
  double k_i = 0.5;
  double ttt_crit = 17000.0;
  int control_period = 60;
  FixedPlan plan;
};

/// Inflow a gate can pass in one control period while its approach is green in
/// the plan's inflow slot.
inline double gate_green_capacity_per_hour(const Network& net, LinkId gate, const SimParams& p, const FixedPlan& plan) {
  const double green_share = static_cast<double>(plan.green.at(0)) / plan.period();
  return net.link(gate).lanes * p.saturation_flow * 3600.0 * green_share;
}

/// Classical PI gating. The inflow slot of the plan (phase 0) serves the gate
/// while its budget lasts and switches to the PC phase afterwards; phase 1
/// keeps its slot for cross traffic.
class MeteringController : public Controller {
public:
  MeteringController(const Network& net, const SimParams& params, MeteringSettings settings, MeteringMode mode)
      : settings_(std::move(settings)), mode_(mode) {
    if (settings_.k_p <= 0 || settings_.k_i <= 0) throw ConfigError("PI gains must be positive");
    if (settings_.control_period <= 0) throw ConfigError("control period must be positive");
    double q_max = 0.0;
    for (LinkId g : net.gate_links()) {
      const double cap = gate_green_capacity_per_hour(net, g, params, settings_.plan);
      q_max += cap;
      period_cap_.push_back(static_cast<int>(std::floor(cap * settings_.control_period / 3600.0 + 1e-9)));
      storage_.push_back(net.link(g).storage_capacity);
    }
    pi_.k_p = settings_.k_p;
    pi_.k_i = settings_.k_i;
    pi_.ttt_crit = settings_.ttt_crit;
    pi_.control_period = settings_.control_period;
    pi_.q_max = q_max;
    pi_.q_g_prev = q_max;
  }

  std::string name() const override { return mode_ == MeteringMode::uniform ? "pi" : "pi_cordon_queue"; }

  void act(Simulation& sim, const ControlContext& ctx) override {
    const auto& net = sim.network();
    if (ctx.t % settings_.control_period == 0) {
      const double q = pi_update(pi_, ctx.ttt_now);
      q_trace_.push_back(q);
      std::vector<int> budget;
      if (mode_ == MeteringMode::uniform) {
        budget = uniform_.next(q, net.gate_links().size(), settings_.control_period).vehicles;
      } else {
        std::vector<int> w;
        for (std::size_t g = 0; g < net.gate_links().size(); ++g) w.push_back(sim.gate_queue(static_cast<int>(g)));
        budget = cordon_queue_distribution(total_.next(q, settings_.control_period), w, period_cap_, storage_);
      }
      for (std::size_t g = 0; g < budget.size(); ++g) sim.set_gate_allowance(static_cast<int>(g), budget[g]);
      budgets_.push_back(std::move(budget));
    }
    drive_interior(sim, ctx.t, settings_.plan);
    const auto plan = fixed_plan(ctx.t, settings_.plan);
    for (NodeId s : net.cordon_signals()) {
      const auto& node = net.node(s);
      int phase = plan.phase;
      if (phase == 0) {
        const auto left = sim.gate_allowance(node.gate_index);
        if (left && *left <= 0) phase = node.pc_phase();
      }
      command(sim, ctx.t, s, phase);
    }
  }

  const std::vector<double>& q_trace() const { return q_trace_; }
  const std::vector<std::vector<int>>& budgets() const { return budgets_; }
  const PIState& pi_state() const { return pi_; }

private:
  MeteringSettings settings_;
  MeteringMode mode_;
  PIState pi_;
  UniformMeter uniform_;
  PeriodTotal total_;
  std::vector<int> period_cap_;
  std::vector<int> storage_;
  std::vector<double> q_trace_;
  std::vector<std::vector<int>> budgets_;
};

}  // namespace pclab
