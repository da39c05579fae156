#pragma once

// Local cordon-signal agents: observation encoding, reward, double-DQN
// target, replay memory, epsilon-greedy selection and weight transfer.
//
// State encoding v1 (18 values):
//   [0]      D / (action_step * sum of leg storage), stopped veh*s over the last action step
//   [1..4]   occupancy of the legs outer, inner, left, right
//   [5]      interlocks among the last ten actions / 10
//   [6..9]   one-hot last action of the signal itself (phase 0, 1, PC, none)
//   [10..13] same for the left neighbour on the edge
//   [14..17] same for the right neighbour
// Legs are taken in the canonical order of CordonLegs, so the encoding is the
// same for a signal and its rotated counterpart on another edge.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pclab/mlp.hpp"
#include "pclab/network.hpp"
#include "pclab/simulation.hpp"

namespace pclab {

inline constexpr int kStateVersion = 1;
inline constexpr int kActionCount = 3;
inline constexpr int kNoAction = 3;  // "none" slot in the one-hot action code
inline constexpr int kStateDim = 6 + 3 * (kActionCount + 1);

struct AgentConfig {
  double o_crit = 0.75;
  int y_crit = 2;
  int history = 10;
  int action_step = 5;
};

struct LocalSnapshot {
  double d = 0.0;                       // stopped veh*s over the last action step
  std::array<double, 4> occupancy{};    // outer, inner, left, right
  int yellow = 0;                       // interlocks among the last `history` actions
  std::array<int, 3> last_actions{kNoAction, kNoAction, kNoAction};  // own, left, right
};

inline std::vector<double> encode_state(const LocalSnapshot& s, double d_normaliser) {
  std::vector<double> x(static_cast<std::size_t>(kStateDim), 0.0);
  x[0] = d_normaliser > 0 ? s.d / d_normaliser : 0.0;
  for (std::size_t i = 0; i < 4; ++i) x[1 + i] = s.occupancy[i];
  x[5] = s.yellow / 10.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const int a = s.last_actions[k];
    if (a < 0 || a > kNoAction) throw std::invalid_argument("action code out of range");
    x[6 + 4 * k + static_cast<std::size_t>(a)] = 1.0;
  }
  return x;
}

/// R = r' + sum r'' + r''' with r' = +1 iff D_t < D_{t-1} (else -1),
/// r'' = -1 per leg at or above the critical occupancy, r''' = -1 iff y > y_crit.
inline double compute_reward(double d_t, double d_prev, std::span<const double> occupancy, int yellow, double o_crit,
                             int y_crit) {
  double r = d_t < d_prev ? 1.0 : -1.0;
  for (double o : occupancy)
    if (o >= o_crit) r -= 1.0;
  if (yellow > y_crit) r -= 1.0;
  return r;
}

inline int argmax_lowest(std::span<const double> q) {
  if (q.empty()) throw std::invalid_argument("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = i;
  return static_cast<int>(best);
}

/// y = r + gamma * Q_target(s', argmax_a Q_online(s', a)); y = r for terminal transitions.
inline double ddqn_target(double reward, std::span<const double> q_online_next, std::span<const double> q_target_next,
                          double gamma, bool terminal) {
  if (terminal) return reward;
  const int a = argmax_lowest(q_online_next);
  return reward + gamma * q_target_next[static_cast<std::size_t>(a)];
}

struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

inline double ddqn_target(const Transition& tr, const Mlp& online, const Mlp& target, double gamma) {
  if (tr.terminal) return tr.reward;
  return ddqn_target(tr.reward, online.forward(tr.next_state), target.forward(tr.next_state), gamma, false);
}

/// Fixed-capacity ring; the oldest transition is evicted first.
class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  }

  void push(Transition t) {
    if (!std::isfinite(t.reward)) throw std::invalid_argument("non-finite reward");
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// i-th item in insertion order, oldest first.
  const Transition& at(std::size_t i) const { return items_.at((head_ + i) % items_.size()); }

  /// Uniform draws with replacement.
  template <class Rng>
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const {
    if (items_.empty()) throw std::logic_error("sampling from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<const Transition*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[pick(rng)]);
    return out;
  }

private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> items_;
};

template <class Rng>
int select_action(std::span<const double> q, double epsilon, Rng& rng) {
  if (epsilon < 0 || epsilon > 1) throw std::invalid_argument("epsilon must lie in [0, 1]");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (epsilon > 0 && u(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(q.size()) - 1);
    return pick(rng);
  }
  return argmax_lowest(q);
}

/// Linear decay from `start` to `floor` over the first `decay_episodes` episodes, constant afterwards.
inline double epsilon_at(int episode, int decay_episodes = 50, double start = 1.0, double floor = 0.02) {
  if (decay_episodes <= 0 || episode >= decay_episodes) return floor;
  return start - (start - floor) * episode / decay_episodes;
}

// ------------------------------------------------------------- observation

/// Tracks stopped time, interlocks and last actions of every cordon signal
/// between action-step boundaries.
class CordonObserver {
public:
  CordonObserver(const Network& net, AgentConfig cfg) : net_(&net), cfg_(cfg) {
    for (NodeId s : net.cordon_signals()) {
      Track tr;
      const auto legs = net.node(s).legs.as_array();
      double storage = 0.0;
      for (LinkId l : legs) storage += net.link(l).storage_capacity;
      tr.d_normaliser = cfg.action_step * storage;
      tracks_.emplace(s, std::move(tr));
    }
  }

  const AgentConfig& config() const { return cfg_; }

  /// Closes the action step that just elapsed: stopped time since the last boundary becomes D_t.
  void begin_step(const Simulation& sim) {
    for (auto& [s, tr] : tracks_) {
      double stopped = 0.0;
      for (LinkId l : net_->node(s).legs.as_array()) stopped += sim.stopped_time(l);
      tr.d_prev = tr.d_now;
      tr.d_now = stopped - tr.stopped_mark;
      tr.stopped_mark = stopped;
      for (std::size_t i = 0; i < 4; ++i) tr.occupancy[i] = sim.occupancy(net_->node(s).legs.as_array()[i]);
    }
  }

  LocalSnapshot snapshot(NodeId s) const {
    const auto& tr = tracks_.at(s);
    LocalSnapshot snap;
    snap.d = tr.d_now;
    snap.occupancy = tr.occupancy;
    snap.yellow = static_cast<int>(std::count(tr.interlocks.begin(), tr.interlocks.end(), true));
    snap.last_actions[0] = tr.last_action;
    const auto nb = net_->cordon_neighbours(s);
    for (std::size_t k = 0; k < 2; ++k) snap.last_actions[1 + k] = nb[k] < 0 ? kNoAction : tracks_.at(nb[k]).last_action;
    return snap;
  }

  std::vector<double> state(NodeId s) const { return encode_state(snapshot(s), tracks_.at(s).d_normaliser); }

  /// Reward for the action taken at the previous boundary.
  double reward(NodeId s) const {
    const auto& tr = tracks_.at(s);
    const auto snap = snapshot(s);
    return compute_reward(tr.d_now, tr.d_prev, snap.occupancy, snap.yellow, cfg_.o_crit, cfg_.y_crit);
  }

  /// Stores the action chosen at this boundary; neighbours see it after commit().
  void record_action(NodeId s, int action, bool interlock) {
    auto& tr = tracks_.at(s);
    tr.pending_action = action;
    tr.interlocks.push_back(interlock);
    while (static_cast<int>(tr.interlocks.size()) > cfg_.history) tr.interlocks.pop_front();
  }

  void commit() {
    for (auto& [s, tr] : tracks_) tr.last_action = tr.pending_action;
  }

  double d_normaliser(NodeId s) const { return tracks_.at(s).d_normaliser; }

private:
  struct Track {
    double d_normaliser = 1.0;
    double stopped_mark = 0.0;
    double d_now = 0.0;
    double d_prev = 0.0;
    std::array<double, 4> occupancy{};
    std::deque<bool> interlocks;
    int last_action = kNoAction;
    int pending_action = kNoAction;
  };

  const Network* net_;
  AgentConfig cfg_;
  std::map<NodeId, Track> tracks_;
};

// ---------------------------------------------------------------- transfer

/// Donor index for every cordon signal: the donor at the same relative
/// position on its edge. Donors are given in edge order of the trained edge.
inline std::map<NodeId, std::size_t> transfer_assignment(const Network& net, std::size_t donor_count) {
  if (donor_count == 0) throw std::invalid_argument("no trained agents to transfer");
  std::map<NodeId, std::size_t> out;
  for (Heading side : {Heading::north, Heading::east, Heading::south, Heading::west}) {
    const auto edge = net.cordon_edge(side);
    const std::size_t n = edge.size();
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t d = p;
      if (n != donor_count)
        d = n == 1 ? 0 : static_cast<std::size_t>(std::lround(static_cast<double>(p) * (donor_count - 1) / (n - 1)));
      out[edge[p]] = std::min(d, donor_count - 1);
    }
  }
  return out;
}

/// One network per cordon signal, copied from the matching donor.
inline std::map<NodeId, Mlp> transfer(const Network& net, const std::vector<Mlp>& donors) {
  for (const auto& d : donors)
    if (d.input_dim() != kStateDim || d.output_dim() != kActionCount)
      throw MlpError("donor network has dims " + std::to_string(d.input_dim()) + "->" + std::to_string(d.output_dim()) +
                     ", expected " + std::to_string(kStateDim) + "->" + std::to_string(kActionCount));
  std::map<NodeId, Mlp> out;
  for (const auto& [s, d] : transfer_assignment(net, donors.size())) {
    if (static_cast<int>(net.node(s).phases.size()) != kActionCount)
      throw MlpError("cordon signal " + std::to_string(s) + " has a different phase count than the donors");
    out.emplace(s, donors[d]);
  }
  return out;
}

}  // namespace pclab
