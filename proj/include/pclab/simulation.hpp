#pragma once

// Mesoscopic point-queue traffic dynamics on a Network.
//
// Each link holds a free-flow traversal stage followed by one FIFO queue per
// outgoing movement. Queue heads on green movements discharge at the
// saturation rate when the receiving link has storage left. One call to
// step() advances the clock by one second:
//   1. discharge at intersections (signal state of the current second),
//   2. free-flow traversal; vehicles reaching the stop line join a queue or,
//      on their destination link, leave the network,
//   3. released trips enter their origin link (routed at entry),
//   4. interlock timers tick and the step sample is published.
// Vehicles moved in stage 1 or 3 do not traverse during the same step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pclab/demand.hpp"
#include "pclab/network.hpp"
#include "pclab/routing.hpp"

namespace pclab {

struct SimParams {
  double saturation_flow = 0.5;  // veh/s/lane
  int interlock = 5;             // s of yellow + all-red on a phase change
};

enum class VehicleState : std::uint8_t { pending, traversing, queued, finished, discarded };

struct Vehicle {
  int id = 0;
  Trip trip;
  std::vector<LinkId> path;
  std::size_t cursor = 0;  // path[cursor] is the current link
  int link_entry_time = 0;
  double position = 0.0;  // m from the upstream end
  VehicleState state = VehicleState::pending;
  MovementId movement_next = -1;
  std::uint64_t queue_seq = 0;
  int moved_at = -1;  // step index of the last discharge/entry

  LinkId link() const { return path[cursor]; }
};

struct LinkState {
  std::deque<int> traversing;            // in entry order
  std::vector<std::deque<int>> queues;   // one per movement in Network::movements_from
  int count = 0;
  int queued = 0;
  double credit = 0.0;
  double stopped_time = 0.0;  // cumulative queued veh*s
  std::uint64_t entries = 0;
};

struct SignalState {
  int phase = 0;
  int interlock_left = 0;
  std::uint64_t switches = 0;
};

/// Everything a metrics accumulator needs about one simulated second.
struct StepSample {
  int t = 0;  // the second just simulated; counts are taken at its end
  std::vector<int> count;
  std::vector<int> queued;
  std::vector<double> distance;
  std::vector<int> pending_by_gate;
};

/// A vehicle that entered during step `entry_time` and left during step
/// `leave_time` appears in exactly leave_time - entry_time step samples.
struct LinkLeave {
  int vehicle = 0;
  LinkId link = 0;
  int entry_time = 0;
  int leave_time = 0;
};

struct TripEnd {
  int vehicle = 0;
  int departure = 0;
  int finish = 0;
};

struct StepEvents {
  std::vector<LinkLeave> leaves;
  std::vector<TripEnd> finished;
};

class Simulation {
public:
  Simulation(const Network& net, std::vector<Trip> trips, SimParams params = {})
      : net_(&net), params_(params), trips_(std::move(trips)) {
    std::stable_sort(trips_.begin(), trips_.end(),
                     [](const Trip& a, const Trip& b) { return a.departure < b.departure; });
    links_.resize(net.links().size());
    for (std::size_t l = 0; l < links_.size(); ++l)
      links_[l].queues.resize(net.movements_from(static_cast<LinkId>(l)).size());
    signals_.resize(net.intersections().size());
    pending_.resize(net.links().size());
    entry_credit_.assign(net.links().size(), 0.0);
    movement_count_.assign(net.movements().size(), 0);
    allowance_.assign(net.gate_links().size(), std::nullopt);
    admitted_.assign(net.gate_links().size(), 0);
    sample_.count.assign(links_.size(), 0);
    sample_.queued.assign(links_.size(), 0);
    sample_.distance.assign(links_.size(), 0.0);
    sample_.pending_by_gate.assign(net.gate_links().size(), 0);
  }

  const Network& network() const { return *net_; }
  const SimParams& params() const { return params_; }
  int now() const { return now_; }

  /// Commands a phase. A change of phase starts the interlock; repeating the
  /// current phase keeps it green. Returns true when an interlock started.
  bool apply_control(NodeId signal, int phase) {
    const auto& node = net_->node(signal);
    if (!node.is_signalized()) throw DomainError("node " + std::to_string(signal) + " is not signalized");
    if (phase < 0 || phase >= static_cast<int>(node.phases.size()))
      throw DomainError("invalid phase " + std::to_string(phase) + " for node " + std::to_string(signal));
    auto& s = signals_[static_cast<std::size_t>(signal)];
    if (phase == s.phase) return false;
    s.phase = phase;
    s.interlock_left = params_.interlock;
    ++s.switches;
    return true;
  }

  const SignalState& signal(NodeId id) const { return signals_.at(static_cast<std::size_t>(id)); }

  bool movement_green(MovementId m) const {
    const auto& mv = net_->movement(m);
    const auto& node = net_->node(mv.node);
    if (!node.is_signalized()) return true;
    const auto& s = signals_[static_cast<std::size_t>(mv.node)];
    return s.interlock_left == 0 && node.phases[static_cast<std::size_t>(s.phase)].permits(m);
  }

  /// Caps the vehicles a gate may admit into the PN from now on; nullopt lifts the cap.
  void set_gate_allowance(int gate, std::optional<int> vehicles) { allowance_.at(static_cast<std::size_t>(gate)) = vehicles; }
  std::optional<int> gate_allowance(int gate) const { return allowance_.at(static_cast<std::size_t>(gate)); }
  /// Cumulative vehicles admitted into the PN from each gate link.
  std::uint64_t admitted(int gate) const { return admitted_.at(static_cast<std::size_t>(gate)); }

  const LinkState& link_state(LinkId l) const { return links_.at(static_cast<std::size_t>(l)); }
  int count(LinkId l) const { return links_.at(static_cast<std::size_t>(l)).count; }
  int queued(LinkId l) const { return links_.at(static_cast<std::size_t>(l)).queued; }
  double stopped_time(LinkId l) const { return links_.at(static_cast<std::size_t>(l)).stopped_time; }

  double occupancy(LinkId l) const {
    const auto& link = net_->link(l);
    return count(l) * net_->footprint() / (link.length * link.lanes);
  }

  /// Occupancy of the vehicles on the movement's origin link that intend to take it.
  double movement_occupancy(MovementId m) const {
    const auto& link = net_->link(net_->movement(m).from_link);
    return movement_count_[static_cast<std::size_t>(m)] * net_->footprint() / (link.length * link.lanes);
  }

  /// Vehicles queued at a gate, including those still waiting to enter it.
  int gate_queue(int gate) const {
    const LinkId l = net_->gate_links()[static_cast<std::size_t>(gate)];
    return queued(l) + static_cast<int>(pending_[static_cast<std::size_t>(l)].size());
  }

  int pending(LinkId origin) const { return static_cast<int>(pending_.at(static_cast<std::size_t>(origin)).size()); }

  std::uint64_t entered() const { return entered_; }
  std::uint64_t exited() const { return exited_; }
  std::uint64_t discarded() const { return discarded_; }
  std::uint64_t present() const {
    std::uint64_t p = 0;
    for (const auto& l : links_) p += static_cast<std::uint64_t>(l.count);
    return p;
  }
  std::size_t waiting() const {
    std::size_t w = 0;
    for (const auto& p : pending_) w += p.size();
    return w;
  }
  /// Trips neither released nor finished yet.
  std::size_t unreleased() const { return trips_.size() - next_trip_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }
  const std::vector<Vehicle>& vehicles() const { return vehicles_; }

  const StepSample& last_sample() const { return sample_; }
  const StepEvents& last_events() const { return events_; }

  /// Per-link routing cost: free-flow time plus queued vehicles over discharge rate.
  std::vector<double> link_costs() const {
    std::vector<double> c(links_.size());
    for (std::size_t l = 0; l < links_.size(); ++l) {
      const auto& link = net_->link(static_cast<LinkId>(l));
      c[l] = link.free_flow_time() + links_[l].queued / (link.lanes * params_.saturation_flow);
    }
    return c;
  }

  void step() {
    const int t = now_;
    events_.leaves.clear();
    events_.finished.clear();
    std::fill(sample_.distance.begin(), sample_.distance.end(), 0.0);

    discharge(t);
    traverse(t);
    release_and_enter(t);

    for (std::size_t l = 0; l < links_.size(); ++l) {
      links_[l].stopped_time += links_[l].queued;
      sample_.count[l] = links_[l].count;
      sample_.queued[l] = links_[l].queued;
    }
    for (std::size_t g = 0; g < net_->gate_links().size(); ++g)
      sample_.pending_by_gate[g] = static_cast<int>(pending_[static_cast<std::size_t>(net_->gate_links()[g])].size());
    sample_.t = t;

    for (auto& s : signals_)
      if (s.interlock_left > 0) --s.interlock_left;
    ++now_;
  }

  /// Returns an empty string when every structural invariant holds.
  std::string check_invariants() const {
    std::uint64_t present_total = 0;
    for (std::size_t l = 0; l < links_.size(); ++l) {
      const auto& ls = links_[l];
      int q = 0;
      for (const auto& d : ls.queues) q += static_cast<int>(d.size());
      if (q != ls.queued) return "queued mismatch on link " + std::to_string(l);
      if (ls.count != q + static_cast<int>(ls.traversing.size())) return "count mismatch on link " + std::to_string(l);
      if (ls.count > net_->link(static_cast<LinkId>(l)).storage_capacity)
        return "storage exceeded on link " + std::to_string(l);
      const double occ = occupancy(static_cast<LinkId>(l));
      if (occ < 0.0 || occ > 1.0) return "occupancy out of range on link " + std::to_string(l);
      present_total += static_cast<std::uint64_t>(ls.count);
    }
    if (entered_ != exited_ + present_total) return "vehicle conservation violated";
    return {};
  }

private:
  void discharge(int t) {
    for (const auto& node : net_->intersections()) {
      for (LinkId in : node.incoming) {
        auto& ls = links_[static_cast<std::size_t>(in)];
        const auto& moves = net_->movements_from(in);
        bool any_green_waiting = false;
        for (std::size_t k = 0; k < moves.size(); ++k)
          if (!ls.queues[k].empty() && movement_green(moves[k])) any_green_waiting = true;
        if (!any_green_waiting) {
          ls.credit = 0.0;
          continue;
        }
        const double rate = net_->link(in).lanes * params_.saturation_flow;
        ls.credit = std::min(ls.credit + rate, std::max(rate, 1.0));
        while (ls.credit >= 1.0) {
          // Earliest queued eligible head among green movements.
          int best = -1;
          std::uint64_t best_seq = 0;
          for (std::size_t k = 0; k < moves.size(); ++k) {
            if (ls.queues[k].empty() || !movement_green(moves[k])) continue;
            const auto& mv = net_->movement(moves[k]);
            const auto& dest = links_[static_cast<std::size_t>(mv.to_link)];
            if (dest.count >= net_->link(mv.to_link).storage_capacity) continue;
            if (!admissible(in, mv)) continue;
            const auto seq = vehicles_[static_cast<std::size_t>(ls.queues[k].front())].queue_seq;
            if (best < 0 || seq < best_seq) {
              best = static_cast<int>(k);
              best_seq = seq;
            }
          }
          if (best < 0) break;
          const int vid = ls.queues[static_cast<std::size_t>(best)].front();
          ls.queues[static_cast<std::size_t>(best)].pop_front();
          --ls.queued;
          ls.credit -= 1.0;
          const auto& mv = net_->movement(moves[static_cast<std::size_t>(best)]);
          auto& v = vehicles_[static_cast<std::size_t>(vid)];
          leave_link(v, t);
          if (mv.crosses_cordon == CordonCrossing::inflow) {
            const int g = net_->gate_index_of(in);
            if (g >= 0) {
              ++admitted_[static_cast<std::size_t>(g)];
              if (auto& a = allowance_[static_cast<std::size_t>(g)]) --*a;
            }
          }
          ++v.cursor;
          enter_link(v, t);
        }
      }
    }
  }

  bool admissible(LinkId from, const Movement& mv) const {
    if (mv.crosses_cordon != CordonCrossing::inflow) return true;
    const int g = net_->gate_index_of(from);
    if (g < 0) return true;
    const auto& a = allowance_[static_cast<std::size_t>(g)];
    return !a || *a > 0;
  }

  void traverse(int t) {
    for (std::size_t l = 0; l < links_.size(); ++l) {
      auto& ls = links_[l];
      if (ls.traversing.empty()) continue;
      const auto& link = net_->link(static_cast<LinkId>(l));
      std::deque<int> still;
      for (int vid : ls.traversing) {
        auto& v = vehicles_[static_cast<std::size_t>(vid)];
        if (v.moved_at == t) {
          still.push_back(vid);
          continue;
        }
        const double advance = std::min(link.free_flow_speed, link.length - v.position);
        v.position += advance;
        sample_.distance[l] += advance;
        if (v.position < link.length - 1e-9) {
          still.push_back(vid);
          continue;
        }
        v.position = link.length;
        if (v.cursor + 1 == v.path.size()) {
          leave_link(v, t);
          v.state = VehicleState::finished;
          ++exited_;
          events_.finished.push_back({v.id, v.trip.departure, t});
        } else {
          const auto& moves = net_->movements_from(static_cast<LinkId>(l));
          const auto k = static_cast<std::size_t>(std::find(moves.begin(), moves.end(), v.movement_next) - moves.begin());
          v.state = VehicleState::queued;
          v.queue_seq = next_seq_++;
          ls.queues[k].push_back(vid);
          ++ls.queued;
        }
      }
      ls.traversing.swap(still);
    }
  }

  void release_and_enter(int t) {
    while (next_trip_ < trips_.size() && trips_[next_trip_].departure <= t) {
      const auto& trip = trips_[next_trip_++];
      Vehicle v;
      v.id = static_cast<int>(vehicles_.size());
      v.trip = trip;
      vehicles_.push_back(std::move(v));
      pending_[static_cast<std::size_t>(trip.origin)].push_back(vehicles_.back().id);
    }
    std::optional<std::vector<double>> costs;
    for (std::size_t l = 0; l < pending_.size(); ++l) {
      auto& queue = pending_[l];
      if (queue.empty()) {
        entry_credit_[l] = 0.0;
        continue;
      }
      const auto& link = net_->link(static_cast<LinkId>(l));
      const double rate = link.lanes * params_.saturation_flow;
      entry_credit_[l] = std::min(entry_credit_[l] + rate, std::max(rate, 1.0));
      while (!queue.empty() && entry_credit_[l] >= 1.0 && links_[l].count < link.storage_capacity) {
        auto& v = vehicles_[static_cast<std::size_t>(queue.front())];
        queue.pop_front();
        if (!costs) costs = link_costs();
        try {
          v.path = route(*net_, v.trip.origin, v.trip.destination, *costs);
        } catch (const RoutingError& e) {
          v.state = VehicleState::discarded;
          ++discarded_;
          diagnostics_.push_back("t=" + std::to_string(t) + " vehicle " + std::to_string(v.id) + " discarded: " + e.what());
          continue;
        }
        entry_credit_[l] -= 1.0;
        v.cursor = 0;
        ++entered_;
        enter_link(v, t);
      }
    }
  }

  void enter_link(Vehicle& v, int t) {
    const LinkId l = v.link();
    auto& ls = links_[static_cast<std::size_t>(l)];
    v.state = VehicleState::traversing;
    v.position = 0.0;
    v.link_entry_time = t;
    v.moved_at = t;
    v.movement_next = -1;
    if (v.cursor + 1 < v.path.size()) {
      const auto m = net_->movement_between(l, v.path[v.cursor + 1]);
      v.movement_next = *m;
      ++movement_count_[static_cast<std::size_t>(*m)];
    }
    ls.traversing.push_back(v.id);
    ++ls.count;
    ++ls.entries;
  }

  void leave_link(Vehicle& v, int t) {
    auto& ls = links_[static_cast<std::size_t>(v.link())];
    --ls.count;
    if (v.movement_next >= 0) --movement_count_[static_cast<std::size_t>(v.movement_next)];
    events_.leaves.push_back({v.id, v.link(), v.link_entry_time, t});
  }

  const Network* net_;
  SimParams params_;
  std::vector<Trip> trips_;
  std::size_t next_trip_ = 0;
  std::vector<Vehicle> vehicles_;
  std::vector<LinkState> links_;
  std::vector<SignalState> signals_;
  std::vector<std::deque<int>> pending_;
  std::vector<double> entry_credit_;
  std::vector<int> movement_count_;
  std::vector<std::optional<int>> allowance_;
  std::vector<std::uint64_t> admitted_;
  std::vector<std::string> diagnostics_;
  StepSample sample_;
  StepEvents events_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t entered_ = 0;
  std::uint64_t exited_ = 0;
  std::uint64_t discarded_ = 0;
  int now_ = 0;
};

}  // namespace pclab
