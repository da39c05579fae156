#pragma once

// KPI accumulation over the step stream of a Simulation.
//
// Everything here is a pure function of (StepSample, StepEvents) pairs, so a
// recorded trace replays into identical outputs.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pclab/network.hpp"
#include "pclab/simulation.hpp"

namespace pclab {

inline constexpr const char* kCsvSchema = "pclab-csv 1";

struct EmissionProxy {
  double alpha = 0.16;  // g per vehicle-metre driven
  double beta = 1.2;    // g per vehicle-second stopped
};

struct IntervalRecord {
  int interval_start = 0;
  double pn_ttt = 0.0;  // veh*s
  double pn_ttd = 0.0;  // veh*m
  double en_ttt = 0.0;
  double emission = 0.0;
  std::vector<double> gate_queue_time;  // veh*s per gate in this interval
  std::vector<double> gate_delay_sum;   // s, over vehicles leaving the gate link in this interval
  std::vector<int> gate_departures;
  std::vector<int> pn_link_count;  // sampled at the last second of the interval
  double link_count_std = 0.0;
};

struct KpiSummary {
  double pn_ttt = 0.0;
  double pn_ttd = 0.0;
  double en_ttt = 0.0;
  double cordon_queue = 0.0;
  double emission = 0.0;
};

/// Population standard deviation.
inline double population_stddev(std::span<const int> xs) {
  if (xs.empty()) return 0.0;
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (int x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (int x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / n);
}

/// Actual gate-link travel time minus the free-flow time.
inline double gate_delay(const Link& gate, int entry_time, int leave_time) {
  return (leave_time - entry_time) - gate.free_flow_time();
}

inline double emission_step(const EmissionProxy& p, double distance, double stopped_veh_s) {
  return p.alpha * distance + p.beta * stopped_veh_s;
}

class MetricsLog {
public:
  explicit MetricsLog(const Network& net, int interval = 20, EmissionProxy emission = {})
      : net_(&net), interval_(interval), emission_(emission) {
    if (interval <= 0) throw std::invalid_argument("metrics interval must be positive");
    is_pn_.assign(net.links().size(), 0);
    for (LinkId l : net.pn_links()) is_pn_[static_cast<std::size_t>(l)] = 1;
  }

  int interval() const { return interval_; }
  const EmissionProxy& emission_proxy() const { return emission_; }

  void observe(const StepSample& s, const StepEvents& e) {
    const std::size_t k = static_cast<std::size_t>(s.t / interval_);
    while (records_.size() <= k) open_record(static_cast<int>(records_.size()) * interval_);
    auto& r = records_[k];

    double pn = 0.0, en = 0.0, pn_dist = 0.0, dist = 0.0, stopped = 0.0;
    for (std::size_t l = 0; l < s.count.size(); ++l) {
      en += s.count[l];
      dist += s.distance[l];
      stopped += s.queued[l];
      if (is_pn_[l]) {
        pn += s.count[l];
        pn_dist += s.distance[l];
      }
    }
    double cordon = 0.0;
    const auto& gates = net_->gate_links();
    for (std::size_t g = 0; g < gates.size(); ++g) {
      const double q = s.queued[static_cast<std::size_t>(gates[g])] + s.pending_by_gate[g];
      r.gate_queue_time[g] += q;
      cordon += q;
    }
    double waiting = 0.0;
    for (int p : s.pending_by_gate) waiting += p;
    en += waiting;
    stopped += waiting;

    for (const auto& ev : e.leaves) {
      const int g = net_->gate_index_of(ev.link);
      if (g < 0) continue;
      r.gate_delay_sum[static_cast<std::size_t>(g)] += gate_delay(net_->link(ev.link), ev.entry_time, ev.leave_time);
      ++r.gate_departures[static_cast<std::size_t>(g)];
      ++gate_passages_;
      if (gate_delay(net_->link(ev.link), ev.entry_time, ev.leave_time) < -1e-9) ++negative_delays_;
    }

    const double em = emission_step(emission_, dist, stopped);
    r.pn_ttt += pn;
    r.pn_ttd += pn_dist;
    r.en_ttt += en;
    r.emission += em;
    totals_.pn_ttt += pn;
    totals_.pn_ttd += pn_dist;
    totals_.en_ttt += en;
    totals_.cordon_queue += cordon;
    totals_.emission += em;
    cumulative_emission_.push_back(totals_.emission);

    r.pn_link_count.clear();
    for (LinkId l : net_->pn_links()) r.pn_link_count.push_back(s.count[static_cast<std::size_t>(l)]);
    r.link_count_std = population_stddev(r.pn_link_count);
    last_t_ = s.t;
  }

  const std::vector<IntervalRecord>& records() const { return records_; }
  const KpiSummary& totals() const { return totals_; }
  const std::vector<double>& cumulative_emission() const { return cumulative_emission_; }
  std::uint64_t negative_delays() const { return negative_delays_; }
  std::uint64_t gate_passages() const { return gate_passages_; }

  /// True when the record covering `t` has received its last second.
  bool interval_complete(std::size_t k) const {
    return k < records_.size() && last_t_ >= records_[k].interval_start + interval_ - 1;
  }

  /// PN-TTT of the most recent completed interval, 0 before the first one completes.
  double last_completed_pn_ttt() const {
    if (last_t_ < 0) return 0.0;
    const int done = (last_t_ + 1) / interval_;
    return done == 0 ? 0.0 : records_[static_cast<std::size_t>(done - 1)].pn_ttt;
  }

  void write_mfd_csv(std::ostream& os) const {
    os << "# " << kCsvSchema << " mfd\n";
    os << "interval_start,ttt,ttd,en_ttt,emission,link_count_std\n";
    os.precision(17);
    for (const auto& r : records_)
      os << r.interval_start << ',' << r.pn_ttt << ',' << r.pn_ttd << ',' << r.en_ttt << ',' << r.emission << ','
         << r.link_count_std << '\n';
  }

  /// Per interval and gate: mean queue (veh), mean delay of vehicles leaving the gate link (s).
  void write_gates_csv(std::ostream& os) const {
    os << "# " << kCsvSchema << " gates\n";
    os << "t,gate_id,queue,avg_delay,departures\n";
    os.precision(17);
    for (const auto& r : records_) {
      for (std::size_t g = 0; g < r.gate_queue_time.size(); ++g) {
        const double avg = r.gate_departures[g] ? r.gate_delay_sum[g] / r.gate_departures[g] : 0.0;
        os << r.interval_start << ',' << g << ',' << r.gate_queue_time[g] / interval_ << ',' << avg << ','
           << r.gate_departures[g] << '\n';
      }
    }
  }

private:
  void open_record(int start) {
    IntervalRecord r;
    r.interval_start = start;
    const auto n = net_->gate_links().size();
    r.gate_queue_time.assign(n, 0.0);
    r.gate_delay_sum.assign(n, 0.0);
    r.gate_departures.assign(n, 0);
    records_.push_back(std::move(r));
  }

  const Network* net_;
  int interval_;
  EmissionProxy emission_;
  std::vector<char> is_pn_;
  std::vector<IntervalRecord> records_;
  KpiSummary totals_;
  std::vector<double> cumulative_emission_;
  std::uint64_t negative_delays_ = 0;
  std::uint64_t gate_passages_ = 0;
  int last_t_ = -1;
};

/// Cordon queue integrated over a logged per-gate queue trace, one value per second.
inline double integrate_queue_trace(std::span<const std::vector<int>> per_second_queues) {
  double total = 0.0;
  for (const auto& row : per_second_queues)
    for (int q : row) total += q;
  return total;
}

}  // namespace pclab
