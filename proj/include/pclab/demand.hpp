#pragma once

// Gate demand: per-window rate ranges, realised rates, deterministic departure
// spacing, destination split, and the trip-table CSV exchange format.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pclab/network.hpp"

namespace pclab {

class DemandError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct RateRange {
  double lo = 0.0;  // veh/h
  double hi = 0.0;
};

struct DemandWindow {
  double start = 0.0;  // s
  double end = 0.0;
};

struct DestinationSplit {
  double into_pn = 0.27;   // gate -> PN link
  double across = 0.63;    // gate -> exit on the far side of the lattice
  double internal = 0.10;  // PN inflow link -> PN link
  double turning_share = 1.0 / 3.0;  // share of `across` trips sent to a random exit instead
};

/// Per side of the cordon and per window, either one range shared by every
/// gate on that side, or a list of ranges that is shuffled over the side's
/// gates at the start of each window.
struct DemandSchedule {
  std::vector<DemandWindow> windows;
  std::array<std::vector<std::vector<RateRange>>, 4> by_side;  // indexed by Heading of the cordon side
  DestinationSplit split;

  double horizon() const { return windows.empty() ? 0.0 : windows.back().end; }

  void validate() const {
    if (windows.empty()) throw DemandError("demand schedule has no windows");
    double t = 0.0;
    for (const auto& w : windows) {
      if (w.start != t || !(w.end > w.start)) throw DemandError("demand windows must tile [0, horizon] without overlap");
      t = w.end;
    }
    for (int s = 0; s < 4; ++s) {
      const auto& side = by_side[static_cast<std::size_t>(s)];
      if (side.size() != windows.size())
        throw DemandError(std::string("side ") + to_string(static_cast<Heading>(s)) + " needs one entry per window");
      for (const auto& ranges : side) {
        if (ranges.empty()) throw DemandError("empty rate list in demand schedule");
        for (const auto& r : ranges)
          if (r.lo < 0 || r.hi < r.lo) throw DemandError("rate range must satisfy 0 <= lo <= hi");
      }
    }
    const double sum = split.into_pn + split.across + split.internal;
    if (std::abs(sum - 1.0) > 1e-9 || split.into_pn < 0 || split.across < 0 || split.internal < 0)
      throw DemandError("destination fractions must be nonnegative and sum to 1");
    if (split.turning_share < 0 || split.turning_share > 1) throw DemandError("turning share must lie in [0, 1]");
  }
};

struct Trip {
  int departure = 0;  // s
  LinkId origin = 0;
  LinkId destination = 0;
  friend bool operator==(const Trip&, const Trip&) = default;
};

namespace demand_profiles {

inline std::vector<DemandWindow> tiled_windows(int count, double length) {
  std::vector<DemandWindow> w;
  for (int i = 0; i < count; ++i) w.push_back({i * length, (i + 1) * length});
  return w;
}

inline RateRange scaled(RateRange r, double s) { return {r.lo * s, r.hi * s}; }

/// Direction-wise ranges that rotate across four windows.
inline DemandSchedule demand1(double window_length = 1200.0, double scale = 1.0) {
  const RateRange a{1200, 1440}, b{1080, 1320}, c{960, 1140}, d{810, 990};
  DemandSchedule s;
  s.windows = tiled_windows(4, window_length);
  auto set = [&](Heading h, std::array<RateRange, 4> rs) {
    auto& side = s.by_side[static_cast<std::size_t>(h)];
    for (auto r : rs) side.push_back({scaled(r, scale)});
  };
  set(Heading::north, {a, b, c, d});
  set(Heading::south, {d, c, b, a});
  set(Heading::west, {c, a, d, b});
  set(Heading::east, {b, d, a, c});
  return s;
}

/// Five ranges per side, reshuffled over that side's gates every window.
inline DemandSchedule demand2(double window_length = 1200.0, double scale = 1.0) {
  const RateRange e{680, 820}, d{810, 990}, c{960, 1140}, b{1080, 1320}, a{1200, 1440};
  DemandSchedule s;
  s.windows = tiled_windows(4, window_length);
  auto set = [&](Heading h, std::vector<RateRange> rs) {
    for (auto& r : rs) r = scaled(r, scale);
    s.by_side[static_cast<std::size_t>(h)].assign(4, rs);
  };
  set(Heading::north, {e, d, c, b, a});
  set(Heading::south, {d, e, b, a, c});
  set(Heading::west, {c, b, a, e, d});
  set(Heading::east, {b, a, e, d, c});
  return s;
}

/// Same range at every gate in every window.
inline DemandSchedule uniform(int windows, double window_length, RateRange r) {
  DemandSchedule s;
  s.windows = tiled_windows(windows, window_length);
  for (auto& side : s.by_side) side.assign(static_cast<std::size_t>(windows), {r});
  return s;
}

/// Linearly increasing exact rates, used to sweep the network through its MFD.
inline DemandSchedule ramp(int windows, double window_length, double from_rate, double to_rate) {
  DemandSchedule s;
  s.windows = tiled_windows(windows, window_length);
  for (auto& side : s.by_side) {
    for (int i = 0; i < windows; ++i) {
      const double r = windows == 1 ? from_rate : from_rate + (to_rate - from_rate) * i / (windows - 1);
      side.push_back({{r, r}});
    }
  }
  return s;
}

}  // namespace demand_profiles

namespace detail {

/// Link from a cordon signal into the PN.
inline LinkId pn_entry_link(const Network& net, NodeId signal) {
  const auto& n = net.node(signal);
  const Heading inward = opposite(n.cordon_side);
  for (LinkId l : n.outgoing)
    if (net.link(l).heading == inward) return l;
  throw GeometryError("cordon signal without PN entry link");
}

/// Exit on the lattice boundary reached by walking from `signal` in direction h.
inline LinkId exit_towards(const Network& net, NodeId signal, Heading h) {
  const auto& n = net.node(signal);
  const auto o = offset_of(h);
  int r = n.row, c = n.col;
  while (net.in_grid(r + o.dr, c + o.dc)) {
    r += o.dr;
    c += o.dc;
  }
  const auto e = net.exit_at(net.node_at(r, c));
  if (!e) throw GeometryError("no exit link at the lattice boundary");
  return *e;
}

}  // namespace detail

/// Realises a schedule on a network. Deterministic for a given seed.
inline std::vector<Trip> generate_demand(const Network& net, const DemandSchedule& schedule, std::uint64_t seed) {
  schedule.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto& pn_links = net.pn_links();
  const auto& exits = net.exit_links();
  if (pn_links.empty()) throw DemandError("network has no PN links");

  auto pick = [&](const std::vector<LinkId>& from, LinkId exclude) {
    std::vector<LinkId> pool;
    for (LinkId l : from)
      if (l != exclude) pool.push_back(l);
    std::uniform_int_distribution<std::size_t> idx(0, pool.size() - 1);
    return pool[idx(rng)];
  };

  std::vector<Trip> trips;
  for (std::size_t w = 0; w < schedule.windows.size(); ++w) {
    const auto& win = schedule.windows[w];
    for (Heading side : {Heading::north, Heading::south, Heading::west, Heading::east}) {
      auto ranges = schedule.by_side[static_cast<std::size_t>(side)][w];
      if (ranges.size() > 1) std::shuffle(ranges.begin(), ranges.end(), rng);
      // Gates in cordon order (ascending column/row), matching gate numbering.
      std::vector<NodeId> ordered;
      for (NodeId s : net.cordon_signals())
        if (net.node(s).cordon_side == side) ordered.push_back(s);
      for (std::size_t j = 0; j < ordered.size(); ++j) {
        const NodeId signal = ordered[j];
        const auto& node = net.node(signal);
        const LinkId gate = net.gate_links()[static_cast<std::size_t>(node.gate_index)];
        const RateRange r = ranges[j % ranges.size()];
        const double rate = r.lo == r.hi ? r.lo : r.lo + (r.hi - r.lo) * unit(rng);
        if (!(rate > 0)) continue;
        const double headway = 3600.0 / rate;
        const LinkId own_exit = detail::exit_towards(net, signal, side);
        const LinkId far_exit = detail::exit_towards(net, signal, opposite(side));
        const LinkId entry = detail::pn_entry_link(net, signal);
        for (int i = 0;; ++i) {
          const double t = win.start + (i + 0.5) * headway;
          if (t >= win.end) break;
          Trip trip;
          trip.departure = static_cast<int>(std::floor(t));
          const double u = unit(rng);
          if (u < schedule.split.into_pn) {
            trip.origin = gate;
            trip.destination = pick(pn_links, -1);
          } else if (u < schedule.split.into_pn + schedule.split.across) {
            trip.origin = gate;
            trip.destination = unit(rng) < schedule.split.turning_share ? pick(exits, own_exit) : far_exit;
          } else {
            trip.origin = entry;
            trip.destination = pick(pn_links, entry);
          }
          trips.push_back(trip);
        }
      }
    }
  }
  std::stable_sort(trips.begin(), trips.end(), [](const Trip& a, const Trip& b) { return a.departure < b.departure; });
  return trips;
}

inline void write_trips_csv(std::ostream& os, const std::vector<Trip>& trips) {
  os << "departure_s,origin_link,destination_link\n";
  for (const auto& t : trips) os << t.departure << ',' << t.origin << ',' << t.destination << '\n';
}

inline std::vector<Trip> read_trips_csv(std::istream& is, const Network* net = nullptr) {
  std::string line;
  if (!std::getline(is, line) || line != "departure_s,origin_link,destination_link")
    throw DemandError("trip table: missing or unexpected header");
  std::vector<Trip> trips;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Trip t;
    char c1 = 0, c2 = 0;
    if (!(ls >> t.departure >> c1 >> t.origin >> c2 >> t.destination) || c1 != ',' || c2 != ',')
      throw DemandError("trip table: malformed row at line " + std::to_string(line_no));
    if (net) {
      const auto n = static_cast<LinkId>(net->links().size());
      if (t.origin < 0 || t.origin >= n || t.destination < 0 || t.destination >= n)
        throw DemandError("trip table: unknown link at line " + std::to_string(line_no));
    }
    trips.push_back(t);
  }
  return trips;
}

}  // namespace pclab
