#pragma once

// Fastest-path routing over the link graph (U-turns excluded).
//
// Path cost is the sum of per-link costs including the origin link. Ties are
// broken by fewest links, then by the lexicographically smallest link-id
// sequence. That order is preserved under path extension, so label-setting
// Dijkstra on full labels returns the unique minimum.

#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pclab/network.hpp"

namespace pclab {

class RoutingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct RouteLabel {
  double cost = std::numeric_limits<double>::infinity();
  int hops = 0;
  std::vector<LinkId> path;

  /// Strict total order: cost, then hop count, then link sequence.
  friend bool operator<(const RouteLabel& a, const RouteLabel& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.hops != b.hops) return a.hops < b.hops;
    return a.path < b.path;
  }
};

inline std::vector<LinkId> route(const Network& net, LinkId origin, LinkId destination, std::span<const double> costs) {
  const auto n = net.links().size();
  if (costs.size() != n) throw RoutingError("cost vector size does not match link count");
  if (origin < 0 || origin >= static_cast<LinkId>(n) || destination < 0 || destination >= static_cast<LinkId>(n))
    throw RoutingError("unknown origin or destination link");

  std::vector<RouteLabel> best(n);
  std::vector<char> settled(n, 0);
  auto worse = [](const RouteLabel& a, const RouteLabel& b) { return b < a; };
  std::priority_queue<RouteLabel, std::vector<RouteLabel>, decltype(worse)> open(worse);

  best[static_cast<std::size_t>(origin)] = {costs[static_cast<std::size_t>(origin)], 1, {origin}};
  open.push(best[static_cast<std::size_t>(origin)]);
  while (!open.empty()) {
    RouteLabel cur = open.top();
    open.pop();
    const LinkId at = cur.path.back();
    if (settled[static_cast<std::size_t>(at)]) continue;
    settled[static_cast<std::size_t>(at)] = 1;
    if (at == destination) return cur.path;
    for (MovementId m : net.movements_from(at)) {
      const LinkId next = net.movement(m).to_link;
      if (settled[static_cast<std::size_t>(next)]) continue;
      RouteLabel cand{cur.cost + costs[static_cast<std::size_t>(next)], cur.hops + 1, cur.path};
      cand.path.push_back(next);
      if (cand < best[static_cast<std::size_t>(next)]) {
        best[static_cast<std::size_t>(next)] = cand;
        open.push(std::move(cand));
      }
    }
  }
  throw RoutingError("destination link " + std::to_string(destination) + " unreachable from link " +
                     std::to_string(origin));
}

/// Sum of link costs along a path, accumulated in path order.
inline double path_cost(std::span<const LinkId> path, std::span<const double> costs) {
  double c = 0.0;
  for (LinkId l : path) c += costs[static_cast<std::size_t>(l)];
  return c;
}

}  // namespace pclab
