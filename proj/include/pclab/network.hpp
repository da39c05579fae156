#pragma once

// Grid network topology: links, turning movements, signal phases and the
// protected-network (PN) cordon geometry.
//
// Layout convention: a rows x cols lattice of intersections, row 0 at the
// north edge. The PN is a rectangle of intersections strictly inside the
// lattice. Cordon signals are the intersections outside the PN that share a
// link with a PN intersection; each one has exactly four legs (outer/gate,
// inner/PN, and two legs parallel to the cordon).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pclab {

class GeometryError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

using LinkId = int;
using NodeId = int;
using MovementId = int;

/// Marker used for link endpoints that lie outside the lattice (sources and sinks).
inline constexpr NodeId kBoundary = -1;

enum class Heading : std::uint8_t { north = 0, east = 1, south = 2, west = 3 };

struct Offset {
  int dr = 0;
  int dc = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

constexpr Offset offset_of(Heading h) {
  switch (h) {
    case Heading::north: return {-1, 0};
    case Heading::east: return {0, 1};
    case Heading::south: return {1, 0};
    case Heading::west: return {0, -1};
  }
  return {};
}

constexpr Heading opposite(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 2) % 4); }
// Turning left while travelling with heading h (north up, row index grows southwards).
constexpr Heading left_of(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
constexpr Heading right_of(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }

constexpr const char* to_string(Heading h) {
  switch (h) {
    case Heading::north: return "N";
    case Heading::east: return "E";
    case Heading::south: return "S";
    case Heading::west: return "W";
  }
  return "?";
}

enum class MovementKind : std::uint8_t { through, left, right };
enum class CordonCrossing : std::uint8_t { none, inflow, outflow };

constexpr const char* to_string(MovementKind k) {
  switch (k) {
    case MovementKind::through: return "through";
    case MovementKind::left: return "left";
    case MovementKind::right: return "right";
  }
  return "?";
}

constexpr const char* to_string(CordonCrossing c) {
  switch (c) {
    case CordonCrossing::none: return "none";
    case CordonCrossing::inflow: return "inflow";
    case CordonCrossing::outflow: return "outflow";
  }
  return "?";
}

enum class NodeKind : std::uint8_t {
  protected_interior,  // inside the PN, fixed two-phase plan
  cordon,              // on the cordon, three phases incl. the PC phase
  signalized,          // outside the PN, fixed two-phase plan
  unsignalized         // lattice boundary, every movement always permitted
};

constexpr const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::protected_interior: return "pn";
    case NodeKind::cordon: return "cordon";
    case NodeKind::signalized: return "signal";
    case NodeKind::unsignalized: return "free";
  }
  return "?";
}

struct GridSpec {
  double inner_length = 300.0;  // m, every lattice link that is not a gate leg
  double gate_length = 1000.0;  // m, gate links and exit links
  int lanes = 2;
  double free_flow_speed = 13.9;  // m/s (50 km/h)
  double vehicle_length = 5.0;
  double min_gap = 2.5;

  double footprint() const { return vehicle_length + min_gap; }
};

struct PnRect {
  int row0 = 1;
  int col0 = 1;
  int rows = 1;
  int cols = 1;

  bool contains(int r, int c) const { return r >= row0 && r < row0 + rows && c >= col0 && c < col0 + cols; }
};

struct Link {
  LinkId id = 0;
  NodeId from = kBoundary;
  NodeId to = kBoundary;
  Heading heading = Heading::north;  // direction of travel
  double length = 0.0;
  int lanes = 1;
  double free_flow_speed = 0.0;
  int storage_capacity = 0;
  bool is_gate = false;
  bool is_inside_pn = false;
  bool is_exit = false;  // ends in a sink outside the lattice

  double free_flow_time() const { return length / free_flow_speed; }
};

struct Movement {
  MovementId id = 0;
  NodeId node = 0;
  LinkId from_link = 0;
  LinkId to_link = 0;
  MovementKind kind = MovementKind::through;
  CordonCrossing crosses_cordon = CordonCrossing::none;
};

struct Phase {
  int index = 0;
  std::vector<MovementId> green_movements;  // sorted
  bool is_pc_phase = false;

  bool permits(MovementId m) const { return std::binary_search(green_movements.begin(), green_movements.end(), m); }
};

/// Incoming legs of a cordon signal in canonical order, as seen by a driver
/// standing outside the cordon and facing the PN.
struct CordonLegs {
  LinkId outer = -1;  // the gate link
  LinkId inner = -1;  // leaves the PN
  LinkId left = -1;
  LinkId right = -1;

  std::array<LinkId, 4> as_array() const { return {outer, inner, left, right}; }
};

struct Intersection {
  NodeId id = 0;
  int row = 0;
  int col = 0;
  NodeKind kind = NodeKind::unsignalized;
  std::vector<LinkId> incoming;
  std::vector<LinkId> outgoing;
  std::vector<MovementId> movements;
  std::vector<Phase> phases;

  // Cordon-only data.
  Heading cordon_side = Heading::north;  // which edge of the PN the signal sits on
  int edge_position = -1;                // 0.. along the edge, left to right facing the PN
  CordonLegs legs;
  int gate_index = -1;

  bool is_signalized() const { return !phases.empty(); }
  int pc_phase() const {
    for (const auto& p : phases)
      if (p.is_pc_phase) return p.index;
    return -1;
  }
};

struct MovementSets {
  std::vector<MovementId> inflow;
  std::vector<MovementId> outflow;
};

struct PhaseOverlap {
  std::vector<MovementId> out_overlap;
  std::vector<MovementId> out_complement;
  std::vector<MovementId> in_overlap;
  std::vector<MovementId> in_complement;
};

class Network {
public:
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const PnRect& pn_rect() const { return pn_; }
  const GridSpec& spec() const { return spec_; }
  double footprint() const { return spec_.footprint(); }

  const std::vector<Link>& links() const { return links_; }
  const std::vector<Intersection>& intersections() const { return nodes_; }
  const std::vector<Movement>& movements() const { return movements_; }
  const std::vector<NodeId>& cordon_signals() const { return cordon_; }
  const std::vector<LinkId>& pn_links() const { return pn_links_; }
  const std::vector<LinkId>& gate_links() const { return gates_; }
  const std::vector<LinkId>& exit_links() const { return exits_; }

  const Link& link(LinkId id) const { return links_.at(static_cast<std::size_t>(id)); }
  const Intersection& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const Movement& movement(MovementId id) const { return movements_.at(static_cast<std::size_t>(id)); }

  NodeId node_at(int r, int c) const { return r * cols_ + c; }
  bool in_grid(int r, int c) const { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }

  /// Movements leaving the downstream end of `from`; empty for exit links.
  const std::vector<MovementId>& movements_from(LinkId from) const {
    return movements_by_link_.at(static_cast<std::size_t>(from));
  }

  std::optional<MovementId> movement_between(LinkId from, LinkId to) const {
    for (MovementId m : movements_from(from))
      if (movements_[static_cast<std::size_t>(m)].to_link == to) return m;
    return std::nullopt;
  }

  /// Gate index (position in gate_links()) for a link, or -1.
  int gate_index_of(LinkId id) const { return gate_index_by_link_.at(static_cast<std::size_t>(id)); }

  /// Index of a cordon signal within cordon_signals(), or -1.
  int cordon_index_of(NodeId id) const {
    auto it = std::find(cordon_.begin(), cordon_.end(), id);
    return it == cordon_.end() ? -1 : static_cast<int>(it - cordon_.begin());
  }

  /// The exit link leaving the lattice at boundary node `n`, if any.
  std::optional<LinkId> exit_at(NodeId n) const {
    for (LinkId e : exits_)
      if (links_[static_cast<std::size_t>(e)].from == n) return e;
    return std::nullopt;
  }

  /// Cordon signals on one edge, ordered by edge position.
  std::vector<NodeId> cordon_edge(Heading side) const {
    std::vector<NodeId> out;
    for (NodeId n : cordon_)
      if (nodes_[static_cast<std::size_t>(n)].cordon_side == side) out.push_back(n);
    std::sort(out.begin(), out.end(), [&](NodeId a, NodeId b) {
      return nodes_[static_cast<std::size_t>(a)].edge_position < nodes_[static_cast<std::size_t>(b)].edge_position;
    });
    return out;
  }

  /// Neighbouring cordon signals on the same edge: {left, right}; -1 where absent.
  std::array<NodeId, 2> cordon_neighbours(NodeId signal) const {
    const auto& s = node(signal);
    std::array<NodeId, 2> out{-1, -1};
    for (NodeId n : cordon_) {
      const auto& o = nodes_[static_cast<std::size_t>(n)];
      if (o.cordon_side != s.cordon_side) continue;
      if (o.edge_position == s.edge_position - 1) out[0] = n;
      if (o.edge_position == s.edge_position + 1) out[1] = n;
    }
    return out;
  }

  MovementSets movement_sets(NodeId signal) const;
  PhaseOverlap phase_overlap(const Phase& phase, NodeId signal) const;

  /// Deterministic human-readable serialisation used for golden tests and `build-net`.
  std::string to_text() const;

  friend Network build_grid(int rows, int cols, const GridSpec& spec, const PnRect& pn);

private:
  int rows_ = 0;
  int cols_ = 0;
  PnRect pn_;
  GridSpec spec_;
  std::vector<Link> links_;
  std::vector<Intersection> nodes_;
  std::vector<Movement> movements_;
  std::vector<std::vector<MovementId>> movements_by_link_;
  std::vector<int> gate_index_by_link_;
  std::vector<NodeId> cordon_;
  std::vector<LinkId> pn_links_;
  std::vector<LinkId> gates_;
  std::vector<LinkId> exits_;
};

inline int storage_capacity(double length, int lanes, double footprint) {
  return static_cast<int>(std::floor(length * lanes / footprint));
}

namespace detail {

inline bool sorted_contains(const std::vector<MovementId>& v, MovementId m) {
  return std::binary_search(v.begin(), v.end(), m);
}

inline Heading heading_between(int r0, int c0, int r1, int c1) {
  if (r1 < r0) return Heading::north;
  if (r1 > r0) return Heading::south;
  if (c1 > c0) return Heading::east;
  return Heading::west;
}

}  // namespace detail

inline Network build_grid(int rows, int cols, const GridSpec& spec, const PnRect& pn) {
  if (rows < 3 || cols < 3) throw GeometryError("grid must have at least 3 rows and 3 columns");
  if (pn.rows < 1 || pn.cols < 1) throw GeometryError("protected network must contain at least one intersection");
  if (pn.row0 < 1 || pn.col0 < 1 || pn.row0 + pn.rows > rows - 1 || pn.col0 + pn.cols > cols - 1)
    throw GeometryError("protected network rectangle must lie strictly inside the grid");
  if (!(spec.inner_length > 0) || !(spec.gate_length > 0)) throw GeometryError("link lengths must be positive");
  if (spec.lanes < 1) throw GeometryError("links need at least one lane");
  if (!(spec.free_flow_speed > 0)) throw GeometryError("free-flow speed must be positive");
  if (!(spec.footprint() > 0)) throw GeometryError("vehicle footprint must be positive");
  if (storage_capacity(std::min(spec.inner_length, spec.gate_length), spec.lanes, spec.footprint()) < 1)
    throw GeometryError("links too short to store a single vehicle");

  Network net;
  net.rows_ = rows;
  net.cols_ = cols;
  net.pn_ = pn;
  net.spec_ = spec;

  auto on_boundary = [&](int r, int c) { return r == 0 || c == 0 || r == rows - 1 || c == cols - 1; };
  auto is_corner = [&](int r, int c) { return (r == 0 || r == rows - 1) && (c == 0 || c == cols - 1); };

  // Classify intersections.
  net.nodes_.resize(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto& n = net.nodes_[static_cast<std::size_t>(net.node_at(r, c))];
      n.id = net.node_at(r, c);
      n.row = r;
      n.col = c;
      if (pn.contains(r, c)) {
        n.kind = NodeKind::protected_interior;
        continue;
      }
      bool touches_pn = false;
      for (int h = 0; h < 4; ++h) {
        const auto o = offset_of(static_cast<Heading>(h));
        if (pn.contains(r + o.dr, c + o.dc)) {
          touches_pn = true;
          // The PN lies in direction h, so the signal sits on the opposite side.
          n.cordon_side = opposite(static_cast<Heading>(h));
        }
      }
      if (touches_pn)
        n.kind = NodeKind::cordon;
      else if (on_boundary(r, c))
        n.kind = NodeKind::unsignalized;
      else
        n.kind = NodeKind::signalized;
    }
  }

  auto node_kind = [&](int r, int c) { return net.nodes_[static_cast<std::size_t>(net.node_at(r, c))].kind; };
  auto in_pn_or_cordon = [&](NodeId id) {
    const auto k = net.nodes_[static_cast<std::size_t>(id)].kind;
    return k == NodeKind::protected_interior || k == NodeKind::cordon;
  };
  auto in_pn = [&](NodeId id) { return net.nodes_[static_cast<std::size_t>(id)].kind == NodeKind::protected_interior; };

  // Outer neighbour of a cordon signal, i.e. the intersection the gate link starts from.
  auto is_gate_pair = [&](int r0, int c0, int r1, int c1) {
    if (node_kind(r1, c1) != NodeKind::cordon) return false;
    const auto& tgt = net.nodes_[static_cast<std::size_t>(net.node_at(r1, c1))];
    const auto o = offset_of(tgt.cordon_side);
    return r0 == r1 + o.dr && c0 == c1 + o.dc;
  };

  auto add_link = [&](NodeId from, NodeId to, Heading heading, double length) -> Link& {
    Link l;
    l.id = static_cast<LinkId>(net.links_.size());
    l.from = from;
    l.to = to;
    l.heading = heading;
    l.length = length;
    l.lanes = spec.lanes;
    l.free_flow_speed = spec.free_flow_speed;
    l.storage_capacity = storage_capacity(length, spec.lanes, spec.footprint());
    net.links_.push_back(l);
    return net.links_.back();
  };

  // Lattice links, row-major over origins, N/E/S/W per origin.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      for (int h = 0; h < 4; ++h) {
        const auto heading = static_cast<Heading>(h);
        const auto o = offset_of(heading);
        const int r1 = r + o.dr, c1 = c + o.dc;
        if (!net.in_grid(r1, c1)) continue;
        const bool gate_leg = is_gate_pair(r, c, r1, c1) || is_gate_pair(r1, c1, r, c);
        auto& l = add_link(net.node_at(r, c), net.node_at(r1, c1), heading,
                           gate_leg ? spec.gate_length : spec.inner_length);
        l.is_gate = is_gate_pair(r, c, r1, c1);
        l.is_inside_pn = in_pn_or_cordon(l.from) && in_pn_or_cordon(l.to) && (in_pn(l.from) || in_pn(l.to));
      }
    }
  }

  // Cordon signals: N edge, S edge, W edge, E edge; ascending column/row within an edge.
  std::vector<NodeId> ordered;
  for (Heading side : {Heading::north, Heading::south, Heading::west, Heading::east}) {
    std::vector<NodeId> edge;
    for (const auto& n : net.nodes_)
      if (n.kind == NodeKind::cordon && n.cordon_side == side) edge.push_back(n.id);
    std::sort(edge.begin(), edge.end(), [&](NodeId a, NodeId b) {
      const auto& na = net.nodes_[static_cast<std::size_t>(a)];
      const auto& nb = net.nodes_[static_cast<std::size_t>(b)];
      return (side == Heading::north || side == Heading::south) ? na.col < nb.col : na.row < nb.row;
    });
    ordered.insert(ordered.end(), edge.begin(), edge.end());
  }
  net.cordon_ = ordered;

  // Gate links in cordon order; external source links where the cordon signal is on the lattice boundary.
  for (NodeId s : net.cordon_) {
    auto& n = net.nodes_[static_cast<std::size_t>(s)];
    const auto o = offset_of(n.cordon_side);
    const int r0 = n.row + o.dr, c0 = n.col + o.dc;
    LinkId gate = -1;
    if (net.in_grid(r0, c0)) {
      for (const auto& l : net.links_)
        if (l.from == net.node_at(r0, c0) && l.to == s) gate = l.id;
    } else {
      auto& l = add_link(kBoundary, s, opposite(n.cordon_side), spec.gate_length);
      l.is_gate = true;
      gate = l.id;
    }
    n.gate_index = static_cast<int>(net.gates_.size());
    net.gates_.push_back(gate);
  }

  // Exit links at every non-corner boundary intersection.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!on_boundary(r, c) || is_corner(r, c)) continue;
      Heading out = r == 0 ? Heading::north : r == rows - 1 ? Heading::south : c == 0 ? Heading::west : Heading::east;
      auto& l = add_link(net.node_at(r, c), kBoundary, out, spec.gate_length);
      l.is_exit = true;
      net.exits_.push_back(l.id);
    }
  }

  for (const auto& l : net.links_) {
    if (l.from != kBoundary) net.nodes_[static_cast<std::size_t>(l.from)].outgoing.push_back(l.id);
    if (l.to != kBoundary) net.nodes_[static_cast<std::size_t>(l.to)].incoming.push_back(l.id);
    if (l.is_inside_pn) net.pn_links_.push_back(l.id);
  }
  net.gate_index_by_link_.assign(net.links_.size(), -1);
  for (std::size_t g = 0; g < net.gates_.size(); ++g)
    net.gate_index_by_link_[static_cast<std::size_t>(net.gates_[g])] = static_cast<int>(g);

  // Movements: every incoming/outgoing pair at a node except U-turns.
  net.movements_by_link_.assign(net.links_.size(), {});
  for (auto& n : net.nodes_) {
    for (LinkId in : n.incoming) {
      for (LinkId out : n.outgoing) {
        const auto& li = net.links_[static_cast<std::size_t>(in)];
        const auto& lo = net.links_[static_cast<std::size_t>(out)];
        if (lo.heading == opposite(li.heading)) continue;
        Movement m;
        m.id = static_cast<MovementId>(net.movements_.size());
        m.node = n.id;
        m.from_link = in;
        m.to_link = out;
        m.kind = lo.heading == li.heading ? MovementKind::through
                 : lo.heading == left_of(li.heading) ? MovementKind::left
                                                     : MovementKind::right;
        if (!li.is_inside_pn && lo.is_inside_pn)
          m.crosses_cordon = CordonCrossing::inflow;
        else if (li.is_inside_pn && !lo.is_inside_pn)
          m.crosses_cordon = CordonCrossing::outflow;
        net.movements_.push_back(m);
        n.movements.push_back(m.id);
        net.movements_by_link_[static_cast<std::size_t>(in)].push_back(m.id);
      }
    }
  }

  // Phase tables.
  auto movements_from_links = [&](const Intersection& n, std::initializer_list<LinkId> from) {
    std::vector<MovementId> out;
    for (MovementId m : n.movements) {
      const auto& mv = net.movements_[static_cast<std::size_t>(m)];
      if (std::find(from.begin(), from.end(), mv.from_link) != from.end()) out.push_back(m);
    }
    std::sort(out.begin(), out.end());
    return out;
  };

  for (auto& n : net.nodes_) {
    if (n.kind == NodeKind::cordon) {
      const Heading inward = opposite(n.cordon_side);
      auto incoming_from = [&](Heading towards_neighbour) {
        const auto o = offset_of(towards_neighbour);
        const NodeId nb = net.in_grid(n.row + o.dr, n.col + o.dc) ? net.node_at(n.row + o.dr, n.col + o.dc) : kBoundary;
        for (LinkId l : n.incoming) {
          const auto& link = net.links_[static_cast<std::size_t>(l)];
          if (link.from == nb && link.heading == opposite(towards_neighbour)) return l;
        }
        return LinkId{-1};
      };
      n.legs.outer = incoming_from(n.cordon_side);
      n.legs.inner = incoming_from(inward);
      n.legs.left = incoming_from(left_of(inward));
      n.legs.right = incoming_from(right_of(inward));
      if (n.legs.outer < 0 || n.legs.inner < 0 || n.legs.left < 0 || n.legs.right < 0)
        throw GeometryError("cordon signal without four legs at row " + std::to_string(n.row) + ", col " +
                            std::to_string(n.col));
      n.phases.push_back({0, movements_from_links(n, {n.legs.outer, n.legs.inner}), false});
      n.phases.push_back({1, movements_from_links(n, {n.legs.left, n.legs.right}), false});
      n.phases.push_back({2, movements_from_links(n, {n.legs.inner}), true});
    } else if (n.kind == NodeKind::protected_interior || n.kind == NodeKind::signalized) {
      std::vector<MovementId> vertical, horizontal;
      for (MovementId m : n.movements) {
        const auto h = net.links_[static_cast<std::size_t>(net.movements_[static_cast<std::size_t>(m)].from_link)].heading;
        (h == Heading::north || h == Heading::south ? vertical : horizontal).push_back(m);
      }
      n.phases.push_back({0, vertical, false});
      n.phases.push_back({1, horizontal, false});
    }
  }

  // Edge positions, left to right for an observer facing the PN.
  for (Heading side : {Heading::north, Heading::south, Heading::west, Heading::east}) {
    std::vector<NodeId> edge;
    for (NodeId s : net.cordon_)
      if (net.nodes_[static_cast<std::size_t>(s)].cordon_side == side) edge.push_back(s);
    const auto right = offset_of(right_of(opposite(side)));
    std::sort(edge.begin(), edge.end(), [&](NodeId a, NodeId b) {
      const auto& na = net.nodes_[static_cast<std::size_t>(a)];
      const auto& nb = net.nodes_[static_cast<std::size_t>(b)];
      return na.row * right.dr + na.col * right.dc < nb.row * right.dr + nb.col * right.dc;
    });
    for (std::size_t i = 0; i < edge.size(); ++i)
      net.nodes_[static_cast<std::size_t>(edge[i])].edge_position = static_cast<int>(i);
  }

  return net;
}

inline MovementSets Network::movement_sets(NodeId signal) const {
  if (signal < 0 || signal >= static_cast<NodeId>(nodes_.size()) || node(signal).kind != NodeKind::cordon)
    throw DomainError("movement sets are only defined for cordon signals (node " + std::to_string(signal) + ")");
  MovementSets out;
  for (MovementId m : node(signal).movements) {
    const auto c = movement(m).crosses_cordon;
    if (c == CordonCrossing::inflow) out.inflow.push_back(m);
    if (c == CordonCrossing::outflow) out.outflow.push_back(m);
  }
  return out;
}

inline PhaseOverlap Network::phase_overlap(const Phase& phase, NodeId signal) const {
  const auto sets = movement_sets(signal);
  const auto& phases = node(signal).phases;
  if (phase.index < 0 || phase.index >= static_cast<int>(phases.size()) ||
      phases[static_cast<std::size_t>(phase.index)].green_movements != phase.green_movements)
    throw DomainError("phase does not belong to signal " + std::to_string(signal));
  PhaseOverlap out;
  for (MovementId m : sets.outflow)
    (phase.permits(m) ? out.out_overlap : out.out_complement).push_back(m);
  for (MovementId m : sets.inflow)
    (phase.permits(m) ? out.in_overlap : out.in_complement).push_back(m);
  return out;
}

inline std::string Network::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "pclab-network 1\n";
  os << "grid " << rows_ << ' ' << cols_ << '\n';
  os << "pn " << pn_.row0 << ' ' << pn_.col0 << ' ' << pn_.rows << ' ' << pn_.cols << '\n';
  os << "footprint " << footprint() << '\n';
  for (const auto& n : nodes_) {
    os << "node " << n.id << ' ' << n.row << ' ' << n.col << ' ' << to_string(n.kind);
    if (n.kind == NodeKind::cordon)
      os << " side=" << to_string(n.cordon_side) << " pos=" << n.edge_position << " gate=" << n.gate_index
         << " legs=" << n.legs.outer << ',' << n.legs.inner << ',' << n.legs.left << ',' << n.legs.right;
    os << '\n';
  }
  for (const auto& l : links_) {
    os << "link " << l.id << ' ' << l.from << ' ' << l.to << ' ' << to_string(l.heading) << ' ' << l.length << ' '
       << l.lanes << ' ' << l.free_flow_speed << ' ' << l.storage_capacity << (l.is_gate ? " gate" : "")
       << (l.is_inside_pn ? " pn" : "") << (l.is_exit ? " exit" : "") << '\n';
  }
  for (const auto& m : movements_) {
    os << "movement " << m.id << ' ' << m.node << ' ' << m.from_link << ' ' << m.to_link << ' ' << to_string(m.kind)
       << ' ' << to_string(m.crosses_cordon) << '\n';
  }
  for (const auto& n : nodes_) {
    for (const auto& p : n.phases) {
      os << "phase " << n.id << ' ' << p.index << (p.is_pc_phase ? " pc" : " local");
      for (MovementId m : p.green_movements) os << ' ' << m;
      os << '\n';
    }
  }
  os << "gates";
  for (LinkId g : gates_) os << ' ' << g;
  os << "\ncordon";
  for (NodeId s : cordon_) os << ' ' << s;
  os << '\n';
  return os.str();
}

}  // namespace pclab
