#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pclab/demand.hpp"
#include "pclab/routing.hpp"
#include "support/oracles.hpp"

using namespace pclab;

namespace {

Network desk() { return build_grid(5, 5, GridSpec{}, PnRect{1, 1, 3, 3}); }

std::vector<double> free_flow_costs(const Network& net) {
  std::vector<double> c;
  for (const auto& l : net.links()) c.push_back(l.free_flow_time());
  return c;
}

}  // namespace

TEST(Demand, SameSeedGivesIdenticalTripTables) {
  const auto net = desk();
  const auto s = demand_profiles::demand2(450, 1.0);
  const auto a = generate_demand(net, s, 15000);
  const auto b = generate_demand(net, s, 15000);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a.empty());
  EXPECT_NE(a, generate_demand(net, s, 20000));
}

TEST(Demand, DegenerateRateGivesThatManyDepartures) {
  const auto net = desk();
  for (double rate : {900.0, 1000.0, 1234.0}) {
    const auto trips = generate_demand(net, demand_profiles::uniform(2, 1200, {rate, rate}), 3);
    // Every trip, internal ones included, belongs to exactly one gate's arrival stream.
    const auto total = static_cast<double>(trips.size());
    const double expected = rate / 3.0 * static_cast<double>(net.gate_links().size()) * 2;
    EXPECT_NEAR(total, expected, static_cast<double>(net.gate_links().size()) * 2) << "rate " << rate;
  }
}

TEST(Demand, RealisedRatesStayInsideTheirRange) {
  const auto net = build_grid(3, 3, GridSpec{}, PnRect{1, 1, 1, 1});
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto trips = generate_demand(net, demand_profiles::uniform(1, 1200, {1200, 1440}), seed);
    EXPECT_GE(trips.size(), 4u * 400u - 4u);
    EXPECT_LE(trips.size(), 4u * 480u + 4u);
  }
}

TEST(Demand, DeparturesAreSortedAndInsideTheHorizon) {
  const auto net = desk();
  const auto s = demand_profiles::demand1(450, 1.0);
  const auto trips = generate_demand(net, s, 7);
  for (std::size_t i = 1; i < trips.size(); ++i) EXPECT_LE(trips[i - 1].departure, trips[i].departure);
  for (const auto& t : trips) {
    EXPECT_GE(t.departure, 0);
    EXPECT_LT(t.departure, s.horizon());
    EXPECT_NE(t.origin, t.destination);
  }
}

TEST(Demand, EmptyScheduleIsRejected) {
  DemandSchedule s;
  EXPECT_THROW(s.validate(), DemandError);
  EXPECT_THROW(generate_demand(desk(), s, 1), DemandError);
  auto bad = demand_profiles::uniform(2, 100, {10, 5});
  EXPECT_THROW(bad.validate(), DemandError);
}

TEST(Demand, TripTableRoundTrips) {
  const auto net = desk();
  const auto trips = generate_demand(net, demand_profiles::demand2(450, 1.0), 11);
  std::stringstream ss;
  write_trips_csv(ss, trips);
  EXPECT_EQ(read_trips_csv(ss, &net), trips);
  std::stringstream bad("departure_s,origin_link,destination_link\n1,2\n");
  EXPECT_THROW(read_trips_csv(bad, &net), DemandError);
}

TEST(Routing, StraightLineOnAnEmptyNetwork) {
  const auto net = desk();
  const auto costs = free_flow_costs(net);
  // Gate of signal 1 (north edge) southbound to the exit at the bottom of column 1.
  const LinkId gate = net.node(1).legs.outer;
  const LinkId exit = *net.exit_at(21);
  const auto path = route(net, gate, exit, costs);
  ASSERT_FALSE(path.empty());
  EXPECT_EQ(path.front(), gate);
  EXPECT_EQ(path.back(), exit);
  for (std::size_t i = 1; i + 1 < path.size(); ++i) EXPECT_EQ(net.link(path[i]).heading, Heading::south);
}

TEST(Routing, CongestedLinkForcesADetour) {
  const auto net = desk();
  auto costs = free_flow_costs(net);
  const LinkId gate = net.node(1).legs.outer;
  const LinkId exit = *net.exit_at(21);
  const auto straight = route(net, gate, exit, costs);
  const LinkId blocked = straight[2];
  costs[static_cast<std::size_t>(blocked)] += 1000.0;
  const auto detour = route(net, gate, exit, costs);
  EXPECT_EQ(std::find(detour.begin(), detour.end(), blocked), detour.end());
  const auto oracle_best = oracle::brute_force_route(net, gate, exit, costs);
  EXPECT_EQ(detour, oracle_best.path);
}

TEST(Routing, MatchesExhaustiveEnumerationOnRandomCosts) {
  const auto net = build_grid(4, 4, GridSpec{}, PnRect{1, 1, 2, 2});
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> pick(0, net.links().size() - 1);
  for (int inst = 0; inst < 40; ++inst) {
    std::vector<double> costs(net.links().size());
    if (inst % 2 == 0) {
      std::uniform_real_distribution<double> u(1.0, 50.0);
      for (auto& c : costs) c = u(rng);
    } else {
      std::uniform_int_distribution<int> u(1, 3);  // many ties
      for (auto& c : costs) c = u(rng);
    }
    LinkId o = static_cast<LinkId>(pick(rng)), d = static_cast<LinkId>(pick(rng));
    while (net.movements_from(o).empty()) o = static_cast<LinkId>(pick(rng));
    const auto want = oracle::brute_force_route(net, o, d, costs);
    if (want.path.empty()) {
      EXPECT_THROW(route(net, o, d, costs), RoutingError);
      continue;
    }
    const auto got = route(net, o, d, costs);
    EXPECT_EQ(path_cost(got, costs), want.cost);
    EXPECT_EQ(got, want.path) << "instance " << inst;
  }
}

TEST(Routing, UnreachableDestinationAndBadInput) {
  const auto net = desk();
  const auto costs = free_flow_costs(net);
  const LinkId exit = net.exit_links().front();
  EXPECT_THROW(route(net, exit, net.gate_links().front(), costs), RoutingError);
  EXPECT_THROW(route(net, 0, 1, std::vector<double>(3, 1.0)), RoutingError);
  EXPECT_THROW(route(net, -1, 1, costs), RoutingError);
}
