#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "pclab/controllers.hpp"
#include "pclab/demand.hpp"
#include "pclab/runner.hpp"
#include "pclab/simulation.hpp"

using namespace pclab;

namespace {

LinkId find_link(const Network& net, NodeId from, NodeId to) {
  for (const auto& l : net.links())
    if (l.from == from && l.to == to) return l.id;
  ADD_FAILURE() << "no link " << from << "->" << to;
  return -1;
}

Network small(double speed = 13.9) {
  GridSpec g;
  g.free_flow_speed = speed;
  return build_grid(3, 3, g, PnRect{1, 1, 1, 1});
}

bool any_green(const Simulation& sim, NodeId node) {
  for (MovementId m : sim.network().node(node).movements)
    if (sim.movement_green(m)) return true;
  return false;
}

}  // namespace

TEST(Simulation, SingleVehicleQueuesAfterThirtyStepsAndLeavesOnTheNextGreenSecond) {
  const auto net = small(10.0);
  const LinkId inner = find_link(net, 4, 1);  // leaves the PN at the north cordon signal
  const LinkId exit = *net.exit_at(1);
  Simulation sim(net, {Trip{0, inner, exit}});
  sim.step();  // t = 0: enters
  EXPECT_EQ(sim.count(inner), 1);
  for (int t = 1; t < 30; ++t) {
    sim.step();
    EXPECT_EQ(sim.queued(inner), 0) << "t=" << t;
  }
  sim.step();  // t = 30: reaches the stop line
  EXPECT_EQ(sim.queued(inner), 1);
  EXPECT_EQ(sim.last_sample().distance[static_cast<std::size_t>(inner)], 10.0);
  sim.step();  // t = 31: discharged, phase 0 serves the inner leg
  EXPECT_EQ(sim.count(inner), 0);
  EXPECT_EQ(sim.count(exit), 1);
  ASSERT_EQ(sim.last_events().leaves.size(), 1u);
  EXPECT_EQ(sim.last_events().leaves[0].entry_time, 0);
  EXPECT_EQ(sim.last_events().leaves[0].leave_time, 31);
}

TEST(Simulation, RedSignalHoldsTheQueueUntilGreen) {
  const auto net = small(10.0);
  const LinkId inner = find_link(net, 4, 1);
  Simulation sim(net, {Trip{0, inner, *net.exit_at(1)}});
  sim.apply_control(1, 1);  // left/right legs only
  for (int t = 0; t < 60; ++t) sim.step();
  EXPECT_EQ(sim.queued(inner), 1);
  EXPECT_TRUE(sim.apply_control(1, 2));  // PC phase: outflow only
  for (int t = 0; t < 5; ++t) {
    sim.step();
    EXPECT_EQ(sim.queued(inner), 1) << "interlock second " << t;
  }
  sim.step();
  EXPECT_EQ(sim.count(inner), 0);
}

TEST(Simulation, FullReceivingLinkBlocksDischarge) {
  // Slow traffic: the feeders reach node 4 only after the receiving link has filled.
  const auto net = small(3.0);
  const LinkId to_cordon = find_link(net, 4, 1);
  const LinkId feeder = find_link(net, 7, 4);
  ASSERT_EQ(net.link(to_cordon).storage_capacity, 80);
  std::vector<Trip> trips;
  for (int i = 0; i < 100; ++i) trips.push_back({0, to_cordon, *net.exit_at(1)});
  for (int i = 0; i < 10; ++i) trips.push_back({0, feeder, *net.exit_at(1)});
  Simulation sim(net, trips);
  sim.apply_control(1, 1);
  int late_leaves = 0;
  for (int t = 0; t < 300; ++t) {
    sim.step();
    EXPECT_LE(sim.count(to_cordon), 80);
    EXPECT_EQ(sim.check_invariants(), "");
    if (t >= 150)
      for (const auto& l : sim.last_events().leaves) late_leaves += l.link == feeder;
  }
  EXPECT_EQ(sim.count(to_cordon), 80);
  EXPECT_GT(sim.queued(feeder), 0);
  EXPECT_EQ(late_leaves, 0);
  sim.apply_control(1, 0);
  for (int t = 0; t < 3000; ++t) sim.step();
  EXPECT_EQ(sim.count(feeder), 0);
  EXPECT_EQ(sim.exited(), trips.size());
}

TEST(Simulation, RepeatingThePhaseKeepsGreen) {
  const auto net = small();
  Simulation sim(net, {});
  EXPECT_FALSE(sim.apply_control(1, 0));
  sim.step();
  EXPECT_FALSE(sim.apply_control(1, 0));
  EXPECT_TRUE(any_green(sim, 1));
  EXPECT_EQ(sim.signal(1).switches, 0u);
}

TEST(Simulation, PhaseChangeStartsFiveSecondsOfAllStop) {
  const auto net = small();
  Simulation sim(net, {});
  EXPECT_TRUE(sim.apply_control(1, 1));
  for (int t = 0; t < 5; ++t) {
    EXPECT_FALSE(any_green(sim, 1)) << t;
    sim.step();
  }
  EXPECT_TRUE(any_green(sim, 1));
  for (MovementId m : net.node(1).movements)
    EXPECT_EQ(sim.movement_green(m), net.node(1).phases[1].permits(m));
}

TEST(Simulation, AlternatingEveryActionStepNeverShowsGreen) {
  const auto net = small();
  Simulation sim(net, {});
  int green_seconds = 0;
  for (int t = 0; t < 200; ++t) {
    if (t % 5 == 0) sim.apply_control(1, (t / 5 + 1) % 2);
    green_seconds += any_green(sim, 1);
    sim.step();
  }
  EXPECT_EQ(green_seconds, 0);
}

TEST(Simulation, InvalidPhaseOrNodeIsRejected) {
  const auto net = small();
  Simulation sim(net, {});
  EXPECT_THROW(sim.apply_control(1, 3), DomainError);
  EXPECT_THROW(sim.apply_control(1, -1), DomainError);
  EXPECT_THROW(sim.apply_control(0, 0), DomainError);  // unsignalized corner
}

TEST(Simulation, ConservationAndOccupancyBoundsOnADemandRun) {
  const auto net = build_grid(5, 5, GridSpec{}, PnRect{1, 1, 3, 3});
  const auto trips = generate_demand(net, demand_profiles::demand2(450, 2.0), 15000);
  Simulation sim(net, trips);
  const FixedPlan plan;
  for (int t = 0; t < 2000; ++t) {
    for (const auto& n : net.intersections())
      if (n.is_signalized() && t % 5 == 0) sim.apply_control(n.id, fixed_plan(t, plan).phase);
    sim.step();
    ASSERT_EQ(sim.check_invariants(), "") << "t=" << t;
    ASSERT_EQ(sim.entered(), sim.exited() + sim.present());
    ASSERT_EQ(sim.entered() + sim.discarded() + sim.waiting() + sim.unreleased(), trips.size());
    for (const auto& l : net.links()) {
      ASSERT_GE(sim.occupancy(l.id), 0.0);
      ASSERT_LE(sim.occupancy(l.id), 1.0);
    }
  }
  EXPECT_GT(sim.exited(), 0u);
}

TEST(Simulation, TripsEndingInsideThePnAreConserved) {
  const auto net = small();
  const LinkId in = find_link(net, 1, 4);
  const LinkId pn_dest = find_link(net, 4, 7);
  std::vector<Trip> trips;
  for (int i = 0; i < 50; ++i) trips.push_back({i, in, pn_dest});
  Simulation sim(net, trips);
  for (int t = 0; t < 1000; ++t) {
    sim.step();
    ASSERT_EQ(sim.entered(), sim.exited() + sim.present());
  }
  EXPECT_EQ(sim.exited(), 50u);
}

TEST(Simulation, QueuesAreFirstInFirstOutPerMovement) {
  const auto net = build_grid(5, 5, GridSpec{}, PnRect{1, 1, 3, 3});
  const auto trips = generate_demand(net, demand_profiles::demand2(450, 2.0), 20000);
  Simulation sim(net, trips);
  const FixedPlan plan;
  std::map<std::pair<LinkId, LinkId>, int> last_entry;
  for (int t = 0; t < 2400; ++t) {
    if (t % 5 == 0)
      for (const auto& n : net.intersections())
        if (n.is_signalized()) sim.apply_control(n.id, fixed_plan(t, plan).phase);
    sim.step();
    for (const auto& l : sim.last_events().leaves) {
      const auto& v = sim.vehicles()[static_cast<std::size_t>(l.vehicle)];
      if (v.state == VehicleState::finished && v.link() == l.link) continue;
      const LinkId next = v.link();
      auto [it, fresh] = last_entry.try_emplace({l.link, next}, l.entry_time);
      if (!fresh) {
        EXPECT_LE(it->second, l.entry_time) << "overtaking on link " << l.link;
        it->second = l.entry_time;
      }
    }
  }
}

TEST(Simulation, GateAllowanceStopsAdmissionIntoThePn) {
  const auto net = small();
  const int gate = net.node(1).gate_index;
  const LinkId g = net.gate_links()[static_cast<std::size_t>(gate)];
  const LinkId pn_dest = find_link(net, 4, 7);
  std::vector<Trip> trips;
  for (int i = 0; i < 20; ++i) trips.push_back({i, g, pn_dest});
  Simulation sim(net, trips);
  sim.set_gate_allowance(gate, 3);
  for (int t = 0; t < 600; ++t) sim.step();
  EXPECT_EQ(sim.admitted(gate), 3u);
  EXPECT_EQ(*sim.gate_allowance(gate), 0);
  EXPECT_GT(sim.gate_queue(gate), 0);
  sim.set_gate_allowance(gate, std::nullopt);
  for (int t = 0; t < 600; ++t) sim.step();
  EXPECT_EQ(sim.admitted(gate), 20u);
}

TEST(Simulation, UnreachableDestinationIsDiscardedAndLogged) {
  const auto net = small();
  // Gate links start outside the lattice, so nothing routes onto them.
  Simulation sim(net, {Trip{0, find_link(net, 4, 1), net.gate_links()[0]}});
  sim.step();
  EXPECT_EQ(sim.discarded(), 1u);
  ASSERT_EQ(sim.diagnostics().size(), 1u);
  EXPECT_NE(sim.diagnostics()[0].find("discarded"), std::string::npos);
}

TEST(Simulation, IdenticalInputsGiveIdenticalTrajectories) {
  const auto net = build_grid(5, 5, GridSpec{}, PnRect{1, 1, 3, 3});
  const auto trips = generate_demand(net, demand_profiles::demand2(450, 3.0), 25000);
  std::ostringstream a, b;
  for (auto* os : {&a, &b}) {
    FixedController ctl;
    RunOptions opt;
    opt.horizon = 2400;
    opt.trace = os;
    run_controller(net, trips, ctl, opt);
  }
  EXPECT_EQ(a.str(), b.str());
  EXPECT_GT(a.str().size(), 1000u);
}
