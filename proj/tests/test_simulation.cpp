#include <gtest/gtest.h>

#include "support.hpp"

using namespace mealrl;

namespace {

World open_world(int couriers = 1, int max_queue = 3) {
  World w(fixtures::example_region(), default_hourly_profile(), {couriers, max_queue});
  w.begin_day({}, 0);
  w.set_clock(600);
  return w;
}

int add_order(World& w, GridCoord origin, GridCoord dest, int prep, int placed = -1) {
  Order o;
  o.origin = origin;
  o.destination = dest;
  o.prep_time = prep;
  o.placed_minute = placed < 0 ? w.clock() : placed;
  return w.inject_order(o);
}

// Ticks until the courier's queue empties; returns elapsed minutes.
int run_until_empty(World& w, int courier) {
  int minutes = 0;
  while (!w.courier(courier).queue.empty()) {
    w.tick();
    ++minutes;
    if (minutes > 10000) throw std::runtime_error("courier never finished");
  }
  return minutes;
}

GridCoord random_cell(Rng& rng, const RegionConfig& r) {
  return {std::uniform_int_distribution<int>(0, r.height - 1)(rng),
          std::uniform_int_distribution<int>(0, r.width - 1)(rng)};
}

}  // namespace

TEST(TimeToFinishQueue, IdleCourierIsZero) {
  auto w = open_world();
  EXPECT_EQ(time_to_finish_queue(w, 0), 0);
}

TEST(TimeToFinishQueue, WorkedExampleCourierMidDelivery) {
  auto scene = fixtures::example_assignment_scene();
  EXPECT_EQ(time_to_finish_queue(scene.world, 0), 2);
  EXPECT_EQ(time_to_finish_queue(scene.world, 1), 0);
}

TEST(TimeToFinishQueue, MatchesForwardSimulationOnRandomQueues) {
  Rng rng(17);
  const auto region = fixtures::example_region();
  for (int trial = 0; trial < 2000; ++trial) {
    auto w = open_world();
    w.courier_mut(0).position = random_cell(rng, region);
    const int n = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int k = 0; k < n; ++k) {
      const int placed = 600 - std::uniform_int_distribution<int>(0, 12)(rng);
      const int id = add_order(w, random_cell(rng, region), random_cell(rng, region),
                               std::uniform_int_distribution<int>(5, 15)(rng), placed);
      w.assign(0, id);
    }
    // check from a random point partway through the queue as well
    const int warmup = std::uniform_int_distribution<int>(0, 8)(rng);
    for (int i = 0; i < warmup && !w.courier(0).queue.empty(); ++i) w.tick();
    const int predicted = time_to_finish_queue(w, 0);
    ASSERT_EQ(predicted, run_until_empty(w, 0)) << "trial " << trial;
  }
}

TEST(ExpectedDeliveryTime, WorkedExampleValues) {
  auto scene = fixtures::example_assignment_scene();
  const int o2 = scene.event.order_id;
  EXPECT_EQ(expected_delivery_time(scene.world, 0, o2), 10);
  EXPECT_EQ(expected_delivery_time(scene.world, 1, o2), 11);
}

TEST(ExpectedDeliveryTime, CourierAtRestaurantWaitsForPrep) {
  auto w = open_world();
  w.courier_mut(0).position = {1, 1};
  const int id = add_order(w, {1, 1}, {4, 4}, 9);
  EXPECT_EQ(expected_delivery_time(w, 0, id), 6 + 9);
}

TEST(ExpectedDeliveryTime, LocationOfAvailabilityIsLastQueuedCustomer) {
  auto scene = fixtures::example_assignment_scene();
  const auto& c1 = scene.world.courier(0);
  EXPECT_EQ(scene.world.location_of_availability(c1), (GridCoord{0, 3}));
  EXPECT_EQ(scene.world.location_of_availability(scene.world.courier(1)), (GridCoord{5, 4}));
}

TEST(RealizedDelivery, EqualsExpectedForLoneAssignments) {
  Rng rng(23);
  const auto region = fixtures::example_region();
  for (int trial = 0; trial < 1000; ++trial) {
    auto w = open_world();
    w.set_clock(std::uniform_int_distribution<int>(500, 1300)(rng));
    w.courier_mut(0).position = random_cell(rng, region);
    const int id = add_order(w, random_cell(rng, region), random_cell(rng, region),
                             std::uniform_int_distribution<int>(5, 15)(rng));
    const int delta = expected_delivery_time(w, 0, id);
    w.assign(0, id);
    run_until_empty(w, 0);
    ASSERT_EQ(*w.order(id).delivery_time(), delta) << "trial " << trial;
  }
}

TEST(RealizedDelivery, QueuedSecondOrderAlsoMatchesItsDelta) {
  Rng rng(29);
  const auto region = fixtures::example_region();
  for (int trial = 0; trial < 500; ++trial) {
    auto w = open_world();
    w.courier_mut(0).position = random_cell(rng, region);
    const int a = add_order(w, random_cell(rng, region), random_cell(rng, region), 5);
    w.assign(0, a);
    for (int i = 0; i < 3 && !w.courier(0).queue.empty(); ++i) w.tick();
    const int b = add_order(w, random_cell(rng, region), random_cell(rng, region), 10);
    const int delta = expected_delivery_time(w, 0, b);
    w.assign(0, b);
    run_until_empty(w, 0);
    ASSERT_EQ(*w.order(b).delivery_time(), delta);
  }
}

TEST(Assignment, FifoServiceOrder) {
  auto w = open_world();
  w.courier_mut(0).position = {0, 0};
  const int first = add_order(w, {5, 5}, {5, 0}, 5);
  const int second = add_order(w, {0, 1}, {0, 2}, 5);  // closer, but queued later
  w.assign(0, first);
  w.assign(0, second);
  run_until_empty(w, 0);
  EXPECT_LT(*w.order(first).delivered_minute, *w.order(second).delivered_minute);
}

TEST(Assignment, IdleCourierHeadsToRestaurantNextTick) {
  auto w = open_world();
  w.courier_mut(0).position = {4, 4};
  const int id = add_order(w, {1, 4}, {0, 0}, 5);
  w.assign(0, id);
  EXPECT_EQ(w.courier(0).mode, CourierMode::Serving);
  w.tick();
  EXPECT_EQ(w.courier(0).position, (GridCoord{3, 4}));
}

TEST(Assignment, RedirectAbandonsDepotTrip) {
  auto w = open_world();
  w.courier_mut(0).position = {0, 5};
  w.send_to_depot(0);  // depot (4,1)
  w.tick();
  EXPECT_EQ(w.courier(0).position, (GridCoord{1, 5}));
  EXPECT_EQ(w.courier(0).mode, CourierMode::Returning);
  const int id = add_order(w, {0, 5}, {0, 0}, 5);
  w.assign(0, id);
  EXPECT_EQ(w.courier(0).mode, CourierMode::Serving);
  w.tick();
  EXPECT_EQ(w.courier(0).position, (GridCoord{0, 5}));
}

TEST(Assignment, Errors) {
  auto w = open_world(1, 1);
  const int a = add_order(w, {1, 1}, {2, 2}, 5);
  const int b = add_order(w, {1, 1}, {3, 3}, 5);
  w.assign(0, a);
  EXPECT_THROW(w.assign(0, b), std::logic_error);
  EXPECT_THROW(w.assign(0, a), std::logic_error);
  EXPECT_THROW(w.send_to_depot(0), std::logic_error);
  EXPECT_THROW(w.send_to_restaurant(0, 1), std::logic_error);
  w.reject(b);
  EXPECT_THROW(w.reject(b), std::logic_error);
}

TEST(Reject, OrderLeavesCourierUntouched) {
  auto scene = fixtures::example_assignment_scene();
  const auto before = scene.world.courier(1).position;
  scene.world.reject(scene.event.order_id);
  EXPECT_EQ(scene.world.order(scene.event.order_id).status, OrderStatus::Rejected);
  EXPECT_EQ(scene.world.courier(1).position, before);
  EXPECT_EQ(scene.world.courier(1).mode, CourierMode::Idle);
}

TEST(Reposition, GoToSecondRestaurantTakesFourMinutes) {
  auto scene = fixtures::example_idle_scene();
  auto& w = scene.world;
  w.send_to_restaurant(0, 1);
  int minutes = 0;
  while (w.courier(0).mode != CourierMode::Idle) {
    w.tick();
    ++minutes;
  }
  EXPECT_EQ(minutes, 4);
  EXPECT_EQ(w.courier(0).position, (GridCoord{1, 1}));
  w.tick();
  EXPECT_EQ(w.courier(0).position, (GridCoord{1, 1}));  // stays put
}

TEST(Reposition, MoveToCurrentCellIsANoOp) {
  auto w = open_world();
  w.courier_mut(0).position = {4, 1};
  w.send_to_depot(0);
  EXPECT_EQ(w.courier(0).mode, CourierMode::Idle);
}

TEST(Tick, AdjacentDeliveryHappensNextTick) {
  auto scene = fixtures::example_assignment_scene();
  scene.world.courier_mut(0).position = {0, 4};
  const auto events = scene.world.tick();
  EXPECT_EQ(scene.world.order(0).delivered_minute, std::optional<int>(601));
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0], (SimEvent{EventKind::CourierIdle, 601, -1, 0}));
}

TEST(Tick, WaitAtRestaurantEqualsReadyMinusArrival) {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    auto w = open_world();
    const int dist = std::uniform_int_distribution<int>(0, 4)(rng);
    w.courier_mut(0).position = {1, 1 + dist};
    const int prep = std::uniform_int_distribution<int>(5, 15)(rng);
    const int id = add_order(w, {1, 1}, {5, 5}, prep);
    w.assign(0, id);
    int arrival = -1, left = -1;
    while (left < 0) {
      w.tick();
      const auto& c = w.courier(0);
      if (arrival < 0 && c.position == GridCoord{1, 1}) arrival = w.clock();
      if (c.position != GridCoord{1, 1} && arrival >= 0) left = w.clock() - 1;
    }
    if (dist == 0) arrival = 600;
    ASSERT_EQ(left - arrival, std::max(0, 600 + prep - arrival));
    ASSERT_EQ(w.courier(0).log.waiting_minutes, std::max(0, 600 + prep - arrival));
  }
}

TEST(Tick, SameMinuteEventsPutIdleBeforeArrivals) {
  World day(fixtures::example_region(), default_hourly_profile(), {1, 2});
  Order a;
  a.id = 0;
  a.origin = {4, 1};
  a.destination = {4, 2};
  a.placed_minute = 480;
  a.prep_time = 5;
  Order b = a;
  b.id = 1;
  b.placed_minute = 486;
  const auto start = day.begin_day({a, b}, 0);
  ASSERT_EQ(start.size(), 1u);
  day.assign(0, 0);  // courier at depot (4,1) == restaurant; ready at 485, delivered at 486
  std::vector<SimEvent> at486;
  while (day.clock() < 486) at486 = day.tick();
  ASSERT_EQ(at486.size(), 2u);
  EXPECT_EQ(at486[0].kind, EventKind::CourierIdle);
  EXPECT_EQ(at486[1].kind, EventKind::OrderArrival);
  EXPECT_EQ(at486[1].order_id, 1);
}

TEST(Day, ConservationMotionAndDeterminism) {
  const auto region = generate_synthetic_region(10, 10, 7, 1);
  const auto profile = default_hourly_profile();
  auto run = [&](std::uint64_t seed) {
    Rng order_rng(seed), policy_rng(seed + 1);
    World w(region, profile, {3, 2});
    auto events = w.begin_day(generate_day_orders(region, profile, 163, order_rng), 0);
    std::vector<GridCoord> last;
    for (const auto& c : w.couriers()) last.push_back(c.position);
    std::vector<int> trace;
    while (!w.finished()) {
      for (const auto& ev : events) {
        if (ev.kind == EventKind::OrderArrival) {
          std::vector<int> free;
          for (const auto& c : w.couriers())
            if (c.assignable(w.max_queue())) free.push_back(c.id);
          if (free.empty() || std::uniform_real_distribution<double>(0, 1)(policy_rng) < 0.2) {
            w.reject(ev.order_id);
          } else {
            w.assign(free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(policy_rng)], ev.order_id);
          }
        } else if (w.in_shift(ev.minute) && w.courier(ev.courier_id).queue.empty()) {
          if (policy_rng() % 2) w.send_to_depot(ev.courier_id);
          else w.send_to_restaurant(ev.courier_id, static_cast<int>(policy_rng() % 7));
        }
      }
      events = w.tick();
      for (const auto& c : w.couriers()) {
        EXPECT_LE(manhattan(c.position, last[static_cast<std::size_t>(c.id)]), 1);
        EXPECT_TRUE(region.contains(c.position));
        EXPECT_EQ(c.mode == CourierMode::Serving, !c.queue.empty());
        EXPECT_LE(static_cast<int>(c.queue.size()), 2);
        last[static_cast<std::size_t>(c.id)] = c.position;
        trace.push_back(c.position.row * 100 + c.position.col);
      }
    }
    int delivered = 0, rejected = 0, other = 0;
    for (const auto& o : w.orders()) {
      if (o.status == OrderStatus::Delivered) ++delivered;
      else if (o.status == OrderStatus::Rejected) ++rejected;
      else ++other;
    }
    EXPECT_EQ(other, 0);
    EXPECT_EQ(delivered + rejected, static_cast<int>(w.orders().size()));
    EXPECT_GT(delivered, 0);
    return trace;
  };
  EXPECT_EQ(run(5), run(5));
}

TEST(Trace, SinkSeesEveryCourierEachMinute) {
  auto w = open_world(2, 2);
  int rows = 0;
  w.set_trace([&](const TraceRow& r) { rows += r.event.empty() ? 1 : 0; });
  for (int i = 0; i < 10; ++i) w.tick();
  EXPECT_EQ(rows, 20);
}
