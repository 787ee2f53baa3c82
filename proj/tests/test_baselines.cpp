#include <gtest/gtest.h>

#include "support.hpp"

using namespace mealrl;

namespace {

// One courier standing on the restaurant; delta = trip (5) + prep.
fixtures::ExampleScene scene_with_delta(int delta) {
  World w(fixtures::example_region(), default_hourly_profile(), {1, 2});
  w.begin_day({}, 0);
  w.set_clock(600);
  w.courier_mut(0).position = {1, 1};
  Order o;
  o.restaurant_id = 1;
  o.origin = {1, 1};
  o.destination = {3, 4};
  o.placed_minute = 600;
  o.prep_time = delta - 5;
  const int id = w.inject_order(o);
  return {std::move(w), {EventKind::OrderArrival, 600, id, -1}};
}

}  // namespace

TEST(Threshold, BoundaryIsInclusive) {
  auto at = scene_with_delta(45);
  ASSERT_EQ(expected_delivery_time(at.world, 0, at.event.order_id), 45);
  EXPECT_EQ(make_p45().decide(at.world, at.event), (Action{ActionKind::Assign, 0, -1}));
  auto over = scene_with_delta(46);
  ASSERT_EQ(expected_delivery_time(over.world, 0, over.event.order_id), 46);
  EXPECT_EQ(make_p45().decide(over.world, over.event).kind, ActionKind::Reject);
  EXPECT_EQ(make_p60().decide(over.world, over.event).kind, ActionKind::Assign);
}

TEST(Threshold, PicksSmallestDeltaCourier) {
  auto scene = fixtures::example_assignment_scene();
  EXPECT_EQ(make_p45().decide(scene.world, scene.event), (Action{ActionKind::Assign, 0, -1}));
  ThresholdPolicy tight(10);
  EXPECT_EQ(tight.decide(scene.world, scene.event), (Action{ActionKind::Assign, 0, -1}));
  ThresholdPolicy tighter(9);
  EXPECT_EQ(tighter.decide(scene.world, scene.event).kind, ActionKind::Reject);
}

TEST(Threshold, TiesGoToLowestIdAndFullQueuesAreSkipped) {
  World w(fixtures::example_region(), default_hourly_profile(), {3, 1});
  w.begin_day({}, 0);
  w.set_clock(600);
  for (int c = 0; c < 3; ++c) w.courier_mut(c).position = {2, 2};
  Order o;
  o.origin = {1, 1};
  o.destination = {0, 0};
  o.placed_minute = 600;
  const int id = w.inject_order(o);
  const SimEvent ev{EventKind::OrderArrival, 600, id, -1};
  EXPECT_EQ(make_p45().decide(w, ev).courier, 0);
  Order filler = o;
  const int f = w.inject_order(filler);
  w.assign(0, f);
  EXPECT_EQ(make_p45().decide(w, ev).courier, 1);
}

TEST(Threshold, IdleCouriersAlwaysReturnToDepot) {
  auto scene = fixtures::example_idle_scene();
  for (const auto& p : {make_p45(), make_p60()}) {
    ThresholdPolicy policy = p;
    EXPECT_EQ(policy.decide(scene.world, scene.event), (Action{ActionKind::GoDepot, 0, -1}));
  }
  EXPECT_EQ(make_p45().name(), "p45");
  EXPECT_THROW(ThresholdPolicy(0), std::invalid_argument);
}

TEST(Threshold, DaysRespectTheLimitAndP60AcceptsWheneverP45Would) {
  const auto region = generate_synthetic_region(10, 10, 7, 1);
  const auto profile = default_hourly_profile();
  long accepted45 = 0, accepted60 = 0;
  for (int day = 0; day < 10; ++day) {
    for (int limit : {45, 60}) {
      Rng rng(100 + day);
      ThresholdPolicy policy(limit);
      ThresholdPolicy other(limit == 45 ? 60 : 45);
      World w(region, profile, {5, 2});
      auto events = w.begin_day(generate_day_orders(region, profile, 163, rng), day);
      while (!w.finished()) {
        for (const auto& ev : events) {
          if (ev.kind == EventKind::CourierIdle && !w.in_shift(ev.minute)) continue;
          const Action a = policy.decide(w, ev);
          const Action b = other.decide(w, ev);
          if (ev.kind == EventKind::OrderArrival) {
            const Action& p45 = limit == 45 ? a : b;
            const Action& p60 = limit == 45 ? b : a;
            if (p45.kind == ActionKind::Assign) {
              ASSERT_EQ(p60, p45);
            }
            if (a.kind == ActionKind::Assign) {
              ASSERT_LE(expected_delivery_time(w, a.courier, ev.order_id), limit);
              (limit == 45 ? accepted45 : accepted60) += 1;
            }
          }
          apply_action(w, ev, a);
        }
        events = w.tick();
      }
      for (const auto& o : w.orders()) {
        if (o.status == OrderStatus::Delivered) {
          ASSERT_LE(*o.delivery_time(), limit);
        }
      }
    }
  }
  EXPECT_GE(accepted60, accepted45);
}
