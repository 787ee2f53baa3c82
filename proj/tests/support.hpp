#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include <mealrl/mealrl.hpp>

namespace mealrl::fixtures {

/// 6x6 region from the worked dispatch example: r1 at (1,5), r2 at (1,1),
/// depot at (4,1), uniform customers.
inline RegionConfig example_region() {
  RegionConfig r;
  r.name = "worked-example-6x6";
  r.height = 6;
  r.width = 6;
  r.depot = {4, 1};
  r.restaurants = {{0, {1, 5}, 1.0}, {1, {1, 1}, 1.0}};
  r.customer_weights.assign(36, 1.0);
  return r;
}

struct ExampleScene {
  World world;
  SimEvent event;
};

/// Scenario (a): c1 carries r1's order and is two cells from its customer
/// at (0,3); c2 idles at (5,4). New order o2 from r2 to (3,3), prep 6.
inline ExampleScene example_assignment_scene() {
  World world(example_region(), default_hourly_profile(), {2, 2});
  world.begin_day({}, 0);
  world.set_clock(600);

  Order o1;
  o1.restaurant_id = 0;
  o1.origin = {1, 5};
  o1.destination = {0, 3};
  o1.placed_minute = 585;
  o1.prep_time = 5;
  o1.status = OrderStatus::Assigned;
  o1.assigned_courier = 0;
  const int id1 = world.inject_order(o1);

  auto& c1 = world.courier_mut(0);
  c1.position = {0, 5};
  c1.queue = {id1};
  c1.mode = CourierMode::Serving;
  c1.phase = ServePhase::ToCustomer;

  world.courier_mut(1).position = {5, 4};

  Order o2;
  o2.restaurant_id = 1;
  o2.origin = {1, 1};
  o2.destination = {3, 3};
  o2.placed_minute = 600;
  o2.prep_time = 6;
  const int id2 = world.inject_order(o2);
  return {std::move(world), {EventKind::OrderArrival, 600, id2, -1}};
}

/// Scenario (b): c1 has just delivered at (2,4) and is idle.
inline ExampleScene example_idle_scene() {
  World world(example_region(), default_hourly_profile(), {2, 2});
  world.begin_day({}, 0);
  world.set_clock(640);
  world.courier_mut(0).position = {2, 4};
  world.courier_mut(1).position = {5, 4};
  return {std::move(world), {EventKind::CourierIdle, 640, -1, 0}};
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mealrl-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mealrl::fixtures
