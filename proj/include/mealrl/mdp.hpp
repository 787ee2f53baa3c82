#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "simulation.hpp"

namespace mealrl {

inline constexpr double kRejectReward = -15.0;
inline constexpr double kDefaultRewardTarget = 45.0;

enum class ActionKind { Assign, Reject, GoDepot, GoRestaurant };

struct Action {
  ActionKind kind = ActionKind::Reject;
  int courier = -1;     // Assign, GoDepot, GoRestaurant
  int restaurant = -1;  // GoRestaurant

  friend bool operator==(const Action&, const Action&) = default;
};

/// Flat action indexing: [assign 0..C-1 | reject | go-depot | go-restaurant 0..R-1].
/// Move actions apply to the courier named by the current idle event.
struct ActionLayout {
  int couriers = 1;
  int restaurants = 1;

  int size() const noexcept { return couriers + 2 + restaurants; }
  int assign(int c) const noexcept { return c; }
  int reject() const noexcept { return couriers; }
  int go_depot() const noexcept { return couriers + 1; }
  int go_restaurant(int r) const noexcept { return couriers + 2 + r; }

  Action decode(int index, const SimEvent& event) const {
    if (index < 0 || index >= size()) throw std::out_of_range("action index out of range");
    if (index < couriers) return {ActionKind::Assign, index, -1};
    if (index == reject()) return {ActionKind::Reject, -1, -1};
    if (index == go_depot()) return {ActionKind::GoDepot, event.courier_id, -1};
    return {ActionKind::GoRestaurant, event.courier_id, index - couriers - 2};
  }

  int encode(const Action& a) const {
    switch (a.kind) {
      case ActionKind::Assign: return assign(a.courier);
      case ActionKind::Reject: return reject();
      case ActionKind::GoDepot: return go_depot();
      case ActionKind::GoRestaurant: return go_restaurant(a.restaurant);
    }
    return -1;
  }
};

using FeasibilityMask = std::vector<std::uint8_t>;

/// Raw (unscaled, minutes) observation of one courier.
struct CourierObservation {
  int delta = 0;           // expected delivery time of the pending order; 0 on idle events
  int depot_distance = 0;  // mu
  std::vector<int> restaurant_distance;  // eta per restaurant
};

struct StateFeatures {
  EventKind kind = EventKind::OrderArrival;
  int idle_courier = -1;  // index into `couriers` on idle events
  double hour_fraction = 0.0;
  std::vector<CourierObservation> couriers;
};

struct Observation {
  StateFeatures features;
  FeasibilityMask mask;
};

/// Scales raw observations into the fixed-width network input.
///   per courier: [delta | mu | eta_0..eta_{R-1}], then [hour fraction, event flag]
/// Distances and delta are divided by the longest grid trip (delta is not
/// clipped, so it may exceed 1). On idle events the delta slot carries 1 for
/// the idle courier and 0 elsewhere.
struct FeatureScaling {
  double distance_scale = 1.0;
  double delta_scale = 1.0;

  static FeatureScaling for_region(const RegionConfig& region, int /*max_queue*/) {
    const double trip = std::max(1, region.max_trip());
    return {trip, trip};
  }
};

inline int input_size(int couriers, int restaurants) { return couriers * (2 + restaurants) + 2; }

inline std::vector<double> to_input(const StateFeatures& s, const FeatureScaling& scale) {
  std::vector<double> x;
  const std::size_t restaurants = s.couriers.empty() ? 0 : s.couriers.front().restaurant_distance.size();
  x.reserve(s.couriers.size() * (2 + restaurants) + 2);
  for (std::size_t c = 0; c < s.couriers.size(); ++c) {
    const auto& obs = s.couriers[c];
    if (s.kind == EventKind::OrderArrival) {
      x.push_back(obs.delta / scale.delta_scale);
    } else {
      x.push_back(static_cast<int>(c) == s.idle_courier ? 1.0 : 0.0);
    }
    x.push_back(obs.depot_distance / scale.distance_scale);
    for (int d : obs.restaurant_distance) x.push_back(d / scale.distance_scale);
  }
  x.push_back(s.hour_fraction);
  x.push_back(s.kind == EventKind::OrderArrival ? 1.0 : 0.0);
  return x;
}

namespace detail {

inline CourierObservation observe_courier(const World& world, const Courier& c, const SimEvent& event) {
  CourierObservation obs;
  const GridCoord at = world.location_of_availability(c);
  if (event.kind == EventKind::OrderArrival) {
    obs.delta = world.expected_delivery_time(c, world.order(event.order_id));
  }
  obs.depot_distance = manhattan(at, world.region().depot);
  for (const auto& r : world.region().restaurants) obs.restaurant_distance.push_back(manhattan(at, r.cell));
  return obs;
}

inline double hour_fraction(const World& world, int minute) {
  const auto& p = world.profile();
  const double f = static_cast<double>(minute - p.day_start_minute) / p.day_length();
  return std::clamp(f, 0.0, 1.0);
}

}  // namespace detail

/// Joint observation over every courier, masked over the multi-courier layout.
inline Observation encode_state(const World& world, const SimEvent& event) {
  Observation out;
  auto& s = out.features;
  s.kind = event.kind;
  s.idle_courier = event.kind == EventKind::CourierIdle ? event.courier_id : -1;
  s.hour_fraction = detail::hour_fraction(world, event.minute);
  for (const auto& c : world.couriers()) s.couriers.push_back(detail::observe_courier(world, c, event));

  const ActionLayout layout{world.num_couriers(), world.region().num_restaurants()};
  out.mask.assign(static_cast<std::size_t>(layout.size()), 0);
  if (event.kind == EventKind::OrderArrival) {
    out.mask[static_cast<std::size_t>(layout.reject())] = 1;
    for (const auto& c : world.couriers()) {
      if (c.assignable(world.max_queue())) out.mask[static_cast<std::size_t>(layout.assign(c.id))] = 1;
    }
  } else {
    out.mask[static_cast<std::size_t>(layout.go_depot())] = 1;
    for (int r = 0; r < layout.restaurants; ++r) out.mask[static_cast<std::size_t>(layout.go_restaurant(r))] = 1;
  }
  return out;
}

/// One courier's view in the single-courier layout (C = 1). On idle events
/// the move actions are feasible only for the idle courier itself.
inline Observation encode_courier_view(const World& world, const SimEvent& event, int courier_id) {
  Observation out;
  auto& s = out.features;
  const Courier& c = world.courier(courier_id);
  s.kind = event.kind;
  s.hour_fraction = detail::hour_fraction(world, event.minute);
  s.couriers.push_back(detail::observe_courier(world, c, event));
  const bool is_idle_one = event.kind == EventKind::CourierIdle && event.courier_id == courier_id;
  s.idle_courier = is_idle_one ? 0 : -1;

  const ActionLayout layout{1, world.region().num_restaurants()};
  out.mask.assign(static_cast<std::size_t>(layout.size()), 0);
  if (event.kind == EventKind::OrderArrival) {
    out.mask[static_cast<std::size_t>(layout.reject())] = 1;
    if (c.assignable(world.max_queue())) out.mask[static_cast<std::size_t>(layout.assign(0))] = 1;
  } else if (is_idle_one) {
    out.mask[static_cast<std::size_t>(layout.go_depot())] = 1;
    for (int r = 0; r < layout.restaurants; ++r) out.mask[static_cast<std::size_t>(layout.go_restaurant(r))] = 1;
  }
  return out;
}

/// Immediate reward of a decision, evaluated from the decision-time observation.
///   assign: RP - delta,  reject: -15,  depot: -mu/10,  restaurant: -eta/10
inline double reward(const Action& action, const StateFeatures& s, double reward_target = kDefaultRewardTarget) {
  switch (action.kind) {
    case ActionKind::Assign:
      return reward_target - s.couriers.at(static_cast<std::size_t>(action.courier)).delta;
    case ActionKind::Reject:
      return kRejectReward;
    case ActionKind::GoDepot:
      return -s.couriers.at(static_cast<std::size_t>(s.idle_courier)).depot_distance / 10.0;
    case ActionKind::GoRestaurant:
      return -s.couriers.at(static_cast<std::size_t>(s.idle_courier))
                  .restaurant_distance.at(static_cast<std::size_t>(action.restaurant)) /
             10.0;
  }
  return 0.0;
}

/// Applies a decision to the world after checking it fits the event.
inline void apply_action(World& world, const SimEvent& event, const Action& action) {
  const bool arrival = event.kind == EventKind::OrderArrival;
  switch (action.kind) {
    case ActionKind::Assign:
      if (!arrival) throw std::logic_error("infeasible action: assign on a courier-idle event");
      world.assign(action.courier, event.order_id);
      return;
    case ActionKind::Reject:
      if (!arrival) throw std::logic_error("infeasible action: reject on a courier-idle event");
      world.reject(event.order_id);
      return;
    case ActionKind::GoDepot:
      if (arrival || action.courier != event.courier_id) {
        throw std::logic_error("infeasible action: go-depot outside the courier's idle event");
      }
      world.send_to_depot(action.courier);
      return;
    case ActionKind::GoRestaurant:
      if (arrival || action.courier != event.courier_id) {
        throw std::logic_error("infeasible action: go-restaurant outside the courier's idle event");
      }
      world.send_to_restaurant(action.courier, action.restaurant);
      return;
  }
}

/// Upper bounds on distinct state-action pairs per decision case for an
/// n x n grid with r restaurants, c couriers and at most f queued orders.
struct StateActionCounts {
  long long accept = 0;
  long long reject = 0;
  long long depot = 0;
  long long restaurant = 0;

  friend bool operator==(const StateActionCounts&, const StateActionCounts&) = default;
};

inline StateActionCounts state_action_space_size(long long n, long long r, long long c, long long f) {
  if (n < 2) throw std::invalid_argument("state_action_space_size: n must be at least 2");
  const long long trip = 2 * n - 2;
  return {f * trip * c, f * trip * c, trip * c, r * trip * c};
}

}  // namespace mealrl
