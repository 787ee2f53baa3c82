#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "demand.hpp"
#include "region.hpp"

namespace mealrl {

enum class CourierMode { Idle, Repositioning, Returning, Serving };
enum class ServePhase { ToRestaurant, Waiting, ToCustomer };

inline const char* to_string(CourierMode m) {
  switch (m) {
    case CourierMode::Idle: return "idle";
    case CourierMode::Repositioning: return "repositioning";
    case CourierMode::Returning: return "returning";
    case CourierMode::Serving: return "serving";
  }
  return "?";
}

/// Minute counters accumulated over one shift.
struct CourierDayLog {
  int busy_minutes = 0;     // to restaurant, waiting for food, delivering
  int waiting_minutes = 0;  // subset of busy_minutes spent at a restaurant
  int moving_minutes = 0;   // repositioning or returning to the depot
  int assigned_orders = 0;
};

struct Courier {
  int id = 0;
  GridCoord position;
  std::deque<int> queue;  // order ids, served first-in first-out
  CourierMode mode = CourierMode::Idle;
  ServePhase phase = ServePhase::ToRestaurant;
  GridCoord target;  // destination while repositioning or returning
  int target_restaurant = -1;
  CourierDayLog log;

  bool assignable(int max_queue) const noexcept { return static_cast<int>(queue.size()) < max_queue; }
};

enum class EventKind { OrderArrival, CourierIdle };

struct SimEvent {
  EventKind kind = EventKind::OrderArrival;
  int minute = 0;
  int order_id = -1;    // OrderArrival
  int courier_id = -1;  // CourierIdle

  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

struct TraceRow {
  int minute = 0;
  int courier = 0;
  GridCoord position;
  CourierMode mode = CourierMode::Idle;
  std::string event;
};

struct WorldOptions {
  int couriers = 1;
  int max_queue = 2;
};

/// Minute-stepped courier world for one day of operations.
class World {
 public:
  World(RegionConfig region, HourlyProfile profile, WorldOptions options)
      : region_(std::move(region)), profile_(std::move(profile)), options_(options) {
    region_.validate();
    profile_.validate();
    if (options_.couriers < 1) throw ConfigError("world: need at least one courier");
    if (options_.max_queue < 1) throw ConfigError("world: max_queue must be positive");
    reset_couriers();
  }

  /// Starts a day: couriers idle at the depot, returns the arrivals at the opening minute.
  std::vector<SimEvent> begin_day(std::vector<Order> orders, int day_index = 0) {
    std::stable_sort(orders.begin(), orders.end(),
                     [](const Order& a, const Order& b) { return a.placed_minute < b.placed_minute; });
    for (std::size_t i = 0; i < orders.size(); ++i) {
      if (orders[i].id != static_cast<int>(i)) {
        throw std::invalid_argument("world: order ids must be 0..n-1 in placement order");
      }
      if (orders[i].placed_minute < profile_.day_start_minute || orders[i].placed_minute >= profile_.day_end_minute) {
        throw std::invalid_argument("world: order placed outside the active day");
      }
    }
    orders_ = std::move(orders);
    day_index_ = day_index;
    clock_ = profile_.day_start_minute;
    next_arrival_ = 0;
    reset_couriers();
    std::vector<SimEvent> events;
    emit_arrivals(events);
    return events;
  }

  /// Advances one minute. Returned events are ordered: courier-idle first
  /// (deliveries made this minute), then order arrivals.
  std::vector<SimEvent> tick() {
    const bool in_shift = clock_ < profile_.day_end_minute;
    for (auto& c : couriers_) move_one_minute(c, in_shift);
    ++clock_;
    std::vector<SimEvent> events;
    for (auto& c : couriers_) {
      if (settle(c)) events.push_back({EventKind::CourierIdle, clock_, -1, c.id});
    }
    emit_arrivals(events);
    if (trace_) {
      for (const auto& c : couriers_) trace_({clock_, c.id, c.position, c.mode, {}});
    }
    return events;
  }

  /// True once the shift is over and every accepted order has been delivered.
  bool finished() const noexcept {
    if (clock_ < profile_.day_end_minute || next_arrival_ < orders_.size()) return false;
    return std::all_of(couriers_.begin(), couriers_.end(), [](const Courier& c) { return c.queue.empty(); });
  }

  bool in_shift(int minute) const noexcept { return minute < profile_.day_end_minute; }

  void assign(int courier_id, int order_id) {
    auto& o = order_mut(order_id);
    auto& c = courier_mut(courier_id);
    if (o.status != OrderStatus::PendingDecision) throw std::logic_error("assign: order is not pending");
    if (!c.assignable(options_.max_queue)) throw std::logic_error("assign: courier queue is full");
    o.status = OrderStatus::Assigned;
    o.assigned_courier = courier_id;
    c.queue.push_back(order_id);
    ++c.log.assigned_orders;
    if (c.mode != CourierMode::Serving) {
      c.mode = CourierMode::Serving;
      c.phase = ServePhase::ToRestaurant;
      c.target_restaurant = -1;
      settle(c);
    }
    note(c, "assign o" + std::to_string(order_id));
  }

  void reject(int order_id) {
    auto& o = order_mut(order_id);
    if (o.status != OrderStatus::PendingDecision) throw std::logic_error("reject: order is not pending");
    o.status = OrderStatus::Rejected;
  }

  void send_to_depot(int courier_id) {
    auto& c = courier_mut(courier_id);
    require_free(c, "send_to_depot");
    start_move(c, CourierMode::Returning, region_.depot, -1);
    note(c, "go-depot");
  }

  void send_to_restaurant(int courier_id, int restaurant_id) {
    auto& c = courier_mut(courier_id);
    require_free(c, "send_to_restaurant");
    if (restaurant_id < 0 || restaurant_id >= region_.num_restaurants()) {
      throw std::out_of_range("send_to_restaurant: unknown restaurant");
    }
    start_move(c, CourierMode::Repositioning, region_.restaurants[static_cast<std::size_t>(restaurant_id)].cell,
               restaurant_id);
    note(c, "go-restaurant r" + std::to_string(restaurant_id));
  }

  /// Minutes until the courier's current queue is fully delivered.
  int time_to_finish_queue(const Courier& c) const {
    if (c.queue.empty()) return 0;
    int t = clock_;
    GridCoord pos = c.position;
    bool first = true;
    for (int id : c.queue) {
      const Order& o = order(id);
      if (first && c.phase == ServePhase::ToCustomer) {
        t += manhattan(pos, o.destination);
      } else {
        t += manhattan(pos, o.origin);
        t = std::max(t, o.ready_minute());
        t += o.trip_length();
      }
      pos = o.destination;
      first = false;
    }
    return t - clock_;
  }

  /// Where the courier becomes free: current cell when idle, else the last queued customer.
  GridCoord location_of_availability(const Courier& c) const {
    return c.queue.empty() ? c.position : order(c.queue.back()).destination;
  }

  /// delta = trip + max(prep, time to finish queue + distance from availability to the restaurant).
  int expected_delivery_time(const Courier& c, const Order& o) const {
    const int reach = time_to_finish_queue(c) + manhattan(location_of_availability(c), o.origin);
    const int prep_left = o.ready_minute() - clock_;
    return o.trip_length() + std::max(prep_left, reach);
  }

  // Test and scenario hooks: place state directly.
  Courier& courier_mut(int id) { return couriers_.at(static_cast<std::size_t>(id)); }
  Order& order_mut(int id) { return orders_.at(static_cast<std::size_t>(id)); }
  void set_clock(int minute) { clock_ = minute; }
  /// Adds an order mid-day (scenario construction); returns its id.
  int inject_order(Order o) {
    o.id = static_cast<int>(orders_.size());
    orders_.push_back(o);
    next_arrival_ = orders_.size();
    return o.id;
  }

  const Courier& courier(int id) const { return couriers_.at(static_cast<std::size_t>(id)); }
  const Order& order(int id) const { return orders_.at(static_cast<std::size_t>(id)); }
  const std::vector<Courier>& couriers() const noexcept { return couriers_; }
  const std::vector<Order>& orders() const noexcept { return orders_; }
  const RegionConfig& region() const noexcept { return region_; }
  const HourlyProfile& profile() const noexcept { return profile_; }
  const WorldOptions& options() const noexcept { return options_; }
  int clock() const noexcept { return clock_; }
  int day_index() const noexcept { return day_index_; }
  int num_couriers() const noexcept { return static_cast<int>(couriers_.size()); }
  int max_queue() const noexcept { return options_.max_queue; }

  void set_trace(std::function<void(const TraceRow&)> sink) { trace_ = std::move(sink); }

 private:
  void reset_couriers() {
    couriers_.assign(static_cast<std::size_t>(options_.couriers), Courier{});
    for (int i = 0; i < options_.couriers; ++i) {
      couriers_[static_cast<std::size_t>(i)].id = i;
      couriers_[static_cast<std::size_t>(i)].position = region_.depot;
    }
  }

  void emit_arrivals(std::vector<SimEvent>& events) {
    while (next_arrival_ < orders_.size() && orders_[next_arrival_].placed_minute == clock_) {
      events.push_back({EventKind::OrderArrival, clock_, orders_[next_arrival_].id, -1});
      ++next_arrival_;
    }
  }

  void require_free(const Courier& c, const char* what) const {
    if (!c.queue.empty()) throw std::logic_error(std::string(what) + ": courier is serving orders");
  }

  void start_move(Courier& c, CourierMode mode, GridCoord target, int restaurant) {
    c.target = target;
    c.target_restaurant = restaurant;
    c.mode = c.position == target ? CourierMode::Idle : mode;
  }

  void move_one_minute(Courier& c, bool in_shift) {
    switch (c.mode) {
      case CourierMode::Idle:
        return;
      case CourierMode::Repositioning:
      case CourierMode::Returning:
        c.position = step_toward(c.position, c.target);
        if (in_shift) ++c.log.moving_minutes;
        if (c.position == c.target) c.mode = CourierMode::Idle;
        return;
      case CourierMode::Serving: {
        const Order& o = order(c.queue.front());
        if (in_shift) ++c.log.busy_minutes;
        switch (c.phase) {
          case ServePhase::ToRestaurant: c.position = step_toward(c.position, o.origin); break;
          case ServePhase::Waiting:
            if (in_shift) ++c.log.waiting_minutes;
            break;
          case ServePhase::ToCustomer: c.position = step_toward(c.position, o.destination); break;
        }
        return;
      }
    }
  }

  /// Resolves instantaneous transitions at the current minute (arrive,
  /// pick up, hand over). Returns true if the courier's queue just emptied.
  bool settle(Courier& c) {
    if (c.mode != CourierMode::Serving) return false;
    for (;;) {
      Order& o = order_mut(c.queue.front());
      if (c.phase == ServePhase::ToRestaurant && c.position == o.origin) {
        c.phase = ServePhase::Waiting;
      } else if (c.phase == ServePhase::Waiting && clock_ >= o.ready_minute()) {
        c.phase = ServePhase::ToCustomer;
      } else if (c.phase == ServePhase::ToCustomer && c.position == o.destination) {
        o.status = OrderStatus::Delivered;
        o.delivered_minute = clock_;
        note(c, "deliver o" + std::to_string(o.id));
        c.queue.pop_front();
        if (c.queue.empty()) {
          c.mode = CourierMode::Idle;
          return true;
        }
        c.phase = ServePhase::ToRestaurant;
      } else {
        return false;
      }
    }
  }

  void note(const Courier& c, std::string what) {
    if (trace_) trace_({clock_, c.id, c.position, c.mode, std::move(what)});
  }

  RegionConfig region_;
  HourlyProfile profile_;
  WorldOptions options_;
  std::vector<Courier> couriers_;
  std::vector<Order> orders_;
  std::size_t next_arrival_ = 0;
  int clock_ = 0;
  int day_index_ = 0;
  std::function<void(const TraceRow&)> trace_;
};

inline int time_to_finish_queue(const World& world, int courier_id) {
  return world.time_to_finish_queue(world.courier(courier_id));
}

inline int expected_delivery_time(const World& world, int courier_id, int order_id) {
  return world.expected_delivery_time(world.courier(courier_id), world.order(order_id));
}

}  // namespace mealrl
