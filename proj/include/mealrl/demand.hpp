#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "region.hpp"

namespace mealrl {

inline constexpr int kMinPrepMinutes = 5;
inline constexpr int kMaxPrepMinutes = 15;

/// Share of the daily order volume placed in each clock hour.
struct HourlyProfile {
  struct Share {
    int hour = 0;
    double fraction = 0.0;
    friend bool operator==(const Share&, const Share&) = default;
  };
  std::vector<Share> shares;
  int day_start_minute = 8 * 60;
  int day_end_minute = 24 * 60;

  friend bool operator==(const HourlyProfile&, const HourlyProfile&) = default;

  int day_length() const noexcept { return day_end_minute - day_start_minute; }

  double share_at(int hour) const noexcept {
    for (const auto& s : shares) {
      if (s.hour == hour) return s.fraction;
    }
    return 0.0;
  }

  bool hour_active(int hour) const noexcept {
    return hour * 60 + 60 > day_start_minute && hour * 60 < day_end_minute;
  }

  void validate() const {
    if (!(day_start_minute >= 0 && day_start_minute < day_end_minute && day_end_minute <= 1440)) {
      throw ConfigError("profile: need 0 <= day_start_minute < day_end_minute <= 1440");
    }
    double total = 0.0;
    for (const auto& s : shares) {
      if (s.hour < 0 || s.hour > 23) throw ConfigError("profile: hour " + std::to_string(s.hour) + " out of range");
      if (!(s.fraction >= 0.0) || !std::isfinite(s.fraction)) {
        throw ConfigError("profile: share for hour " + std::to_string(s.hour) + " must be nonnegative");
      }
      if (s.fraction > 0.0 && !hour_active(s.hour)) {
        throw ConfigError("profile: hour " + std::to_string(s.hour) + " has demand outside the active day");
      }
      total += s.fraction;
    }
    if (!shares.empty() && total > 0.0 && std::abs(total - 1.0) > 1e-9) {
      throw ConfigError("profile: shares must sum to 1 (got " + std::to_string(total) + ")");
    }
  }
};

/// Two demand peaks (noon-3pm and a larger 5pm-9pm) over an 08:00-24:00 day.
inline HourlyProfile default_hourly_profile() {
  HourlyProfile p;
  p.shares = {{8, 0.02},  {9, 0.03},  {10, 0.04}, {11, 0.05}, {12, 0.08}, {13, 0.09},
              {14, 0.08}, {15, 0.05}, {16, 0.05}, {17, 0.08}, {18, 0.10}, {19, 0.11},
              {20, 0.09}, {21, 0.06}, {22, 0.04}, {23, 0.03}};
  return p;
}

inline nlohmann::json to_json(const HourlyProfile& p) {
  nlohmann::json shares = nlohmann::json::array();
  for (const auto& s : p.shares) shares.push_back({{"hour", s.hour}, {"share", s.fraction}});
  return {{"day_start_minute", p.day_start_minute}, {"day_end_minute", p.day_end_minute}, {"shares", shares}};
}

inline HourlyProfile profile_from_json(const nlohmann::json& j) {
  HourlyProfile p;
  try {
    p.day_start_minute = j.value("day_start_minute", p.day_start_minute);
    p.day_end_minute = j.value("day_end_minute", p.day_end_minute);
    if (!j.contains("shares") || !j["shares"].is_array()) throw ConfigError("profile: missing field 'shares'");
    for (const auto& s : j["shares"]) {
      p.shares.push_back({s.at("hour").get<int>(), s.at("share").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("profile: ") + e.what());
  }
  p.validate();
  return p;
}

inline HourlyProfile load_profile(const std::string& path) {
  return profile_from_json(parse_json_text(read_text_file(path), path));
}

/// Orders per hour: floor(share * daily_count). The 1e-9 slack absorbs
/// representation error in decimal shares such as 0.29 * 100.
inline int hourly_rate(const HourlyProfile& profile, int daily_count, int hour) {
  if (!profile.hour_active(hour)) return 0;
  return static_cast<int>(std::floor(profile.share_at(hour) * daily_count + 1e-9));
}

inline int expected_daily_orders(const HourlyProfile& profile, int daily_count) {
  int total = 0;
  for (int h = 0; h < 24; ++h) total += hourly_rate(profile, daily_count, h);
  return total;
}

/// Continuous arrival times (minutes from midnight) of a piecewise
/// homogeneous Poisson process; gaps restart at every hour boundary.
inline std::vector<double> sample_arrival_times(const HourlyProfile& profile, int daily_count, Rng& rng) {
  std::vector<double> times;
  for (int h = 0; h < 24; ++h) {
    const int rate = hourly_rate(profile, daily_count, h);
    if (rate <= 0) continue;
    const double begin = std::max<double>(h * 60, profile.day_start_minute);
    const double end = std::min<double>(h * 60 + 60, profile.day_end_minute);
    std::exponential_distribution<double> gap(rate / 60.0);
    for (double t = begin + gap(rng); t < end; t += gap(rng)) times.push_back(t);
  }
  return times;
}

/// Arrival minutes for one day, sorted, all inside [day_start, day_end).
inline std::vector<int> sample_arrivals(const HourlyProfile& profile, int daily_count, Rng& rng) {
  std::vector<int> minutes;
  for (double t : sample_arrival_times(profile, daily_count, rng)) {
    minutes.push_back(static_cast<int>(std::floor(t)));
  }
  return minutes;
}

enum class OrderStatus { PendingDecision, Assigned, Delivered, Rejected };

struct Order {
  int id = 0;
  int restaurant_id = 0;
  GridCoord origin;
  GridCoord destination;
  int placed_minute = 0;
  int prep_time = kMinPrepMinutes;
  OrderStatus status = OrderStatus::PendingDecision;
  std::optional<int> delivered_minute;
  std::optional<int> assigned_courier;

  friend bool operator==(const Order&, const Order&) = default;

  int trip_length() const noexcept { return manhattan(origin, destination); }
  int ready_minute() const noexcept { return placed_minute + prep_time; }
  std::optional<int> delivery_time() const {
    if (!delivered_minute) return std::nullopt;
    return *delivered_minute - placed_minute;
  }
};

inline int sample_prep_time(Rng& rng) {
  return std::uniform_int_distribution<int>(kMinPrepMinutes, kMaxPrepMinutes)(rng);
}

inline Order sample_order(const RegionConfig& region, Rng& rng, int minute) {
  const auto rp = region.restaurant_distribution();
  const auto cp = region.customer_distribution();
  Order o;
  o.restaurant_id = std::discrete_distribution<int>(rp.begin(), rp.end())(rng);
  o.origin = region.restaurants[static_cast<std::size_t>(o.restaurant_id)].cell;
  o.destination = region.cell_at(std::discrete_distribution<int>(cp.begin(), cp.end())(rng));
  o.placed_minute = minute;
  o.prep_time = sample_prep_time(rng);
  return o;
}

struct CartItem {
  int restaurant_id = 0;
  GridCoord destination;
};

/// One order per distinct restaurant in the cart (first-appearance order),
/// all sharing the destination and placement minute.
inline std::vector<Order> split_multi_restaurant(const RegionConfig& region, const std::vector<CartItem>& cart,
                                                 int minute, Rng& rng) {
  if (cart.empty()) throw std::invalid_argument("split_multi_restaurant: empty cart");
  std::vector<Order> orders;
  for (const auto& item : cart) {
    if (item.destination != cart.front().destination) {
      throw std::invalid_argument("split_multi_restaurant: cart items must share one destination");
    }
    if (item.restaurant_id < 0 || item.restaurant_id >= region.num_restaurants()) {
      throw std::invalid_argument("split_multi_restaurant: unknown restaurant " + std::to_string(item.restaurant_id));
    }
    const bool seen = std::any_of(orders.begin(), orders.end(),
                                  [&](const Order& o) { return o.restaurant_id == item.restaurant_id; });
    if (seen) continue;
    Order o;
    o.restaurant_id = item.restaurant_id;
    o.origin = region.restaurants[static_cast<std::size_t>(item.restaurant_id)].cell;
    o.destination = item.destination;
    o.placed_minute = minute;
    o.prep_time = sample_prep_time(rng);
    orders.push_back(o);
  }
  return orders;
}

/// A full day's order stream with sequential ids. With probability
/// `cart_probability` an arrival is a two-restaurant cart that gets split.
inline std::vector<Order> generate_day_orders(const RegionConfig& region, const HourlyProfile& profile,
                                              int daily_count, Rng& rng, double cart_probability = 0.0) {
  std::vector<Order> orders;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto rp = region.restaurant_distribution();
  const auto cp = region.customer_distribution();
  std::discrete_distribution<int> pick_restaurant(rp.begin(), rp.end());
  std::discrete_distribution<int> pick_cell(cp.begin(), cp.end());
  for (int minute : sample_arrivals(profile, daily_count, rng)) {
    if (cart_probability > 0.0 && region.num_restaurants() > 1 && unit(rng) < cart_probability) {
      const GridCoord dest = region.cell_at(pick_cell(rng));
      std::vector<CartItem> cart{{pick_restaurant(rng), dest}, {pick_restaurant(rng), dest}};
      for (auto& o : split_multi_restaurant(region, cart, minute, rng)) orders.push_back(o);
    } else {
      orders.push_back(sample_order(region, rng, minute));
    }
  }
  for (std::size_t i = 0; i < orders.size(); ++i) orders[i].id = static_cast<int>(i);
  return orders;
}

}  // namespace mealrl
