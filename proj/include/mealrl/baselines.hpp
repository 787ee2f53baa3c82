#pragma once

#include <limits>
#include <stdexcept>
#include <string>

#include "mdp.hpp"
#include "policy.hpp"

namespace mealrl {

/// Rule-based dispatcher: assign to the courier with the smallest expected
/// delivery time when that time is at most the threshold, otherwise reject.
/// Couriers that become idle always head back to the depot.
class ThresholdPolicy final : public Policy {
 public:
  explicit ThresholdPolicy(int threshold_minutes) : threshold_(threshold_minutes) {
    if (threshold_minutes <= 0) throw std::invalid_argument("ThresholdPolicy: threshold must be positive");
  }

  Action decide(const World& world, const SimEvent& event) override { return baseline_decide(*this, world, event); }
  std::string name() const override { return "p" + std::to_string(threshold_); }
  int threshold() const noexcept { return threshold_; }

  /// Ties on delta go to the lowest courier id; couriers with a full queue are skipped.
  friend Action baseline_decide(const ThresholdPolicy& policy, const World& world, const SimEvent& event) {
    if (event.kind == EventKind::CourierIdle) return {ActionKind::GoDepot, event.courier_id, -1};
    const Order& order = world.order(event.order_id);
    int best = -1;
    int best_delta = std::numeric_limits<int>::max();
    for (const auto& c : world.couriers()) {
      if (!c.assignable(world.max_queue())) continue;
      const int delta = world.expected_delivery_time(c, order);
      if (delta < best_delta) {
        best_delta = delta;
        best = c.id;
      }
    }
    if (best >= 0 && best_delta <= policy.threshold_) return {ActionKind::Assign, best, -1};
    return {ActionKind::Reject, -1, -1};
  }

 private:
  int threshold_;
};

inline ThresholdPolicy make_p45() { return ThresholdPolicy(45); }
inline ThresholdPolicy make_p60() { return ThresholdPolicy(60); }

}  // namespace mealrl
