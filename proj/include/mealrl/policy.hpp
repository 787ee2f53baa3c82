#pragma once

#include <string>

#include "mdp.hpp"
#include "simulation.hpp"

namespace mealrl {

/// Anything that can answer a decision event.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action decide(const World& world, const SimEvent& event) = 0;
  virtual std::string name() const = 0;
};

}  // namespace mealrl
