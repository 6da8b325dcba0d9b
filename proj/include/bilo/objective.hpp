#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bilo/space.hpp"

namespace bilo {

inline constexpr double kFailedObjective = -std::numeric_limits<double>::infinity();

struct TrialOutcome {
  double value = kFailedObjective;
  bool failed = false;
  bool single_class = false;  // objective substituted with 0.5
  std::vector<std::string> clamped;
  std::string error;
  double adapt_seconds = 0.0;
  double train_seconds = 0.0;
  double score_seconds = 0.0;
};

// The black box both optimization levels consume: one (combination,
// configuration) pair in, one objective value out. Implementations must be
// deterministic in (x_u, x_l, seed) and safe to call concurrently.
class CombinationEvaluator {
 public:
  virtual ~CombinationEvaluator() = default;
  virtual TrialOutcome evaluate(const Combination& x_u, const Configuration& x_l, std::uint64_t seed) const = 0;
};

}  // namespace bilo
