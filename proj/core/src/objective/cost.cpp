#include "safefilter/objective/cost.hpp"

#include <cmath>

namespace safefilter::objective {

ImmediateCost indicator_cost(std::function<bool(const Vec&)> safe) {
  ImmediateCost cost;
  cost.c = [safe = std::move(safe)](const Vec& x) { return safe(x) ? 0.0 : 1.0; };
  cost.c_lower = 0.0;
  cost.c_upper = 1.0;
  cost.c_hat = 1.0;
  return cost;
}

ImmediateCost margin_cost(std::function<bool(const Vec&)> safe,
                          std::function<double(const Vec&)> signed_distance, double slope) {
  require(slope > 0.0, "margin_cost: slope must be positive");
  ImmediateCost cost;
  cost.c = [safe = std::move(safe), sd = std::move(signed_distance), slope](const Vec& x) {
    double z = slope * sd(x);
    double v = 1.0 / (1.0 + std::exp(-z));
    // The unsafe lower bound c >= c_hat = 0.5 must hold exactly, also when the
    // signed distance is noisy around the boundary.
    if (!safe(x)) v = std::max(v, 0.5);
    return v;
  };
  cost.c_lower = 0.0;
  cost.c_upper = 1.0;
  cost.c_hat = 0.5;
  return cost;
}

}  // namespace safefilter::objective
