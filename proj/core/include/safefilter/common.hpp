#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace safefilter {

/// Dense real vector used for states, actions and model outputs.
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

inline void require_finite(const Vec& v, const std::string& name) {
  if (!v.allFinite())
    throw std::invalid_argument(name + " contains a non-finite entry");
}

}  // namespace safefilter
