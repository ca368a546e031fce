#pragma once

#include "safefilter/model/calibrated.hpp"
#include "safefilter/value/grid.hpp"
#include "safefilter/value/quadrature.hpp"

#include <vector>

namespace safefilter::value {

/// Inner maximization over the hallucination box [-1,1]^d. The default
/// enumerates {-1,0,1}^d and refines the best point with one coordinate-wise
/// line search; exact breakpoint enumeration kicks in for d == 1, where the
/// interpolant restricted to the segment is piecewise linear.
struct EtaSearchOptions {
  enum class Mode {
    Grid3,             // {-1,0,1}^d candidates (value solvers)
    VertexPlusCenter,  // {-1,1}^d plus 0 (online filter constraint)
  };
  Mode mode = Mode::Grid3;
  bool refine = true;
  int refine_points = 17;
  bool exact_1d = true;
};

/// Candidate eta points for the given mode and dimension.
const std::vector<Vec>& eta_candidates(EtaSearchOptions::Mode mode, int dim);

/// max over admissible eta of sum_q w_q V(mu + spread .* eta + omega_q),
/// where spread = beta * sigma. Returns the maximum; optionally the argmax.
double worst_case_next_value(const GridValueFunction& v, const Vec& mu, const Vec& spread,
                             const NoiseQuadrature& quad, const EtaSearchOptions& opts,
                             Vec* argmax_eta = nullptr);

/// Same, evaluated from a model at (x, u).
double worst_case_next_value(const GridValueFunction& v, const model::CalibratedModel& m,
                             const Vec& x, const Vec& u, const NoiseQuadrature& quad,
                             const EtaSearchOptions& opts, Vec* argmax_eta = nullptr);

}  // namespace safefilter::value
