#include "safefilter/cert/certificate.hpp"

#include "safefilter/harness/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace safefilter::cert {
namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

TransitionBounds level_transition_bounds(double v_min, double v_max, double theta1,
                                         double theta2, BoundVariant variant) {
  require(v_min <= theta1 && theta1 < theta2 && theta2 < v_max,
          "level_transition_bounds: need v_min <= theta1 < theta2 < v_max");
  TransitionBounds b;
  b.lower = clamp01((theta2 - theta1) / (theta2 - v_min));
  if (variant == BoundVariant::Printed)
    b.upper = clamp01((theta2 - theta1) / (v_max - theta2));
  else
    b.upper = 1.0;  // mass at v_min satisfies the mean condition with P = 1
  return b;
}

double LevelLadder::mean_bound(int level) const {
  require(level >= 1 && level <= levels(), "LevelLadder: level out of range");
  double theta_j = thresholds[level - 1];
  double theta_next = thresholds[level];
  if (variant == BoundVariant::Printed) return theta_j - lambda * (theta_next + v_min);
  return theta_j - lambda * (theta_next - v_min);
}

LevelLadder build_level_ladder(double alpha_lambda, double xi, double xi_bar, double v_min,
                               double vartheta, double v_max, BoundVariant variant,
                               int max_levels) {
  require(alpha_lambda > 0.0 && alpha_lambda <= 1.0,
          "build_level_ladder: lambda must lie in (0,1]");
  require(vartheta > 0.0 && vartheta < 1.0, "build_level_ladder: vartheta must lie in (0,1)");
  require(xi < xi_bar, "build_level_ladder: xi must be strictly below xi_bar");
  require(v_min < xi, "build_level_ladder: xi must exceed the value lower bound");

  auto alpha_arg = [&](double theta) {
    return variant == BoundVariant::Printed ? theta + v_min : theta - v_min;
  };
  // theta^{M+1} solves theta + (vartheta - 1) * lambda * arg(theta) = xi.
  auto implicit = [&](double theta) {
    return theta + (vartheta - 1.0) * alpha_lambda * alpha_arg(theta) - xi;
  };
  double slope = 1.0 - (1.0 - vartheta) * alpha_lambda;  // > 0 for lambda <= 1
  double root_guess =
      (xi + (1.0 - vartheta) * alpha_lambda * (variant == BoundVariant::Printed ? v_min : -v_min)) /
      slope;
  double lo = std::min(xi, root_guess) - 1.0;
  double hi = std::max(xi_bar, root_guess) + 1.0;
  require(implicit(lo) < 0.0 && implicit(hi) > 0.0, "build_level_ladder: bisection bracket");
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    double mid = 0.5 * (lo + hi);
    (implicit(mid) <= 0.0 ? lo : hi) = mid;
  }
  double theta_bottom = 0.5 * (lo + hi);

  std::vector<double> ascending{theta_bottom};
  while (static_cast<int>(ascending.size()) <= max_levels) {
    double increment = vartheta * alpha_lambda * alpha_arg(ascending.back());
    if (increment <= 0.0)
      throw std::runtime_error("build_level_ladder: non-positive recursion increment");
    double next = ascending.back() + increment;
    if (next > xi_bar) break;
    ascending.push_back(next);
  }
  if (ascending.size() < 2)
    throw std::runtime_error(
        "build_level_ladder: M = 0, xi is too close to xi_bar for this vartheta and lambda; "
        "decrease vartheta or xi");

  LevelLadder ladder;
  ladder.thresholds.assign(ascending.rbegin(), ascending.rend());
  ladder.lambda = alpha_lambda;
  ladder.vartheta = vartheta;
  ladder.xi = xi;
  ladder.xi_bar = xi_bar;
  ladder.v_min = v_min;
  ladder.v_max = v_max;
  ladder.variant = variant;
  return ladder;
}

TransitionBoundMatrix build_transition_matrix(const LevelLadder& ladder) {
  const int m = ladder.levels();
  require(m >= 1, "build_transition_matrix: ladder has no levels");
  const auto& theta = ladder.thresholds;
  const double v_min = ladder.v_min;

  TransitionBoundMatrix out;
  out.p = Mat::Zero(m, m);

  if (ladder.variant == BoundVariant::Derived) {
    // Lower bounds on landing at least as deep as each level, assigned to the
    // level cells by telescoping. Columns sum to the level-1 retention bound.
    for (int j = 1; j <= m; ++j) {
      double theta1 = ladder.mean_bound(j);
      int deepest = std::min(j + 1, m);
      auto retention = [&](int i) {
        return clamp01((theta[i - 1] - theta1) / (theta[i - 1] - v_min));
      };
      for (int i = 1; i <= deepest; ++i) {
        double p = i == deepest ? retention(i) : retention(i) - retention(i + 1);
        out.p(i - 1, j - 1) = clamp01(p);
      }
    }
  } else {
    // Published case formulas, linear alpha, entries clamped to [0,1].
    const double lambda = ladder.lambda;
    const double v_max = ladder.v_max;
    for (int j = 1; j <= m; ++j) {
      double a = lambda * (theta[j] + v_min);  // alpha(theta^{j+1} + v_min) as printed
      for (int i = 1; i <= m; ++i) {
        double raw;
        if (i <= j) {
          raw = (theta[i - 1] - theta[j - 1] + a) / (theta[i - 1] - v_min) -
                (theta[i] - theta[j - 1] + a) / (v_max - theta[j - 1] + a);
        } else if (i == j + 1) {
          raw = (1.0 - ladder.vartheta) * a / (theta[j - 1] - a - v_min);
        } else {
          continue;
        }
        double clamped = clamp01(raw);
        if (std::abs(clamped - raw) > 0.5) out.clamp_warning = true;
        out.p(i - 1, j - 1) = clamped;
      }
    }
    // Renormalize columns exceeding unit mass; the deficit feeds the escape row.
    for (int j = 0; j < m; ++j) {
      double colsum = out.p.col(j).sum();
      if (colsum > 1.0) {
        out.p.col(j) /= colsum;
        out.clamp_warning = true;
      }
    }
  }

  out.augmented = Mat::Zero(m + 1, m + 1);
  out.augmented(0, 0) = 1.0;  // absorbing escape state
  for (int j = 0; j < m; ++j) {
    double colsum = out.p.col(j).sum();
    out.augmented(0, j + 1) = std::max(0.0, 1.0 - colsum);
    for (int i = 0; i < m; ++i) out.augmented(i + 1, j + 1) = out.p(i, j);
  }
  return out;
}

double escape_probability(const Mat& augmented, int horizon) {
  require(horizon >= 0, "escape_probability: horizon >= 0");
  Vec w = Vec::Zero(augmented.rows());
  w[w.size() - 1] = 1.0;  // start in the innermost level
  for (int k = 0; k < horizon; ++k) w = augmented * w;
  return std::min(1.0, std::max(0.0, w[0]));
}

double supermartingale_escape_bound(double xi, double xi_bar, double v_min, int horizon,
                                    std::optional<double> epsilon) {
  require(v_min <= xi && xi < xi_bar, "supermartingale_escape_bound: need v_min <= xi < xi_bar");
  require(horizon >= 0, "supermartingale_escape_bound: horizon >= 0");
  if (!epsilon) return 1.0;
  require(*epsilon >= 0.0, "supermartingale_escape_bound: epsilon must be >= 0");
  return clamp01((xi - v_min + horizon * *epsilon) / (xi_bar - v_min));
}

CertificateReport delta_fl(const LevelLadder& ladder, int horizon, double delta_f,
                           std::optional<double> drift_slack) {
  require(delta_f >= 0.0 && delta_f <= 1.0, "delta_fl: delta_f must lie in [0,1]");
  CertificateReport report;
  report.ladder = ladder;
  report.horizon = horizon;
  report.matrix = build_transition_matrix(ladder);
  report.delta_matrix = escape_probability(report.matrix.augmented, horizon);
  report.delta_ville = supermartingale_escape_bound(ladder.xi, ladder.xi_bar, ladder.v_min,
                                                    horizon, drift_slack);
  report.delta_fl = std::min(report.delta_matrix, report.delta_ville);
  report.delta_f = delta_f;
  report.delta_total = report.delta_fl + delta_f - report.delta_fl * delta_f;
  return report;
}

CertificateReport best_certificate(double alpha_lambda, double xi, double xi_bar, double v_min,
                                   double v_max, int horizon, double delta_f,
                                   const std::vector<double>& vartheta_grid,
                                   BoundVariant variant, std::optional<double> drift_slack) {
  std::optional<CertificateReport> best;
  for (double vartheta : vartheta_grid) {
    LevelLadder ladder;
    try {
      ladder = build_level_ladder(alpha_lambda, xi, xi_bar, v_min, vartheta, v_max, variant);
    } catch (const std::exception&) {
      continue;  // this vartheta yields no ladder
    }
    CertificateReport report = delta_fl(ladder, horizon, delta_f, drift_slack);
    if (!best || report.delta_fl < best->delta_fl) best = std::move(report);
  }
  if (!best)
    throw std::runtime_error("best_certificate: no vartheta in the grid produced a ladder");
  return *best;
}

std::optional<int> verify_ladder_on_grid(const LevelLadder& ladder,
                                         const std::vector<double>& v_nodes,
                                         const std::vector<double>& worst_next_nodes) {
  require(v_nodes.size() == worst_next_nodes.size(), "verify_ladder_on_grid: size mismatch");
  for (int j = 1; j <= ladder.levels(); ++j) {
    double theta_j = ladder.thresholds[j - 1];
    double bound = ladder.mean_bound(j);
    for (std::size_t i = 0; i < v_nodes.size(); ++i) {
      if (v_nodes[i] < theta_j && worst_next_nodes[i] > bound) return j;
    }
  }
  return std::nullopt;
}

std::pair<double, double> wilson_interval(int successes, int trials, double z) {
  require(trials > 0 && successes >= 0 && successes <= trials, "wilson_interval: bad counts");
  double n = trials;
  double p = successes / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
  double hi = successes == trials ? 1.0 : std::min(1.0, center + half);
  return {lo, hi};
}

McCrossCheck mc_delta_estimate(const StepFn& dynamics, const PolicyFn& policy,
                               const std::function<double(const Vec&)>& value, double xi_bar,
                               const std::vector<Vec>& x0_set, int horizon, int n_rollouts,
                               RandomSource& rng) {
  require(n_rollouts >= 1000, "mc_delta_estimate: need at least 1000 roll-outs");
  require(!x0_set.empty(), "mc_delta_estimate: empty start set");
  int escapes = 0;
  for (int r = 0; r < n_rollouts; ++r) {
    Vec x = x0_set[r % x0_set.size()];
    for (int k = 0; k < horizon; ++k) {
      x = dynamics(x, policy(x), rng);
      if (value(x) > xi_bar) {
        ++escapes;
        break;
      }
    }
  }
  McCrossCheck mc;
  mc.rollouts = n_rollouts;
  mc.rate = static_cast<double>(escapes) / n_rollouts;
  auto [lo, hi] = wilson_interval(escapes, n_rollouts);
  mc.lo = lo;
  mc.hi = hi;
  return mc;
}

std::string CertificateReport::to_json() const {
  nlohmann::json j;
  j["format"] = "safefilter-certificate";
  j["version"] = 1;
  j["delta_fl"] = delta_fl;
  j["delta_matrix"] = delta_matrix;
  j["delta_ville"] = delta_ville;
  j["delta_f"] = delta_f;
  j["delta_total"] = delta_total;
  j["horizon"] = horizon;
  j["ladder"]["thresholds"] = ladder.thresholds;
  j["ladder"]["lambda"] = ladder.lambda;
  j["ladder"]["vartheta"] = ladder.vartheta;
  j["ladder"]["xi"] = ladder.xi;
  j["ladder"]["xi_bar"] = ladder.xi_bar;
  j["ladder"]["v_min"] = ladder.v_min;
  j["ladder"]["v_max"] = ladder.v_max;
  j["ladder"]["variant"] = ladder.variant == BoundVariant::Derived ? "derived" : "printed";
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < matrix.p.rows(); ++i) {
    std::vector<double> row(matrix.p.cols());
    for (Eigen::Index c = 0; c < matrix.p.cols(); ++c) row[c] = matrix.p(i, c);
    rows.push_back(std::move(row));
  }
  j["transition_bounds"] = rows;
  j["clamp_warning"] = matrix.clamp_warning;
  if (mc_crosscheck) {
    j["mc_crosscheck"] = {{"rate", mc_crosscheck->rate},
                          {"lo", mc_crosscheck->lo},
                          {"hi", mc_crosscheck->hi},
                          {"rollouts", mc_crosscheck->rollouts}};
  }
  return j.dump(2);
}

}  // namespace safefilter::cert
