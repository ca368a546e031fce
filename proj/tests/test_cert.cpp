#include "safefilter/cert/certificate.hpp"
#include "safefilter/envs/chain_mdp.hpp"
#include "oracles/oracles.hpp"

#include <json.hpp>

#include <doctest.h>

#include <cmath>

using namespace safefilter;
using namespace safefilter::cert;

namespace {

}  // namespace

TEST_CASE("level transition bounds: sharp lower bound and enumeration validity") {
  // v in [0,1], theta1 = 0.1, theta2 = 0.5
  TransitionBounds b = level_transition_bounds(0.0, 1.0, 0.1, 0.5);
  CHECK(b.lower == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(b.upper == 1.0);  // mean-only information cannot cap the probability below 1

  TransitionBounds printed = level_transition_bounds(0.0, 1.0, 0.1, 0.5, BoundVariant::Printed);
  CHECK(printed.upper == doctest::Approx(0.8).epsilon(1e-15));

  // theta1 -> theta2 from below: no slack, lower bound goes to 0
  TransitionBounds tight = level_transition_bounds(0.0, 1.0, 0.5 - 1e-9, 0.5);
  CHECK(tight.lower == doctest::Approx(0.0).epsilon(1e-6));

  CHECK_THROWS(level_transition_bounds(0.0, 1.0, 0.6, 0.5));
  CHECK_THROWS(level_transition_bounds(0.2, 1.0, 0.1, 0.5));
}

TEST_CASE("derived bounds verified against exhaustive extreme-point distributions") {
  // Coarse lattice here; the acceptance suite runs the full 0.01 lattice.
  const double v_min = 0.0, v_max = 1.0;
  std::vector<double> lattice;
  for (int i = 0; i <= 20; ++i) lattice.push_back(i / 20.0);

  int checked = 0;
  for (double theta1 : {0.1, 0.25, 0.5}) {
    for (double theta2 : {0.3, 0.55, 0.9}) {
      if (!(theta1 < theta2)) continue;
      TransitionBounds b = level_transition_bounds(v_min, v_max, theta1, theta2);
      // Sharpness witnesses: track the extreme exact probabilities seen.
      double exact_min = 1.0, exact_max = 0.0;
      for (std::size_t i = 0; i < lattice.size(); ++i) {
        for (std::size_t j = 0; j < lattice.size(); ++j) {
          std::vector<double> atoms{lattice[i], lattice[j]};
          oracles::for_each_extreme_distribution(atoms, theta1, [&](const std::vector<double>& w) {
            double exact = 0.0;
            for (std::size_t k = 0; k < atoms.size(); ++k)
              if (atoms[k] < theta2) exact += w[k];
            CHECK(b.lower <= exact + 1e-12);
            CHECK(exact <= b.upper + 1e-12);
            exact_min = std::min(exact_min, exact);
            exact_max = std::max(exact_max, exact);
            ++checked;
          });
        }
      }
      CHECK(exact_min == doctest::Approx(b.lower).epsilon(1e-12));  // lower bound is sharp
      CHECK(exact_max == doctest::Approx(b.upper).epsilon(1e-12));  // so is upper = 1
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("ladder construction: closed form, ordering, failure modes") {
  double lambda = 0.3, xi = 0.4, xi_bar = 1.0, vartheta = 0.25;
  LevelLadder ladder = build_level_ladder(lambda, xi, xi_bar, 0.0, vartheta);

  // v_min = 0: theta^{M+1} = xi / (1 + (vartheta - 1) lambda)
  double expected_bottom = xi / (1.0 + (vartheta - 1.0) * lambda);
  CHECK(ladder.thresholds.back() == doctest::Approx(expected_bottom).epsilon(1e-9));
  CHECK(ladder.levels() >= 1);
  for (std::size_t i = 0; i + 1 < ladder.thresholds.size(); ++i)
    CHECK(ladder.thresholds[i] > ladder.thresholds[i + 1]);
  CHECK(ladder.thresholds.front() <= xi_bar);
  // the deepest level's mean bound is exactly xi
  CHECK(ladder.mean_bound(ladder.levels()) == doctest::Approx(xi).epsilon(1e-9));

  CHECK_THROWS(build_level_ladder(0.0, xi, xi_bar, 0.0, vartheta));   // lambda = 0 not class-K
  CHECK_THROWS(build_level_ladder(1.5, xi, xi_bar, 0.0, vartheta));   // lambda > 1
  CHECK_THROWS(build_level_ladder(lambda, 0.99, 1.0, 0.0, 0.9));      // xi too close: M = 0
  CHECK_THROWS(build_level_ladder(lambda, xi, xi_bar, 0.5, vartheta));  // xi <= v_min
}

TEST_CASE("transition matrix is left-stochastic with an absorbing escape state") {
  LevelLadder ladder = build_level_ladder(0.4, 0.3, 1.0, 0.0, 0.2);
  TransitionBoundMatrix tb = build_transition_matrix(ladder);
  const int m = ladder.levels();
  REQUIRE(tb.augmented.rows() == m + 1);
  for (int j = 0; j <= m; ++j)
    CHECK(tb.augmented.col(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tb.augmented(0, 0) == 1.0);
  for (int i = 1; i <= m; ++i) CHECK(tb.augmented(i, 0) == 0.0);
  // no transitions deeper than one level per step
  for (int j = 1; j <= m; ++j)
    for (int i = j + 2; i <= m; ++i) CHECK(tb.augmented(i, j) == 0.0);
  CHECK_FALSE(tb.clamp_warning);
}

TEST_CASE("delta_fl closed forms") {
  LevelLadder ladder = build_level_ladder(0.4, 0.3, 1.0, 0.0, 0.2);
  CHECK(delta_fl(ladder, 0).delta_fl == 0.0);

  // guaranteed stay: M = 1 with p_{1,1} = 1
  Mat stay = Mat::Zero(2, 2);
  stay(0, 0) = 1.0;
  stay(1, 1) = 1.0;
  for (int k : {0, 1, 10, 1000}) CHECK(escape_probability(stay, k) == 0.0);

  // single level with per-step escape bound q: delta = 1 - (1-q)^K
  double q = 0.07;
  Mat chain = Mat::Zero(2, 2);
  chain(0, 0) = 1.0;
  chain(0, 1) = q;
  chain(1, 1) = 1.0 - q;
  for (int k : {1, 5, 50}) {
    CHECK(escape_probability(chain, k) ==
          doctest::Approx(1.0 - std::pow(1.0 - q, k)).epsilon(1e-12));
  }

  // Monte-Carlo cross-check of the same closed form
  RandomSource rng(4);
  int escapes = 0;
  const int runs = 100000, horizon = 5;
  for (int r = 0; r < runs; ++r) {
    bool escaped = false;
    for (int k = 0; k < horizon && !escaped; ++k) escaped = rng.uniform01() < q;
    escapes += escaped ? 1 : 0;
  }
  double mc = static_cast<double>(escapes) / runs;
  auto [lo, hi] = wilson_interval(escapes, runs);
  double exact = 1.0 - std::pow(1.0 - q, horizon);
  CHECK(lo <= exact);
  CHECK(exact <= hi);
  CHECK(std::abs(mc - exact) < 0.01);
}

TEST_CASE("delta_fl lies in [0,1], grows with K, and shrinks as xi decreases") {
  double lambda = 0.35, xi_bar = 1.0, v_min = 0.0, v_max = 3.0;
  std::vector<double> xis{0.5, 0.4, 0.3, 0.2, 0.1};
  double previous = 1.0;
  for (double xi : xis) {
    CertificateReport report = best_certificate(lambda, xi, xi_bar, v_min, v_max, 50);
    CHECK(report.delta_fl >= 0.0);
    CHECK(report.delta_fl <= 1.0);
    CHECK(report.delta_fl <= previous + 1e-12);
    previous = report.delta_fl;

    CertificateReport shorter = delta_fl(report.ladder, 25);
    CertificateReport longer = delta_fl(report.ladder, 100);
    CHECK(shorter.delta_fl <= report.delta_fl + 1e-12);
    CHECK(report.delta_fl <= longer.delta_fl + 1e-12);
  }
}

TEST_CASE("supermartingale escape bound") {
  // zero slack: the maximal inequality alone, K-independent
  CHECK(supermartingale_escape_bound(0.05, 0.5, 0.0, 100, 0.0) ==
        doctest::Approx(0.1).epsilon(1e-12));
  // slack accumulates linearly in the horizon
  CHECK(supermartingale_escape_bound(0.05, 0.5, 0.0, 100, 1e-3) ==
        doctest::Approx((0.05 + 0.1) / 0.5).epsilon(1e-12));
  // without a measured slack the route is vacuous
  CHECK(supermartingale_escape_bound(0.05, 0.5, 0.0, 100) == 1.0);
  // clamped into [0,1]
  CHECK(supermartingale_escape_bound(0.4, 0.5, 0.0, 1000, 0.1) == 1.0);
  CHECK_THROWS(supermartingale_escape_bound(0.6, 0.5, 0.0, 10, 0.0));
  CHECK_THROWS(supermartingale_escape_bound(0.05, 0.5, 0.0, 10, -0.1));

  // exact validation on an iid-escape chain: V in {0, 1}, escape prob q per
  // step; E[V'] = q everywhere, so the slack is q and the bound must dominate
  // the closed form 1 - (1-q)^K.
  double q = 0.004;
  for (int k : {1, 10, 50}) {
    double bound = supermartingale_escape_bound(q, 0.5, 0.0, k, q);
    double exact = 1.0 - std::pow(1.0 - q, k);
    CHECK(bound >= exact - 1e-12);
  }
}

TEST_CASE("delta_fl takes the minimum of the matrix and supermartingale routes") {
  LevelLadder ladder = build_level_ladder(0.4, 0.05, 1.0, 0.0, 0.2);
  CertificateReport no_slack = delta_fl(ladder, 100, 0.0);
  CHECK(no_slack.delta_ville == 1.0);
  CHECK(no_slack.delta_fl == no_slack.delta_matrix);

  CertificateReport with_slack = delta_fl(ladder, 100, 0.0, 0.0);
  CHECK(with_slack.delta_ville == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(with_slack.delta_fl ==
        doctest::Approx(std::min(with_slack.delta_matrix, with_slack.delta_ville)));
  CHECK(with_slack.delta_fl <= no_slack.delta_fl);
}

TEST_CASE("delta composition with the model failure probability") {
  LevelLadder ladder = build_level_ladder(0.4, 0.3, 1.0, 0.0, 0.2);
  CertificateReport report = delta_fl(ladder, 20, 0.05);
  CHECK(report.delta_total ==
        doctest::Approx(report.delta_fl + 0.05 - report.delta_fl * 0.05).epsilon(1e-15));
  CHECK(report.delta_total >= report.delta_fl);
}

TEST_CASE("certificate dominates the exact escape probability on random chains") {
  int tested = 0;
  for (std::uint64_t seed = 1; seed <= 40 && tested < 8; ++seed) {
    oracles::CertifiableChain chain = oracles::build_certifiable_chain(7, seed);
    if (!chain.ok) continue;
    ++tested;
    std::vector<bool> bad(chain.p.rows());
    for (int s = 0; s < chain.p.rows(); ++s) bad[s] = chain.value[s] > chain.xi_bar;
    for (int horizon : {10, 50}) {
      CertificateReport report = best_certificate(chain.lambda, chain.xi, chain.xi_bar,
                                                  chain.v_min, chain.v_max, horizon);
      double exact = oracles::chain_hit_probability(chain.p, bad, chain.start, horizon);
      CHECK(report.delta_fl >= exact - 1e-12);
    }
  }
  CHECK(tested >= 5);
}

TEST_CASE("printed-variant matrices are exposed for comparison") {
  LevelLadder ladder = build_level_ladder(0.4, 0.3, 1.0, 0.0, 0.2, 3.0, BoundVariant::Printed);
  TransitionBoundMatrix tb = build_transition_matrix(ladder);
  for (int j = 0; j <= ladder.levels(); ++j)
    CHECK(tb.augmented.col(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CertificateReport report = delta_fl(ladder, 10);
  CHECK(report.delta_fl >= 0.0);
  CHECK(report.delta_fl <= 1.0);
}

TEST_CASE("ladder verification against grid data") {
  LevelLadder ladder = build_level_ladder(0.5, 0.3, 1.0, 0.0, 0.2);
  // Nodes exactly on the drift envelope pass ...
  std::vector<double> v{0.05, 0.2, 0.5, 0.9, 2.0};
  std::vector<double> w;
  for (double value : v) w.push_back(value - 0.5 * value);
  CHECK(!verify_ladder_on_grid(ladder, v, w).has_value());
  // ... and an inflated worst-case next value at a deep node fails.
  w[0] = ladder.xi + 0.05;
  auto bad = verify_ladder_on_grid(ladder, v, w);
  REQUIRE(bad.has_value());
  CHECK(*bad >= 1);
}

TEST_CASE("mc_delta_estimate: zero-noise contraction never escapes") {
  StepFn dynamics = [](const Vec& x, const Vec&, RandomSource&) -> Vec { return 0.5 * x; };
  PolicyFn policy = [](const Vec&) { return Vec::Zero(1); };
  auto value = [](const Vec& x) { return std::abs(x[0]); };
  RandomSource rng(5);
  McCrossCheck mc = mc_delta_estimate(dynamics, policy, value, 0.9, {Vec::Constant(1, 0.5)}, 50,
                                      1000, rng);
  CHECK(mc.rate == 0.0);
  CHECK(mc.lo == 0.0);
  CHECK_THROWS(mc_delta_estimate(dynamics, policy, value, 0.9, {Vec::Constant(1, 0.5)}, 50, 10,
                                 rng));
}

TEST_CASE("mc_delta_estimate recovers a known analytic escape rate") {
  // Escape independently with probability q per step.
  double q = 0.04;
  StepFn dynamics = [q](const Vec& x, const Vec&, RandomSource& rng) -> Vec {
    if (x[0] > 0.5) return x;  // escaped: stay escaped
    return Vec::Constant(1, rng.uniform01() < q ? 1.0 : 0.0);
  };
  PolicyFn policy = [](const Vec&) { return Vec::Zero(1); };
  auto value = [](const Vec& x) { return x[0]; };
  RandomSource rng(6);
  const int horizon = 8;
  McCrossCheck mc = mc_delta_estimate(dynamics, policy, value, 0.9, {Vec::Zero(1)}, horizon,
                                      50000, rng);
  double exact = 1.0 - std::pow(1.0 - q, horizon);
  CHECK(mc.lo <= exact);
  CHECK(exact <= mc.hi);
}

TEST_CASE("wilson interval basics") {
  auto [lo0, hi0] = wilson_interval(0, 1000);
  CHECK(lo0 == 0.0);
  CHECK(hi0 > 0.0);
  CHECK(hi0 < 0.01);
  auto [lo, hi] = wilson_interval(500, 1000);
  CHECK(lo < 0.5);
  CHECK(hi > 0.5);
  auto [lo2, hi2] = wilson_interval(5000, 10000);
  CHECK(hi2 - lo2 < hi - lo);  // shrinks with n
  CHECK_THROWS(wilson_interval(5, 0));
}

TEST_CASE("certificate report serializes to a parseable document") {
  LevelLadder ladder = build_level_ladder(0.4, 0.3, 1.0, 0.0, 0.2);
  CertificateReport report = delta_fl(ladder, 25, 0.01);
  report.mc_crosscheck = McCrossCheck{0.001, 0.0005, 0.002, 100000};
  nlohmann::json j = nlohmann::json::parse(report.to_json());
  CHECK(j["format"] == "safefilter-certificate");
  CHECK(j["delta_fl"].get<double>() == report.delta_fl);
  CHECK(j["horizon"].get<int>() == 25);
  CHECK(j["ladder"]["thresholds"].size() == ladder.thresholds.size());
  CHECK(j["mc_crosscheck"]["rollouts"].get<int>() == 100000);
}
