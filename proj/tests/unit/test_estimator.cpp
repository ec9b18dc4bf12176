#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sbf/error.hpp"
#include "sbf/estimator.hpp"

using namespace sbf;

namespace {

CountRecord run1() {
  CountRecord r;
  r.cycles = 54272970;
  r.n_b = 1295709;
  r.n_r = 105439;
  r.n_b_bg = 342349;
  r.n_r_bg = 50418;
  return r;
}

CountRecord run2() {
  CountRecord r;
  r.cycles = 111200000;
  r.n_b = 3521973;
  r.n_r = 244082;
  r.n_b_bg = 1657903;
  r.n_r_bg = 136141;
  return r;
}

// Straight from the counts, kept apart from the library code on purpose.
double oracle_p(const CountRecord& r) {
  const double sb = r.n_b - r.n_b_bg, sr = r.n_r - r.n_r_bg;
  return sb / (sb + sr);
}

double oracle_sigma_linear(const CountRecord& r) {
  const double sb = r.n_b - r.n_b_bg, sr = r.n_r - r.n_r_bg;
  const double p = oracle_p(r);
  return p * (1 - p) *
         ((std::sqrt(double(r.n_b)) + std::sqrt(double(r.n_b_bg))) / sb +
          (std::sqrt(double(r.n_r)) + std::sqrt(double(r.n_r_bg))) / sr);
}

ErrorBudget small_budget() {
  ErrorBudget b;
  b.rows = {{"collisions", 0.0, 2e-7, 2e-7},
            {"dead time", 7e-6, 5e-6, 3e-6},
            {"finite windows", 1e-5, 2e-4, 2e-5},
            {"laser leaks", 1e-8, 1e-8, 1e-8}};
  return b;
}

}  // namespace

TEST(Estimator, RunOneCounts) {
  const Estimate e = branching_fraction(run1());
  EXPECT_NEAR(e.p, oracle_p(run1()), 1e-14);
  EXPECT_NEAR(e.sigma_stat, oracle_sigma_linear(run1()), 1e-14);
  EXPECT_EQ(format_with_error(e.p, e.sigma_stat), "0.9454(6)");
  EXPECT_EQ(format_with_error(e.branching_ratio.value, e.branching_ratio.plus), "17.33(20)");
  EXPECT_NEAR(e.efficiency, (105439.0 - 50418.0) / 54272970.0, 1e-15);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", e.efficiency);
  EXPECT_STREQ(buf, "1.01e-03");
}

TEST(Estimator, RunTwoCounts) {
  const Estimate e = branching_fraction(run2());
  EXPECT_EQ(format_with_error(e.p, e.sigma_stat), "0.9453(5)");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1e", e.efficiency);
  EXPECT_STREQ(buf, "9.7e-04");
  EXPECT_EQ(format_with_error(e.branching_ratio.value, e.branching_ratio.plus), "17.27(17)");
}

TEST(Estimator, SmallIntegerExample) {
  CountRecord r;
  r.cycles = 1;
  r.n_b = 17;
  r.n_r = 1;
  const Estimate e = branching_fraction(r);
  EXPECT_DOUBLE_EQ(e.p, 17.0 / 18.0);
  EXPECT_NEAR(e.branching_ratio.value, 17.0, 1e-12);
}

TEST(Estimator, QuadratureIsSmallerThanLinear) {
  EstimatorOptions q;
  q.propagation = ErrorPropagation::kQuadrature;
  const CountRecord r = run1();
  const double sb = r.n_b - r.n_b_bg, sr = r.n_r - r.n_r_bg, p = oracle_p(r);
  const double expect =
      p * (1 - p) * std::sqrt((double(r.n_b) + r.n_b_bg) / (sb * sb) + (double(r.n_r) + r.n_r_bg) / (sr * sr));
  const Estimate e = branching_fraction(r, q);
  EXPECT_NEAR(e.sigma_stat, expect, 1e-15);
  EXPECT_LT(e.sigma_stat, branching_fraction(r).sigma_stat);
}

TEST(Estimator, RejectsBadCounts) {
  CountRecord r = run1();
  r.n_r_bg = r.n_r + 1;
  EXPECT_THROW(branching_fraction(r), EstimationError);
  r = run1();
  r.n_b_bg = r.n_b + 10;
  EXPECT_THROW(branching_fraction(r), EstimationError);
  r = run1();
  r.cycles = 0;
  EXPECT_THROW(branching_fraction(r), EstimationError);
  r = run1();
  r.n_b = -1;
  EXPECT_THROW(branching_fraction(r), EstimationError);
}

TEST(Estimator, ExposureScaling) {
  CountRecord r = run1();
  r.window_b_bg = 80e-6;
  EXPECT_THROW(branching_fraction(r), EstimationError);
  r.exposure_scaling = true;
  r.n_b_bg = 342349 / 2;
  const Estimate e = branching_fraction(r);
  EXPECT_NEAR(e.signal_b, 1295709.0 - 2.0 * (342349 / 2), 1e-9);
}

TEST(Estimator, MonotoneInSignals) {
  CountRecord r = run1();
  const double p0 = branching_fraction(r).p;
  r.n_b += 1000;
  EXPECT_GT(branching_fraction(r).p, p0);
  r = run1();
  r.n_r += 1000;
  EXPECT_LT(branching_fraction(r).p, p0);
}

TEST(BranchingRatio, Mapping) {
  EXPECT_NEAR(branching_ratio({0.5, 0.0, 0.0}).value, 1.0, 1e-15);
  // the published 17.27 comes from the unrounded run-2 p; 0.9453 itself maps to 17.28
  const double p2 = branching_fraction(run2()).p;
  const AsymmetricValue br = branching_ratio({p2, 0.0007, 0.0005});
  EXPECT_EQ(format_asymmetric(br.value, br.plus, br.minus), "17.27 +0.23/-0.17");
  EXPECT_NEAR(branching_ratio({0.9453, 0.0, 0.0}).value, 0.9453 / 0.0547, 1e-12);
  const AsymmetricValue ep = branching_ratio({0.9453, 0.0007, 0.0005}, BoundMapping::kEndpoint);
  EXPECT_NEAR(ep.plus, (0.946 / 0.054) - 0.9453 / 0.0547, 1e-9);
  EXPECT_GT(ep.plus, branching_ratio({0.9453, 0.0007, 0.0005}).plus);  // convex map
  EXPECT_THROW(branching_ratio({1.0, 0.0, 0.0}), EstimationError);
  EXPECT_THROW(branching_ratio({0.0, 0.0, 0.0}), EstimationError);
  EXPECT_THROW(branching_ratio({0.9995, 0.001, 0.0}, BoundMapping::kEndpoint), EstimationError);
}

TEST(TransitionProbabilities, FromP) {
  const auto t = transition_probabilities({0.9453, 0.0007, 0.0005}, 7.39e-9, 0.07e-9);
  EXPECT_NEAR(t.a_sp.value, 0.9453 / 7.39e-9, 1e-3);
  EXPECT_NEAR(t.a_pd.value, 0.0547 / 7.39e-9, 1e-3);
  EXPECT_NEAR(t.a_sp.value / 1e8, 1.279, 0.001);
  EXPECT_NEAR(t.a_pd.value / 1e6, 7.40, 0.01);
  EXPECT_EQ(t.a_sp_dominant, "tau_P");
  EXPECT_EQ(t.a_pd_dominant, "branching fraction");
  EXPECT_NEAR(t.a_pd.plus / t.a_pd.value, std::hypot(0.0005 / 0.0547, 0.07 / 7.39), 1e-12);
}

TEST(CombineUncertainty, AddsLinearly) {
  ErrorBudget b;
  b.rows = {{"x", 0.0, 2e-4, 2e-5}};
  const AsymmetricValue v = combine_total_uncertainty(0.9453, 0.0005, b);
  EXPECT_NEAR(v.plus, 0.0007, 1e-15);
  EXPECT_NEAR(v.minus, 0.00052, 1e-15);
  EXPECT_EQ(format_asymmetric(v.value, v.plus, v.minus), "0.9453 +0.0007/-0.0005");

  const AsymmetricValue none = combine_total_uncertainty(0.9453, 0.0005, ErrorBudget{});
  EXPECT_EQ(none.value, 0.9453);
  EXPECT_EQ(none.plus, 0.0005);
  EXPECT_EQ(none.minus, 0.0005);
}

TEST(CombineUncertainty, ShiftAndDoubling) {
  const ErrorBudget b = small_budget();
  const AsymmetricValue v = combine_total_uncertainty(0.9453, 0.0005, b);
  EXPECT_NEAR(v.value, 0.9453 + 7e-6 + 1e-5 + 1e-8, 1e-15);
  ErrorBudget twice = b;
  for (auto& r : twice.rows) {
    r.shift *= 2;
    r.plus *= 2;
    r.minus *= 2;
  }
  const AsymmetricValue w = combine_total_uncertainty(0.9453, 0.0005, twice);
  EXPECT_NEAR(w.plus - 0.0005, 2 * (v.plus - 0.0005), 1e-15);
  EXPECT_NEAR(w.minus - 0.0005, 2 * (v.minus - 0.0005), 1e-15);
}

TEST(Rounding, ParticleDataGroupRule) {
  EXPECT_EQ(format_with_error(0.94543, 0.000583), "0.9454(6)");
  EXPECT_EQ(format_with_error(17.3312, 0.1987), "17.33(20)");
  EXPECT_EQ(format_with_error(1.23456, 0.0354), "1.235(35)");
  EXPECT_EQ(format_with_error(1.23456, 0.0355), "1.23(4)");
  EXPECT_EQ(format_with_error(1.23456, 0.0949), "1.23(9)");
  EXPECT_EQ(format_with_error(1.23456, 0.0950), "1.23(10)");
  EXPECT_EQ(format_with_error(1.23456, 0.0999), "1.23(10)");
  EXPECT_EQ(format_with_error(1234.4, 12.0), "1234(12)");
  EXPECT_EQ(rounding_decimals(0.0005), 4);
  EXPECT_EQ(rounding_decimals(0.2), 2);
  EXPECT_THROW(rounding_decimals(0.0), Error);
}

TEST(Coverage, QuadratureIntervalsOnPoissonBatches) {
  // Poisson counts with run-1 means; the quadrature 1-sigma interval should cover p about 68% of the time.
  const CountRecord m = run1();
  const double lb = m.n_b_bg, lr = m.n_r_bg;
  const double sb = m.n_b - m.n_b_bg, sr = m.n_r - m.n_r_bg;
  const double truth = sb / (sb + sr);
  std::mt19937_64 rng(99);
  EstimatorOptions q;
  q.propagation = ErrorPropagation::kQuadrature;
  int covered = 0;
  const int batches = 500;
  for (int i = 0; i < batches; ++i) {
    CountRecord r = m;
    r.n_b = std::poisson_distribution<long>(sb + lb)(rng);
    r.n_b_bg = std::poisson_distribution<long>(lb)(rng);
    r.n_r = std::poisson_distribution<long>(sr + lr)(rng);
    r.n_r_bg = std::poisson_distribution<long>(lr)(rng);
    const Estimate e = branching_fraction(r, q);
    if (std::abs(e.p - truth) <= e.sigma_stat) ++covered;
  }
  const double frac = double(covered) / batches;
  EXPECT_GT(frac, 0.62);
  EXPECT_LT(frac, 0.74);
}
