#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sbf/atomic_model.hpp"
#include "sbf/constants.hpp"
#include "sbf/error.hpp"

using namespace sbf;

namespace {

constexpr double kTwoPi = constants::kTwoPi;

PolarizationGeometry pi_light(const MagneticField& b) {
  // propagating along x, polarized along the field
  return PolarizationGeometry({1, 0, 0}, b.orientation(), b);
}

int index_of(const LevelScheme& s, Term term, int two_m) {
  for (int i = 0; i < kNumSublevels; ++i)
    if (s.sublevels()[i].term == term && s.sublevels()[i].two_m == two_m) return i;
  return -1;
}

}  // namespace

TEST(LandeFactors, NonrelativisticValues) {
  LevelScheme s;
  EXPECT_NEAR(s.level(Term::kS12).lande_g, 2.0, 1e-12);
  EXPECT_NEAR(s.level(Term::kP12).lande_g, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.level(Term::kD32).lande_g, 4.0 / 5.0, 1e-12);
  EXPECT_NEAR(lande_g(4, 5), 6.0 / 5.0, 1e-12);  // D5/2, two_l = 4
}

TEST(ClebschGordan, MatchesSymbolicTable) {
  // <j1 m1; 1 q | 1/2 M>, reference values from a symbolic CG table.
  EXPECT_NEAR(clebsch_gordan(1, 1, 2, 0, 1, 1), std::sqrt(3.0) / 3.0, 1e-14);
  EXPECT_NEAR(clebsch_gordan(1, -1, 2, 2, 1, 1), -std::sqrt(6.0) / 3.0, 1e-14);
  EXPECT_NEAR(clebsch_gordan(3, 3, 2, -2, 1, 1), std::sqrt(2.0) / 2.0, 1e-14);
  EXPECT_NEAR(clebsch_gordan(3, 1, 2, 0, 1, 1), -std::sqrt(3.0) / 3.0, 1e-14);
  EXPECT_NEAR(clebsch_gordan(3, -1, 2, 2, 1, 1), std::sqrt(6.0) / 6.0, 1e-14);
  EXPECT_EQ(clebsch_gordan(1, 1, 2, 2, 1, 1), 0.0);  // m does not add up
}

TEST(ClebschGordan, SumRulePerUpperSublevel) {
  // For each P1/2 sublevel, sum over lower sublevels and photon q of |CG|^2 is 1 per channel.
  for (int two_mu : {-1, 1}) {
    double s_sum = 0.0, d_sum = 0.0;
    for (int two_ml = -1; two_ml <= 1; two_ml += 2)
      for (int two_q = -2; two_q <= 2; two_q += 2) s_sum += std::pow(clebsch_gordan(1, two_ml, 2, two_q, 1, two_mu), 2);
    for (int two_ml = -3; two_ml <= 3; two_ml += 2)
      for (int two_q = -2; two_q <= 2; two_q += 2) d_sum += std::pow(clebsch_gordan(3, two_ml, 2, two_q, 1, two_mu), 2);
    EXPECT_NEAR(s_sum, 1.0, 1e-13);
    EXPECT_NEAR(d_sum, 1.0, 1e-13);
  }
}

TEST(Zeeman, ZeroField) {
  LevelScheme s;
  const MagneticField b(0.0, {0, 0, 1});
  EXPECT_EQ(zeeman_shift({Term::kS12, 1}, s, b), 0.0);
}

TEST(Zeeman, HandMultipliedValues) {
  LevelScheme s;
  const MagneticField b(1e-4, {0, 0, 1});
  // g m muB B / h: 2 * 0.5 * 13.996245 GHz/T * 1e-4 T = 1.3996 MHz
  EXPECT_NEAR(zeeman_shift({Term::kS12, 1}, s, b) / (kTwoPi * 1e6), 1.3996, 1e-4);
  // 0.8 * (-1.5) * 13.996245e9 * 1e-4 = -1.6795 MHz
  EXPECT_NEAR(zeeman_shift({Term::kD32, -3}, s, b) / (kTwoPi * 1e6), -1.6795, 1e-4);
}

TEST(Zeeman, LinearInFieldAndM) {
  LevelScheme s;
  const MagneticField b1(1e-4, {0, 0, 1}), b3(3e-4, {0, 0, 1});
  for (int two_m : {-3, -1, 1, 3}) {
    const double w1 = zeeman_shift({Term::kD32, two_m}, s, b1);
    EXPECT_NEAR(zeeman_shift({Term::kD32, two_m}, s, b3), 3.0 * w1, 1e-9 * std::abs(w1));
    EXPECT_NEAR(w1, two_m * zeeman_shift({Term::kD32, 1}, s, b1), 1e-9 * std::abs(w1));
  }
}

TEST(Zeeman, RejectsShelfLevel) {
  LevelScheme s;
  EXPECT_THROW(zeeman_shift({Term::kD52, 1}, s, MagneticField()), ConfigError);
}

TEST(Polarization, PerpendicularToFieldHasNoPiComponent) {
  const MagneticField b(1e-4, {0, 0, 1});
  const PolarizationGeometry pol({1, 0, 0}, {0, 1, 0}, b);
  EXPECT_NEAR(std::abs(pol.component(0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(pol.component(1)), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::abs(pol.component(-1)), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Polarization, ComponentsNormalizedForArbitraryGeometry) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int k = 0; k < 50; ++k) {
    const MagneticField b(1e-4, Vector3{g(rng), g(rng), g(rng)}.normalized());
    const Vector3 k_vec = Vector3{g(rng), g(rng), g(rng)}.normalized();
    Vector3 e = cross(k_vec, Vector3{g(rng), g(rng), g(rng)}).normalized();
    const PolarizationGeometry pol(k_vec, e, b);
    const double n2 = std::norm(pol.component(-1)) + std::norm(pol.component(0)) + std::norm(pol.component(1));
    EXPECT_NEAR(n2, 1.0, 1e-12);
  }
}

TEST(Polarization, RejectsNonTransverseAxis) {
  const MagneticField b;
  EXPECT_THROW(PolarizationGeometry({1, 0, 0}, {1, 0, 0}, b), ConfigError);
  EXPECT_THROW(PolarizationGeometry({1, 0, 0}, {0, 2, 0}, b), ConfigError);
}

TEST(CouplingMatrix, PiLightOnlyDeltaMZero) {
  const MagneticField b;
  const LevelScheme s;
  const auto m = coupling_matrix(Transition::kSP, pi_light(b));
  ASSERT_EQ(m.rows(), 2);
  ASSERT_EQ(m.cols(), 2);
  // rows: S m=-1/2,+1/2; columns: P m=-1/2,+1/2
  EXPECT_GT(std::abs(m(0, 0)), 0.1);
  EXPECT_GT(std::abs(m(1, 1)), 0.1);
  EXPECT_NEAR(std::abs(m(0, 1)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(m(1, 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(m(1, 1)), 1.0 / std::sqrt(3.0), 1e-14);
}

TEST(CouplingMatrix, MirrorSymmetryUnderSigmaSwap) {
  const auto plus_heavy = PolarizationGeometry::from_components(0.3, 0.5, std::sqrt(1.0 - 0.09 - 0.25));
  const auto minus_heavy = PolarizationGeometry::from_components(std::sqrt(1.0 - 0.09 - 0.25), 0.5, 0.3);
  for (auto tr : {Transition::kSP, Transition::kDP}) {
    const auto a = coupling_matrix(tr, plus_heavy);
    const auto b = coupling_matrix(tr, minus_heavy);
    const int n = static_cast<int>(a.rows());
    for (int l = 0; l < n; ++l)
      for (int u = 0; u < 2; ++u) EXPECT_NEAR(std::abs(a(l, u)), std::abs(b(n - 1 - l, 1 - u)), 1e-14);
  }
}

TEST(CouplingMatrix, IsotropicSumRule) {
  // Summing |coupling|^2 over three orthogonal pure polarizations and all lower
  // sublevels gives 1 per upper sublevel.
  const auto sp = PolarizationGeometry::from_components(0, 0, 1);
  const auto sm = PolarizationGeometry::from_components(1, 0, 0);
  const auto pi = PolarizationGeometry::from_components(0, 1, 0);
  for (auto tr : {Transition::kSP, Transition::kDP}) {
    Eigen::MatrixXd sum = coupling_matrix(tr, sp).cwiseAbs2() + coupling_matrix(tr, sm).cwiseAbs2() +
                          coupling_matrix(tr, pi).cwiseAbs2();
    for (int u = 0; u < 2; ++u) EXPECT_NEAR(sum.col(u).sum(), 1.0, 1e-13);
  }
}

TEST(LevelScheme, TransitionProbabilitiesByHand) {
  const LevelScheme s(0.9453, 7.39e-9, 435e-3, 390.8e-3);
  EXPECT_NEAR(s.a_sp(), 1.279e8, 0.001e8);
  EXPECT_NEAR(s.a_pd(), 7.40e6, 0.01e6);
  EXPECT_NEAR((s.a_sp() + s.a_pd()) * 7.39e-9, 1.0, 1e-14);
}

TEST(LevelScheme, RejectsUnphysicalValues) {
  EXPECT_THROW(LevelScheme(1.5, 7.39e-9, 0.435, 0.39), Error);
  EXPECT_THROW(LevelScheme(0.9, -1.0, 0.435, 0.39), Error);
}

TEST(DecayChannels, RateCompleteness) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int k = 0; k < 20; ++k) {
    const double p = u(rng);
    const LevelScheme s(p, 7.39e-9, 435e-3, 390.8e-3);
    const auto jumps = decay_channels(s);
    for (int i = kFirstP; i < kFirstP + 2; ++i) {
      const double to_s = total_decay_rate(jumps, i, Term::kS12);
      const double to_d = total_decay_rate(jumps, i, Term::kD32);
      const double gamma = 1.0 / 7.39e-9;
      EXPECT_NEAR((to_s + to_d) / gamma, 1.0, 1e-12);
      EXPECT_NEAR(to_s / gamma, p, 1e-12);
      EXPECT_NEAR(to_d / gamma, 1.0 - p, 1e-12);
    }
  }
}

TEST(DecayChannels, TotalOutOfUpperSublevel) {
  const LevelScheme s;
  const auto jumps = decay_channels(s);
  const int i = index_of(s, Term::kP12, 1);
  const double total = total_decay_rate(jumps, i, Term::kS12) + total_decay_rate(jumps, i, Term::kD32);
  EXPECT_NEAR(total, 1.353e8, 0.001e8);
}

TEST(DecayChannels, ClosedSystemHasNoInfraredJumps) {
  const LevelScheme s = LevelScheme().with_branching(1.0);
  for (const auto& j : decay_channels(s)) {
    if (j.channel != DecayChannel::kInfrared) continue;
    for (const auto& t : j.terms) EXPECT_EQ(t.amplitude, 0.0);
  }
  const auto jumps = decay_channels(s);
  EXPECT_EQ(total_decay_rate(jumps, kFirstP, Term::kD32), 0.0);
}

TEST(DecayChannels, SplitFollowsSquaredClebschGordan) {
  const LevelScheme s;
  const auto jumps = decay_channels(s);
  const int p_up = index_of(s, Term::kP12, 1);
  const int s_up = index_of(s, Term::kS12, 1);
  const int s_dn = index_of(s, Term::kS12, -1);
  double to_up = 0.0, to_dn = 0.0;
  for (const auto& j : jumps) {
    if (j.channel != DecayChannel::kBlue) continue;
    to_up += j.pair_rate(p_up, s_up);
    to_dn += j.pair_rate(p_up, s_dn);
  }
  // pi decay keeps m (1/3), sigma decay flips it (2/3)
  EXPECT_NEAR(to_up / (to_up + to_dn), 1.0 / 3.0, 1e-12);
}
