#include "sbf/atomic_model.hpp"

#include <cmath>
#include <limits>

#include "sbf/constants.hpp"
#include "sbf/error.hpp"
#include "sbf/hash.hpp"

namespace sbf {
namespace {

double factorial(int n) {
  // n never exceeds ~12 for the spins involved here.
  double result = 1.0;
  for (int i = 2; i <= n; ++i) result *= i;
  return result;
}

bool is_integer_half_sum(int a, int b) { return ((a + b) % 2) == 0; }

}  // namespace

std::string to_string(Term term) {
  switch (term) {
    case Term::kS12: return "S1/2";
    case Term::kP12: return "P1/2";
    case Term::kD32: return "D3/2";
    case Term::kD52: return "D5/2";
  }
  return "?";
}

double lande_g(int two_l, int two_j) {
  const double j = 0.5 * two_j;
  const double l = 0.5 * two_l;
  const double s = 0.5;
  return 1.0 + (j * (j + 1) + s * (s + 1) - l * (l + 1)) / (2.0 * j * (j + 1));
}

double clebsch_gordan(int two_j1, int two_m1, int two_j2, int two_m2, int two_j, int two_m) {
  if (two_m1 + two_m2 != two_m) return 0.0;
  if (std::abs(two_m1) > two_j1 || std::abs(two_m2) > two_j2 || std::abs(two_m) > two_j) return 0.0;
  if (!is_integer_half_sum(two_j1, two_m1) || !is_integer_half_sum(two_j2, two_m2) ||
      !is_integer_half_sum(two_j, two_m))
    return 0.0;
  if (two_j < std::abs(two_j1 - two_j2) || two_j > two_j1 + two_j2) return 0.0;
  if (!is_integer_half_sum(two_j1 + two_j2, two_j)) return 0.0;

  // All of these are integers once the triangle and parity checks pass.
  const int a = (two_j1 + two_j2 - two_j) / 2;
  const int b = (two_j1 - two_j2 + two_j) / 2;
  const int c = (-two_j1 + two_j2 + two_j) / 2;
  const int d = (two_j1 + two_j2 + two_j) / 2 + 1;
  const double prefactor = std::sqrt((two_j + 1) * factorial(a) * factorial(b) * factorial(c) / factorial(d));
  const double norm = std::sqrt(factorial((two_j + two_m) / 2) * factorial((two_j - two_m) / 2) *
                                factorial((two_j1 - two_m1) / 2) * factorial((two_j1 + two_m1) / 2) *
                                factorial((two_j2 - two_m2) / 2) * factorial((two_j2 + two_m2) / 2));
  double sum = 0.0;
  for (int k = 0; k <= 2 * (two_j1 + two_j2 + two_j); ++k) {
    const int e1 = a - k;
    const int e2 = (two_j1 - two_m1) / 2 - k;
    const int e3 = (two_j2 + two_m2) / 2 - k;
    const int e4 = (two_j - two_j2 + two_m1) / 2 + k;
    const int e5 = (two_j - two_j1 - two_m2) / 2 + k;
    if (e1 < 0 || e2 < 0 || e3 < 0) continue;
    if (e4 < 0 || e5 < 0) continue;
    const double term = 1.0 / (factorial(k) * factorial(e1) * factorial(e2) * factorial(e3) *
                               factorial(e4) * factorial(e5));
    sum += (k % 2 == 0) ? term : -term;
  }
  return prefactor * norm * sum;
}

// ---------------------------------------------------------------------------

LevelScheme::LevelScheme()
    : LevelScheme(constants::kBranchingFractionNominal, constants::kTauP12, constants::kTauD32,
                  constants::kTauD52) {}

LevelScheme::LevelScheme(double p, double tau_p, double tau_d32, double tau_d52)
    : p_(p), tau_p_(tau_p), tau_d32_(tau_d32), tau_d52_(tau_d52) {
  levels_ = {
      {Term::kS12, 1, 0, lande_g(0, 1)},
      {Term::kP12, 1, 2, lande_g(2, 1)},
      {Term::kD32, 3, 4, lande_g(4, 3)},
      {Term::kD52, 5, 4, lande_g(4, 5)},
  };
  sublevels_ = {{{Term::kS12, -1},
                 {Term::kS12, +1},
                 {Term::kP12, -1},
                 {Term::kP12, +1},
                 {Term::kD32, -3},
                 {Term::kD32, -1},
                 {Term::kD32, +1},
                 {Term::kD32, +3}}};
  validate();
}

void LevelScheme::validate() const {
  if (!(p_ >= 0.0 && p_ <= 1.0)) throw ConfigError("branching fraction p must lie in [0, 1]");
  if (!(tau_p_ > 0.0)) throw ConfigError("tau_P must be positive");
  if (!(tau_d32_ > 0.0)) throw ConfigError("tau_D3/2 must be positive (use infinity to disable decay)");
  if (!(tau_d52_ > 0.0)) throw ConfigError("tau_D5/2 must be positive");
}

double LevelScheme::gamma_d32() const { return std::isinf(tau_d32_) ? 0.0 : 1.0 / tau_d32_; }

const FineLevel& LevelScheme::level(Term term) const {
  for (const auto& l : levels_)
    if (l.term == term) return l;
  throw ConfigError("unknown term");
}

LevelScheme LevelScheme::with_branching(double p) const { return {p, tau_p_, tau_d32_, tau_d52_}; }

LevelScheme LevelScheme::with_tau_d32(double tau_d32) const { return {p_, tau_p_, tau_d32, tau_d52_}; }

std::uint64_t LevelScheme::hash() const {
  const double values[] = {p_, tau_p_, tau_d32_, tau_d52_};
  return fnv1a(values, sizeof(values));
}

Term term_of(int sublevel_index) {
  if (sublevel_index < kFirstP) return Term::kS12;
  if (sublevel_index < kFirstD) return Term::kP12;
  return Term::kD32;
}

// ---------------------------------------------------------------------------

double Vector3::norm() const { return std::sqrt(x * x + y * y + z * z); }

Vector3 Vector3::normalized() const {
  const double n = norm();
  return {x / n, y / n, z / n};
}

double dot(const Vector3& a, const Vector3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Vector3 cross(const Vector3& a, const Vector3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

MagneticField::MagneticField() : MagneticField(constants::kMagneticFieldNominal, {0, 0, 1}) {}

MagneticField::MagneticField(double magnitude, Vector3 orientation)
    : magnitude_(magnitude), orientation_(orientation) {
  if (!(magnitude >= 0.0)) throw ConfigError("magnetic field magnitude must be >= 0");
  if (std::abs(orientation.norm() - 1.0) > 1e-9) throw ConfigError("field orientation must be a unit vector");
}

PolarizationGeometry::PolarizationGeometry()
    : PolarizationGeometry(Vector3{1, 0, 1}.normalized(), Vector3{0, 1, 0}, MagneticField()) {}

PolarizationGeometry::PolarizationGeometry(const Vector3& propagation, const Vector3& polarization,
                                           const MagneticField& axis)
    : propagation_(propagation), polarization_(polarization) {
  if (std::abs(propagation.norm() - 1.0) > 1e-9) throw ConfigError("beam propagation must be a unit vector");
  if (std::abs(polarization.norm() - 1.0) > 1e-9) throw ConfigError("polarization axis must be a unit vector");
  if (std::abs(dot(propagation, polarization)) > 1e-9)
    throw ConfigError("polarization axis must be perpendicular to propagation");

  // Transverse frame about the quantization axis; fixed construction so that two
  // beams resolved against the same field share phase conventions.
  const Vector3 z = axis.orientation();
  const Vector3 helper = std::abs(z.x) < 0.9 ? Vector3{1, 0, 0} : Vector3{0, 1, 0};
  const double hz = dot(helper, z);
  const Vector3 x = Vector3{helper.x - hz * z.x, helper.y - hz * z.y, helper.z - hz * z.z}.normalized();
  const Vector3 y = cross(z, x);

  const double ex = dot(polarization, x);
  const double ey = dot(polarization, y);
  const double ez = dot(polarization, z);
  const double s = 1.0 / std::sqrt(2.0);
  components_[0] = s * std::complex<double>(ex, ey);    // q = -1
  components_[1] = {ez, 0.0};                           // q = 0
  components_[2] = -s * std::complex<double>(ex, -ey);  // q = +1
}

PolarizationGeometry PolarizationGeometry::from_components(std::complex<double> minus, std::complex<double> pi,
                                                           std::complex<double> plus) {
  const double n2 = std::norm(minus) + std::norm(pi) + std::norm(plus);
  if (std::abs(n2 - 1.0) > 1e-9) throw ConfigError("polarization components must satisfy |a-|^2+|a0|^2+|a+|^2 = 1");
  PolarizationGeometry g;
  g.components_ = {minus, pi, plus};
  return g;
}

double PolarizationGeometry::max_component_magnitude() const {
  double m = 0.0;
  for (const auto& c : components_) m = std::max(m, std::abs(c));
  return m;
}

// ---------------------------------------------------------------------------

double zeeman_shift(const Sublevel& sublevel, const LevelScheme& scheme, const MagneticField& field) {
  if (sublevel.term == Term::kD52) throw ConfigError("D5/2 is not part of the coherent sublevel set");
  const double g = scheme.level(sublevel.term).lande_g;
  return g * sublevel.m() * constants::kBohrMagnetonRadPerSecondPerTesla * field.magnitude();
}

Eigen::MatrixXcd coupling_matrix(Transition transition, const PolarizationGeometry& polarization) {
  int two_jl = 0;
  int first_lower = 0;
  int n_lower = 0;
  switch (transition) {
    case Transition::kSP:
      two_jl = 1;
      first_lower = kFirstS;
      n_lower = 2;
      break;
    case Transition::kDP:
      two_jl = 3;
      first_lower = kFirstD;
      n_lower = 4;
      break;
    default:
      throw ConfigError("transition is not part of the dipole-coupled scheme");
  }
  (void)first_lower;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n_lower, 2);
  for (int l = 0; l < n_lower; ++l) {
    const int two_ml = -two_jl + 2 * l;
    for (int u = 0; u < 2; ++u) {
      const int two_mu = -1 + 2 * u;
      const int two_q = two_mu - two_ml;
      if (std::abs(two_q) > 2) continue;
      const double cg = clebsch_gordan(two_jl, two_ml, 2, two_q, 1, two_mu);
      m(l, u) = polarization.component(two_q / 2) * cg;
    }
  }
  return m;
}

double JumpOperator::pair_rate(int from, int to) const {
  for (const auto& t : terms)
    if (t.from == from && t.to == to) return t.amplitude * t.amplitude;
  return 0.0;
}

std::vector<JumpOperator> decay_channels(const LevelScheme& scheme) {
  std::vector<JumpOperator> jumps;
  const double gamma = scheme.gamma_p();

  auto dipole = [&](DecayChannel channel, int two_jl, int first_lower, double rate) {
    if (rate <= 0.0) return;
    for (int q = -1; q <= 1; ++q) {
      JumpOperator op{channel, q, {}};
      for (int u = 0; u < 2; ++u) {
        const int two_mu = -1 + 2 * u;
        const int two_ml = two_mu - 2 * q;
        if (std::abs(two_ml) > two_jl) continue;
        const double cg = clebsch_gordan(two_jl, two_ml, 2, 2 * q, 1, two_mu);
        if (cg == 0.0) continue;
        const int lower = first_lower + (two_ml + two_jl) / 2;
        op.terms.push_back({kFirstP + u, lower, std::sqrt(rate) * cg});
      }
      if (!op.terms.empty()) jumps.push_back(std::move(op));
    }
  };
  dipole(DecayChannel::kBlue, 1, kFirstS, scheme.p() * gamma);
  dipole(DecayChannel::kInfrared, 3, kFirstD, (1.0 - scheme.p()) * gamma);

  // D3/2 -> S1/2 electric-quadrupole decay; rank-2 CG weights per sublevel.
  const double gamma_d = scheme.gamma_d32();
  if (gamma_d > 0.0) {
    for (int q = -2; q <= 2; ++q) {
      JumpOperator op{DecayChannel::kQuadrupole, q, {}};
      for (int d = 0; d < 4; ++d) {
        const int two_md = -3 + 2 * d;
        const int two_ms = two_md - 2 * q;
        if (std::abs(two_ms) > 1) continue;
        const double cg = clebsch_gordan(1, two_ms, 4, 2 * q, 3, two_md);
        if (cg == 0.0) continue;
        op.terms.push_back({kFirstD + d, kFirstS + (two_ms + 1) / 2, std::sqrt(gamma_d) * cg});
      }
      if (!op.terms.empty()) jumps.push_back(std::move(op));
    }
  }
  return jumps;
}

double total_decay_rate(const std::vector<JumpOperator>& jumps, int from, Term to_term) {
  double total = 0.0;
  for (const auto& op : jumps)
    for (const auto& t : op.terms)
      if (t.from == from && term_of(t.to) == to_term) total += t.amplitude * t.amplitude;
  return total;
}

}  // namespace sbf
