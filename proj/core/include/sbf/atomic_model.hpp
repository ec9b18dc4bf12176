#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sbf {

// Sublevel basis of the optically active manifold, in this fixed order:
//   0,1  S1/2 m = -1/2, +1/2
//   2,3  P1/2 m = -1/2, +1/2
//   4-7  D3/2 m = -3/2 .. +3/2
inline constexpr int kNumSublevels = 8;
inline constexpr int kFirstS = 0;
inline constexpr int kFirstP = 2;
inline constexpr int kFirstD = 4;

enum class Term { kS12, kP12, kD32, kD52 };

std::string to_string(Term term);

struct FineLevel {
  Term term;
  int two_j;  // 2J
  int two_l;  // 2L
  double lande_g;
};

struct Sublevel {
  Term term;
  int two_m;  // 2m
  double m() const { return 0.5 * two_m; }
};

/// Nonrelativistic Lande factor with g_s = 2.
double lande_g(int two_l, int two_j);

/// <j1 m1; j2 m2 | J M> with all arguments doubled. Racah formula, exact for small spins.
double clebsch_gordan(int two_j1, int two_m1, int two_j2, int two_m2, int two_j, int two_m);

/// Low-lying structure of 88Sr+ plus the decay data the simulator needs.
///
/// D5/2 is carried as a shelf level only; it never enters the coherent 8-level set.
class LevelScheme {
 public:
  LevelScheme();  // nominal data
  LevelScheme(double p, double tau_p, double tau_d32, double tau_d52);

  double p() const { return p_; }
  double tau_p() const { return tau_p_; }
  double tau_d32() const { return tau_d32_; }
  double tau_d52() const { return tau_d52_; }

  /// Total P1/2 decay rate 1/tau_P.
  double gamma_p() const { return 1.0 / tau_p_; }
  double a_sp() const { return p_ / tau_p_; }
  double a_pd() const { return (1.0 - p_) / tau_p_; }
  /// D3/2 -> S1/2 rate; zero when tau_D3/2 is infinite.
  double gamma_d32() const;

  const std::vector<FineLevel>& levels() const { return levels_; }
  const std::array<Sublevel, kNumSublevels>& sublevels() const { return sublevels_; }
  const FineLevel& level(Term term) const;

  /// Copy with a different branching fraction (p in [0, 1] accepted here for limit studies).
  LevelScheme with_branching(double p) const;
  LevelScheme with_tau_d32(double tau_d32) const;

  std::uint64_t hash() const;

 private:
  void validate() const;

  double p_;
  double tau_p_;
  double tau_d32_;
  double tau_d52_;
  std::vector<FineLevel> levels_;
  std::array<Sublevel, kNumSublevels> sublevels_;
};

struct Vector3 {
  double x = 0, y = 0, z = 0;
  double norm() const;
  Vector3 normalized() const;
};

double dot(const Vector3& a, const Vector3& b);
Vector3 cross(const Vector3& a, const Vector3& b);

class MagneticField {
 public:
  MagneticField();  // 1e-4 T along z
  MagneticField(double magnitude, Vector3 orientation);

  double magnitude() const { return magnitude_; }
  const Vector3& orientation() const { return orientation_; }
  MagneticField with_magnitude(double magnitude) const { return {magnitude, orientation_}; }

 private:
  double magnitude_;
  Vector3 orientation_;
};

/// Linear polarization of a beam, resolved into spherical components about the
/// quantization axis: e = sum_q a_q e_q with e_{+1} = -(x + iy)/sqrt2, e_0 = z,
/// e_{-1} = (x - iy)/sqrt2, and a_q = e_q^* . e.
class PolarizationGeometry {
 public:
  PolarizationGeometry();  // propagation along x, polarization along y, for a z axis

  /// Beam geometry in lab coordinates, resolved against `axis`.
  PolarizationGeometry(const Vector3& propagation, const Vector3& polarization, const MagneticField& axis);

  /// Spherical components given directly; normalized on construction.
  static PolarizationGeometry from_components(std::complex<double> minus, std::complex<double> pi,
                                              std::complex<double> plus);

  /// a_q for q in {-1, 0, +1}.
  std::complex<double> component(int q) const { return components_[q + 1]; }
  double max_component_magnitude() const;
  const Vector3& propagation() const { return propagation_; }
  const Vector3& polarization() const { return polarization_; }

 private:
  Vector3 propagation_{1, 0, 0};
  Vector3 polarization_{0, 1, 0};
  std::array<std::complex<double>, 3> components_{};
};

enum class Transition { kSP, kDP, kSD52 };

/// Zeeman shift g m mu_B B / hbar in rad/s. Throws ConfigError for D5/2, which is not in the active set.
double zeeman_shift(const Sublevel& sublevel, const LevelScheme& scheme, const MagneticField& field);

/// Relative Rabi amplitudes: rows index lower sublevels, columns the two P1/2 sublevels.
/// Entry = a_q * <J_l m_l; 1 q | 1/2 m_u>, q = m_u - m_l, reduced matrix element 1.
Eigen::MatrixXcd coupling_matrix(Transition transition, const PolarizationGeometry& polarization);

enum class DecayChannel { kBlue, kInfrared, kQuadrupole };

struct JumpTerm {
  int from;  // sublevel index (upper)
  int to;    // sublevel index (lower)
  double amplitude;
};

/// One Lindblad jump operator: all sublevel pairs sharing the same channel and
/// polarization q are summed, so coherences are transferred correctly.
struct JumpOperator {
  DecayChannel channel;
  int q;
  std::vector<JumpTerm> terms;

  /// Rate contributed by a single pair: amplitude squared.
  double pair_rate(int from, int to) const;
};

/// Spontaneous decays of the active set: P1/2 -> S1/2 (blue, rate p/tau_P split by
/// squared CG), P1/2 -> D3/2 ((1-p)/tau_P), and D3/2 -> S1/2 quadrupole decay.
std::vector<JumpOperator> decay_channels(const LevelScheme& scheme);

/// Summed rate out of `from` into sublevels of `to_term`.
double total_decay_rate(const std::vector<JumpOperator>& jumps, int from, Term to_term);

Term term_of(int sublevel_index);

}  // namespace sbf
