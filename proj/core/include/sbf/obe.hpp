#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbf/atomic_model.hpp"
#include "sbf/chronogram.hpp"

namespace sbf {

using Matrix8cd = Eigen::Matrix<std::complex<double>, kNumSublevels, kNumSublevels>;
using Vector8cd = Eigen::Matrix<std::complex<double>, kNumSublevels, 1>;

/// How the scalar Rabi frequency scales the polarization-weighted coupling matrix.
enum class RabiConvention {
  /// Omega multiplies a_q * CG with unit-norm spherical components.
  kUnitPolarization,
  /// Omega is the Rabi frequency of the dominant polarization component:
  /// the coupling matrix is divided by max_q |a_q|. Same as the above for pure pi light.
  kDominantComponent,
};

/// One classical drive.  `rabi` and `detuning` are angular frequencies (rad/s).
struct LaserDrive {
  double rabi = 0.0;
  double detuning = 0.0;
  PolarizationGeometry polarization;
  bool on = true;
  /// Power extinction when switched off, in dB (<= 0). -inf means a perfect switch.
  double extinction_db = -std::numeric_limits<double>::infinity();
  RabiConvention convention = RabiConvention::kDominantComponent;

  /// Rabi frequency acting on the ion: full when on, amplitude-scaled leak when off.
  double effective_rabi() const;
  LaserDrive switched(bool state) const;
};

/// Everything the Liouvillian depends on, apart from the switch states.
struct IonSetup {
  LevelScheme scheme;
  MagneticField field;
  LaserDrive blue;    // S1/2 <-> P1/2, 422 nm
  LaserDrive repump;  // D3/2 <-> P1/2, 1092 nm

  /// Nominal acquisition parameters.
  static IonSetup nominal();
};

/// 8x8 Hermitian, unit-trace state in the fixed sublevel basis.
class DensityMatrix {
 public:
  DensityMatrix();  // equal mixture of the two S1/2 sublevels
  explicit DensityMatrix(const Matrix8cd& rho);

  static DensityMatrix pure(int sublevel);
  static DensityMatrix mixture(const std::vector<int>& sublevels);
  static DensityMatrix from_vectorized(const Eigen::VectorXcd& v);

  const Matrix8cd& matrix() const { return rho_; }
  /// Column-major stacking: element (i, j) sits at index i + 8 j.
  Eigen::VectorXcd vectorized() const;

  double population(Term term) const;
  double population(int sublevel) const { return rho_(sublevel, sublevel).real(); }
  double trace() const;
  double hermiticity_error() const;
  double min_eigenvalue() const;

  /// Throws Error if Hermiticity (1e-10), trace (1e-9) or positivity (-1e-9) fail.
  void validate() const;

 private:
  Matrix8cd rho_;
};

struct LiouvillianMetadata {
  bool blue_on = true;
  bool repump_on = true;
  double field_magnitude = 0.0;
  std::uint64_t scheme_hash = 0;
};

/// Superoperator on column-major vectorized density matrices (64x64).
struct Liouvillian {
  Eigen::MatrixXcd matrix;
  Matrix8cd hamiltonian;
  std::vector<JumpOperator> jumps;
  LiouvillianMetadata metadata;
};

/// RWA Hamiltonian with one rotating frame per drive, plus Lindblad decay.
/// Switched-off drives contribute their leak Rabi frequency.
Liouvillian build_liouvillian(const LevelScheme& scheme, const MagneticField& field, const LaserDrive& blue,
                              const LaserDrive& repump);

inline Liouvillian build_liouvillian(const IonSetup& setup) {
  return build_liouvillian(setup.scheme, setup.field, setup.blue, setup.repump);
}

Liouvillian build_liouvillian(const IonSetup& setup, bool blue_on, bool repump_on);

/// Hamiltonian part only (rad/s); exposed for the quantum-jump sampler.
Matrix8cd rwa_hamiltonian(const LevelScheme& scheme, const MagneticField& field, const LaserDrive& blue,
                          const LaserDrive& repump);

enum class EvolveMethod { kMatrixExponential, kRungeKutta };

struct EvolveOptions {
  EvolveMethod method = EvolveMethod::kMatrixExponential;
  double abs_tol = 1e-10;
  double rel_tol = 1e-9;
};

/// rho(t) = exp(L t) rho0.
DensityMatrix evolve(const DensityMatrix& rho0, const Liouvillian& L, double t, const EvolveOptions& options = {});

/// Exact propagator over a fixed duration, plus the time-integrated propagator
/// int_0^t exp(L s) ds used for gated photon expectations.
class Propagator {
 public:
  Propagator(const Liouvillian& L, double duration);

  double duration() const { return duration_; }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const { return step_ * v; }
  Eigen::VectorXcd integrate(const Eigen::VectorXcd& v) const { return integral_ * v; }

 private:
  double duration_;
  Eigen::MatrixXcd step_;
  Eigen::MatrixXcd integral_;
};

struct SteadyStateOptions {
  /// Singular values below tolerance * max singular value count as null directions.
  double null_tolerance = 1e-13;
};

/// Unique stationary state of L. Throws NonUniqueSteadyStateError when the null space is degenerate.
DensityMatrix steady_state(const Liouvillian& L, const SteadyStateOptions& options = {});

/// A_SP times the total P1/2 population (s^-1). Detector efficiency is not included.
double blue_scatter_rate(const DensityMatrix& rho, const LevelScheme& scheme);

struct PhaseExpectation {
  std::string label;
  Gate gate = Gate::kNone;
  double emitted_blue = 0.0;  // expected emitted blue photons during the phase
  DensityMatrix entry;
  DensityMatrix exit;
};

struct ExpectedCounts {
  std::vector<PhaseExpectation> phases;
  double n_b = 0.0;
  double n_r = 0.0;
  double n_b_bg = 0.0;
  double n_r_bg = 0.0;
  int cycles_iterated = 0;

  double gate(Gate g) const;
  /// The background-subtracted ratio the estimator would form from these expectations.
  double branching_fraction() const;
};

struct ExpectedCountsOptions {
  /// Infinite windows and infinite D3/2 lifetime: c -> p/(1-p), d -> 1, backgrounds 0.
  bool idealized = false;
  /// Chain cycles until every gated expectation changes by less than this (relative).
  bool periodic = true;
  double rel_tol = 1e-10;
  int max_cycles = 50;
};

ExpectedCounts expected_counts(const Chronogram& chronogram, const IonSetup& setup,
                               const DensityMatrix& entry = DensityMatrix(),
                               const ExpectedCountsOptions& options = {});

struct SpectrumPoint {
  double detuning;  // rad/s
  double rate;      // s^-1
};

/// Steady-state blue scatter rate as the blue detuning is scanned, both drives on.
std::vector<SpectrumPoint> fluorescence_spectrum(const IonSetup& setup, const std::vector<double>& blue_detunings);

/// Vectorized P1/2 population functional: sigma_PP = <w, vec(rho)>.
Eigen::RowVectorXcd p_population_functional();

/// Ground-state mixture right after a blue emission from `rho`: sum_q L_q rho L_q^dag, normalized.
DensityMatrix post_blue_emission_state(const DensityMatrix& rho, const LevelScheme& scheme);

}  // namespace sbf
