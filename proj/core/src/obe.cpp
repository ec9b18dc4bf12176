#include "sbf/obe.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "sbf/constants.hpp"
#include "sbf/error.hpp"
#include "sbf/runge_kutta.hpp"

namespace sbf {
namespace {

constexpr int kDim = kNumSublevels * kNumSublevels;
const std::complex<double> kI(0.0, 1.0);

// (A kron B)(i nB + k, j nB + l) = A(i, j) B(k, l)
Eigen::MatrixXcd kron(const Matrix8cd& a, const Matrix8cd& b) {
  Eigen::MatrixXcd out(kDim, kDim);
  for (int i = 0; i < kNumSublevels; ++i)
    for (int j = 0; j < kNumSublevels; ++j)
      out.block(i * kNumSublevels, j * kNumSublevels, kNumSublevels, kNumSublevels) = a(i, j) * b;
  return out;
}

double coupling_scale(const LaserDrive& drive) {
  if (drive.convention == RabiConvention::kUnitPolarization) return 1.0;
  const double m = drive.polarization.max_component_magnitude();
  return m > 0.0 ? 1.0 / m : 0.0;
}

Matrix8cd jump_matrix(const JumpOperator& op) {
  Matrix8cd m = Matrix8cd::Zero();
  for (const auto& t : op.terms) m(t.to, t.from) += t.amplitude;
  return m;
}

// Scaling and squaring with the trace restored after every squaring. Rounding
// otherwise piles up in the conserved direction over long times.
Eigen::MatrixXcd expm(const Liouvillian& L, double t) {
  const double norm = L.matrix.cwiseAbs().colwise().sum().maxCoeff() * t;
  const int squarings = norm > 1.0 ? static_cast<int>(std::ceil(std::log2(norm))) : 0;
  Eigen::MatrixXcd e = (L.matrix * std::ldexp(t, -squarings)).exp();
  Eigen::RowVectorXcd tr = Eigen::RowVectorXcd::Zero(kDim);
  for (int i = 0; i < kNumSublevels; ++i) tr[i + kNumSublevels * i] = 1.0;
  Eigen::VectorXcd unit = tr.adjoint() / static_cast<double>(kNumSublevels);
  for (int k = 0; k < squarings; ++k) {
    e = (e * e).eval();
    e += unit * (tr - tr * e);
  }
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------

double LaserDrive::effective_rabi() const {
  if (!(rabi >= 0.0)) throw ConfigError("Rabi frequency must be >= 0");
  if (on) return rabi;
  if (extinction_db > 0.0) throw ConfigError("extinction must be <= 0 dB");
  if (std::isinf(extinction_db)) return 0.0;
  return rabi * std::pow(10.0, extinction_db / 20.0);
}

LaserDrive LaserDrive::switched(bool state) const {
  LaserDrive d = *this;
  d.on = state;
  return d;
}

IonSetup IonSetup::nominal() {
  IonSetup s;
  s.blue.rabi = constants::kRabiBlueNominal;
  s.blue.detuning = constants::kDetuningBlueNominal;
  s.blue.extinction_db = constants::kExtinctionNominalDb;
  s.repump.rabi = constants::kRabiRepumpNominal;
  s.repump.detuning = constants::kDetuningRepumpNominal;
  s.repump.extinction_db = constants::kExtinctionNominalDb;
  return s;
}

// ---------------------------------------------------------------------------

DensityMatrix::DensityMatrix() : rho_(Matrix8cd::Zero()) {
  rho_(kFirstS, kFirstS) = 0.5;
  rho_(kFirstS + 1, kFirstS + 1) = 0.5;
}

DensityMatrix::DensityMatrix(const Matrix8cd& rho) : rho_(rho) { validate(); }

DensityMatrix DensityMatrix::pure(int sublevel) { return mixture({sublevel}); }

DensityMatrix DensityMatrix::mixture(const std::vector<int>& sublevels) {
  if (sublevels.empty()) throw Error("empty mixture");
  Matrix8cd m = Matrix8cd::Zero();
  for (int s : sublevels) {
    if (s < 0 || s >= kNumSublevels) throw Error("sublevel index out of range");
    m(s, s) += 1.0 / static_cast<double>(sublevels.size());
  }
  return DensityMatrix(m);
}

DensityMatrix DensityMatrix::from_vectorized(const Eigen::VectorXcd& v) {
  if (v.size() != kDim) throw Error("vectorized density matrix must have 64 entries");
  Matrix8cd m = Eigen::Map<const Matrix8cd>(v.data());
  // Symmetrize away round-off before validation.
  Matrix8cd h = 0.5 * (m + m.adjoint());
  return DensityMatrix(h);
}

Eigen::VectorXcd DensityMatrix::vectorized() const {
  return Eigen::Map<const Eigen::VectorXcd>(rho_.data(), kDim);
}

double DensityMatrix::population(Term term) const {
  double total = 0.0;
  for (int i = 0; i < kNumSublevels; ++i)
    if (term_of(i) == term) total += rho_(i, i).real();
  return term == Term::kD52 ? 0.0 : total;
}

double DensityMatrix::trace() const { return rho_.trace().real(); }

double DensityMatrix::hermiticity_error() const { return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff(); }

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix8cd> es(0.5 * (rho_ + rho_.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void DensityMatrix::validate() const {
  if (!rho_.allFinite()) throw Error("density matrix has non-finite entries");
  if (hermiticity_error() > 1e-10) throw Error("density matrix is not Hermitian");
  if (std::abs(trace() - 1.0) > 1e-9) throw Error("density matrix trace differs from 1");
  if (min_eigenvalue() < -1e-9) throw Error("density matrix has a negative eigenvalue");
}

// ---------------------------------------------------------------------------

Matrix8cd rwa_hamiltonian(const LevelScheme& scheme, const MagneticField& field, const LaserDrive& blue,
                          const LaserDrive& repump) {
  Matrix8cd h = Matrix8cd::Zero();
  const auto& sub = scheme.sublevels();
  for (int i = 0; i < kNumSublevels; ++i) {
    double frame = 0.0;
    switch (sub[i].term) {
      case Term::kP12: frame = -blue.detuning; break;
      case Term::kD32: frame = -blue.detuning + repump.detuning; break;
      default: break;
    }
    h(i, i) = frame + zeeman_shift(sub[i], scheme, field);
  }

  auto couple = [&](const LaserDrive& drive, Transition transition, int first_lower) {
    const double omega = drive.effective_rabi();
    if (omega == 0.0) return;
    const Eigen::MatrixXcd c = coupling_matrix(transition, drive.polarization);
    const double scale = 0.5 * omega * coupling_scale(drive);
    for (int l = 0; l < c.rows(); ++l)
      for (int u = 0; u < 2; ++u) {
        const std::complex<double> v = scale * c(l, u);
        h(kFirstP + u, first_lower + l) += v;
        h(first_lower + l, kFirstP + u) += std::conj(v);
      }
  };
  couple(blue, Transition::kSP, kFirstS);
  couple(repump, Transition::kDP, kFirstD);
  return h;
}

Liouvillian build_liouvillian(const LevelScheme& scheme, const MagneticField& field, const LaserDrive& blue,
                              const LaserDrive& repump) {
  Liouvillian out;
  out.hamiltonian = rwa_hamiltonian(scheme, field, blue, repump);
  out.jumps = decay_channels(scheme);
  out.metadata = {blue.on, repump.on, field.magnitude(), scheme.hash()};

  const Matrix8cd id = Matrix8cd::Identity();
  out.matrix = -kI * (kron(id, out.hamiltonian) - kron(out.hamiltonian.transpose(), id));
  for (const auto& op : out.jumps) {
    const Matrix8cd lk = jump_matrix(op);
    const Matrix8cd ll = lk.adjoint() * lk;
    out.matrix += kron(lk.conjugate(), lk) - 0.5 * kron(id, ll) - 0.5 * kron(ll.transpose(), id);
  }
  return out;
}

Liouvillian build_liouvillian(const IonSetup& setup, bool blue_on, bool repump_on) {
  return build_liouvillian(setup.scheme, setup.field, setup.blue.switched(blue_on), setup.repump.switched(repump_on));
}

// ---------------------------------------------------------------------------

DensityMatrix evolve(const DensityMatrix& rho0, const Liouvillian& L, double t, const EvolveOptions& options) {
  if (!(t >= 0.0)) throw Error("evolve: time must be >= 0");
  if (t == 0.0) return rho0;
  const Eigen::VectorXcd v0 = rho0.vectorized();
  if (options.method == EvolveMethod::kMatrixExponential) return DensityMatrix::from_vectorized(expm(L, t) * v0);
  Dopri5Options o;
  o.abs_tol = options.abs_tol;
  o.rel_tol = options.rel_tol;
  Dopri5 solver(o);
  const auto rhs = [&L](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) { dy.noalias() = L.matrix * y; };
  return DensityMatrix::from_vectorized(solver.integrate(rhs, 0.0, v0, t));
}

Propagator::Propagator(const Liouvillian& L, double duration) : duration_(duration) {
  if (!(duration >= 0.0)) throw Error("Propagator: duration must be >= 0");
  // exp([[L t, t I], [0, 0]]) = [[exp(L t), int_0^t exp(L s) ds], [0, I]]
  Eigen::MatrixXcd aug = Eigen::MatrixXcd::Zero(2 * kDim, 2 * kDim);
  aug.topLeftCorner(kDim, kDim) = L.matrix * duration;
  aug.topRightCorner(kDim, kDim) = Eigen::MatrixXcd::Identity(kDim, kDim) * duration;
  const Eigen::MatrixXcd e = aug.exp();
  step_ = e.topLeftCorner(kDim, kDim);
  integral_ = e.topRightCorner(kDim, kDim);
}

DensityMatrix steady_state(const Liouvillian& L, const SteadyStateOptions& options) {
  // Row equilibration leaves the null space alone but tames the spread between
  // optical rates and the slow D3/2 decay.
  Eigen::MatrixXcd a = L.matrix;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.row(r).cwiseAbs().maxCoeff();
    if (m > 0.0) a.row(r) /= m;
  }
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cutoff = options.null_tolerance * s[0];
  int null_dim = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] <= cutoff) ++null_dim;
  if (null_dim > 1)
    throw NonUniqueSteadyStateError(
        "steady state is not unique: " + std::to_string(null_dim) + "-dimensional stationary manifold", null_dim);

  const Eigen::VectorXcd v = svd.matrixV().col(kDim - 1);
  Matrix8cd m = Eigen::Map<const Matrix8cd>(v.data());
  const std::complex<double> tr = m.trace();
  if (std::abs(tr) < 1e-12) throw NonUniqueSteadyStateError("stationary vector is traceless", null_dim);
  m /= tr;
  return DensityMatrix(Matrix8cd(0.5 * (m + m.adjoint())));
}

double blue_scatter_rate(const DensityMatrix& rho, const LevelScheme& scheme) {
  return scheme.a_sp() * rho.population(Term::kP12);
}

Eigen::RowVectorXcd p_population_functional() {
  Eigen::RowVectorXcd w = Eigen::RowVectorXcd::Zero(kDim);
  for (int i = kFirstP; i < kFirstD; ++i) w[i + kNumSublevels * i] = 1.0;
  return w;
}

DensityMatrix post_blue_emission_state(const DensityMatrix& rho, const LevelScheme& scheme) {
  Matrix8cd out = Matrix8cd::Zero();
  for (const auto& op : decay_channels(scheme)) {
    if (op.channel != DecayChannel::kBlue) continue;
    const Matrix8cd lk = jump_matrix(op);
    out += lk * rho.matrix() * lk.adjoint();
  }
  const double tr = out.trace().real();
  if (!(tr > 0.0)) throw Error("post-emission state undefined: no P1/2 population");
  out /= tr;
  return DensityMatrix(Matrix8cd(0.5 * (out + out.adjoint())));
}

// ---------------------------------------------------------------------------

double ExpectedCounts::gate(Gate g) const {
  double total = 0.0;
  for (const auto& p : phases)
    if (p.gate == g) total += p.emitted_blue;
  return total;
}

double ExpectedCounts::branching_fraction() const {
  const double sb = n_b - n_b_bg;
  const double sr = n_r - n_r_bg;
  return sb / (sb + sr);
}

ExpectedCounts expected_counts(const Chronogram& chronogram, const IonSetup& setup, const DensityMatrix& entry,
                               const ExpectedCountsOptions& options) {
  ExpectedCounts out;
  if (options.idealized) {
    const double p = setup.scheme.p();
    for (const auto& ph : chronogram.phases()) {
      PhaseExpectation e{ph.label, ph.gate, 0.0, entry, entry};
      if (ph.gate == Gate::kNb) e.emitted_blue = p / (1.0 - p);
      if (ph.gate == Gate::kNr) e.emitted_blue = 1.0;
      out.phases.push_back(e);
    }
    out.n_b = out.gate(Gate::kNb);
    out.n_r = out.gate(Gate::kNr);
    out.cycles_iterated = 0;
    return out;
  }

  std::map<std::pair<bool, bool>, Liouvillian> generators;
  std::vector<Propagator> props;
  props.reserve(chronogram.phases().size());
  for (const auto& ph : chronogram.phases()) {
    const auto key = std::make_pair(ph.blue_on, ph.repump_on);
    auto it = generators.find(key);
    if (it == generators.end()) it = generators.emplace(key, build_liouvillian(setup, ph.blue_on, ph.repump_on)).first;
    props.emplace_back(it->second, ph.duration);
  }

  const Eigen::RowVectorXcd w = p_population_functional();
  const double a_sp = setup.scheme.a_sp();
  const std::size_t n = props.size();
  std::vector<double> emitted(n, 0.0), previous(n, -1.0);
  std::vector<Eigen::VectorXcd> entries(n), exits(n);
  Eigen::VectorXcd v = entry.vectorized();

  const int max_cycles = options.periodic ? options.max_cycles : 1;
  int cycle = 0;
  for (; cycle < max_cycles; ++cycle) {
    for (std::size_t i = 0; i < n; ++i) {
      entries[i] = v;
      emitted[i] = a_sp * (w * props[i].integrate(v))(0).real();
      v = props[i].apply(v);
      // Renormalize the trace against slow round-off drift over many cycles.
      const Eigen::Map<const Matrix8cd> m(v.data());
      v /= m.trace().real();
      exits[i] = v;
    }
    bool converged = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double scale = std::max(std::abs(emitted[i]), 1e-300);
      if (std::abs(emitted[i] - previous[i]) > options.rel_tol * scale && std::abs(emitted[i]) > 1e-300)
        converged = false;
    }
    previous = emitted;
    if (converged) {
      ++cycle;
      break;
    }
  }
  out.cycles_iterated = cycle;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ph = chronogram.phases()[i];
    out.phases.push_back({ph.label, ph.gate, emitted[i], DensityMatrix::from_vectorized(entries[i]),
                          DensityMatrix::from_vectorized(exits[i])});
  }
  out.n_b = out.gate(Gate::kNb);
  out.n_r = out.gate(Gate::kNr);
  out.n_b_bg = out.gate(Gate::kNbB);
  out.n_r_bg = out.gate(Gate::kNrB);
  return out;
}

std::vector<SpectrumPoint> fluorescence_spectrum(const IonSetup& setup, const std::vector<double>& blue_detunings) {
  std::vector<SpectrumPoint> out;
  out.reserve(blue_detunings.size());
  for (double d : blue_detunings) {
    IonSetup s = setup;
    s.blue.detuning = d;
    s.blue.on = true;
    s.repump.on = true;
    const DensityMatrix rho = steady_state(build_liouvillian(s));
    out.push_back({d, blue_scatter_rate(rho, s.scheme)});
  }
  return out;
}

}  // namespace sbf
