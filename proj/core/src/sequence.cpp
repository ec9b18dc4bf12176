#include "sbf/sequence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>

#include "sbf/error.hpp"

namespace sbf {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double draw_exponential(Rng& rng, double rate) {
  if (rate <= 0.0) return kInf;
  return std::exponential_distribution<double>(rate)(rng);
}

double draw_unit(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Monte Carlo wave-function unraveling of the Liouvillian: no-jump evolution under
// H_eff = H - (i/2) sum L^dag L until the squared norm falls to a uniform threshold.
class QuantumJumpSampler {
 public:
  static constexpr double kBaseStep = 0.25e-9;

  QuantumJumpSampler(const IonSetup& setup, double longest_phase) {
    levels_ = 0;
    while (std::ldexp(kBaseStep, levels_) < longest_phase) ++levels_;
    for (int blue = 0; blue < 2; ++blue)
      for (int repump = 0; repump < 2; ++repump) {
        const Liouvillian L = build_liouvillian(setup, blue != 0, repump != 0);
        Config& c = configs_[blue * 2 + repump];
        c.heff = L.hamiltonian;
        for (const auto& op : L.jumps) {
          Matrix8cd m = Matrix8cd::Zero();
          for (const auto& t : op.terms) m(t.to, t.from) += t.amplitude;
          c.heff -= std::complex<double>(0.0, 0.5) * (m.adjoint() * m);
          c.jumps.push_back(m);
          c.blue.push_back(op.channel == DecayChannel::kBlue);
        }
        for (int k = 0; k <= levels_; ++k) c.steps.push_back(no_jump(c, std::ldexp(kBaseStep, k)));
      }
  }

  void reset(Rng& rng) {
    psi_ = Vector8cd::Zero();
    psi_(draw_unit(rng) < 0.5 ? kFirstS : kFirstS + 1) = 1.0;
    threshold_ = draw_unit(rng);
  }

  void run_phase(bool blue_on, bool repump_on, double duration, Rng& rng, std::vector<double>& blue_times) {
    const Config& c = configs_[(blue_on ? 2 : 0) + (repump_on ? 1 : 0)];
    double t = 0.0;
    while (true) {
      for (int k = levels_; k >= 0; --k) {
        const double step = std::ldexp(kBaseStep, k);
        while (t + step <= duration) {
          const Vector8cd next = c.steps[k] * psi_;
          if (next.squaredNorm() <= threshold_) break;
          psi_ = next;
          t += step;
        }
      }
      const double remaining = duration - t;
      if (remaining < kBaseStep) {
        if (remaining > 0.0) psi_ = no_jump(c, remaining) * psi_;
        if (psi_.squaredNorm() > threshold_) return;
        jump(c, duration, rng, blue_times);
        return;
      }
      // The threshold is crossed inside the next base step.
      psi_ = c.steps[0] * psi_;
      t += kBaseStep;
      jump(c, t, rng, blue_times);
    }
  }

  IonState state() const {
    const double norm = psi_.squaredNorm();
    double d = 0.0;
    for (int i = kFirstD; i < kNumSublevels; ++i) d += std::norm(psi_(i));
    return d > 0.5 * norm ? IonState::kD32 : IonState::kS;
  }

 private:
  struct Config {
    Matrix8cd heff;
    std::vector<Matrix8cd> steps;
    std::vector<Matrix8cd> jumps;
    std::vector<bool> blue;
  };

  static Matrix8cd no_jump(const Config& c, double dt) {
    const Matrix8cd a = std::complex<double>(0.0, -dt) * c.heff;
    return a.exp();
  }

  void jump(const Config& c, double t, Rng& rng, std::vector<double>& blue_times) {
    std::vector<double> weights(c.jumps.size());
    double total = 0.0;
    for (std::size_t k = 0; k < c.jumps.size(); ++k) {
      weights[k] = (c.jumps[k] * psi_).squaredNorm();
      total += weights[k];
    }
    if (total > 0.0) {
      double u = draw_unit(rng) * total;
      std::size_t k = 0;
      for (; k + 1 < weights.size(); ++k) {
        if (u < weights[k]) break;
        u -= weights[k];
      }
      psi_ = c.jumps[k] * psi_;
      if (c.blue[k]) blue_times.push_back(t);
    }
    psi_ /= psi_.norm();
    threshold_ = draw_unit(rng);
  }

  int levels_ = 0;
  std::array<Config, 4> configs_;
  Vector8cd psi_ = Vector8cd::Zero();
  double threshold_ = 1.0;
};

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Fidelity fidelity) { return fidelity == Fidelity::kFast ? "fast" : "obe"; }

Fidelity fidelity_from_string(const std::string& name) {
  if (name == "fast") return Fidelity::kFast;
  if (name == "obe") return Fidelity::kObe;
  throw ConfigError("unknown fidelity '" + name + "' (expected fast or obe)");
}

std::string to_string(IonState state) {
  switch (state) {
    case IonState::kS: return "S";
    case IonState::kD32: return "D3/2";
    case IonState::kD52: return "D5/2";
  }
  return "S";
}

void SimulationParams::validate() const {
  const double p = setup.scheme.p();
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("branching fraction must lie strictly between 0 and 1");
  detector.validate();
  if (!(dark_event_rate >= 0.0)) throw ConfigError("dark event rate must be >= 0");
  if (dark_event_rate > 0.0 && fidelity == Fidelity::kObe)
    throw ConfigError("dark events are only modelled by the fast tier");
}

FastRates FastRates::derive(const IonSetup& setup) {
  FastRates r;
  const LevelScheme& scheme = setup.scheme;

  IonSetup closed = setup;
  closed.scheme = scheme.with_branching(1.0);
  if (closed.scheme.gamma_d32() == 0.0) closed.scheme = closed.scheme.with_tau_d32(1.0);
  const DensityMatrix fluorescing = steady_state(build_liouvillian(closed, true, false));
  const double sigma = fluorescing.population(Term::kP12);
  r.blue_scatter = scheme.a_sp() * sigma;
  r.shelving = scheme.a_pd() * sigma;

  const DensityMatrix both = steady_state(build_liouvillian(setup, true, true));
  r.both_on_scatter = blue_scatter_rate(both, scheme);
  r.both_on_d_fraction = both.population(Term::kD32);
  r.d32_decay = scheme.gamma_d32();

  // Mean first-passage time back to S1/2 under the repump, starting from the D3/2
  // mixture fed by infrared decays of the fluorescing ion: int_0^inf (1 - P_S(t)) dt.
  Matrix8cd fed = Matrix8cd::Zero();
  for (const auto& op : decay_channels(scheme)) {
    if (op.channel != DecayChannel::kInfrared) continue;
    Matrix8cd m = Matrix8cd::Zero();
    for (const auto& t : op.terms) m(t.to, t.from) += t.amplitude;
    fed += m * fluorescing.matrix() * m.adjoint();
  }
  fed /= fed.trace().real();
  // D3/2 decay is raced separately by the sampler, so it is kept out of the table.
  IonSetup no_decay = setup;
  no_decay.scheme = scheme.with_tau_d32(std::numeric_limits<double>::infinity());
  const Liouvillian repump = build_liouvillian(no_decay, false, true);
  Eigen::RowVectorXcd s_pop = Eigen::RowVectorXcd::Zero(kNumSublevels * kNumSublevels);
  for (int i = kFirstS; i < kFirstP; ++i) s_pop[i + kNumSublevels * i] = 1.0;
  const Eigen::VectorXcd v0 = Eigen::Map<const Eigen::VectorXcd>(fed.data(), fed.size());
  double horizon = 20e-6;
  for (;; horizon *= 2.0) {
    const Propagator prop(repump, horizon);
    const double left = 1.0 - (s_pop * prop.apply(v0))(0).real();
    if (left < 1e-12 || horizon > 10e-3) {
      r.pump_time = horizon - (s_pop * prop.integrate(v0))(0).real();
      break;
    }
  }

  constexpr int kTableSteps = 8192;
  r.pump_step = horizon / kTableSteps;
  const Propagator step(repump, r.pump_step);
  r.pump_cdf.resize(kTableSteps + 1);
  Eigen::VectorXcd v = v0;
  double best = 0.0;
  for (int k = 0; k <= kTableSteps; ++k) {
    if (k > 0) v = step.apply(v);
    best = std::max(best, std::min(1.0, (s_pop * v)(0).real()));
    r.pump_cdf[k] = best;
  }
  const double a = 1.0 - r.pump_cdf[kTableSteps - 1], b = 1.0 - r.pump_cdf[kTableSteps];
  r.pump_tail_rate = (a > 0.0 && b > 0.0 && a > b) ? std::log(a / b) / r.pump_step : 1.0 / r.pump_time;
  return r;
}

double FastRates::draw_pump_time(Rng& rng) const {
  if (pump_cdf.size() < 2) return draw_exponential(rng, 1.0 / pump_time);
  const double u = draw_unit(rng);
  if (u >= pump_cdf.back())
    return pump_step * static_cast<double>(pump_cdf.size() - 1) + draw_exponential(rng, pump_tail_rate);
  const auto it = std::upper_bound(pump_cdf.begin(), pump_cdf.end(), u);
  const auto k = static_cast<double>(it - pump_cdf.begin() - 1);
  const double lo = *(it - 1), hi = *it;
  return pump_step * (k + (hi > lo ? (u - lo) / (hi - lo) : 0.0));
}

// ---------------------------------------------------------------------------

struct CycleSimulator::Impl {
  SimulationParams params;
  std::shared_ptr<const FastRates> rates;
  std::shared_ptr<const QuantumJumpSampler> sampler_prototype;
  std::unique_ptr<QuantumJumpSampler> sampler;

  IonState state = IonState::kS;
  double pump_left = 0.0;  // repump exposure still needed while in D3/2
  double clock = 0.0;
  double next_dark = kInf;
  double dark_end = 0.0;
  std::vector<double> scratch;

  void add_segment(Rng& rng, Emissions& em, double t0, double t1, double rate) const {
    if (t1 <= t0 || rate <= 0.0) return;
    const long n = std::poisson_distribution<long>(rate * (t1 - t0))(rng);
    if (n > 0) em.segments.push_back({t0, t1, n});
  }

  void shelve(Rng& rng) {
    state = IonState::kD32;
    pump_left = rates->draw_pump_time(rng);
  }

  // Evolves the coarse state over [t, end) of one phase under fixed switch states.
  void advance(const Phase& ph, double t, double end, Rng& rng, Emissions& em) {
    const FastRates& r = *rates;
    while (t < end) {
      if (ph.blue_on && ph.repump_on) {
        add_segment(rng, em, t, end, r.both_on_scatter);
        state = IonState::kS;
        if (draw_unit(rng) < r.both_on_d_fraction) shelve(rng);
        return;
      }
      if (state == IonState::kS) {
        if (!ph.blue_on) return;
        const double shelve_at = t + draw_exponential(rng, r.shelving);
        const double stop = std::min(shelve_at, end);
        add_segment(rng, em, t, stop, r.blue_scatter);
        if (shelve_at < end) shelve(rng);
        t = stop;
      } else {
        const double decay = t + draw_exponential(rng, r.d32_decay);
        const double pump = ph.repump_on ? t + pump_left : kInf;
        const double next = std::min(decay, pump);
        if (next >= end) {
          if (ph.repump_on) pump_left -= end - t;
          return;
        }
        if (pump < decay) em.times.push_back(pump);
        state = IonState::kS;
        t = next;
      }
    }
  }

  void fast_phase(const Phase& ph, double start, Rng& rng, Emissions& em, bool& flagged) {
    const double rate = params.dark_event_rate;
    double t = 0.0;
    while (t < ph.duration) {
      if (state == IonState::kD52) {
        flagged = true;
        if (dark_end >= start + ph.duration) return;
        t = dark_end - start;
        state = IonState::kS;
        continue;
      }
      double end = ph.duration;
      const bool dark_hits = next_dark < start + ph.duration;
      if (dark_hits) end = std::max(t, next_dark - start);
      advance(ph, t, end, rng, em);
      t = end;
      if (dark_hits) {
        state = IonState::kD52;
        flagged = true;
        dark_end = next_dark + draw_exponential(rng, 1.0 / params.setup.scheme.tau_d52());
        next_dark = dark_end + draw_exponential(rng, rate);
      }
    }
  }
};

CycleSimulator::CycleSimulator(const SimulationParams& params) : impl_(std::make_unique<Impl>()) {
  params.validate();
  impl_->params = params;
  if (params.fidelity == Fidelity::kFast) {
    impl_->rates = std::make_shared<const FastRates>(FastRates::derive(params.setup));
  } else {
    double longest = 0.0;
    for (const auto& ph : params.chronogram.phases()) longest = std::max(longest, ph.duration);
    impl_->sampler_prototype = std::make_shared<const QuantumJumpSampler>(params.setup, longest);
    impl_->rates = std::make_shared<const FastRates>();
  }
}

CycleSimulator::~CycleSimulator() = default;
CycleSimulator::CycleSimulator(CycleSimulator&&) noexcept = default;
CycleSimulator& CycleSimulator::operator=(CycleSimulator&&) noexcept = default;

CycleSimulator::CycleSimulator(const CycleSimulator& other) : impl_(std::make_unique<Impl>()) {
  impl_->params = other.impl_->params;
  impl_->rates = other.impl_->rates;
  impl_->sampler_prototype = other.impl_->sampler_prototype;
}

void CycleSimulator::reset(Rng& rng) {
  Impl& m = *impl_;
  m.state = IonState::kS;
  m.clock = 0.0;
  m.dark_end = 0.0;
  m.next_dark = draw_exponential(rng, m.params.dark_event_rate);
  if (m.sampler_prototype) {
    m.sampler = std::make_unique<QuantumJumpSampler>(*m.sampler_prototype);
    m.sampler->reset(rng);
  }
}

void CycleSimulator::run_cycle(Rng& rng, CycleOutcome& out) {
  Impl& m = *impl_;
  if (m.sampler_prototype && !m.sampler) reset(rng);
  const auto& phases = m.params.chronogram.phases();
  out.emitted.fill(0);
  out.detected.fill(0);
  out.flagged = false;
  out.phase_emissions.resize(phases.size());
  double start = m.clock;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const Phase& ph = phases[i];
    Emissions& em = out.phase_emissions[i];
    em.clear();
    if (m.sampler) {
      m.sampler->run_phase(ph.blue_on, ph.repump_on, ph.duration, rng, em.times);
    } else {
      m.fast_phase(ph, start, rng, em, out.flagged);
    }
    out.emitted[gate_index(ph.gate)] += em.total();
    start += ph.duration;
  }
  m.clock = start;
  out.final_state = state();
}

CycleOutcome CycleSimulator::run_cycle(Rng& rng) {
  CycleOutcome out;
  run_cycle(rng, out);
  return out;
}

void CycleSimulator::detect_cycle(Rng& rng, CycleOutcome& out) {
  Impl& m = *impl_;
  const auto& phases = m.params.chronogram.phases();
  const DetectorModel& det = m.params.detector;
  out.detected.fill(0);
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const Phase& ph = phases[i];
    if (ph.gate == Gate::kNone) continue;
    out.detected[gate_index(ph.gate)] +=
        detect(out.phase_emissions[i], 0.0, ph.duration, det.background_rate(ph.label), det, rng, m.scratch);
  }
}

IonState CycleSimulator::state() const {
  if (impl_->sampler) return impl_->sampler->state();
  return impl_->state;
}

const FastRates& CycleSimulator::fast_rates() const { return *impl_->rates; }
const SimulationParams& CycleSimulator::params() const { return impl_->params; }

// ---------------------------------------------------------------------------

double BatchDiagnostics::mean_emitted(Gate g) const {
  return aggregated_cycles > 0 ? emitted[gate_index(g)].sum / static_cast<double>(aggregated_cycles) : 0.0;
}

double BatchDiagnostics::sem_emitted(Gate g) const {
  if (aggregated_cycles < 2) return 0.0;
  const double n = static_cast<double>(aggregated_cycles);
  const double mean = emitted[gate_index(g)].sum / n;
  const double var = std::max(0.0, (emitted[gate_index(g)].sum_sq / n - mean * mean) * n / (n - 1.0));
  return std::sqrt(var / n);
}

namespace {

struct BlockResult {
  std::array<std::int64_t, kNumGates> counts{};
  BatchDiagnostics diag;
};

}  // namespace

BatchResult run_batch(const SimulationParams& params, const BatchOptions& options) {
  if (options.cycles < 1) throw ConfigError("a batch needs at least one cycle");
  if (options.block_size < 1) throw ConfigError("block size must be >= 1");
  if (options.warmup_cycles < 0) throw ConfigError("warm-up cycle count must be >= 0");

  const CycleSimulator prototype(params);
  const std::int64_t blocks = (options.cycles + options.block_size - 1) / options.block_size;
  std::vector<BlockResult> results(static_cast<std::size_t>(blocks));

  auto run_block = [&](std::int64_t b) {
    CycleSimulator sim(prototype);
    Rng rng = make_stream(options.seed, static_cast<std::uint64_t>(b));
    sim.reset(rng);
    CycleOutcome out;
    for (int w = 0; w < options.warmup_cycles; ++w) sim.run_cycle(rng, out);
    const std::int64_t n = std::min(options.block_size, options.cycles - b * options.block_size);
    BlockResult& res = results[static_cast<std::size_t>(b)];
    for (std::int64_t i = 0; i < n; ++i) {
      sim.run_cycle(rng, out);
      sim.detect_cycle(rng, out);
      if (out.flagged) ++res.diag.flagged_cycles;
      if (out.flagged && options.drop_flagged) continue;
      ++res.diag.aggregated_cycles;
      ++res.diag.final_states[static_cast<int>(out.final_state)];
      for (int g = 0; g < kNumGates; ++g) {
        const double e = static_cast<double>(out.emitted[g]);
        const double d = static_cast<double>(out.detected[g]);
        res.diag.emitted[g].sum += e;
        res.diag.emitted[g].sum_sq += e * e;
        res.diag.detected[g].sum += d;
        res.diag.detected[g].sum_sq += d * d;
        res.counts[g] += out.detected[g];
      }
    }
  };

  const int threads = static_cast<int>(std::clamp<std::int64_t>(options.threads, 1, blocks));
  if (threads == 1) {
    for (std::int64_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        try {
          for (std::int64_t b = next++; b < blocks; b = next++) run_block(b);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  // Fixed block order keeps floating-point sums reproducible.
  BatchResult out;
  BatchDiagnostics& d = out.diagnostics;
  std::array<std::int64_t, kNumGates> counts{};
  for (const auto& r : results) {
    for (int g = 0; g < kNumGates; ++g) {
      counts[g] += r.counts[g];
      d.emitted[g].sum += r.diag.emitted[g].sum;
      d.emitted[g].sum_sq += r.diag.emitted[g].sum_sq;
      d.detected[g].sum += r.diag.detected[g].sum;
      d.detected[g].sum_sq += r.diag.detected[g].sum_sq;
    }
    d.aggregated_cycles += r.diag.aggregated_cycles;
    d.flagged_cycles += r.diag.flagged_cycles;
    for (int s = 0; s < 3; ++s) d.final_states[s] += r.diag.final_states[s];
  }
  d.blocks = blocks;

  const Chronogram& ch = params.chronogram;
  CountRecord& rec = out.record;
  rec.cycles = d.aggregated_cycles;
  rec.n_b = counts[gate_index(Gate::kNb)];
  rec.n_r = counts[gate_index(Gate::kNr)];
  rec.n_b_bg = counts[gate_index(Gate::kNbB)];
  rec.n_r_bg = counts[gate_index(Gate::kNrB)];
  rec.window_b = ch.gate_duration(Gate::kNb);
  rec.window_r = ch.gate_duration(Gate::kNr);
  rec.window_b_bg = ch.gate_duration(Gate::kNbB);
  rec.window_r_bg = ch.gate_duration(Gate::kNrB);
  return out;
}

}  // namespace sbf
