#include "sbf/detection.hpp"

#include <algorithm>
#include <cmath>

#include "sbf/error.hpp"

namespace sbf {

void DetectorModel::validate() const {
  if (!(efficiency > 0.0 && efficiency <= 1.0)) throw ConfigError("detection efficiency must lie in (0, 1]");
  if (!(dead_time >= 0.0)) throw ConfigError("dead time must be >= 0");
  for (const auto& [phase, rate] : background_rates)
    if (!(rate >= 0.0)) throw ConfigError("background rate for phase '" + phase + "' must be >= 0");
}

double DetectorModel::background_rate(const std::string& phase) const {
  const auto it = background_rates.find(phase);
  return it == background_rates.end() ? 0.0 : it->second;
}

DetectorModel DetectorModel::run1() {
  DetectorModel d;
  const double cycles = 54'272'970.0;
  const double blue_rate = 342'349.0 / (cycles * 160e-6);
  const double repump_rate = 50'418.0 / (cycles * 80e-6);
  d.background_rates = {{"c", blue_rate}, {"g", blue_rate}, {"d", repump_rate}, {"e", repump_rate}};
  return d;
}

long Emissions::total() const {
  long n = static_cast<long>(times.size());
  for (const auto& s : segments) n += s.count;
  return n;
}

long apply_dead_time(const std::vector<double>& sorted_times, double dead_time, DeadTimeModel model) {
  if (sorted_times.empty()) return 0;
  if (dead_time <= 0.0) return static_cast<long>(sorted_times.size());
  long accepted = 1;
  double blocked_until = sorted_times.front() + dead_time;
  for (std::size_t i = 1; i < sorted_times.size(); ++i) {
    const double t = sorted_times[i];
    if (t >= blocked_until) {
      ++accepted;
      blocked_until = t + dead_time;
    } else if (model == DeadTimeModel::kParalyzable) {
      blocked_until = t + dead_time;
    }
  }
  return accepted;
}

long detect(const Emissions& emissions, double window_start, double window_end, double background_rate,
            const DetectorModel& detector, Rng& rng, std::vector<double>& scratch) {
  scratch.clear();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double eps = detector.efficiency;

  for (double t : emissions.times)
    if (eps >= 1.0 || unit(rng) < eps) scratch.push_back(t);
  for (const auto& s : emissions.segments) {
    if (s.count <= 0) continue;
    const long kept = eps >= 1.0 ? s.count : std::binomial_distribution<long>(s.count, eps)(rng);
    for (long i = 0; i < kept; ++i) scratch.push_back(s.start + (s.end - s.start) * unit(rng));
  }
  const double mean_bg = background_rate * (window_end - window_start);
  if (mean_bg > 0.0) {
    const long n_bg = std::poisson_distribution<long>(mean_bg)(rng);
    for (long i = 0; i < n_bg; ++i) scratch.push_back(window_start + (window_end - window_start) * unit(rng));
  }
  if (scratch.size() <= 1 || detector.dead_time <= 0.0) return static_cast<long>(scratch.size());
  std::sort(scratch.begin(), scratch.end());
  return apply_dead_time(scratch, detector.dead_time, detector.dead_time_model);
}

long detect(const Emissions& emissions, double window_start, double window_end, double background_rate,
            const DetectorModel& detector, Rng& rng) {
  std::vector<double> scratch;
  return detect(emissions, window_start, window_end, background_rate, detector, rng, scratch);
}

double dead_time_loss_q(const std::vector<double>& times, const std::vector<double>& sigma_pp, double efficiency,
                        double a_sp, double dead_time) {
  if (times.size() != sigma_pp.size()) throw Error("trajectory times and values differ in length");
  if (dead_time <= 0.0) return 0.0;
  if (times.size() < 2 || times.front() != 0.0 || times.back() < dead_time)
    throw Error("trajectory must start at 0 and cover the dead time");
  double integral = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double t0 = times[i - 1];
    if (t0 >= dead_time) break;
    double t1 = times[i];
    double y1 = sigma_pp[i];
    if (t1 > dead_time) {
      y1 = sigma_pp[i - 1] + (sigma_pp[i] - sigma_pp[i - 1]) * (dead_time - t0) / (t1 - t0);
      t1 = dead_time;
    }
    integral += 0.5 * (sigma_pp[i - 1] + y1) * (t1 - t0);
  }
  return -std::expm1(-efficiency * a_sp * integral);
}

std::vector<double> sigma_pp_trajectory(const IonSetup& setup, const DensityMatrix& entry, double duration, int n,
                                        std::vector<double>* times) {
  if (n < 1) throw Error("trajectory needs at least one step");
  const Liouvillian L = build_liouvillian(setup, true, false);
  const Propagator step(L, duration / n);
  const Eigen::RowVectorXcd w = p_population_functional();
  Eigen::VectorXcd v = entry.vectorized();
  std::vector<double> out;
  out.reserve(n + 1);
  if (times) times->clear();
  for (int i = 0; i <= n; ++i) {
    out.push_back((w * v)(0).real());
    if (times) times->push_back(duration * i / n);
    v = step.apply(v);
  }
  return out;
}

DensityMatrix post_emission_ground_state(const IonSetup& setup) {
  IonSetup closed = setup;
  // p = 1 closes the cycle; a finite D3/2 lifetime keeps the (empty) D manifold
  // from adding stationary directions when the input lifetime is infinite.
  closed.scheme = setup.scheme.with_branching(1.0);
  if (closed.scheme.gamma_d32() == 0.0) closed.scheme = closed.scheme.with_tau_d32(1.0);
  const DensityMatrix fluorescing = steady_state(build_liouvillian(closed, true, false));
  return post_blue_emission_state(fluorescing, setup.scheme);
}

double dead_time_loss_q(const IonSetup& setup, double efficiency, double dead_time) {
  if (dead_time <= 0.0) return 0.0;
  const Propagator prop(build_liouvillian(setup, true, false), dead_time);
  const double integral =
      (p_population_functional() * prop.integrate(post_emission_ground_state(setup).vectorized()))(0).real();
  return -std::expm1(-efficiency * setup.scheme.a_sp() * integral);
}

}  // namespace sbf
