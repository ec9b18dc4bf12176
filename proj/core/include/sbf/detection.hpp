#pragma once

#include <map>
#include <string>
#include <vector>

#include "sbf/obe.hpp"
#include "sbf/rng.hpp"

namespace sbf {

enum class DeadTimeModel { kNonParalyzable, kParalyzable };

struct DetectorModel {
  double efficiency = 1.0e-3;
  double dead_time = 70e-9;  // s
  /// Background count rate (s^-1) per phase label; phases not listed have none.
  std::map<std::string, double> background_rates;
  DeadTimeModel dead_time_model = DeadTimeModel::kNonParalyzable;

  void validate() const;
  double background_rate(const std::string& phase) const;

  /// Rates matching the first published run: 342 349 counts in 54 272 970
  /// windows of 160 us (blue on) and 50 418 in windows of 80 us (repump on).
  static DetectorModel run1();
};

/// Emitted photons in one window. `times` are individual timestamps; each segment
/// holds `count` emissions whose times are independent and uniform on [start, end]
/// (a Poisson process conditioned on its count).
struct EmissionSegment {
  double start;
  double end;
  long count;
};

struct Emissions {
  std::vector<double> times;
  std::vector<EmissionSegment> segments;

  long total() const;
  void clear() {
    times.clear();
    segments.clear();
  }
};

/// Dead-time filter over a sorted event stream; returns the number of accepted events.
long apply_dead_time(const std::vector<double>& sorted_times, double dead_time, DeadTimeModel model);

/// Efficiency thinning, Poisson background on [window_start, window_end], merge and dead time.
/// `scratch` is reused between calls to avoid allocation.
long detect(const Emissions& emissions, double window_start, double window_end, double background_rate,
            const DetectorModel& detector, Rng& rng, std::vector<double>& scratch);

long detect(const Emissions& emissions, double window_start, double window_end, double background_rate,
            const DetectorModel& detector, Rng& rng);

/// q = 1 - exp(-int_0^tau eps A_SP sigma_PP(t) dt), trapezoidal quadrature of a sampled
/// trajectory (times ascending from 0, linear interpolation at tau).
double dead_time_loss_q(const std::vector<double>& times, const std::vector<double>& sigma_pp, double efficiency,
                        double a_sp, double dead_time);

/// sigma_PP(t) under blue-only drive, sampled on n + 1 uniform points of [0, duration].
std::vector<double> sigma_pp_trajectory(const IonSetup& setup, const DensityMatrix& entry, double duration, int n,
                                        std::vector<double>* times = nullptr);

/// Ground-state mixture left by a blue emission during steady fluorescence of the
/// closed S-P cycle with the blue laser on.
DensityMatrix post_emission_ground_state(const IonSetup& setup);

/// Dead-time loss probability from the OBE, using the exact time integral of sigma_PP over [0, dead_time],
/// starting from post_emission_ground_state, blue on and repump off.
double dead_time_loss_q(const IonSetup& setup, double efficiency, double dead_time);

}  // namespace sbf
