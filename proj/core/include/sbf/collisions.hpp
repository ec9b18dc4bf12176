#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sbf/rng.hpp"

namespace sbf {

/// Photon counts in consecutive equal bins of a long fluorescence record.
struct FluorescenceTrace {
  double bin_duration = 5e-3;  // s
  std::vector<std::int32_t> counts;

  double duration() const { return bin_duration * static_cast<double>(counts.size()); }
  void validate() const;
};

enum class EventClass { kShort, kShelved, kUnknown };

std::string to_string(EventClass c);

struct DarkEvent {
  double start = 0.0;     // s
  double duration = 0.0;  // s
  EventClass label = EventClass::kUnknown;
};

struct TraceParams {
  double bin_duration = 5e-3;
  double duration = 43.0 * 3600.0;
  double bright_rate = 2.0e4;  // detected counts per second while fluorescing
  double dark_rate = 200.0;    // background counts per second while dark
  /// Mean spacing of each event class in fluorescing time (s); 0 disables the class.
  double short_interval = 1520.0;
  double shelved_interval = 1800.0;
  /// Short events last short_offset + Exponential(short_scale).
  double short_offset = 10e-3;
  double short_scale = 2e-3;
  double tau_d52 = 390.8e-3;
  /// Mean trapping time (s); 0 disables ion loss.
  double ion_lifetime = 1560.0;
  /// Dark gap between a loss and the next ion fluorescing (s).
  double reload_time = 30.0;

  void validate() const;
};

struct SimulatedTrace {
  FluorescenceTrace trace;
  std::vector<DarkEvent> events;       // ground truth, excluding losses
  std::vector<double> loss_times;      // ground-truth loss instants
  std::vector<double> ion_lifetimes;   // completed trapping times
};

/// Poisson bin counts from a piecewise bright/dark timeline with two event classes and ion loss.
SimulatedTrace simulate_trace(Rng& rng, const TraceParams& params);

/// Midpoint of the bright and dark per-bin Poisson means.
double midpoint_threshold(double bright_rate, double dark_rate, double bin_duration);

struct ThresholdDiagnostics {
  /// P(bright bin below threshold) + P(dark bin at or above threshold).
  double misclassification = 0.0;
  bool separable = true;  // misclassification below 1e-6
  std::string warning;
};

ThresholdDiagnostics threshold_diagnostics(double bright_rate, double dark_rate, double bin_duration,
                                           double threshold);

/// Maximal runs of bins with counts below `threshold`, labelled kUnknown.
std::vector<DarkEvent> detect_events(const FluorescenceTrace& trace, double threshold);

/// Splits detected events into dark events and ion losses (duration >= loss_threshold).
void split_losses(const std::vector<DarkEvent>& detected, double loss_threshold, std::vector<DarkEvent>& events,
                  std::vector<DarkEvent>& losses);

struct HistogramFit {
  double bin_width = 0.0;
  std::vector<std::int64_t> histogram;  // events per duration bin, starting at 0
  double amplitude = 0.0;               // fitted exponential value on the first bin
  double amplitude_error = 0.0;
  double shelved_fraction = 0.0;        // fitted exponential mass / total events
  double short_fraction = 0.0;          // first-bin excess over the curve / total events
  std::int64_t total_events = 0;
};

struct FitOptions {
  double bin_width = 0.160;  // s
  double tau = 390.8e-3;     // fixed decay time (s)
  bool exclude_first_bin = true;
  /// Weight residuals by 1 / max(n, 1) instead of ordinary least squares.
  bool poisson_weighted = false;
};

/// Least squares of A exp(-t/tau) with tau frozen. Throws FitDegenerateError when fewer than
/// two non-empty bins remain after the exclusion.
HistogramFit fit_histogram(const std::vector<DarkEvent>& events, const FitOptions& options = {});

struct LifetimeStats {
  double mean_lifetime = 0.0;  // observation time / losses
  std::int64_t losses = 0;
  double ks_statistic = 0.0;
  double ks_p_value = 0.0;  // parametric bootstrap, mean re-estimated per replica
};

/// Mean trapping time and a Kolmogorov-Smirnov exponential-consistency test of the
/// completed lifetimes. Throws Error with fewer than two losses.
LifetimeStats trap_lifetime_stats(const std::vector<double>& lifetimes, double observation_time,
                                  std::uint64_t seed = 1, int bootstrap = 999);

/// Completed trapping times and trapped (non-reload) observation time from detected losses.
void lifetimes_from_losses(const std::vector<DarkEvent>& losses, double trace_duration,
                           std::vector<double>& lifetimes, double& observation_time);

struct CollisionAnalysis {
  std::vector<DarkEvent> events;
  std::vector<DarkEvent> losses;
  ThresholdDiagnostics threshold;
  HistogramFit fit;
  LifetimeStats lifetime;
  bool lifetime_available = false;
};

struct AnalysisOptions {
  double threshold = -1.0;  // counts per bin; negative selects the midpoint rule
  double bright_rate = 2.0e4;
  double dark_rate = 200.0;
  double loss_threshold = 5.0;  // s
  FitOptions fit;
  std::uint64_t seed = 1;
  int bootstrap = 999;
};

CollisionAnalysis analyze_trace(const FluorescenceTrace& trace, const AnalysisOptions& options = {});

void write_trace_csv(std::ostream& os, const FluorescenceTrace& trace);
/// Reads "bin_index,counts" rows; the bin duration is not stored in the file.
FluorescenceTrace read_trace_csv(std::istream& is, double bin_duration = 5e-3);
void write_histogram_csv(std::ostream& os, const HistogramFit& fit);

}  // namespace sbf
