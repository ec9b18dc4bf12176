#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sbf/chronogram.hpp"
#include "sbf/error_budget.hpp"
#include "sbf/obe.hpp"

namespace sbf {

namespace row_label {
inline constexpr const char* kCollisions = "collisions";
inline constexpr const char* kDeadTime = "dead time";
inline constexpr const char* kFiniteWindows = "D3/2 lifetime & finite windows";
inline constexpr const char* kLaserLeaks = "laser leaks";
}  // namespace row_label

/// Inputs shared by every row. Shifts are evaluated at the raw branching fraction
/// carried by setup.scheme (first-order feedback, no iteration).
struct SystematicsInputs {
  IonSetup setup = IonSetup::nominal();
  Chronogram chronogram = Chronogram::standard();
  double efficiency = 1.0e-3;
  double dead_time = 70e-9;
  /// Relative half-width of the Rabi-frequency and dead-time scans.
  double scan_fraction = 0.2;
  /// Mean spacing of the two dark-event classes (s); 0 disables a class.
  double short_event_interval = 1520.0;
  double shelved_event_interval = 1800.0;
  int threads = 0;  // scan workers, 0 = hardware concurrency
};

enum class ScanParameter { kRabiBlue, kRabiRepump, kDeadTime };

std::string to_string(ScanParameter parameter);

/// One evaluation point: multiplicative factors on the nominal values.
struct ScanPoint {
  double rabi_blue = 1.0;
  double rabi_repump = 1.0;
  double dead_time = 1.0;
};

struct Envelope {
  double nominal = 0.0;
  double plus = 0.0;   // max(f) - nominal, >= 0
  double minus = 0.0;  // nominal - min(f), >= 0
  std::vector<std::pair<ScanPoint, double>> points;
};

enum class ScanMode {
  kOneAtATime,  // endpoints of each parameter with the others nominal
  kGrid,        // full tensor grid over the listed parameters
};

/// Evaluates f over `points_per_axis` evenly spaced values in [1 - fraction, 1 + fraction]
/// per listed parameter and returns the signed envelope about f(nominal). Off-nominal points
/// are evaluated on `threads` workers (0: hardware concurrency); f must be thread-safe.
Envelope sensitivity_scan(const std::function<double(const ScanPoint&)>& f, const std::vector<ScanParameter>& params,
                          double fraction, ScanMode mode = ScanMode::kGrid, int points_per_axis = 3,
                          int threads = 0);

/// Applies a scan point to a setup (Rabi factors) and dead time.
IonSetup apply_scan_point(const IonSetup& setup, const ScanPoint& point);

/// p corrected for N_b -> N_b / (1 - q), minus p: ~ q p (1 - p).
double dead_time_shift(double q, double p);

/// p from the idealized protocol minus p from the OBE expectations of the actual one.
/// Both drives use perfect switches.
double finite_window_shift(const Chronogram& chronogram, const IonSetup& setup);

/// p with perfect switches minus p with `extinction_db` on both lasers.
double laser_leak_shift(const Chronogram& chronogram, const IonSetup& setup, double extinction_db);

/// Worst case of two fully unbalanced cycles per dark event:
/// 2 x event rate x cycle duration x p (1 - p).
double collision_bound(double event_rate, double cycle_duration, double p);

BudgetRow dead_time_row(const SystematicsInputs& in);
BudgetRow finite_window_row(const SystematicsInputs& in);
BudgetRow laser_leak_row(const SystematicsInputs& in);
BudgetRow collision_row(const SystematicsInputs& in);

/// Assembles the four rows; throws IncompleteBudgetError if one is missing or duplicated.
ErrorBudget build_budget(const std::vector<BudgetRow>& rows);

/// All four rows from one set of inputs.
ErrorBudget compute_budget(const SystematicsInputs& in);

/// CSV with columns label,shift,plus,minus and a trailing total row.
std::string budget_csv(const ErrorBudget& budget);

/// Fixed-width table in units of 1e-6, mirroring the published layout.
std::string budget_table(const ErrorBudget& budget);

}  // namespace sbf
