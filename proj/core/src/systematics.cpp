#include "sbf/systematics.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sbf/detection.hpp"
#include "sbf/error.hpp"

namespace sbf {
namespace {

constexpr double kPerfect = -std::numeric_limits<double>::infinity();

IonSetup with_extinction(IonSetup s, double blue_db, double repump_db) {
  s.blue.extinction_db = blue_db;
  s.repump.extinction_db = repump_db;
  return s;
}

double obe_branching_fraction(const Chronogram& chronogram, const IonSetup& setup) {
  return expected_counts(chronogram, setup).branching_fraction();
}

bool is_nominal(const ScanPoint& p) { return p.rabi_blue == 1.0 && p.rabi_repump == 1.0 && p.dead_time == 1.0; }

void set_factor(ScanPoint& p, ScanParameter which, double factor) {
  switch (which) {
    case ScanParameter::kRabiBlue: p.rabi_blue = factor; break;
    case ScanParameter::kRabiRepump: p.rabi_repump = factor; break;
    case ScanParameter::kDeadTime: p.dead_time = factor; break;
  }
}

const std::vector<std::string>& canonical_labels() {
  static const std::vector<std::string> labels = {row_label::kCollisions, row_label::kDeadTime,
                                                  row_label::kFiniteWindows, row_label::kLaserLeaks};
  return labels;
}

}  // namespace

std::string to_string(ScanParameter parameter) {
  switch (parameter) {
    case ScanParameter::kRabiBlue: return "rabi_blue";
    case ScanParameter::kRabiRepump: return "rabi_repump";
    case ScanParameter::kDeadTime: return "dead_time";
  }
  return "?";
}

IonSetup apply_scan_point(const IonSetup& setup, const ScanPoint& point) {
  IonSetup s = setup;
  s.blue.rabi *= point.rabi_blue;
  s.repump.rabi *= point.rabi_repump;
  return s;
}

Envelope sensitivity_scan(const std::function<double(const ScanPoint&)>& f, const std::vector<ScanParameter>& params,
                          double fraction, ScanMode mode, int points_per_axis, int threads) {
  if (!(fraction >= 0.0)) throw ConfigError("scan fraction must be >= 0");
  if (points_per_axis < 2) throw ConfigError("a scan needs at least two points per axis");
  Envelope env;
  env.nominal = f(ScanPoint{});
  env.points.push_back({ScanPoint{}, env.nominal});
  if (fraction == 0.0 || params.empty()) return env;

  std::vector<double> factors;
  for (int i = 0; i < points_per_axis; ++i)
    factors.push_back(1.0 - fraction + 2.0 * fraction * i / (points_per_axis - 1));

  std::vector<ScanPoint> points;
  if (mode == ScanMode::kOneAtATime) {
    for (auto which : params)
      for (double x : factors) {
        ScanPoint p;
        set_factor(p, which, x);
        points.push_back(p);
      }
  } else {
    std::vector<std::size_t> idx(params.size(), 0);
    while (true) {
      ScanPoint p;
      for (std::size_t k = 0; k < params.size(); ++k) set_factor(p, params[k], factors[idx[k]]);
      points.push_back(p);
      std::size_t k = 0;
      while (k < idx.size() && ++idx[k] == factors.size()) idx[k++] = 0;
      if (k == idx.size()) break;
    }
  }

  points.erase(std::remove_if(points.begin(), points.end(), is_nominal), points.end());
  std::vector<double> values(points.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t i; (i = next++) < points.size();) {
      try {
        values[i] = f(points[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min<int>(threads, static_cast<int>(points.size())); ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  double hi = env.nominal, lo = env.nominal;
  for (std::size_t i = 0; i < points.size(); ++i) {
    env.points.push_back({points[i], values[i]});
    hi = std::max(hi, values[i]);
    lo = std::min(lo, values[i]);
  }
  env.plus = hi - env.nominal;
  env.minus = env.nominal - lo;
  return env;
}

double dead_time_shift(double q, double p) {
  if (!(q >= 0.0 && q < 1.0)) throw Error("dead-time loss probability must lie in [0, 1)");
  const double corrected = p / (p + (1.0 - p) * (1.0 - q));
  return corrected - p;
}

double finite_window_shift(const Chronogram& chronogram, const IonSetup& setup) {
  const IonSetup s = with_extinction(setup, kPerfect, kPerfect);
  ExpectedCountsOptions ideal;
  ideal.idealized = true;
  const double p_ideal = expected_counts(chronogram, s, DensityMatrix(), ideal).branching_fraction();
  return p_ideal - obe_branching_fraction(chronogram, s);
}

double laser_leak_shift(const Chronogram& chronogram, const IonSetup& setup, double extinction_db) {
  if (std::isinf(extinction_db) && extinction_db < 0) return 0.0;
  const double perfect = obe_branching_fraction(chronogram, with_extinction(setup, kPerfect, kPerfect));
  const double leaky = obe_branching_fraction(chronogram, with_extinction(setup, extinction_db, extinction_db));
  return perfect - leaky;
}

double collision_bound(double event_rate, double cycle_duration, double p) {
  if (!(event_rate >= 0.0) || !(cycle_duration > 0.0)) throw ConfigError("collision rate and cycle time must be valid");
  return 2.0 * event_rate * cycle_duration * p * (1.0 - p);
}

BudgetRow dead_time_row(const SystematicsInputs& in) {
  const double p = in.setup.scheme.p();
  const auto f = [&](const ScanPoint& pt) {
    const double q = dead_time_loss_q(apply_scan_point(in.setup, pt), in.efficiency, in.dead_time * pt.dead_time);
    return dead_time_shift(q, p);
  };
  const Envelope env =
      sensitivity_scan(f, {ScanParameter::kRabiBlue, ScanParameter::kDeadTime}, in.scan_fraction, ScanMode::kGrid, 3, in.threads);
  return {row_label::kDeadTime, env.nominal, env.plus, env.minus};
}

BudgetRow finite_window_row(const SystematicsInputs& in) {
  const auto f = [&](const ScanPoint& pt) {
    return finite_window_shift(in.chronogram, apply_scan_point(in.setup, pt));
  };
  const Envelope env = sensitivity_scan(f, {ScanParameter::kRabiBlue}, in.scan_fraction, ScanMode::kGrid, 3, in.threads);
  return {row_label::kFiniteWindows, env.nominal, env.plus, env.minus};
}

BudgetRow laser_leak_row(const SystematicsInputs& in) {
  const auto f = [&](const ScanPoint& pt) {
    const IonSetup s = apply_scan_point(in.setup, pt);
    const double perfect = obe_branching_fraction(in.chronogram, with_extinction(s, kPerfect, kPerfect));
    const double leaky = obe_branching_fraction(in.chronogram, s);
    return perfect - leaky;
  };
  const Envelope env = sensitivity_scan(f, {ScanParameter::kRabiBlue, ScanParameter::kRabiRepump}, in.scan_fraction,
                                        ScanMode::kGrid, 3, in.threads);
  return {row_label::kLaserLeaks, env.nominal, env.plus, env.minus};
}

BudgetRow collision_row(const SystematicsInputs& in) {
  double rate = 0.0;
  if (in.short_event_interval > 0.0) rate += 1.0 / in.short_event_interval;
  if (in.shelved_event_interval > 0.0) rate += 1.0 / in.shelved_event_interval;
  const double bound = collision_bound(rate, in.chronogram.cycle_duration(), in.setup.scheme.p());
  return {row_label::kCollisions, 0.0, bound, bound};
}

ErrorBudget build_budget(const std::vector<BudgetRow>& rows) {
  ErrorBudget b;
  for (const auto& label : canonical_labels()) {
    const auto n = std::count_if(rows.begin(), rows.end(), [&](const BudgetRow& r) { return r.label == label; });
    if (n == 0) throw IncompleteBudgetError("budget is missing the '" + label + "' row");
    if (n > 1) throw IncompleteBudgetError("budget has more than one '" + label + "' row");
    b.rows.push_back(*std::find_if(rows.begin(), rows.end(), [&](const BudgetRow& r) { return r.label == label; }));
  }
  if (rows.size() != canonical_labels().size()) throw IncompleteBudgetError("budget has unknown rows");
  for (const auto& r : b.rows)
    if (!(r.plus >= 0.0 && r.minus >= 0.0)) throw Error("budget bounds must be non-negative");
  return b;
}

ErrorBudget compute_budget(const SystematicsInputs& in) {
  return build_budget({collision_row(in), dead_time_row(in), finite_window_row(in), laser_leak_row(in)});
}

std::string budget_csv(const ErrorBudget& budget) {
  std::ostringstream os;
  os << "label,shift,plus,minus\n";
  char buf[160];
  auto line = [&](const BudgetRow& r) {
    std::snprintf(buf, sizeof buf, "%s,%.6e,%.6e,%.6e\n", r.label.c_str(), r.shift, r.plus, r.minus);
    os << buf;
  };
  for (const auto& r : budget.rows) line(r);
  line(budget.total());
  return os.str();
}

std::string budget_table(const ErrorBudget& budget) {
  std::ostringstream os;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-32s %14s %14s %14s\n", "Effect", "Shift (1e-6)", "+ (1e-6)", "- (1e-6)");
  os << buf;
  auto line = [&](const BudgetRow& r) {
    std::snprintf(buf, sizeof buf, "%-32s %14.4f %14.4f %14.4f\n", r.label.c_str(), r.shift * 1e6, r.plus * 1e6,
                  r.minus * 1e6);
    os << buf;
  };
  for (const auto& r : budget.rows) line(r);
  os << std::string(77, '-') << "\n";
  line(budget.total());
  return os.str();
}

}  // namespace sbf
