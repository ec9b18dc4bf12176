#include "sbf/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sbf/error.hpp"
#include "sbf/hash.hpp"

namespace sbf {

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

// ---------------------------------------------------------------------------

BudgetRow ErrorBudget::total() const {
  BudgetRow t{"total", 0.0, 0.0, 0.0};
  for (const auto& r : rows) {
    t.shift += r.shift;
    t.plus += r.plus;
    t.minus += r.minus;
  }
  return t;
}

const BudgetRow& ErrorBudget::row(const std::string& label) const {
  for (const auto& r : rows)
    if (r.label == label) return r;
  throw IncompleteBudgetError("budget has no row '" + label + "'");
}

bool ErrorBudget::has_row(const std::string& label) const {
  return std::any_of(rows.begin(), rows.end(), [&](const BudgetRow& r) { return r.label == label; });
}

std::uint64_t ErrorBudget::hash() const {
  std::vector<BudgetRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const BudgetRow& a, const BudgetRow& b) { return a.label < b.label; });
  std::uint64_t h = kFnvOffset;
  for (const auto& r : sorted) {
    h = fnv1a(r.label, h);
    h = fnv1a(r.shift, h);
    h = fnv1a(r.plus, h);
    h = fnv1a(r.minus, h);
  }
  return h;
}

// ---------------------------------------------------------------------------

Estimate branching_fraction(const CountRecord& rec, const EstimatorOptions& options) {
  rec.validate();
  const double kb = rec.exposure_scaling ? rec.window_b / rec.window_b_bg : 1.0;
  const double kr = rec.exposure_scaling ? rec.window_r / rec.window_r_bg : 1.0;
  const double nb = static_cast<double>(rec.n_b), nbb = static_cast<double>(rec.n_b_bg);
  const double nr = static_cast<double>(rec.n_r), nrb = static_cast<double>(rec.n_r_bg);

  Estimate e;
  e.signal_b = nb - kb * nbb;
  e.signal_r = nr - kr * nrb;
  if (!(e.signal_b > 0.0)) throw EstimationError("blue background exceeds blue signal (N_b - N_b^B <= 0)");
  if (!(e.signal_r > 0.0)) throw EstimationError("repump background exceeds repump signal (N_r - N_r^B <= 0)");

  e.p = e.signal_b / (e.signal_b + e.signal_r);
  const double w = e.p * (1.0 - e.p);
  if (options.propagation == ErrorPropagation::kLinear) {
    e.sigma_stat = w * ((std::sqrt(nb) + kb * std::sqrt(nbb)) / e.signal_b +
                        (std::sqrt(nr) + kr * std::sqrt(nrb)) / e.signal_r);
  } else {
    e.sigma_stat = w * std::sqrt((nb + kb * kb * nbb) / (e.signal_b * e.signal_b) +
                                 (nr + kr * kr * nrb) / (e.signal_r * e.signal_r));
  }
  e.efficiency = e.signal_r / static_cast<double>(rec.cycles);
  e.branching_ratio = branching_ratio({e.p, e.sigma_stat, e.sigma_stat}, options.bound_mapping);
  return e;
}

AsymmetricValue branching_ratio(const AsymmetricValue& p, BoundMapping mapping) {
  if (!(p.value > 0.0 && p.value < 1.0)) throw EstimationError("branching fraction must lie strictly in (0, 1)");
  const auto br = [](double x) { return x / (1.0 - x); };
  AsymmetricValue out{br(p.value), 0.0, 0.0};
  if (mapping == BoundMapping::kLinearized) {
    const double d = 1.0 / ((1.0 - p.value) * (1.0 - p.value));
    out.plus = p.plus * d;
    out.minus = p.minus * d;
  } else {
    if (!(p.value + p.plus < 1.0)) throw EstimationError("upper bound of p reaches 1");
    out.plus = br(p.value + p.plus) - out.value;
    out.minus = out.value - br(std::max(0.0, p.value - p.minus));
  }
  return out;
}

double detection_efficiency(const CountRecord& rec) {
  rec.validate();
  const double kr = rec.exposure_scaling ? rec.window_r / rec.window_r_bg : 1.0;
  const double s = static_cast<double>(rec.n_r) - kr * static_cast<double>(rec.n_r_bg);
  if (!(s > 0.0)) throw EstimationError("repump background exceeds repump signal (N_r - N_r^B <= 0)");
  return s / static_cast<double>(rec.cycles);
}

TransitionProbabilities transition_probabilities(const AsymmetricValue& p, double tau_p, double tau_p_sigma) {
  if (!(tau_p > 0.0)) throw EstimationError("tau_P must be positive");
  if (!(p.value >= 0.0 && p.value <= 1.0)) throw EstimationError("branching fraction must lie in [0, 1]");
  const double rel_tau = tau_p_sigma / tau_p;
  TransitionProbabilities out;

  const double a_sp = p.value / tau_p;
  const double sp_plus = p.value > 0.0 ? p.plus / p.value : 0.0;
  const double sp_minus = p.value > 0.0 ? p.minus / p.value : 0.0;
  out.a_sp = {a_sp, a_sp * std::hypot(sp_plus, rel_tau), a_sp * std::hypot(sp_minus, rel_tau)};
  out.a_sp_dominant = std::max(sp_plus, sp_minus) > rel_tau ? "branching fraction" : "tau_P";

  // A_PD rises when p falls, so its upper bound takes the lower bound of p.
  const double q = 1.0 - p.value;
  const double a_pd = q / tau_p;
  const double pd_plus = q > 0.0 ? p.minus / q : 0.0;
  const double pd_minus = q > 0.0 ? p.plus / q : 0.0;
  out.a_pd = {a_pd, a_pd * std::hypot(pd_plus, rel_tau), a_pd * std::hypot(pd_minus, rel_tau)};
  out.a_pd_dominant = std::max(pd_plus, pd_minus) > rel_tau ? "branching fraction" : "tau_P";
  return out;
}

AsymmetricValue combine_total_uncertainty(double p, double sigma_stat, const ErrorBudget& budget) {
  const BudgetRow t = budget.total();
  return {p + t.shift, sigma_stat + t.plus, sigma_stat + t.minus};
}

// ---------------------------------------------------------------------------

int rounding_decimals(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error("uncertainty must be positive and finite to round");
  int n = static_cast<int>(std::floor(std::log10(sigma)));
  long lead = std::lround(sigma * std::pow(10.0, 2 - n));
  if (lead >= 1000) {
    ++n;
    lead = 100;
  }
  if (lead < 100) {  // log10 round-off just below a power of ten
    --n;
    lead = std::lround(sigma * std::pow(10.0, 2 - n));
  }
  if (lead <= 354) return 1 - n;
  return -n;
}

namespace {

std::string fixed(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", std::max(decimals, 0), x);
  return buf;
}

double round_to(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

}  // namespace

std::string format_with_error(double value, double sigma) {
  const int d = rounding_decimals(sigma);
  const double s = round_to(sigma, d);
  if (d <= 0) return fixed(round_to(value, d), 0) + "(" + fixed(s, 0) + ")";
  const long digits = std::lround(s * std::pow(10.0, d));
  return fixed(value, d) + "(" + std::to_string(digits) + ")";
}

std::string format_asymmetric(double value, double plus, double minus) {
  const int d = std::max(rounding_decimals(plus), rounding_decimals(minus));
  return fixed(round_to(value, d), d) + " +" + fixed(round_to(plus, d), d) + "/-" + fixed(round_to(minus, d), d);
}

}  // namespace sbf
