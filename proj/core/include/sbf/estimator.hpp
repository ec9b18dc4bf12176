#pragma once

#include <string>

#include "sbf/count_record.hpp"
#include "sbf/error_budget.hpp"

namespace sbf {

/// How the four Poisson count errors are combined into sigma(p).
enum class ErrorPropagation {
  /// sigma_p = p(1-p) [ (sqrt(N_b) + sqrt(N_b^B)) / S_b + (sqrt(N_r) + sqrt(N_r^B)) / S_r ].
  /// Conservative linear sum; this is the convention behind the published digits.
  kLinear,
  /// First-order propagation with independent errors added in quadrature.
  kQuadrature,
};

/// How p bounds are carried to BR = p / (1 - p).
enum class BoundMapping {
  kLinearized,  // sigma_BR = sigma_p / (1 - p)^2
  kEndpoint,    // BR(p +- sigma) - BR(p)
};

/// value (+plus / -minus), bounds stored as non-negative magnitudes.
struct AsymmetricValue {
  double value = 0.0;
  double plus = 0.0;
  double minus = 0.0;
};

struct Estimate {
  double p = 0.0;
  double sigma_stat = 0.0;
  double signal_b = 0.0;  // S_b = N_b - N_b^B (exposure scaled if enabled)
  double signal_r = 0.0;
  double efficiency = 0.0;
  AsymmetricValue branching_ratio;
};

struct EstimatorOptions {
  ErrorPropagation propagation = ErrorPropagation::kLinear;
  BoundMapping bound_mapping = BoundMapping::kLinearized;
};

/// Background-subtracted p = S_b / (S_b + S_r), its statistical error, BR and efficiency.
Estimate branching_fraction(const CountRecord& rec, const EstimatorOptions& options = {});

AsymmetricValue branching_ratio(const AsymmetricValue& p, BoundMapping mapping = BoundMapping::kLinearized);

/// (N_r - N_r^B) / cycles: one repump-window photon per ideal cycle.
double detection_efficiency(const CountRecord& rec);

struct TransitionProbabilities {
  AsymmetricValue a_sp;  // s^-1
  AsymmetricValue a_pd;  // s^-1
  /// "tau_P" or "branching fraction": the larger relative contribution.
  std::string a_sp_dominant;
  std::string a_pd_dominant;
};

/// A_SP = p / tau_P and A_PD = (1 - p) / tau_P, relative errors added in quadrature.
TransitionProbabilities transition_probabilities(const AsymmetricValue& p, double tau_p, double tau_p_sigma);

/// Statistical error plus the linear sum of systematic bounds; the central value is
/// corrected by the budget's total shift.
AsymmetricValue combine_total_uncertainty(double p, double sigma_stat, const ErrorBudget& budget);

/// "value(err)" with the uncertainty rounded by the Particle Data Group rule:
/// leading three digits 100-354 keep two significant figures, 355-949 one,
/// 950-999 round up to two. The value is rounded to the same decimal place.
std::string format_with_error(double value, double sigma);

/// "value +plus/-minus" with both bounds rounded by the same rule.
std::string format_asymmetric(double value, double plus, double minus);

/// Number of decimal places the rounding rule assigns to an uncertainty.
int rounding_decimals(double sigma);

}  // namespace sbf
