#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sbf/collisions.hpp"
#include "sbf/count_record.hpp"
#include "sbf/error_budget.hpp"
#include "sbf/estimator.hpp"
#include "sbf/obe.hpp"
#include "sbf/sequence.hpp"

namespace sbf {

std::string version_string();

/// Enough to replay a command: the canonical config, its hash and the seed.
struct Provenance {
  std::string command;
  std::uint64_t params_hash = 0;
  std::uint64_t seed = 0;
  std::string config_json;  // canonical form, empty when the command read no config
  std::string input;        // input file name, if any
};

// All reports are pretty-printed JSON with fixed key order and no wall-clock data.

std::string simulate_report(const Provenance& prov, const BatchResult& result, const Estimate* estimate,
                            const std::string& estimate_error);
std::string estimate_report(const Provenance& prov, const CountRecord& record, const Estimate& estimate,
                            const ErrorBudget* budget);
std::string budget_report(const Provenance& prov, const ErrorBudget& budget);
std::string collisions_report(const Provenance& prov, const CollisionAnalysis& analysis,
                              const SimulatedTrace* truth);

/// Plain-text summary of an estimate at the published rounding.
std::string estimate_summary(const Estimate& estimate, const ErrorBudget* budget);

std::string counts_text(const CountRecord& record);

/// Reads a counts file: "key,value" lines (cycles, N_b, N_r, N_b_B, N_r_B, optional
/// window_* durations with units and exposure_scaling) or a simulate report (JSON).
/// Throws ParseError with line and column on malformed input.
CountRecord read_counts(std::istream& is);

/// Reads the CSV written by budget_csv; the total row is ignored.
ErrorBudget read_budget_csv(std::istream& is);

std::string spectrum_csv(const std::vector<SpectrumPoint>& points);
std::string events_csv(const std::vector<DarkEvent>& events);

}  // namespace sbf
