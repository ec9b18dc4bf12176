#pragma once

#include <cstdint>
#include <string>

#include "sbf/collisions.hpp"
#include "sbf/constants.hpp"
#include "sbf/sequence.hpp"
#include "sbf/systematics.hpp"

namespace sbf {

enum class Dimension { kAngularFrequency, kTime, kRate, kMagneticField, kDecibel };

/// Parses "<number> <unit>", e.g. "8.7 MHz_x2pi", "80 us", "1e-4 T", "-77 dB", "39.4 per_s".
/// Returns SI (rad/s, s, 1/s, T, dB). Throws ConfigError naming `field` on a bad or missing unit.
double parse_quantity(const std::string& text, Dimension dimension, const std::string& field);

/// Canonical spelling used when writing a quantity back out.
std::string format_quantity(double value, Dimension dimension);

struct SpectrumRange {
  double start = -constants::kTwoPi * 200e6;  // rad/s
  double stop = constants::kTwoPi * 50e6;
  int points = 251;
};

struct RunConfig {
  SimulationParams simulation;
  std::uint64_t seed = 1;
  std::int64_t cycles = 1'000'000;
  int threads = 1;
  std::int64_t block_size = 10'000;
  int warmup_cycles = 5;

  // budget
  double scan_fraction = 0.2;
  double short_event_interval = 1520.0;
  double shelved_event_interval = 1800.0;

  // collisions
  TraceParams trace;
  AnalysisOptions analysis;

  SpectrumRange spectrum;

  std::string output_dir = "out";

  /// Cross-field checks; throws ConfigError with a field path.
  void validate() const;

  SystematicsInputs systematics_inputs() const;
  BatchOptions batch_options() const;
};

/// Nominal acquisition settings.
RunConfig default_config();

/// Parses JSON config text over the defaults. Syntax errors raise ParseError with
/// line and column; unknown keys and unit errors raise ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Every field, with units, in a fixed key order. Feeding it back to parse_config
/// reproduces the same config.
std::string canonical_json(const RunConfig& config);

/// Canonical JSON without the output directory and thread count, neither of which
/// changes results.
std::string replay_json(const RunConfig& config);

/// FNV-1a of replay_json.
std::uint64_t params_hash(const RunConfig& config);

}  // namespace sbf
