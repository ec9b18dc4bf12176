#pragma once

#include <cstdint>

namespace sbf {

/// Gated photon counts accumulated over a number of detection cycles.
struct CountRecord {
  std::int64_t cycles = 0;
  std::int64_t n_b = 0;
  std::int64_t n_r = 0;
  std::int64_t n_b_bg = 0;
  std::int64_t n_r_bg = 0;

  // Gate durations per cycle (s).
  double window_b = 160e-6;
  double window_r = 80e-6;
  double window_b_bg = 160e-6;
  double window_r_bg = 80e-6;

  /// Allow background windows that differ from their signal windows; backgrounds are
  /// then scaled by the exposure ratio before subtraction.
  bool exposure_scaling = false;

  /// Throws EstimationError on negative counts, zero cycles or unmatched windows.
  void validate() const;

  CountRecord& operator+=(const CountRecord& other);
};

}  // namespace sbf
