#include "sbf/count_record.hpp"

#include <cmath>

#include "sbf/error.hpp"

namespace sbf {

void CountRecord::validate() const {
  if (cycles < 1) throw EstimationError("count record has no cycles");
  if (n_b < 0 || n_r < 0 || n_b_bg < 0 || n_r_bg < 0) throw EstimationError("counts must be >= 0");
  if (!(window_b > 0 && window_r > 0 && window_b_bg > 0 && window_r_bg > 0))
    throw EstimationError("gate durations must be positive");
  const bool matched =
      std::abs(window_b - window_b_bg) <= 1e-12 * window_b && std::abs(window_r - window_r_bg) <= 1e-12 * window_r;
  if (!matched && !exposure_scaling)
    throw EstimationError("signal and background windows differ; enable exposure scaling to subtract them");
}

CountRecord& CountRecord::operator+=(const CountRecord& other) {
  cycles += other.cycles;
  n_b += other.n_b;
  n_r += other.n_r;
  n_b_bg += other.n_b_bg;
  n_r_bg += other.n_r_bg;
  return *this;
}

}  // namespace sbf
