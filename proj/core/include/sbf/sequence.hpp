#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sbf/chronogram.hpp"
#include "sbf/count_record.hpp"
#include "sbf/detection.hpp"
#include "sbf/obe.hpp"
#include "sbf/rng.hpp"

namespace sbf {

enum class Fidelity { kFast, kObe };

std::string to_string(Fidelity fidelity);
Fidelity fidelity_from_string(const std::string& name);

/// Coarse internal state carried between phases and cycles.
enum class IonState { kS, kD32, kD52 };

std::string to_string(IonState state);

inline constexpr int kNumGates = 5;
inline int gate_index(Gate g) { return static_cast<int>(g); }

struct SimulationParams {
  IonSetup setup = IonSetup::nominal();
  Chronogram chronogram = Chronogram::standard();
  DetectorModel detector;
  Fidelity fidelity = Fidelity::kFast;
  /// Rate (s^-1 of wall time) of events that park the ion in D5/2 for an
  /// Exponential(tau_D5/2) time. FAST tier only.
  double dark_event_rate = 0.0;

  /// Rejects p outside (0, 1) and invalid detector settings.
  void validate() const;
};

/// Rates the FAST tier needs, all taken from the OBE.
struct FastRates {
  double blue_scatter = 0.0;        // blue-only closed-cycle emission rate, A_SP sigma_PP (s^-1)
  double shelving = 0.0;            // S -> D3/2 rate under blue only, A_PD sigma_PP (s^-1)
  double both_on_scatter = 0.0;     // steady emission rate with both lasers on (s^-1)
  double both_on_d_fraction = 0.0;  // steady D3/2 population with both lasers on
  double pump_time = 0.0;           // mean D3/2 -> S return time under the repump alone (s)
  double d32_decay = 0.0;           // 1 / tau_D3/2 (s^-1)
  /// Return-time distribution: pump_cdf[k] = P(back in S1/2 after k * pump_step of repump light).
  std::vector<double> pump_cdf;
  double pump_step = 0.0;
  double pump_tail_rate = 0.0;  // exponential continuation past the table

  static FastRates derive(const IonSetup& setup);
  /// Repump exposure needed to return a freshly shelved ion, drawn from pump_cdf.
  double draw_pump_time(Rng& rng) const;
};

struct CycleOutcome {
  std::array<std::int64_t, kNumGates> emitted{};   // blue photons emitted per gate
  std::array<std::int64_t, kNumGates> detected{};  // filled by detect_cycle
  std::vector<Emissions> phase_emissions;          // one entry per chronogram phase
  IonState final_state = IonState::kS;
  bool flagged = false;  // the ion spent time in D5/2 during this cycle
};

/// Stateful per-stream cycle generator; the ion state carries over between cycles.
class CycleSimulator {
 public:
  explicit CycleSimulator(const SimulationParams& params);
  /// Shares the derived rates and propagators; the ion state starts fresh.
  CycleSimulator(const CycleSimulator& other);
  ~CycleSimulator();
  CycleSimulator(CycleSimulator&&) noexcept;
  CycleSimulator& operator=(CycleSimulator&&) noexcept;

  /// Puts the ion in S1/2 (random sublevel) at time zero.
  void reset(Rng& rng);

  /// Emission-level simulation of one cycle; detection is not applied.
  void run_cycle(Rng& rng, CycleOutcome& out);
  CycleOutcome run_cycle(Rng& rng);

  /// Thinning, backgrounds and dead time for every gated phase.
  void detect_cycle(Rng& rng, CycleOutcome& out);

  IonState state() const;
  const FastRates& fast_rates() const;
  const SimulationParams& params() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct BatchOptions {
  std::uint64_t seed = 1;
  std::int64_t cycles = 0;
  int threads = 1;
  /// Cycles per rng stream; results depend on this, not on the thread count.
  std::int64_t block_size = 10'000;
  int warmup_cycles = 5;
  bool drop_flagged = false;
};

struct GateMoments {
  double sum = 0.0;
  double sum_sq = 0.0;
};

struct BatchDiagnostics {
  std::array<GateMoments, kNumGates> emitted{};
  std::array<GateMoments, kNumGates> detected{};
  std::int64_t aggregated_cycles = 0;
  std::int64_t flagged_cycles = 0;
  std::array<std::int64_t, 3> final_states{};
  std::int64_t blocks = 0;

  double mean_emitted(Gate g) const;
  /// Standard error of the per-cycle mean.
  double sem_emitted(Gate g) const;
};

struct BatchResult {
  CountRecord record;
  BatchDiagnostics diagnostics;
};

/// Block-parallel batch; bit-identical for fixed (seed, cycles, block_size, warmup).
BatchResult run_batch(const SimulationParams& params, const BatchOptions& options);

}  // namespace sbf
