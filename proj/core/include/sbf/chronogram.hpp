#pragma once

#include <string>
#include <vector>

namespace sbf {

/// Counter that accumulates photons during a phase.
enum class Gate { kNone, kNb, kNr, kNrB, kNbB };

std::string to_string(Gate gate);
Gate gate_from_string(const std::string& name);

struct Phase {
  std::string label;
  double duration = 0.0;  // s
  bool blue_on = false;
  bool repump_on = false;
  Gate gate = Gate::kNone;
};

/// Ordered, repeating list of phases making up one detection cycle.
class Chronogram {
 public:
  Chronogram() = default;
  explicit Chronogram(std::vector<Phase> phases);

  /// a: cool (both on), b: pump to S (repump), c: N_b (blue), d: N_r (repump),
  /// e: N_r^B (repump), f: shelf prep (blue), g: N_b^B (blue), then an ungated
  /// all-off pad bringing the cycle to 770 us. Pass pad = 0 to drop it.
  static Chronogram standard(double window_f = 80e-6, double pad = 50e-6);

  const std::vector<Phase>& phases() const { return phases_; }
  double cycle_duration() const;
  /// Summed duration of the phases feeding `gate`.
  double gate_duration(Gate gate) const;
  const Phase& phase(const std::string& label) const;

  /// Copy with every duration multiplied by `factor`.
  Chronogram scaled(double factor) const;
  Chronogram with_duration(const std::string& label, double duration) const;

 private:
  void validate() const;
  std::vector<Phase> phases_;
};

}  // namespace sbf
