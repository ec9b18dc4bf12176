#include "sbf/chronogram.hpp"

#include <set>

#include "sbf/error.hpp"

namespace sbf {

std::string to_string(Gate gate) {
  switch (gate) {
    case Gate::kNone: return "none";
    case Gate::kNb: return "N_b";
    case Gate::kNr: return "N_r";
    case Gate::kNrB: return "N_r_B";
    case Gate::kNbB: return "N_b_B";
  }
  return "none";
}

Gate gate_from_string(const std::string& name) {
  if (name == "none") return Gate::kNone;
  if (name == "N_b") return Gate::kNb;
  if (name == "N_r") return Gate::kNr;
  if (name == "N_r_B") return Gate::kNrB;
  if (name == "N_b_B") return Gate::kNbB;
  throw ConfigError("unknown gate '" + name + "' (expected none, N_b, N_r, N_r_B or N_b_B)");
}

Chronogram::Chronogram(std::vector<Phase> phases) : phases_(std::move(phases)) { validate(); }

void Chronogram::validate() const {
  if (phases_.empty()) throw ConfigError("chronogram has no phases");
  std::set<std::string> labels;
  for (const auto& p : phases_) {
    if (!(p.duration > 0.0)) throw ConfigError("phase '" + p.label + "' must have a positive duration");
    if (!labels.insert(p.label).second) throw ConfigError("duplicate phase label '" + p.label + "'");
  }
}

Chronogram Chronogram::standard(double window_f, double pad) {
  if (!(pad >= 0.0)) throw ConfigError("pad duration must be >= 0");
  std::vector<Phase> phases = {
      {"a", 80e-6, true, true, Gate::kNone},
      {"b", 80e-6, false, true, Gate::kNone},
      {"c", 160e-6, true, false, Gate::kNb},
      {"d", 80e-6, false, true, Gate::kNr},
      {"e", 80e-6, false, true, Gate::kNrB},
      {"f", window_f, true, false, Gate::kNone},
      {"g", 160e-6, true, false, Gate::kNbB},
  };
  if (pad > 0.0) phases.push_back({"pad", pad, false, false, Gate::kNone});
  return Chronogram(std::move(phases));
}

double Chronogram::cycle_duration() const {
  double t = 0.0;
  for (const auto& p : phases_) t += p.duration;
  return t;
}

double Chronogram::gate_duration(Gate gate) const {
  double t = 0.0;
  for (const auto& p : phases_)
    if (p.gate == gate) t += p.duration;
  return t;
}

const Phase& Chronogram::phase(const std::string& label) const {
  for (const auto& p : phases_)
    if (p.label == label) return p;
  throw ConfigError("no phase labelled '" + label + "'");
}

Chronogram Chronogram::scaled(double factor) const {
  auto phases = phases_;
  for (auto& p : phases) p.duration *= factor;
  return Chronogram(std::move(phases));
}

Chronogram Chronogram::with_duration(const std::string& label, double duration) const {
  auto phases = phases_;
  bool found = false;
  for (auto& p : phases)
    if (p.label == label) {
      p.duration = duration;
      found = true;
    }
  if (!found) throw ConfigError("no phase labelled '" + label + "'");
  return Chronogram(std::move(phases));
}

}  // namespace sbf
