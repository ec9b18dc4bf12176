#include "sbf/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sbf/error.hpp"
#include "sbf/hash.hpp"

namespace sbf {
namespace {

using nlohmann::ordered_json;

struct UnitEntry {
  const char* name;
  double scale;
};

const std::vector<UnitEntry>& units(Dimension d) {
  static const std::vector<UnitEntry> freq = {{"rad_per_s", 1.0},
                                              {"Hz_x2pi", constants::kTwoPi},
                                              {"kHz_x2pi", constants::kTwoPi * 1e3},
                                              {"MHz_x2pi", constants::kTwoPi * 1e6},
                                              {"GHz_x2pi", constants::kTwoPi * 1e9}};
  static const std::vector<UnitEntry> time = {{"s", 1.0},     {"ms", 1e-3},  {"us", 1e-6},
                                              {"ns", 1e-9},   {"min", 60.0}, {"h", 3600.0}};
  static const std::vector<UnitEntry> rate = {{"per_s", 1.0}, {"per_ms", 1e3}, {"per_us", 1e6}};
  static const std::vector<UnitEntry> field = {{"T", 1.0}, {"mT", 1e-3}, {"uT", 1e-6}, {"G", 1e-4}};
  static const std::vector<UnitEntry> db = {{"dB", 1.0}};
  switch (d) {
    case Dimension::kAngularFrequency: return freq;
    case Dimension::kTime: return time;
    case Dimension::kRate: return rate;
    case Dimension::kMagneticField: return field;
    case Dimension::kDecibel: return db;
  }
  return db;
}

std::string unit_list(Dimension d) {
  std::string s;
  for (const auto& u : units(d)) s += (s.empty() ? "" : ", ") + std::string(u.name);
  return s;
}

// Shortest text that reads back to the same double.
std::string number(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Object reader that remembers which keys were read so leftovers can be rejected.
class Section {
 public:
  Section(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const ordered_json& raw(const std::string& key) const { return j_.at(key); }

  void quantity(const std::string& key, Dimension d, double& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (d == Dimension::kDecibel && v.is_string() && v.get<std::string>() == "perfect") {
      out = -std::numeric_limits<double>::infinity();
      return;
    }
    if (!v.is_string())
      throw ConfigError(field(key) + ": expected a string with a unit (" + unit_list(d) + ")");
    out = parse_quantity(v.get<std::string>(), d, field(key));
  }

  void real(const std::string& key, double& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
    out = v.get<double>();
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
    if (v.is_number_unsigned()) {
      out = static_cast<Int>(v.get<std::uint64_t>());
    } else {
      out = static_cast<Int>(v.get<std::int64_t>());
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key) + ": expected true or false");
    out = v.get<bool>();
  }

  void text(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    out = v.get<std::string>();
  }

  void vector(const std::string& key, Vector3& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != 3)
      throw ConfigError(field(key) + ": expected an array of three numbers");
    for (const auto& x : v)
      if (!x.is_number()) throw ConfigError(field(key) + ": expected an array of three numbers");
    out = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + field(it.key()) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const ordered_json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void with_section(Section& parent, const std::string& key, F&& body) {
  if (!parent.has(key)) return;
  Section s(parent.raw(key), parent.field(key));
  body(s);
  s.finish();
}

// Drive geometry is kept as vectors so the config can be written back out.
struct DriveSpec {
  double rabi, detuning, extinction_db;
  Vector3 propagation, polarization;
  RabiConvention convention;
};

DriveSpec spec_of(const LaserDrive& d) {
  return {d.rabi, d.detuning, d.extinction_db, d.polarization.propagation(), d.polarization.polarization(),
          d.convention};
}

void read_drive(Section& s, DriveSpec& d) {
  s.quantity("rabi", Dimension::kAngularFrequency, d.rabi);
  s.quantity("detuning", Dimension::kAngularFrequency, d.detuning);
  s.quantity("extinction", Dimension::kDecibel, d.extinction_db);
  s.vector("propagation", d.propagation);
  s.vector("polarization", d.polarization);
  std::string conv = d.convention == RabiConvention::kUnitPolarization ? "unit_polarization" : "dominant_component";
  s.text("rabi_convention", conv);
  if (conv == "unit_polarization") {
    d.convention = RabiConvention::kUnitPolarization;
  } else if (conv == "dominant_component") {
    d.convention = RabiConvention::kDominantComponent;
  } else {
    throw ConfigError(s.field("rabi_convention") + ": expected dominant_component or unit_polarization");
  }
}

Vector3 unit(const Vector3& v) { return std::abs(v.norm() - 1.0) < 1e-12 ? v : v.normalized(); }

LaserDrive make_drive(const DriveSpec& d, const MagneticField& field, const std::string& path) {
  LaserDrive out;
  out.rabi = d.rabi;
  out.detuning = d.detuning;
  out.extinction_db = d.extinction_db;
  out.convention = d.convention;
  if (!(d.rabi >= 0.0)) throw ConfigError(path + ".rabi: must be >= 0");
  if (!(d.extinction_db <= 0.0)) throw ConfigError(path + ".extinction: must be <= 0 dB");
  try {
    out.polarization = PolarizationGeometry(unit(d.propagation), unit(d.polarization), field);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return out;
}

ordered_json vec_json(const Vector3& v) { return ordered_json::array({v.x, v.y, v.z}); }

ordered_json drive_json(const LaserDrive& d) {
  ordered_json j;
  j["rabi"] = format_quantity(d.rabi, Dimension::kAngularFrequency);
  j["detuning"] = format_quantity(d.detuning, Dimension::kAngularFrequency);
  j["extinction"] = format_quantity(d.extinction_db, Dimension::kDecibel);
  j["propagation"] = vec_json(d.polarization.propagation());
  j["polarization"] = vec_json(d.polarization.polarization());
  j["rabi_convention"] =
      d.convention == RabiConvention::kUnitPolarization ? "unit_polarization" : "dominant_component";
  return j;
}

std::string t(double s) { return format_quantity(s, Dimension::kTime); }
std::string r(double s) { return format_quantity(s, Dimension::kRate); }

ordered_json to_ordered_json(const RunConfig& c) {
  const auto& sim = c.simulation;
  const auto& setup = sim.setup;
  ordered_json j;
  j["scheme"] = {{"branching_fraction", setup.scheme.p()},
                 {"tau_p", t(setup.scheme.tau_p())},
                 {"tau_d32", std::isinf(setup.scheme.tau_d32()) ? std::string("infinite") : t(setup.scheme.tau_d32())},
                 {"tau_d52", t(setup.scheme.tau_d52())}};
  j["field"] = {{"magnitude", format_quantity(setup.field.magnitude(), Dimension::kMagneticField)},
                {"direction", vec_json(setup.field.orientation())}};
  j["blue"] = drive_json(setup.blue);
  j["repump"] = drive_json(setup.repump);
  ordered_json phases = ordered_json::array();
  for (const auto& p : sim.chronogram.phases())
    phases.push_back({{"label", p.label},
                      {"duration", t(p.duration)},
                      {"blue", p.blue_on},
                      {"repump", p.repump_on},
                      {"gate", to_string(p.gate)}});
  j["chronogram"] = {{"phases", phases}};
  ordered_json bg = ordered_json::object();
  for (const auto& [label, rate] : sim.detector.background_rates) bg[label] = r(rate);
  j["detector"] = {{"efficiency", sim.detector.efficiency},
                   {"dead_time", t(sim.detector.dead_time)},
                   {"dead_time_model", sim.detector.dead_time_model == DeadTimeModel::kParalyzable
                                           ? "paralyzable"
                                           : "non_paralyzable"},
                   {"background", bg}};
  j["simulation"] = {{"fidelity", to_string(sim.fidelity)},
                     {"cycles", c.cycles},
                     {"seed", c.seed},
                     {"threads", c.threads},
                     {"block_size", c.block_size},
                     {"warmup_cycles", c.warmup_cycles},
                     {"dark_event_rate", r(sim.dark_event_rate)}};
  j["budget"] = {{"scan_fraction", c.scan_fraction},
                 {"short_event_interval", t(c.short_event_interval)},
                 {"shelved_event_interval", t(c.shelved_event_interval)}};
  const auto& tr = c.trace;
  const auto& an = c.analysis;
  j["collisions"] = {{"bin", t(tr.bin_duration)},
                     {"duration", t(tr.duration)},
                     {"bright_rate", r(tr.bright_rate)},
                     {"dark_rate", r(tr.dark_rate)},
                     {"short_interval", t(tr.short_interval)},
                     {"shelved_interval", t(tr.shelved_interval)},
                     {"short_offset", t(tr.short_offset)},
                     {"short_scale", t(tr.short_scale)},
                     {"shelved_lifetime", t(tr.tau_d52)},
                     {"ion_lifetime", t(tr.ion_lifetime)},
                     {"reload_time", t(tr.reload_time)},
                     {"threshold", an.threshold},
                     {"loss_threshold", t(an.loss_threshold)},
                     {"histogram_bin", t(an.fit.bin_width)},
                     {"fit_tau", t(an.fit.tau)},
                     {"exclude_first_bin", an.fit.exclude_first_bin},
                     {"poisson_weighted", an.fit.poisson_weighted},
                     {"bootstrap", an.bootstrap}};
  j["spectrum"] = {{"start", format_quantity(c.spectrum.start, Dimension::kAngularFrequency)},
                   {"stop", format_quantity(c.spectrum.stop, Dimension::kAngularFrequency)},
                   {"points", c.spectrum.points}};
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

void apply_json(const ordered_json& root, RunConfig& c) {
  Section top(root, "");
  auto& sim = c.simulation;

  double p = sim.setup.scheme.p(), tau_p = sim.setup.scheme.tau_p(), tau_d32 = sim.setup.scheme.tau_d32(),
         tau_d52 = sim.setup.scheme.tau_d52();
  with_section(top, "scheme", [&](Section& s) {
    s.real("branching_fraction", p);
    s.quantity("tau_p", Dimension::kTime, tau_p);
    if (s.has("tau_d32") && s.raw("tau_d32") == "infinite") {
      tau_d32 = std::numeric_limits<double>::infinity();
    } else {
      s.quantity("tau_d32", Dimension::kTime, tau_d32);
    }
    s.quantity("tau_d52", Dimension::kTime, tau_d52);
  });
  try {
    sim.setup.scheme = LevelScheme(p, tau_p, tau_d32, tau_d52);
  } catch (const Error& e) {
    throw ConfigError(std::string("scheme: ") + e.what());
  }

  double b = sim.setup.field.magnitude();
  Vector3 dir = sim.setup.field.orientation();
  with_section(top, "field", [&](Section& s) {
    s.quantity("magnitude", Dimension::kMagneticField, b);
    s.vector("direction", dir);
  });
  if (!(dir.norm() > 0.0)) throw ConfigError("field.direction: must be non-zero");
  try {
    sim.setup.field = MagneticField(b, unit(dir));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("field: ") + e.what());
  }

  DriveSpec blue = spec_of(sim.setup.blue), repump = spec_of(sim.setup.repump);
  with_section(top, "blue", [&](Section& s) { read_drive(s, blue); });
  with_section(top, "repump", [&](Section& s) { read_drive(s, repump); });
  sim.setup.blue = make_drive(blue, sim.setup.field, "blue");
  sim.setup.repump = make_drive(repump, sim.setup.field, "repump");

  with_section(top, "chronogram", [&](Section& s) {
    const bool explicit_phases = s.has("phases");
    double window_f = 80e-6, pad = 50e-6;
    s.quantity("window_f", Dimension::kTime, window_f);
    s.quantity("pad", Dimension::kTime, pad);
    if (!explicit_phases) {
      try {
        sim.chronogram = Chronogram::standard(window_f, pad);
      } catch (const Error& e) {
        throw ConfigError(std::string("chronogram: ") + e.what());
      }
      return;
    }
    if (s.has("window_f") || s.has("pad"))
      throw ConfigError("chronogram: give either phases or window_f/pad, not both");
    const auto& arr = s.raw("phases");
    if (!arr.is_array()) throw ConfigError("chronogram.phases: expected an array");
    std::vector<Phase> phases;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section ps(arr[i], "chronogram.phases[" + std::to_string(i) + "]");
      Phase ph;
      std::string gate = "none";
      ps.text("label", ph.label);
      ps.quantity("duration", Dimension::kTime, ph.duration);
      ps.boolean("blue", ph.blue_on);
      ps.boolean("repump", ph.repump_on);
      ps.text("gate", gate);
      try {
        ph.gate = gate_from_string(gate);
      } catch (const Error& e) {
        throw ConfigError(ps.field("gate") + ": " + e.what());
      }
      ps.finish();
      phases.push_back(ph);
    }
    try {
      sim.chronogram = Chronogram(phases);
    } catch (const Error& e) {
      throw ConfigError(std::string("chronogram.phases: ") + e.what());
    }
  });

  with_section(top, "detector", [&](Section& s) {
    s.real("efficiency", sim.detector.efficiency);
    s.quantity("dead_time", Dimension::kTime, sim.detector.dead_time);
    std::string model = sim.detector.dead_time_model == DeadTimeModel::kParalyzable ? "paralyzable" : "non_paralyzable";
    s.text("dead_time_model", model);
    if (model == "paralyzable") {
      sim.detector.dead_time_model = DeadTimeModel::kParalyzable;
    } else if (model == "non_paralyzable") {
      sim.detector.dead_time_model = DeadTimeModel::kNonParalyzable;
    } else {
      throw ConfigError(s.field("dead_time_model") + ": expected non_paralyzable or paralyzable");
    }
    if (s.has("background")) {
      const auto& bg = s.raw("background");
      if (!bg.is_object()) throw ConfigError(s.field("background") + ": expected an object of phase: rate");
      sim.detector.background_rates.clear();
      for (auto it = bg.begin(); it != bg.end(); ++it) {
        const std::string f = s.field("background") + "." + it.key();
        if (!it.value().is_string()) throw ConfigError(f + ": expected a string with a unit (" + unit_list(Dimension::kRate) + ")");
        sim.detector.background_rates[it.key()] = parse_quantity(it.value().get<std::string>(), Dimension::kRate, f);
      }
    }
  });

  with_section(top, "simulation", [&](Section& s) {
    std::string fid = to_string(sim.fidelity);
    s.text("fidelity", fid);
    try {
      sim.fidelity = fidelity_from_string(fid);
    } catch (const Error& e) {
      throw ConfigError(s.field("fidelity") + ": " + e.what());
    }
    s.integer("cycles", c.cycles);
    s.integer("seed", c.seed);
    s.integer("threads", c.threads);
    s.integer("block_size", c.block_size);
    s.integer("warmup_cycles", c.warmup_cycles);
    s.quantity("dark_event_rate", Dimension::kRate, sim.dark_event_rate);
  });

  with_section(top, "budget", [&](Section& s) {
    s.real("scan_fraction", c.scan_fraction);
    s.quantity("short_event_interval", Dimension::kTime, c.short_event_interval);
    s.quantity("shelved_event_interval", Dimension::kTime, c.shelved_event_interval);
  });

  with_section(top, "collisions", [&](Section& s) {
    auto& tr = c.trace;
    auto& an = c.analysis;
    s.quantity("bin", Dimension::kTime, tr.bin_duration);
    s.quantity("duration", Dimension::kTime, tr.duration);
    s.quantity("bright_rate", Dimension::kRate, tr.bright_rate);
    s.quantity("dark_rate", Dimension::kRate, tr.dark_rate);
    s.quantity("short_interval", Dimension::kTime, tr.short_interval);
    s.quantity("shelved_interval", Dimension::kTime, tr.shelved_interval);
    s.quantity("short_offset", Dimension::kTime, tr.short_offset);
    s.quantity("short_scale", Dimension::kTime, tr.short_scale);
    s.quantity("shelved_lifetime", Dimension::kTime, tr.tau_d52);
    s.quantity("ion_lifetime", Dimension::kTime, tr.ion_lifetime);
    s.quantity("reload_time", Dimension::kTime, tr.reload_time);
    s.real("threshold", an.threshold);
    s.quantity("loss_threshold", Dimension::kTime, an.loss_threshold);
    s.quantity("histogram_bin", Dimension::kTime, an.fit.bin_width);
    s.quantity("fit_tau", Dimension::kTime, an.fit.tau);
    s.boolean("exclude_first_bin", an.fit.exclude_first_bin);
    s.boolean("poisson_weighted", an.fit.poisson_weighted);
    s.integer("bootstrap", an.bootstrap);
  });
  c.analysis.bright_rate = c.trace.bright_rate;
  c.analysis.dark_rate = c.trace.dark_rate;
  c.analysis.seed = c.seed;

  with_section(top, "spectrum", [&](Section& s) {
    s.quantity("start", Dimension::kAngularFrequency, c.spectrum.start);
    s.quantity("stop", Dimension::kAngularFrequency, c.spectrum.stop);
    s.integer("points", c.spectrum.points);
  });

  with_section(top, "output", [&](Section& s) { s.text("dir", c.output_dir); });
  top.finish();
}

}  // namespace

double parse_quantity(const std::string& text, Dimension dimension, const std::string& field) {
  std::istringstream is(text);
  double value = 0.0;
  std::string unit, extra;
  if (!(is >> value)) throw ConfigError(field + ": '" + text + "' does not start with a number");
  if (!(is >> unit))
    throw ConfigError(field + ": '" + text + "' has no unit (expected one of " + unit_list(dimension) + ")");
  if (is >> extra) throw ConfigError(field + ": unexpected text after the unit in '" + text + "'");
  if (!std::isfinite(value)) throw ConfigError(field + ": value must be finite");
  for (const auto& u : units(dimension))
    if (unit == u.name) return value * u.scale;
  throw ConfigError(field + ": unknown unit '" + unit + "' (expected one of " + unit_list(dimension) + ")");
}

std::string format_quantity(double value, Dimension dimension) {
  if (dimension == Dimension::kDecibel && std::isinf(value)) return "perfect";
  return number(value) + " " + units(dimension).front().name;
}

void RunConfig::validate() const {
  if (cycles <= 0) throw ConfigError("simulation.cycles: must be positive");
  if (threads < 1) throw ConfigError("simulation.threads: must be at least 1");
  if (block_size <= 0) throw ConfigError("simulation.block_size: must be positive");
  if (warmup_cycles < 0) throw ConfigError("simulation.warmup_cycles: must be >= 0");
  if (!(scan_fraction >= 0.0 && scan_fraction < 1.0)) throw ConfigError("budget.scan_fraction: must lie in [0, 1)");
  if (short_event_interval < 0.0 || shelved_event_interval < 0.0)
    throw ConfigError("budget: event intervals must be >= 0");
  if (spectrum.points < 2) throw ConfigError("spectrum.points: need at least two");
  if (!(spectrum.stop > spectrum.start)) throw ConfigError("spectrum: stop must exceed start");
  if (analysis.bootstrap < 0) throw ConfigError("collisions.bootstrap: must be >= 0");
  if (!(analysis.loss_threshold > 0.0)) throw ConfigError("collisions.loss_threshold: must be positive");
  try {
    simulation.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  try {
    trace.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("collisions: ") + e.what());
  }
}

SystematicsInputs RunConfig::systematics_inputs() const {
  SystematicsInputs in;
  in.setup = simulation.setup;
  in.chronogram = simulation.chronogram;
  in.efficiency = simulation.detector.efficiency;
  in.dead_time = simulation.detector.dead_time;
  in.scan_fraction = scan_fraction;
  in.short_event_interval = short_event_interval;
  in.shelved_event_interval = shelved_event_interval;
  in.threads = threads;
  return in;
}

BatchOptions RunConfig::batch_options() const {
  BatchOptions o;
  o.seed = seed;
  o.cycles = cycles;
  o.threads = threads;
  o.block_size = block_size;
  o.warmup_cycles = warmup_cycles;
  return o;
}

RunConfig default_config() {
  RunConfig c;
  c.simulation.detector = DetectorModel::run1();
  return c;
}

RunConfig parse_config(const std::string& text) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    std::size_t pos = e.byte > 0 ? e.byte - 1 : 0;
    pos = std::min(pos, text.size());
    int line = 1, col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    const auto colon = msg.rfind(": ");
    throw ParseError("invalid JSON: " + (colon == std::string::npos ? msg : msg.substr(colon + 2)), line, col);
  }
  RunConfig c = default_config();
  apply_json(root, c);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_json(const RunConfig& config) { return to_ordered_json(config).dump(2); }

std::string replay_json(const RunConfig& config) {
  ordered_json j = to_ordered_json(config);
  j.erase("output");
  j["simulation"].erase("threads");
  return j.dump(2);
}

std::uint64_t params_hash(const RunConfig& config) { return fnv1a(replay_json(config), kFnvOffset); }

}  // namespace sbf
