#include "sbf/report.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sbf/config.hpp"
#include "sbf/error.hpp"
#include "sbf/hash.hpp"
#include "sbf/systematics.hpp"

namespace sbf {
namespace {

using nlohmann::ordered_json;

ordered_json provenance_json(const Provenance& p) {
  ordered_json j;
  j["tool"] = "sbf";
  j["version"] = version_string();
  j["command"] = p.command;
  j["params_hash"] = hex64(p.params_hash);
  j["seed"] = p.seed;
  if (!p.input.empty()) j["input"] = p.input;
  if (!p.config_json.empty()) j["config"] = ordered_json::parse(p.config_json);
  return j;
}

std::string window(double s) { return format_quantity(s, Dimension::kTime); }

ordered_json counts_json(const CountRecord& r) {
  return {{"cycles", r.cycles},
          {"N_b", r.n_b},
          {"N_r", r.n_r},
          {"N_b_B", r.n_b_bg},
          {"N_r_B", r.n_r_bg},
          {"window_b", window(r.window_b)},
          {"window_r", window(r.window_r)},
          {"window_b_B", window(r.window_b_bg)},
          {"window_r_B", window(r.window_r_bg)},
          {"exposure_scaling", r.exposure_scaling}};
}

ordered_json asym_json(const AsymmetricValue& v) { return {{"value", v.value}, {"plus", v.plus}, {"minus", v.minus}}; }

ordered_json estimate_json(const Estimate& e) {
  ordered_json j;
  j["p"] = e.p;
  j["sigma_stat"] = e.sigma_stat;
  j["p_text"] = format_with_error(e.p, e.sigma_stat);
  j["signal_b"] = e.signal_b;
  j["signal_r"] = e.signal_r;
  j["efficiency"] = e.efficiency;
  j["branching_ratio"] = asym_json(e.branching_ratio);
  j["branching_ratio_text"] = format_with_error(e.branching_ratio.value, e.branching_ratio.plus);
  return j;
}

ordered_json budget_json(const ErrorBudget& b) {
  ordered_json rows = ordered_json::array();
  auto row = [](const BudgetRow& r) {
    return ordered_json{{"label", r.label}, {"shift", r.shift}, {"plus", r.plus}, {"minus", r.minus}};
  };
  for (const auto& r : b.rows) rows.push_back(row(r));
  return {{"rows", rows}, {"total", row(b.total())}, {"hash", hex64(b.hash())}};
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

std::int64_t parse_int(const std::string& s, int line, int col) {
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE) throw ParseError("expected an integer, got '" + s + "'", line, col);
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void set_count_field(CountRecord& r, const std::string& key, const std::string& value, int line, int col) {
  if (key == "cycles") {
    r.cycles = parse_int(value, line, col);
  } else if (key == "N_b") {
    r.n_b = parse_int(value, line, col);
  } else if (key == "N_r") {
    r.n_r = parse_int(value, line, col);
  } else if (key == "N_b_B") {
    r.n_b_bg = parse_int(value, line, col);
  } else if (key == "N_r_B") {
    r.n_r_bg = parse_int(value, line, col);
  } else if (key.rfind("window_", 0) == 0) {
    double w = 0.0;
    try {
      w = parse_quantity(value, Dimension::kTime, key);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line, col);
    }
    if (key == "window_b") {
      r.window_b = w;
    } else if (key == "window_r") {
      r.window_r = w;
    } else if (key == "window_b_B") {
      r.window_b_bg = w;
    } else if (key == "window_r_B") {
      r.window_r_bg = w;
    } else {
      throw ParseError("unknown key '" + key + "'", line, 1);
    }
  } else if (key == "exposure_scaling") {
    if (value != "true" && value != "false") throw ParseError("expected true or false", line, col);
    r.exposure_scaling = value == "true";
  } else {
    throw ParseError("unknown key '" + key + "'", line, 1);
  }
}

const char* kRequired[] = {"cycles", "N_b", "N_r", "N_b_B", "N_r_B"};

CountRecord counts_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Same line/column recovery as the config reader.
    int line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("invalid JSON", line, col);
  }
  const ordered_json& c = j.contains("counts") ? j["counts"] : j;
  if (!c.is_object()) throw ParseError("expected a 'counts' object", 1, 1);
  CountRecord r;
  for (const char* k : kRequired)
    if (!c.contains(k)) throw ParseError(std::string("missing '") + k + "'", 1, 1);
  for (auto it = c.begin(); it != c.end(); ++it) {
    const auto& v = it.value();
    std::string s;
    if (v.is_number_integer()) {
      s = std::to_string(v.get<std::int64_t>());
    } else if (v.is_string()) {
      s = v.get<std::string>();
    } else if (v.is_boolean()) {
      s = v.get<bool>() ? "true" : "false";
    } else {
      throw ParseError("unexpected value for '" + it.key() + "'", 1, 1);
    }
    set_count_field(r, it.key(), s, 1, 1);
  }
  return r;
}

}  // namespace

std::string version_string() { return "0.1.0"; }

std::string simulate_report(const Provenance& prov, const BatchResult& result, const Estimate* estimate,
                            const std::string& estimate_error) {
  ordered_json j;
  j["provenance"] = provenance_json(prov);
  j["counts"] = counts_json(result.record);
  const auto& d = result.diagnostics;
  ordered_json gates = ordered_json::object();
  for (Gate g : {Gate::kNb, Gate::kNr, Gate::kNrB, Gate::kNbB})
    gates[to_string(g)] = {{"mean_emitted", d.mean_emitted(g)}, {"sem_emitted", d.sem_emitted(g)}};
  j["diagnostics"] = {{"aggregated_cycles", d.aggregated_cycles},
                      {"flagged_cycles", d.flagged_cycles},
                      {"blocks", d.blocks},
                      {"final_states", {{"S", d.final_states[0]}, {"D3/2", d.final_states[1]}, {"D5/2", d.final_states[2]}}},
                      {"emitted_per_cycle", gates}};
  if (estimate) {
    j["estimate"] = estimate_json(*estimate);
  } else {
    j["estimate"] = {{"error", estimate_error}};
  }
  return dump(j);
}

std::string estimate_report(const Provenance& prov, const CountRecord& record, const Estimate& estimate,
                            const ErrorBudget* budget) {
  ordered_json j;
  j["provenance"] = provenance_json(prov);
  j["counts"] = counts_json(record);
  j["estimate"] = estimate_json(estimate);
  if (budget) {
    const AsymmetricValue total = combine_total_uncertainty(estimate.p, estimate.sigma_stat, *budget);
    j["budget"] = budget_json(*budget);
    j["corrected"] = {{"p", asym_json(total)},
                      {"p_text", format_asymmetric(total.value, total.plus, total.minus)},
                      {"branching_ratio", asym_json(branching_ratio(total))}};
  }
  return dump(j);
}

std::string budget_report(const Provenance& prov, const ErrorBudget& budget) {
  ordered_json j;
  j["provenance"] = provenance_json(prov);
  j["budget"] = budget_json(budget);
  return dump(j);
}

std::string collisions_report(const Provenance& prov, const CollisionAnalysis& a, const SimulatedTrace* truth) {
  ordered_json j;
  j["provenance"] = provenance_json(prov);
  j["threshold"] = {{"misclassification", a.threshold.misclassification},
                    {"separable", a.threshold.separable},
                    {"warning", a.threshold.warning}};
  j["events"] = a.events.size();
  j["losses"] = a.losses.size();
  j["fit"] = {{"bin_width", a.fit.bin_width},
              {"amplitude", a.fit.amplitude},
              {"amplitude_error", a.fit.amplitude_error},
              {"short_fraction", a.fit.short_fraction},
              {"shelved_fraction", a.fit.shelved_fraction},
              {"total_events", a.fit.total_events}};
  if (a.lifetime_available) {
    j["lifetime"] = {{"mean", a.lifetime.mean_lifetime},
                     {"losses", a.lifetime.losses},
                     {"ks_statistic", a.lifetime.ks_statistic},
                     {"ks_p_value", a.lifetime.ks_p_value}};
  } else {
    j["lifetime"] = nullptr;
  }
  if (truth) {
    std::int64_t n_short = 0, n_shelved = 0;
    for (const auto& e : truth->events) (e.label == EventClass::kShort ? n_short : n_shelved)++;
    j["truth"] = {{"short_events", n_short}, {"shelved_events", n_shelved}, {"losses", truth->loss_times.size()}};
  }
  return dump(j);
}

std::string estimate_summary(const Estimate& e, const ErrorBudget* budget) {
  std::ostringstream os;
  char buf[160];
  os << "p      = " << format_with_error(e.p, e.sigma_stat) << "  (stat)\n";
  os << "BR     = " << format_with_error(e.branching_ratio.value, e.branching_ratio.plus) << "\n";
  std::snprintf(buf, sizeof buf, "eff    = %.3g\n", e.efficiency);
  os << buf;
  if (budget) {
    const AsymmetricValue total = combine_total_uncertainty(e.p, e.sigma_stat, *budget);
    const AsymmetricValue br = branching_ratio(total);
    os << "p_corr = " << format_asymmetric(total.value, total.plus, total.minus) << "  (stat + syst)\n";
    os << "BR     = " << format_asymmetric(br.value, br.plus, br.minus) << "\n";
  }
  return os.str();
}

std::string counts_text(const CountRecord& r) {
  std::ostringstream os;
  os << "cycles," << r.cycles << "\nN_b," << r.n_b << "\nN_r," << r.n_r << "\nN_b_B," << r.n_b_bg << "\nN_r_B,"
     << r.n_r_bg << "\nwindow_b," << window(r.window_b) << "\nwindow_r," << window(r.window_r) << "\nwindow_b_B,"
     << window(r.window_b_bg) << "\nwindow_r_B," << window(r.window_r_bg)
     << "\nexposure_scaling," << (r.exposure_scaling ? "true" : "false") << "\n";
  return os.str();
}

CountRecord read_counts(std::istream& is) {
  std::ostringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw ParseError("counts file is empty", 1, 1);
  if (text[first] == '{') return counts_from_json(text);

  CountRecord r;
  std::map<std::string, int> seen;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected 'key,value'", line_no, static_cast<int>(line.size()) + 1);
    const std::string key = trim(line.substr(0, comma));
    const std::string value = trim(line.substr(comma + 1));
    if (seen.count(key)) throw ParseError("duplicate key '" + key + "'", line_no, 1);
    seen[key] = line_no;
    const auto vcol = line.find_first_not_of(" \t", comma + 1);
    set_count_field(r, key, value, line_no, static_cast<int>(vcol == std::string::npos ? comma + 1 : vcol) + 1);
  }
  for (const char* k : kRequired)
    if (!seen.count(k)) throw ParseError(std::string("missing '") + k + "'", line_no + 1, 1);
  return r;
}

ErrorBudget read_budget_csv(std::istream& is) {
  std::vector<BudgetRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.rfind("label,", 0) == 0)) continue;
    std::vector<std::string> cells;
    std::vector<int> cols;
    std::size_t start = 0;
    while (true) {
      const auto c = line.find(',', start);
      cols.push_back(static_cast<int>(start) + 1);
      cells.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
      if (c == std::string::npos) break;
      start = c + 1;
    }
    if (cells.size() != 4) throw ParseError("expected label,shift,plus,minus", line_no, 1);
    if (cells[0] == "total") continue;
    BudgetRow r;
    r.label = cells[0];
    double* dst[] = {&r.shift, &r.plus, &r.minus};
    for (int k = 0; k < 3; ++k) {
      char* end = nullptr;
      *dst[k] = std::strtod(cells[k + 1].c_str(), &end);
      if (cells[k + 1].empty() || *end != '\0') throw ParseError("expected a number", line_no, cols[k + 1]);
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw ParseError("budget file has no rows", std::max(line_no, 1), 1);
  return build_budget(rows);
}

std::string spectrum_csv(const std::vector<SpectrumPoint>& points) {
  std::ostringstream os;
  os << "detuning_MHz,detuning_rad_per_s,blue_scatter_rate_per_s\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.9g,%.17g,%.17g\n", p.detuning / (constants::kTwoPi * 1e6), p.detuning, p.rate);
    os << buf;
  }
  return os.str();
}

std::string events_csv(const std::vector<DarkEvent>& events) {
  std::ostringstream os;
  os << "start_s,duration_s\n";
  char buf[96];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", e.start, e.duration);
    os << buf;
  }
  return os.str();
}

}  // namespace sbf
