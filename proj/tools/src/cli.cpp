#include "sbf_cli/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "sbf/collisions.hpp"
#include "sbf/config.hpp"
#include "sbf/error.hpp"
#include "sbf/estimator.hpp"
#include "sbf/obe.hpp"
#include "sbf/report.hpp"
#include "sbf/sequence.hpp"
#include "sbf/systematics.hpp"

namespace sbf::cli {
namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> cycles;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<std::string> fidelity;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool simulation_flags) {
  cmd->add_option("--config", f.config_path, "JSON config file (defaults to the nominal settings)");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "Output directory");
  if (simulation_flags) {
    cmd->add_option("--cycles", f.cycles, "Detection cycles");
    cmd->add_option("--fidelity", f.fidelity, "Simulation tier")->check(CLI::IsMember({"fast", "obe"}));
  }
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c = f.config_path.empty() ? default_config() : load_config(f.config_path);
  if (f.seed) c.seed = *f.seed;
  if (f.cycles) c.cycles = *f.cycles;
  if (f.threads) c.threads = *f.threads;
  if (f.out) c.output_dir = *f.out;
  if (f.fidelity) c.simulation.fidelity = fidelity_from_string(*f.fidelity);
  c.analysis.seed = c.seed;
  c.validate();
  return c;
}

Provenance provenance(const std::string& command, const RunConfig& c) {
  return {command, params_hash(c), c.seed, replay_json(c), ""};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << content;
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_simulate(const CommonFlags& flags, std::ostream& out) {
  const RunConfig c = resolve(flags);
  const fs::path dir = prepare_dir(c.output_dir);
  const BatchResult result = run_batch(c.simulation, c.batch_options());

  std::optional<Estimate> est;
  std::string est_error;
  try {
    est = branching_fraction(result.record);
  } catch (const EstimationError& e) {
    est_error = e.what();
  }
  write_file(dir / "simulate_report.json",
             simulate_report(provenance("simulate", c), result, est ? &*est : nullptr, est_error));
  write_file(dir / "counts.csv", counts_text(result.record));

  out << "cycles " << result.record.cycles << "  N_b " << result.record.n_b << "  N_r " << result.record.n_r
      << "  N_b_B " << result.record.n_b_bg << "  N_r_B " << result.record.n_r_bg << "\n";
  if (est) {
    out << estimate_summary(*est, nullptr);
    char buf[160];
    const double truth = c.simulation.setup.scheme.p();
    std::snprintf(buf, sizeof buf, "closed loop: true p %.6f, pull %.2f sigma\n", truth,
                  (est->p - truth) / est->sigma_stat);
    out << buf;
  } else {
    out << "no estimate: " << est_error << "\n";
  }
  out << "wrote " << (dir / "simulate_report.json").string() << "\n";
  return kOk;
}

int cmd_estimate(const std::string& counts_path, const std::string& budget_path, const std::string& out_dir,
                 bool quadrature, bool endpoint, std::ostream& out) {
  std::istringstream counts_in(read_file(counts_path));
  const CountRecord rec = read_counts(counts_in);
  std::optional<ErrorBudget> budget;
  if (!budget_path.empty()) {
    std::istringstream bin(read_file(budget_path));
    budget = read_budget_csv(bin);
  }
  EstimatorOptions opt;
  opt.propagation = quadrature ? ErrorPropagation::kQuadrature : ErrorPropagation::kLinear;
  opt.bound_mapping = endpoint ? BoundMapping::kEndpoint : BoundMapping::kLinearized;
  const Estimate est = branching_fraction(rec, opt);

  const fs::path dir = prepare_dir(out_dir);
  Provenance prov{"estimate", 0, 0, "", fs::path(counts_path).filename().string()};
  write_file(dir / "estimate_report.json", estimate_report(prov, rec, est, budget ? &*budget : nullptr));
  out << estimate_summary(est, budget ? &*budget : nullptr);
  return kOk;
}

int cmd_budget(const CommonFlags& flags, std::ostream& out) {
  const RunConfig c = resolve(flags);
  const fs::path dir = prepare_dir(c.output_dir);
  const ErrorBudget b = compute_budget(c.systematics_inputs());
  write_file(dir / "budget.csv", budget_csv(b));
  write_file(dir / "budget_table.txt", budget_table(b));
  write_file(dir / "budget_report.json", budget_report(provenance("budget", c), b));
  out << budget_table(b);
  return kOk;
}

int cmd_collisions(const CommonFlags& flags, const std::string& trace_path, bool write_trace, std::ostream& out,
                   std::ostream& err) {
  const RunConfig c = resolve(flags);
  const fs::path dir = prepare_dir(c.output_dir);

  std::optional<SimulatedTrace> sim;
  FluorescenceTrace trace;
  Provenance prov = provenance("collisions", c);
  if (trace_path.empty()) {
    Rng rng = make_stream(c.seed, 0);
    sim = simulate_trace(rng, c.trace);
    trace = sim->trace;
    if (write_trace) {
      std::ofstream os(dir / "trace.csv", std::ios::binary);
      write_trace_csv(os, trace);
    }
  } else {
    std::ifstream in(trace_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + trace_path + "'");
    trace = read_trace_csv(in, c.trace.bin_duration);
    prov.input = fs::path(trace_path).filename().string();
  }

  const CollisionAnalysis a = analyze_trace(trace, c.analysis);
  if (!a.threshold.separable) err << "warning: " << a.threshold.warning << "\n";

  std::ostringstream hist;
  write_histogram_csv(hist, a.fit);
  write_file(dir / "histogram.csv", hist.str());
  write_file(dir / "events.csv", events_csv(a.events));
  write_file(dir / "losses.csv", events_csv(a.losses));
  write_file(dir / "collisions_report.json", collisions_report(prov, a, sim ? &*sim : nullptr));

  char buf[200];
  std::snprintf(buf, sizeof buf, "events %zu, losses %zu\nshort fraction %.3f, shelved fraction %.3f\n",
                a.events.size(), a.losses.size(), a.fit.short_fraction, a.fit.shelved_fraction);
  out << buf;
  if (a.lifetime_available) {
    std::snprintf(buf, sizeof buf, "mean trap lifetime %.0f s (KS D = %.3f, p = %.3f)\n", a.lifetime.mean_lifetime,
                  a.lifetime.ks_statistic, a.lifetime.ks_p_value);
    out << buf;
  }
  return kOk;
}

int cmd_spectrum(const CommonFlags& flags, const std::string& start, const std::string& stop, int points,
                 std::ostream& out) {
  RunConfig c = resolve(flags);
  if (!start.empty()) c.spectrum.start = parse_quantity(start, Dimension::kAngularFrequency, "--start");
  if (!stop.empty()) c.spectrum.stop = parse_quantity(stop, Dimension::kAngularFrequency, "--stop");
  if (points > 0) c.spectrum.points = points;
  c.validate();
  const fs::path dir = prepare_dir(c.output_dir);

  std::vector<double> detunings(c.spectrum.points);
  for (int i = 0; i < c.spectrum.points; ++i)
    detunings[i] = c.spectrum.start + (c.spectrum.stop - c.spectrum.start) * i / (c.spectrum.points - 1);
  const auto spectrum = fluorescence_spectrum(c.simulation.setup, detunings);
  write_file(dir / "spectrum.csv", spectrum_csv(spectrum));
  out << "wrote " << spectrum.size() << " points to " << (dir / "spectrum.csv").string() << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Branching-fraction simulation and analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  CommonFlags sim_flags, budget_flags, col_flags, spec_flags;

  auto* simulate = app.add_subcommand("simulate", "Simulate detection cycles and estimate p");
  add_common(simulate, sim_flags, true);

  auto* estimate = app.add_subcommand("estimate", "Estimate p from a counts file or simulate report");
  std::string counts_path, budget_path, est_out = "out";
  bool quadrature = false, endpoint = false;
  estimate->add_option("counts", counts_path, "Counts file")->required();
  estimate->add_option("--budget", budget_path, "Budget CSV from the budget command");
  estimate->add_option("--out", est_out, "Output directory");
  estimate->add_flag("--quadrature", quadrature, "Combine Poisson errors in quadrature");
  estimate->add_flag("--endpoint", endpoint, "Map BR bounds through the interval endpoints");

  auto* budget = app.add_subcommand("budget", "Systematic error budget");
  add_common(budget, budget_flags, false);

  auto* collisions = app.add_subcommand("collisions", "Dark-event histogram and trap lifetime");
  add_common(collisions, col_flags, false);
  std::string trace_path;
  bool write_trace = false;
  collisions->add_option("--trace", trace_path, "Trace CSV (bin_index,counts); synthetic when omitted");
  collisions->add_flag("--write-trace", write_trace, "Also write the synthetic trace");

  auto* spectrum = app.add_subcommand("spectrum", "Blue fluorescence versus blue detuning");
  add_common(spectrum, spec_flags, false);
  std::string start, stop;
  int points = 0;
  spectrum->add_option("--start", start, "First detuning, e.g. \"-200 MHz_x2pi\"");
  spectrum->add_option("--stop", stop, "Last detuning");
  spectrum->add_option("--points", points, "Number of points")->check(CLI::Range(2, 100000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*simulate) return cmd_simulate(sim_flags, out);
    if (*estimate) return cmd_estimate(counts_path, budget_path, est_out, quadrature, endpoint, out);
    if (*budget) return cmd_budget(budget_flags, out);
    if (*collisions) return cmd_collisions(col_flags, trace_path, write_trace, out, err);
    if (*spectrum) return cmd_spectrum(spec_flags, start, stop, points, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const FitDegenerateError& e) {
    err << "fit error: " << e.what() << "\n";
    return kFitDegenerate;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kRuntimeError;
}

}  // namespace sbf::cli
