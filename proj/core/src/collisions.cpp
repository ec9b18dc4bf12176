#include "sbf/collisions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "sbf/error.hpp"

namespace sbf {
namespace {

double draw_exponential(Rng& rng, double mean) {
  if (mean <= 0.0) return std::numeric_limits<double>::infinity();
  return std::exponential_distribution<double>(1.0 / mean)(rng);
}

double ks_exponential(std::vector<double> x, double mean) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = -std::expm1(-x[i] / mean);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Poisson CDF P(X <= k) by direct summation; fine for the small means of a 5 ms bin.
double poisson_cdf(double mean, long k) {
  if (k < 0) return 0.0;
  double term = std::exp(-mean), sum = term;
  for (long i = 1; i <= k; ++i) {
    term *= mean / i;
    sum += term;
  }
  return std::min(sum, 1.0);
}

}  // namespace

std::string to_string(EventClass c) {
  switch (c) {
    case EventClass::kShort: return "short";
    case EventClass::kShelved: return "shelved";
    case EventClass::kUnknown: return "unknown";
  }
  return "unknown";
}

void FluorescenceTrace::validate() const {
  if (!(bin_duration > 0.0)) throw ConfigError("trace bin duration must be positive");
  if (counts.empty()) throw Error("trace has no bins");
  for (auto c : counts)
    if (c < 0) throw Error("trace contains negative counts");
}

void TraceParams::validate() const {
  if (!(bin_duration > 0.0 && duration > 0.0)) throw ConfigError("trace bin and duration must be positive");
  if (!(bright_rate > 0.0 && dark_rate >= 0.0)) throw ConfigError("trace count rates must be positive");
  if (short_interval < 0.0 || shelved_interval < 0.0 || ion_lifetime < 0.0 || reload_time < 0.0)
    throw ConfigError("event spacings, lifetime and reload time must be >= 0");
  if (!(tau_d52 > 0.0) || short_offset < 0.0 || short_scale < 0.0)
    throw ConfigError("event duration parameters must be valid");
}

SimulatedTrace simulate_trace(Rng& rng, const TraceParams& params) {
  params.validate();
  SimulatedTrace out;
  const double rate_short = params.short_interval > 0.0 ? 1.0 / params.short_interval : 0.0;
  const double rate_shelved = params.shelved_interval > 0.0 ? 1.0 / params.shelved_interval : 0.0;
  const double rate = rate_short + rate_shelved;
  const double end = params.duration;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Dark intervals in time order.
  std::vector<std::pair<double, double>> dark;
  double t = 0.0;
  double born = 0.0;
  double death = draw_exponential(rng, params.ion_lifetime);
  while (t < end) {
    const double next = rate > 0.0 ? t + draw_exponential(rng, 1.0 / rate) : std::numeric_limits<double>::infinity();
    if (death <= next) {
      const double loss = std::max(death, t);
      if (loss >= end) break;
      out.loss_times.push_back(loss);
      out.ion_lifetimes.push_back(loss - born);
      dark.emplace_back(loss, loss + params.reload_time);
      t = loss + params.reload_time;
      born = t;
      death = t + draw_exponential(rng, params.ion_lifetime);
      continue;
    }
    if (next >= end) break;
    DarkEvent ev;
    ev.start = next;
    if (unit(rng) * rate < rate_short) {
      ev.label = EventClass::kShort;
      ev.duration = params.short_offset + draw_exponential(rng, params.short_scale);
    } else {
      ev.label = EventClass::kShelved;
      ev.duration = draw_exponential(rng, params.tau_d52);
    }
    out.events.push_back(ev);
    dark.emplace_back(ev.start, ev.start + ev.duration);
    t = ev.start + ev.duration;
  }

  FluorescenceTrace& tr = out.trace;
  tr.bin_duration = params.bin_duration;
  const auto n_bins = static_cast<std::size_t>(std::llround(params.duration / params.bin_duration));
  tr.counts.resize(n_bins);
  const double w = params.bin_duration;
  std::poisson_distribution<std::int32_t> bright(params.bright_rate * w);
  std::size_t j = 0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double b0 = w * static_cast<double>(b), b1 = b0 + w;
    while (j < dark.size() && dark[j].second <= b0) ++j;
    double dark_time = 0.0;
    for (std::size_t k = j; k < dark.size() && dark[k].first < b1; ++k)
      dark_time += std::max(0.0, std::min(b1, dark[k].second) - std::max(b0, dark[k].first));
    if (dark_time <= 0.0) {
      tr.counts[b] = bright(rng);
    } else {
      const double mean = params.bright_rate * (w - dark_time) + params.dark_rate * dark_time;
      tr.counts[b] = mean > 0.0 ? std::poisson_distribution<std::int32_t>(mean)(rng) : 0;
    }
  }
  return out;
}

double midpoint_threshold(double bright_rate, double dark_rate, double bin_duration) {
  return 0.5 * (bright_rate + dark_rate) * bin_duration;
}

ThresholdDiagnostics threshold_diagnostics(double bright_rate, double dark_rate, double bin_duration,
                                           double threshold) {
  ThresholdDiagnostics d;
  const long below = static_cast<long>(std::ceil(threshold)) - 1;  // largest count classified dark
  const double bright_mean = bright_rate * bin_duration;
  const double dark_mean = dark_rate * bin_duration;
  d.misclassification = poisson_cdf(bright_mean, below) + (1.0 - poisson_cdf(dark_mean, below));
  d.separable = d.misclassification < 1e-6;
  if (!d.separable) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "bright and dark rates are not well separated at this bin size: "
                  "estimated misclassification probability %.3g per bin",
                  d.misclassification);
    d.warning = buf;
  }
  return d;
}

std::vector<DarkEvent> detect_events(const FluorescenceTrace& trace, double threshold) {
  trace.validate();
  std::vector<DarkEvent> events;
  const std::size_t n = trace.counts.size();
  std::size_t i = 0;
  while (i < n) {
    if (trace.counts[i] >= threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && trace.counts[j] < threshold) ++j;
    events.push_back({trace.bin_duration * static_cast<double>(i), trace.bin_duration * static_cast<double>(j - i),
                      EventClass::kUnknown});
    i = j;
  }
  return events;
}

void split_losses(const std::vector<DarkEvent>& detected, double loss_threshold, std::vector<DarkEvent>& events,
                  std::vector<DarkEvent>& losses) {
  events.clear();
  losses.clear();
  for (const auto& e : detected) (e.duration >= loss_threshold ? losses : events).push_back(e);
}

HistogramFit fit_histogram(const std::vector<DarkEvent>& events, const FitOptions& options) {
  if (!(options.bin_width > 0.0 && options.tau > 0.0)) throw ConfigError("fit bin width and tau must be positive");
  HistogramFit fit;
  fit.bin_width = options.bin_width;
  fit.total_events = static_cast<std::int64_t>(events.size());

  std::size_t last = 0;
  for (const auto& e : events) last = std::max(last, static_cast<std::size_t>(e.duration / options.bin_width));
  const auto tail = static_cast<std::size_t>(std::ceil(5.0 * options.tau / options.bin_width));
  fit.histogram.assign(std::max(last, tail) + 1, 0);
  for (const auto& e : events) ++fit.histogram[static_cast<std::size_t>(e.duration / options.bin_width)];

  const std::size_t first = options.exclude_first_bin ? 1 : 0;
  int nonempty = 0;
  for (std::size_t k = first; k < fit.histogram.size(); ++k)
    if (fit.histogram[k] > 0) ++nonempty;
  if (nonempty < 2) throw FitDegenerateError("fewer than two non-empty histogram bins remain for the fit");

  // Linear in A: A = sum w n x / sum w x^2 with x_k = exp(-k width / tau).
  double sxy = 0.0, sxx = 0.0, rss = 0.0;
  const double r = std::exp(-options.bin_width / options.tau);
  std::vector<double> weight(fit.histogram.size(), 1.0);
  for (std::size_t k = first; k < fit.histogram.size(); ++k) {
    const double n = static_cast<double>(fit.histogram[k]);
    weight[k] = options.poisson_weighted ? 1.0 / std::max(n, 1.0) : 1.0;
    const double x = std::pow(r, static_cast<double>(k));
    sxy += weight[k] * n * x;
    sxx += weight[k] * x * x;
  }
  fit.amplitude = sxy / sxx;
  for (std::size_t k = first; k < fit.histogram.size(); ++k) {
    const double res = static_cast<double>(fit.histogram[k]) - fit.amplitude * std::pow(r, static_cast<double>(k));
    rss += weight[k] * res * res;
  }
  const double dof = static_cast<double>(fit.histogram.size() - first) - 1.0;
  fit.amplitude_error = dof > 0.0 ? std::sqrt(rss / dof / sxx) : 0.0;

  const double total = static_cast<double>(fit.total_events);
  const double mass = fit.amplitude / (1.0 - r);
  fit.shelved_fraction = mass / total;
  fit.short_fraction = (static_cast<double>(fit.histogram[0]) - fit.amplitude) / total;
  return fit;
}

LifetimeStats trap_lifetime_stats(const std::vector<double>& lifetimes, double observation_time, std::uint64_t seed,
                                  int bootstrap) {
  if (lifetimes.size() < 2) throw Error("lifetime statistics need at least two losses");
  if (!(observation_time > 0.0)) throw Error("observation time must be positive");
  LifetimeStats s;
  s.losses = static_cast<std::int64_t>(lifetimes.size());
  s.mean_lifetime = observation_time / static_cast<double>(lifetimes.size());

  // The test uses the sample mean of the completed lifetimes; the bootstrap repeats
  // that estimate on every replica so the p-value accounts for the fitted scale.
  const double fitted = mean_of(lifetimes);
  s.ks_statistic = ks_exponential(lifetimes, fitted);
  if (bootstrap > 0) {
    Rng rng = make_stream(seed, 0x6b73ull);
    std::exponential_distribution<double> draw(1.0 / fitted);
    std::vector<double> sample(lifetimes.size());
    int exceed = 0;
    for (int b = 0; b < bootstrap; ++b) {
      for (auto& x : sample) x = draw(rng);
      if (ks_exponential(sample, mean_of(sample)) >= s.ks_statistic) ++exceed;
    }
    s.ks_p_value = (exceed + 1.0) / (bootstrap + 1.0);
  }
  return s;
}

void lifetimes_from_losses(const std::vector<DarkEvent>& losses, double trace_duration,
                           std::vector<double>& lifetimes, double& observation_time) {
  lifetimes.clear();
  double trapped_since = 0.0;
  double gaps = 0.0;
  for (const auto& l : losses) {
    lifetimes.push_back(l.start - trapped_since);
    trapped_since = l.start + l.duration;
    gaps += std::min(l.duration, trace_duration - l.start);
  }
  observation_time = trace_duration - gaps;
}

CollisionAnalysis analyze_trace(const FluorescenceTrace& trace, const AnalysisOptions& options) {
  trace.validate();
  CollisionAnalysis a;
  const double threshold = options.threshold >= 0.0
                               ? options.threshold
                               : midpoint_threshold(options.bright_rate, options.dark_rate, trace.bin_duration);
  a.threshold = threshold_diagnostics(options.bright_rate, options.dark_rate, trace.bin_duration, threshold);
  split_losses(detect_events(trace, threshold), options.loss_threshold, a.events, a.losses);
  a.fit = fit_histogram(a.events, options.fit);
  if (a.losses.size() >= 2) {
    std::vector<double> lifetimes;
    double observed = 0.0;
    lifetimes_from_losses(a.losses, trace.duration(), lifetimes, observed);
    a.lifetime = trap_lifetime_stats(lifetimes, observed, options.seed, options.bootstrap);
    a.lifetime_available = true;
  }
  return a;
}

void write_trace_csv(std::ostream& os, const FluorescenceTrace& trace) {
  os << "bin_index,counts\n";
  std::string line;
  for (std::size_t i = 0; i < trace.counts.size(); ++i) {
    line = std::to_string(i);
    line += ',';
    line += std::to_string(trace.counts[i]);
    line += '\n';
    os << line;
  }
}

FluorescenceTrace read_trace_csv(std::istream& is, double bin_duration) {
  FluorescenceTrace tr;
  tr.bin_duration = bin_duration;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("bin_index", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected 'bin_index,counts'", line_no, 1);
    char* endp = nullptr;
    const std::string idx = line.substr(0, comma);
    const long long index = std::strtoll(idx.c_str(), &endp, 10);
    if (idx.empty() || *endp != '\0') throw ParseError("bin index is not an integer", line_no, 1);
    if (index != static_cast<long long>(tr.counts.size()))
      throw ParseError("bin indices must be consecutive from 0", line_no, 1);
    const std::string val = line.substr(comma + 1);
    const long long count = std::strtoll(val.c_str(), &endp, 10);
    if (val.empty() || *endp != '\0' || count < 0 || count > INT32_MAX)
      throw ParseError("counts must be a non-negative integer", line_no, static_cast<int>(comma) + 2);
    tr.counts.push_back(static_cast<std::int32_t>(count));
  }
  if (tr.counts.empty()) throw ParseError("trace file contains no bins", std::max(line_no, 1), 1);
  return tr;
}

void write_histogram_csv(std::ostream& os, const HistogramFit& fit) {
  os << "duration_bin_s,events\n";
  char buf[64];
  for (std::size_t k = 0; k < fit.histogram.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.6g,%lld\n", fit.bin_width * static_cast<double>(k),
                  static_cast<long long>(fit.histogram[k]));
    os << buf;
  }
}

}  // namespace sbf
