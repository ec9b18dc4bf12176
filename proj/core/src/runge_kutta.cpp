#include "sbf/runge_kutta.hpp"

#include <algorithm>
#include <cmath>

#include "sbf/error.hpp"

namespace sbf {
namespace {

// Dormand & Prince (1980) tableau, with Hairer's dense-output coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

double error_norm(const Eigen::VectorXcd& err, const Eigen::VectorXcd& y0, const Eigen::VectorXcd& y1,
                  double atol, double rtol) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double scale = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = std::abs(err[i]) / scale;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(err.size()));
}

}  // namespace

Dopri5::State Dopri5::integrate(const Rhs& f, double t0, const State& y0, double t1,
                                const std::vector<double>& samples, std::vector<State>* sampled) {
  stats_ = {};
  if (sampled) sampled->clear();
  if (t1 < t0) throw Error("Dopri5: end time precedes start time");
  State y = y0;
  if (t1 == t0) {
    if (sampled)
      for (std::size_t i = 0; i < samples.size(); ++i) sampled->push_back(y);
    return y;
  }

  const Eigen::Index n = y0.size();
  State k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);
  f(t0, y, k1);

  const double span = t1 - t0;
  const double min_step = options_.min_step > 0.0 ? options_.min_step : 1e-14 * span;
  double h = options_.initial_step;
  if (h <= 0.0) {
    // Hairer, Norsett & Wanner's starting-step heuristic (first stage only).
    double d0 = 0.0, d1 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = options_.abs_tol + options_.rel_tol * std::abs(y[i]);
      d0 += std::norm(y[i]) / (sc * sc);
      d1 += std::norm(k1[i]) / (sc * sc);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
    h = std::min(h, span);
  }

  std::size_t next_sample = 0;
  double t = t0;
  double err_prev = 1e-4;
  while (t < t1) {
    if (stats_.accepted + stats_.rejected >= options_.max_steps)
      throw IntegrationError("Dopri5: step budget exhausted", t);
    if (h < min_step) throw IntegrationError("Dopri5: step size underflow", t);
    const bool last = t + h >= t1;
    if (last) h = t1 - t;

    ytmp = y + h * a21 * k1;
    f(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, ytmp, k6);
    ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(t + h, ynew, k7);

    const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = error_norm(err, y, ynew, options_.abs_tol, options_.rel_tol);

    if (std::isfinite(en) && en <= 1.0) {
      // Dense output over the accepted step.
      if (sampled && next_sample < samples.size()) {
        const State ydiff = ynew - y;
        const State bspl = h * k1 - ydiff;
        const State r4 = ydiff - h * k7 - bspl;
        const State r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        const double t_end = last ? t1 : t + h;
        while (next_sample < samples.size() && samples[next_sample] <= t_end) {
          const double theta = (samples[next_sample] - t) / h;
          const double theta1 = 1.0 - theta;
          sampled->push_back(y + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5))));
          ++next_sample;
        }
      }
      ++stats_.accepted;
      t = last ? t1 : t + h;
      y = ynew;
      k1 = k7;
      // PI step-size control (Gustafsson), exponents for a 5th-order pair.
      const double e = std::max(en, 1e-10);
      double factor = 0.9 * std::pow(e, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      factor = std::clamp(factor, 0.2, 10.0);
      err_prev = e;
      if (!last) h *= factor;
    } else {
      ++stats_.rejected;
      const double factor = std::isfinite(en) ? std::max(0.2, 0.9 * std::pow(en, -0.2)) : 0.2;
      h *= factor;
    }
  }
  if (sampled)
    while (next_sample++ < samples.size()) sampled->push_back(y);
  return y;
}

}  // namespace sbf
