#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace sbf {

struct Dopri5Options {
  double abs_tol = 1e-10;
  double rel_tol = 1e-9;
  double initial_step = 0.0;  // 0 picks a step from the derivative scale
  double min_step = 0.0;      // 0 means 1e-14 * |t1 - t0|
  long max_steps = 10'000'000;
};

struct Dopri5Stats {
  long accepted = 0;
  long rejected = 0;
};

/// Adaptive Dormand-Prince 5(4) integrator for dy/dt = f(t, y) with complex state.
///
/// `samples` (sorted, inside [t0, t1]) are filled from the 4th-order dense
/// output; pass an empty vector when only the end state is needed.
/// Throws IntegrationError carrying the last accepted time on step-size underflow.
class Dopri5 {
 public:
  using State = Eigen::VectorXcd;
  using Rhs = std::function<void(double, const State&, State&)>;

  explicit Dopri5(Dopri5Options options = {}) : options_(options) {}

  State integrate(const Rhs& f, double t0, const State& y0, double t1, const std::vector<double>& samples = {},
                  std::vector<State>* sampled = nullptr);

  const Dopri5Stats& stats() const { return stats_; }

 private:
  Dopri5Options options_;
  Dopri5Stats stats_;
};

}  // namespace sbf
