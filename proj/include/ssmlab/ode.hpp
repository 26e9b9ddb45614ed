#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "ssmlab/errors.hpp"

namespace ssmlab {

struct OdeOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double initial_step = 0.0;  // 0: automatic
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 50'000'000;
};

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

/// Explicit embedded Runge-Kutta 5(4) pair with Dormand-Prince coefficients,
/// PI step-size control and the standard fourth-order dense output. The
/// caller drives it one accepted step at a time, which lets it observe every
/// step and stop early.
class DormandPrince45 {
 public:
  using State = std::vector<double>;
  using Rhs = std::function<void(double, const State&, State&)>;

  DormandPrince45(Rhs rhs, State y0, double t0, OdeOptions opts = {})
      : rhs_(std::move(rhs)), opts_(opts), t_(t0), t_prev_(t0), y_(std::move(y0)) {
    if (!(opts_.rel_tol > 0.0) || !(opts_.abs_tol > 0.0))
      throw DomainError("DormandPrince45: tolerances must be positive");
    const std::size_t n = y_.size();
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &ynew_, &yprev_, &r1_, &r2_,
                    &r3_, &r4_, &r5_})
      v->assign(n, 0.0);
    eval(t_, y_, k1_);
    h_ = opts_.initial_step > 0.0 ? opts_.initial_step : initial_step();
  }

  double t() const noexcept { return t_; }
  double t_prev() const noexcept { return t_prev_; }
  const State& y() const noexcept { return y_; }
  /// Right-hand side at (t(), y()).
  const State& derivative() const noexcept { return k1_; }
  const OdeStats& stats() const noexcept { return stats_; }
  double step_size() const noexcept { return h_; }

  /// Advance by one accepted step that does not overshoot `t_limit`.
  void step(double t_limit) {
    if (!(t_limit > t_)) throw DomainError("DormandPrince45::step: t_limit must exceed t");
    const std::size_t n = y_.size();
    bool rejected_last = false;
    for (;;) {
      if (stats_.accepted + stats_.rejected >= opts_.max_steps)
        throw IntegrationError("integrator exceeded the step budget", t_, y_);
      double h = std::min(h_, opts_.max_step);
      bool last = false;
      if (t_ + h >= t_limit) {
        h = t_limit - t_;
        last = true;
      }
      const double eps = std::numeric_limits<double>::epsilon();
      if (h <= 16.0 * eps * std::max(std::abs(t_), 1.0) && !last)
        throw IntegrationError("step size underflow (stiff region?)", t_, y_);

      stage(h);
      const double err = error_norm(h);
      if (!std::isfinite(err)) {
        ++stats_.rejected;
        h_ = 0.1 * h;
        rejected_last = true;
        continue;
      }
      const double fac11 = std::pow(err, kExpo1);
      if (err <= 1.0) {
        double fac = fac11 / std::pow(facold_, kBeta);
        fac = std::clamp(fac / kSafety, 1.0 / kFacMax, 1.0 / kFacMin);
        double hnew = h / fac;
        if (rejected_last) hnew = std::min(hnew, h);
        facold_ = std::max(err, 1e-4);
        accept(h, last ? t_limit : t_ + h);
        h_ = hnew;
        (void)n;
        return;
      }
      ++stats_.rejected;
      h_ = h / std::min(1.0 / kFacMin, fac11 / kSafety);
      rejected_last = true;
    }
  }

  /// Dense output on the last accepted step, t in [t_prev(), t()].
  State interpolate(double t) const {
    const double h = t_ - t_prev_;
    State out(y_.size());
    if (h == 0.0) return y_;
    const double theta = (t - t_prev_) / h;
    const double theta1 = 1.0 - theta;
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = r1_[i] +
               theta * (r2_[i] + theta1 * (r3_[i] + theta * (r4_[i] + theta1 * r5_[i])));
    return out;
  }

 private:
  // Butcher tableau.
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  // Fifth minus fourth order weights.
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  // Dense output.
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0,
                          d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
  // PI controller.
  static constexpr double kBeta = 0.04, kExpo1 = 0.2 - kBeta * 0.75, kSafety = 0.9,
                          kFacMin = 0.2, kFacMax = 10.0;

  void eval(double t, const State& y, State& out) {
    rhs_(t, y, out);
    ++stats_.rhs_evals;
  }

  void stage(double h) {
    const std::size_t n = y_.size();
    for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y_[i] + h * a21 * k1_[i];
    eval(t_ + c2 * h, ytmp_, k2_);
    for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
    eval(t_ + c3 * h, ytmp_, k3_);
    for (std::size_t i = 0; i < n; ++i)
      ytmp_[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
    eval(t_ + c4 * h, ytmp_, k4_);
    for (std::size_t i = 0; i < n; ++i)
      ytmp_[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
    eval(t_ + c5 * h, ytmp_, k5_);
    for (std::size_t i = 0; i < n; ++i)
      ytmp_[i] =
          y_[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] + a65 * k5_[i]);
    eval(t_ + h, ytmp_, k6_);
    for (std::size_t i = 0; i < n; ++i)
      ynew_[i] =
          y_[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] + a76 * k6_[i]);
    eval(t_ + h, ynew_, k7_);
  }

  double error_norm(double h) const {
    const std::size_t n = y_.size();
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] +
                            e6 * k6_[i] + e7 * k7_[i]);
      const double sc =
          opts_.abs_tol + opts_.rel_tol * std::max(std::abs(y_[i]), std::abs(ynew_[i]));
      acc += (e / sc) * (e / sc);
    }
    return std::sqrt(acc / static_cast<double>(n));
  }

  void accept(double h, double t_new) {
    const std::size_t n = y_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double ydiff = ynew_[i] - y_[i];
      const double bspl = h * k1_[i] - ydiff;
      r1_[i] = y_[i];
      r2_[i] = ydiff;
      r3_[i] = bspl;
      r4_[i] = ydiff - h * k7_[i] - bspl;
      r5_[i] = h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] + d6 * k6_[i] +
                    d7 * k7_[i]);
    }
    t_prev_ = t_;
    t_ = t_new;
    y_.swap(ynew_);
    k1_.swap(k7_);  // first-same-as-last
    ++stats_.accepted;
  }

  // Initial step heuristic from Hairer, Norsett & Wanner.
  double initial_step() {
    const std::size_t n = y_.size();
    if (n == 0) return 1.0;
    double dnf = 0.0, dny = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sk = opts_.abs_tol + opts_.rel_tol * std::abs(y_[i]);
      dnf += (k1_[i] / sk) * (k1_[i] / sk);
      dny += (y_[i] / sk) * (y_[i] / sk);
    }
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
    h = std::min(h, opts_.max_step);
    for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y_[i] + h * k1_[i];
    eval(t_ + h, ytmp_, k2_);
    double der2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sk = opts_.abs_tol + opts_.rel_tol * std::abs(y_[i]);
      der2 += ((k2_[i] - k1_[i]) / sk) * ((k2_[i] - k1_[i]) / sk);
    }
    der2 = std::sqrt(der2) / h;
    const double der12 = std::max(der2, std::sqrt(dnf));
    const double h1 =
        der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 1.0 / 5.0);
    return std::min({100.0 * h, h1, opts_.max_step});
  }

  Rhs rhs_;
  OdeOptions opts_;
  OdeStats stats_;
  double t_, t_prev_, h_ = 0.0, facold_ = 1e-4;
  State y_, k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_, yprev_;
  State r1_, r2_, r3_, r4_, r5_;
};

/// Integrate from t0 through every time in `outputs` (strictly increasing,
/// all >= t0) and return the states at those times.
inline std::vector<std::vector<double>> integrate(const DormandPrince45::Rhs& rhs,
                                                  std::vector<double> y0, double t0,
                                                  const std::vector<double>& outputs,
                                                  OdeOptions opts = {}) {
  std::vector<std::vector<double>> states;
  states.reserve(outputs.size());
  DormandPrince45 solver(rhs, std::move(y0), t0, opts);
  for (double t : outputs) {
    if (t < t0) throw DomainError("integrate: output time precedes t0");
    if (t == solver.t()) {
      states.push_back(solver.y());
      continue;
    }
    while (solver.t() < t) solver.step(outputs.back());
    states.push_back(solver.interpolate(t));
  }
  return states;
}

}  // namespace ssmlab
