#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ssmlab/data.hpp"
#include "ssmlab/errors.hpp"
#include "ssmlab/head.hpp"
#include "ssmlab/loss.hpp"
#include "ssmlab/ode.hpp"
#include "ssmlab/ssm.hpp"

namespace ssmlab {

enum class OptimizerKind { gradient_flow, adaptive_gd, adam };

inline const char* to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::gradient_flow: return "gradient_flow";
    case OptimizerKind::adaptive_gd: return "adaptive_gd";
    case OptimizerKind::adam: return "adam";
  }
  return "?";
}

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::gradient_flow;
  double base_lr = 0.01;
  // adaptive_gd
  double beta = 0.8;
  double softening = 1e-6;
  // adam
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-7;
  // gradient_flow
  double ode_rel_tol = 1e-8;
  double ode_abs_tol = 1e-10;
  std::vector<double> timestamps;
  /// Once the loss falls to this level the flow is treated as having reached
  /// its limit; later timestamps repeat the final state. 0 disables.
  /// Past this point the explicit solver is pinned by the fast mode around
  /// the fitted entry, while the parameters can move by O(sqrt(loss)) at most.
  double steady_loss = 1e-12;
  // discrete methods
  std::size_t max_iters = 100'000;
  double loss_stop = 0.01;
  std::size_t extra_iters_after_stop = 0;
  std::size_t log_every = 1;

  bool train_bc = false;
  bool train_head = true;

  void validate() const {
    if (!(ode_rel_tol > 0.0) || !(ode_abs_tol > 0.0))
      throw DomainError("OptimizerSpec: ode tolerances must be positive");
    if (kind != OptimizerKind::gradient_flow && !(base_lr > 0.0))
      throw DomainError("OptimizerSpec: base_lr must be positive");
    if (kind == OptimizerKind::gradient_flow) {
      if (timestamps.empty()) throw DomainError("OptimizerSpec: gradient_flow needs timestamps");
      if (timestamps.front() < 0.0) throw DomainError("OptimizerSpec: timestamps must be >= 0");
      for (std::size_t i = 1; i < timestamps.size(); ++i)
        if (!(timestamps[i] > timestamps[i - 1]))
          throw DomainError("OptimizerSpec: timestamps must be strictly increasing");
    }
    if (log_every == 0) throw DomainError("OptimizerSpec: log_every must be positive");
  }
};

/// `count` evenly spaced times from 0 to t_end inclusive.
inline std::vector<double> linspace_times(double t_end, std::size_t count) {
  if (count < 2) throw DomainError("linspace_times: need at least two points");
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i)
    t[i] = t_end * static_cast<double>(i) / static_cast<double>(count - 1);
  return t;
}

struct Params {
  DiagonalSSM ssm;
  Head head = identity_head();
};

using ProbeValues = std::vector<std::pair<std::string, double>>;
/// Named scalars recorded with each log row.
using Probe = std::function<ProbeValues(double time, const Params&)>;

struct TrajectoryRow {
  std::size_t step = 0;
  double time = 0.0;
  double loss = 0.0;
  std::vector<double> a;
  ProbeValues probes;

  std::optional<double> probe(const std::string& name) const {
    for (const auto& [k, v] : probes)
      if (k == name) return v;
    return std::nullopt;
  }
};

struct TrajectoryLog {
  std::vector<TrajectoryRow> rows;
};

struct OptimizeResult {
  Params final{DiagonalSSM::zero(1)};
  TrajectoryLog log;
  double final_loss = 0.0;
  std::size_t iterations = 0;
  /// Discrete methods: first logged state with loss below loss_stop.
  std::optional<TrajectoryRow> first_below_stop;
  /// Gradient flow: time at which steady_loss was reached, if it was.
  std::optional<double> steady_time;
  OdeStats ode;
};

/// Called after every accepted integrator step with (t, params, loss).
using StepObserver = std::function<void(double, const Params&, double)>;

namespace detail {

/// Which parameters move and where they sit in the flat state vector.
struct Layout {
  std::size_t d = 0;
  bool bc = false;
  std::size_t head_width = 0;  // 0: head frozen or identity

  std::size_t size() const { return d * (bc ? 3 : 1) + (head_width ? head_width * (head_width + 2) : 0); }
};

inline Layout layout_for(const Params& p, const OptimizerSpec& spec) {
  Layout l;
  l.d = p.ssm.dim();
  l.bc = spec.train_bc;
  if (spec.train_head)
    if (const auto* m = std::get_if<MLPHead>(&p.head)) l.head_width = m->width();
  return l;
}

inline void append(std::vector<double>& out, const std::vector<double>& v) {
  out.insert(out.end(), v.begin(), v.end());
}

inline std::vector<double> pack(const Params& p, const Layout& l) {
  std::vector<double> out;
  out.reserve(l.size());
  append(out, p.ssm.a());
  if (l.bc) {
    append(out, p.ssm.b());
    append(out, p.ssm.c());
  }
  if (l.head_width) {
    const auto& m = std::get<MLPHead>(p.head);
    append(out, m.d_in);
    append(out, m.d_hidden);
    append(out, m.d_out);
  }
  return out;
}

inline std::vector<double> pack_grad(const GradientBundle& g, const Layout& l) {
  std::vector<double> out;
  out.reserve(l.size());
  append(out, g.da);
  if (l.bc) {
    append(out, g.db);
    append(out, g.dc);
  }
  if (l.head_width) {
    append(out, g.dhead->d_in);
    append(out, g.dhead->d_hidden);
    append(out, g.dhead->d_out);
  }
  return out;
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

/// Rebuild parameters from a flat vector; frozen parts come from `base`.
inline Params unpack(const std::vector<double>& x, const Layout& l, const Params& base) {
  auto it = x.begin();
  auto take = [&it](std::size_t n) {
    std::vector<double> v(it, it + static_cast<std::ptrdiff_t>(n));
    it += static_cast<std::ptrdiff_t>(n);
    return v;
  };
  auto a = take(l.d);
  std::vector<double> b = base.ssm.b(), c = base.ssm.c();
  if (l.bc) {
    b = take(l.d);
    c = take(l.d);
  }
  Params p{DiagonalSSM(std::move(a), std::move(b), std::move(c)), base.head};
  if (l.head_width) {
    const std::size_t h = l.head_width;
    auto in = take(h);
    auto hidden = take(h * h);
    auto out = take(h);
    p.head = MLPHead(std::move(in), std::move(hidden), std::move(out));
  }
  return p;
}

inline double squared_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

inline TrajectoryRow make_row(std::size_t step, double time, double loss_value, const Params& p,
                              const Probe& probe) {
  TrajectoryRow row;
  row.step = step;
  row.time = time;
  row.loss = loss_value;
  row.a = p.ssm.a();
  if (probe) row.probes = probe(time, p);
  return row;
}

}  // namespace detail

/// Integrate (A, B, C, w)' = -grad loss from t = 0 and record the state at
/// every timestamp. Parameters not selected for training stay fixed.
inline OptimizeResult gradient_flow(const Params& init, const TrainingSet& set,
                                    const OptimizerSpec& spec, const Probe& probe = {},
                                    const StepObserver& on_step = {}) {
  spec.validate();
  const auto layout = detail::layout_for(init, spec);
  const bool train_bc = spec.train_bc;

  auto rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
    if (!detail::all_finite(y)) {
      std::fill(dy.begin(), dy.end(), NAN);
      return;
    }
    const Params p = detail::unpack(y, layout, init);
    const auto g = detail::pack_grad(grad(p.ssm, p.head, set, train_bc), layout);
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] = -g[i];
  };

  OdeOptions opts;
  opts.rel_tol = spec.ode_rel_tol;
  opts.abs_tol = spec.ode_abs_tol;

  OptimizeResult res;
  const auto& ts = spec.timestamps;
  DormandPrince45 solver(rhs, detail::pack(init, layout), 0.0, opts);
  std::optional<std::vector<double>> frozen;  // set once steady
  std::vector<double> last;

  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double t = ts[i];
    std::vector<double> state;
    if (frozen) {
      state = *frozen;
    } else if (t == solver.t()) {
      state = solver.y();
    } else {
      while (solver.t() < t) {
        solver.step(ts.back());
        const Params p = detail::unpack(solver.y(), layout, init);
        const double l = loss(p.ssm, p.head, set);
        if (on_step) on_step(solver.t(), p, l);
        if (spec.steady_loss > 0.0 && l <= spec.steady_loss) {
          res.steady_time = solver.t();
          break;
        }
      }
      if (res.steady_time) {
        frozen = solver.y();
        state = t <= solver.t() ? solver.interpolate(t) : *frozen;
      } else {
        state = solver.interpolate(t);
      }
    }
    const Params p = detail::unpack(state, layout, init);
    res.log.rows.push_back(detail::make_row(i, t, loss(p.ssm, p.head, set), p, probe));
    last = std::move(state);
  }
  // The returned state is the last logged one.
  res.final = detail::unpack(last, layout, init);
  res.final_loss = loss(res.final.ssm, res.final.head, set);
  res.iterations = solver.stats().accepted;
  res.ode = solver.stats();
  return res;
}

namespace detail {

/// Shared driver for the discrete methods. `update(x, g, loss)` modifies x in place.
template <class Update>
OptimizeResult discrete_loop(const Params& init, const TrainingSet& set, const OptimizerSpec& spec,
                             const Probe& probe, Update&& update) {
  spec.validate();
  const auto layout = layout_for(init, spec);
  std::vector<double> x = pack(init, layout);
  OptimizeResult res;
  std::optional<std::size_t> stopped_at;

  for (std::size_t it = 0;; ++it) {
    const Params p = unpack(x, layout, init);
    const double l = loss(p.ssm, p.head, set);
    if (!std::isfinite(l)) throw DivergenceError("non-finite loss", it);
    const bool crossed = !stopped_at && l < spec.loss_stop;
    if (crossed) stopped_at = it;
    const bool done = it >= spec.max_iters ||
                      (stopped_at && it - *stopped_at >= spec.extra_iters_after_stop);
    if (crossed || done || it % spec.log_every == 0) {
      auto row = make_row(it, static_cast<double>(it), l, p, probe);
      if (crossed) res.first_below_stop = row;
      res.log.rows.push_back(std::move(row));
    }
    if (done) {
      res.final = p;
      res.final_loss = l;
      res.iterations = it;
      return res;
    }
    const auto g = pack_grad(grad(p.ssm, p.head, set, spec.train_bc), layout);
    if (!all_finite(g)) throw DivergenceError("non-finite gradient", it);
    update(x, g, it);
    if (!all_finite(x)) throw DivergenceError("non-finite parameters", it + 1);
  }
}

}  // namespace detail

/// Gradient descent whose step is base_lr / sqrt(m + softening), where m is an
/// exponential moving average of squared gradient norms (coefficient beta).
/// m starts at the first squared gradient norm.
inline OptimizeResult adaptive_gd(const Params& init, const TrainingSet& set,
                                  const OptimizerSpec& spec, const Probe& probe = {}) {
  double m = 0.0;
  return detail::discrete_loop(
      init, set, spec, probe, [&](std::vector<double>& x, const std::vector<double>& g,
                                  std::size_t it) {
        const double sq = detail::squared_norm(g);
        m = it == 0 ? sq : spec.beta * m + (1.0 - spec.beta) * sq;
        const double lr = spec.base_lr / std::sqrt(m + spec.softening);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= lr * g[i];
      });
}

/// Adam with bias correction.
inline OptimizeResult adam(const Params& init, const TrainingSet& set, const OptimizerSpec& spec,
                           const Probe& probe = {}) {
  std::vector<double> m1, m2;
  double p1 = 1.0, p2 = 1.0;
  return detail::discrete_loop(
      init, set, spec, probe, [&](std::vector<double>& x, const std::vector<double>& g,
                                  std::size_t) {
        if (m1.empty()) {
          m1.assign(x.size(), 0.0);
          m2.assign(x.size(), 0.0);
        }
        p1 *= spec.adam_beta1;
        p2 *= spec.adam_beta2;
        for (std::size_t i = 0; i < x.size(); ++i) {
          m1[i] = spec.adam_beta1 * m1[i] + (1.0 - spec.adam_beta1) * g[i];
          m2[i] = spec.adam_beta2 * m2[i] + (1.0 - spec.adam_beta2) * g[i] * g[i];
          const double mhat = m1[i] / (1.0 - p1);
          const double vhat = m2[i] / (1.0 - p2);
          x[i] -= spec.base_lr * mhat / (std::sqrt(vhat) + spec.adam_eps);
        }
      });
}

inline OptimizeResult optimize(const Params& init, const TrainingSet& set,
                               const OptimizerSpec& spec, const Probe& probe = {}) {
  switch (spec.kind) {
    case OptimizerKind::gradient_flow: return gradient_flow(init, set, spec, probe);
    case OptimizerKind::adaptive_gd: return adaptive_gd(init, set, spec, probe);
    case OptimizerKind::adam: return adam(init, set, spec, probe);
  }
  throw DomainError("optimize: unknown optimizer kind");
}

}  // namespace ssmlab
