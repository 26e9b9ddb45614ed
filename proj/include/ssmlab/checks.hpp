#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ssmlab/analysis.hpp"
#include "ssmlab/config.hpp"
#include "ssmlab/data.hpp"
#include "ssmlab/loss.hpp"
#include "ssmlab/ode.hpp"
#include "ssmlab/optimize.hpp"
#include "ssmlab/oracles.hpp"
#include "ssmlab/runner.hpp"

namespace ssmlab {

struct Check {
  std::string name;
  double measured = NAN;
  double threshold = NAN;
  std::string relation;  // "<=", ">=", "=="
  bool pass = false;
};

inline Check at_most(std::string name, double measured, double threshold) {
  return {std::move(name), measured, threshold, "<=", measured <= threshold};
}
inline Check at_least(std::string name, double measured, double threshold) {
  return {std::move(name), measured, threshold, ">=", measured >= threshold};
}
inline Check holds(std::string name, bool ok) {
  return {std::move(name), ok ? 1.0 : 0.0, 1.0, "==", ok};
}

struct SuiteReport {
  explicit SuiteReport(std::string name = {}) : suite(std::move(name)) {}

  std::string suite;
  std::vector<Check> checks;
  double seconds = 0.0;
  std::vector<std::string> notes;

  bool passed() const {
    return !checks.empty() &&
           std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  const Check* first_failure() const {
    for (const auto& c : checks)
      if (!c.pass) return &c;
    return nullptr;
  }
  Json to_json() const {
    Json arr = Json::array();
    for (const auto& c : checks)
      arr.push_back({{"name", c.name},
                     {"measured", number_or_null(c.measured)},
                     {"threshold", number_or_null(c.threshold)},
                     {"relation", c.relation},
                     {"pass", c.pass}});
    return {{"suite", suite}, {"passed", passed()}, {"seconds", seconds}, {"checks", arr},
            {"notes", notes}};
  }
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct RandomProblem {
  DiagonalSSM ssm{DiagonalSSM::zero(1)};
  Head head = identity_head();
  std::optional<TrainingSet> set;
  bool train_bc = false;
};

/// d in 2..8, kappa in {4, 6}, n in 1..5, optional MLP head of width <= 8.
inline RandomProblem random_problem(CounterRng& rng, bool mlp, bool train_bc) {
  RandomProblem p;
  const std::size_t d = 2 + rng.next_u64() % 7;
  const std::size_t kappa = rng.next_u64() % 2 ? 6 : 4;
  const std::size_t n = 1 + rng.next_u64() % 5;
  std::vector<double> a(d), b(d), c(d);
  for (std::size_t j = 0; j < d; ++j) {
    a[j] = rng.uniform(-0.95, 0.95);
    b[j] = rng.normal();
    c[j] = rng.normal();
  }
  p.ssm = DiagonalSSM(a, b, c);
  if (mlp) p.head = sample_head(1 + rng.next_u64() % 8, 0.7, rng);
  std::vector<LabeledSequence> items;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(kappa);
    for (auto& v : x) v = rng.normal();
    items.push_back({x, rng.normal()});
  }
  p.set = TrainingSet(std::move(items));
  p.train_bc = train_bc;
  return p;
}

inline double min_kink_distance(const RandomProblem& p) {
  const auto* m = std::get_if<MLPHead>(&p.head);
  if (!m) return INFINITY;
  double best = INFINITY;
  for (const auto& ex : *p.set) best = std::min(best, min_abs_preactivation(*m, forward(p.ssm, ex.x)));
  return best;
}

inline std::vector<double> generic_s2_gradient(const std::vector<double>& a, const TrainingSet& s2) {
  return grad(DiagonalSSM::with_unit_io(a), s2, false).da;
}

}  // namespace detail

/// max_j |predicted_a_dot_j + dl/da_j| / max(|dl/da_j|, 1e-14) over random problems.
inline Check check_equation_of_motion(std::uint64_t seed = 1, std::size_t configs = 100) {
  CounterRng rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < configs; ++i) {
    const auto p = detail::random_problem(rng, i % 2 == 1, (i / 2) % 2 == 1);
    const auto g = grad(p.ssm, p.head, *p.set, p.train_bc);
    const auto pred = predicted_a_dot(p.ssm, characterize(p.ssm, p.head, *p.set));
    for (std::size_t j = 0; j < g.da.size(); ++j)
      worst = std::max(worst, std::abs(pred[j] + g.da[j]) / std::max(std::abs(g.da[j]), 1e-14));
  }
  return at_most("equation_of_motion_matches_minus_gradient", worst, 1e-10);
}

/// Analytic gradients of every trained parameter against central differences
/// (h = 1e-6), error relative to max(|entry|, ||grad||_inf). Problems with a
/// preactivation within 1e-3 of a ReLU kink are redrawn.
inline Check check_gradients(std::uint64_t seed = 2, std::size_t configs = 100) {
  CounterRng rng(seed);
  double worst = 0.0;
  std::size_t accepted = 0;
  while (accepted < configs) {
    const std::size_t i = accepted;
    auto p = detail::random_problem(rng, i % 2 == 1, (i / 2) % 2 == 1);
    if (detail::min_kink_distance(p) < 1e-3) continue;
    ++accepted;
    OptimizerSpec spec;
    spec.train_bc = p.train_bc;
    const Params base{p.ssm, p.head};
    const auto layout = detail::layout_for(base, spec);
    const auto an = detail::pack_grad(grad(p.ssm, p.head, *p.set, p.train_bc), layout);
    const auto fd = oracle::central_gradient(
        [&](const std::vector<double>& x) {
          const auto q = detail::unpack(x, layout, base);
          return loss(q.ssm, q.head, *p.set);
        },
        detail::pack(base, layout), 1e-6);
    double scale = 0.0;
    for (double v : an) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < an.size(); ++k)
      worst = std::max(worst, std::abs(fd[k] - an[k]) / std::max({std::abs(an[k]), scale, 1e-300}));
  }
  return at_most("gradients_match_central_differences", worst, 1e-6);
}

/// Sequences whose last two entries vanish leave gamma_0 = gamma_1 = 0.
inline Check check_gamma_structure(std::uint64_t seed = 4, std::size_t configs = 20) {
  CounterRng rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < configs; ++i) {
    auto p = detail::random_problem(rng, i % 2 == 1, false);
    std::vector<LabeledSequence> items;
    for (const auto& ex : *p.set) {
      auto x = ex.x;
      x[x.size() - 1] = 0.0;
      x[x.size() - 2] = 0.0;
      items.push_back({x, ex.y});
    }
    const auto ch = characterize(p.ssm, p.head, TrainingSet(std::move(items)));
    worst = std::max({worst, std::abs(ch.gammas[0]), std::abs(ch.gammas[1])});
  }
  return at_most("gamma0_gamma1_vanish_without_late_inputs", worst, 0.0);
}

inline SuiteReport verify_dynamics() {
  detail::Stopwatch sw;
  SuiteReport rep{"dynamics"};
  rep.checks.push_back(check_equation_of_motion());
  rep.checks.push_back(check_gradients());
  rep.checks.push_back(check_gamma_structure());
  rep.seconds = sw.seconds();
  return rep;
}

/// Saddle of the two-example objective over (d, L) in {8,16,32} x {7,9,11}.
inline SuiteReport verify_saddle() {
  detail::Stopwatch sw;
  SuiteReport rep{"saddle"};
  for (std::size_t d : {8, 16, 32}) {
    for (std::size_t L : {7, 9, 11}) {
      const std::string tag = "d=" + std::to_string(d) + ",L=" + std::to_string(L) + ": ";
      const auto r = find_saddle(d, L);
      const double dd = static_cast<double>(d);
      const auto s2 = s2_set(L, d);
      const std::vector<double> a(d, r.s);
      rep.checks.push_back(holds(tag + "s_in_[1/d,3/d]", r.s >= 1.0 / dd && r.s <= 3.0 / dd));
      const auto g = detail::generic_s2_gradient(a, s2);
      double gmax = 0.0;
      for (double v : g) gmax = std::max(gmax, std::abs(v));
      rep.checks.push_back(at_most(tag + "gradient_inf_norm_at_saddle", gmax, 1e-12));
      const double l = loss(DiagonalSSM::with_unit_io(a), s2);
      rep.checks.push_back(at_least(tag + "loss_at_saddle", l, 0.125));
      rep.checks.push_back(at_most(tag + "loss_closed_form_vs_generic",
                                   std::abs(l - r.loss_at_s), 1e-12));
      rep.checks.push_back(at_least(tag + "lambda_plus_vs_d_minus_1", r.lambda_plus, dd - 1.0));
      rep.checks.push_back(holds(tag + "lambda_minus_in_(-1,0)",
                                 r.lambda_minus > -1.0 && r.lambda_minus < 0.0));
      const auto H = oracle::central_hessian(
          [&s2](const std::vector<double>& x) { return detail::generic_s2_gradient(x, s2); }, a, 1e-5);
      const auto ev = oracle::symmetric_eigenvalues(H);
      double dev = std::abs(ev.back() - r.lambda_plus);
      for (std::size_t i = 0; i + 1 < ev.size(); ++i)
        dev = std::max(dev, std::abs(ev[i] - r.lambda_minus));
      rep.checks.push_back(at_most(tag + "fd_hessian_spectrum_deviation", dev, 1e-6));
    }
  }
  rep.seconds = sw.seconds();
  return rep;
}

/// Closed-form linearized escape vs numeric integration of the linear system
/// y' = -H (y - s1), H a finite-difference Hessian of the generic loss.
inline SuiteReport verify_linearization(std::uint64_t seed = 3, std::size_t starts = 20,
                                        std::size_t d = 10, std::size_t L = 7) {
  detail::Stopwatch sw;
  SuiteReport rep{"linearization"};
  const auto r = find_saddle(d, L);
  const auto s2 = s2_set(L, d);
  const std::vector<double> at_s(d, r.s);
  const auto H = oracle::central_hessian(
      [&s2](const std::vector<double>& x) { return detail::generic_s2_gradient(x, s2); }, at_s, 1e-5);
  std::vector<double> times;
  for (int i = 0; i <= 100; ++i) times.push_back(0.05 * i);

  auto rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        acc += H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * (y[j] - r.s);
      dy[i] = -acc;
    }
  };
  OdeOptions opts;
  opts.rel_tol = 1e-12;
  opts.abs_tol = 1e-14;

  CounterRng rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < starts; ++k) {
    std::vector<double> a0(d);
    for (auto& v : a0) v = r.s + rng.uniform(-0.1, 0.1);
    const auto numeric = integrate(rhs, a0, 0.0, times, opts);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const auto closed = linearized_trajectory(a0, r, times[i]);
      for (std::size_t j = 0; j < d; ++j)
        worst = std::max(worst, std::abs(closed[j] - numeric[i][j]));
    }
  }
  rep.checks.push_back(at_most("sup_deviation_closed_form_vs_integration", worst, 1e-6));

  const std::vector<double> sym(d, 0.5 * r.s);
  double w1 = 0.0;
  for (double t : times) w1 = std::max(w1, w1_distance(linearized_trajectory(sym, r, t)));
  rep.checks.push_back(at_most("symmetric_start_stays_on_span1", w1, 1e-12));
  const auto late = linearized_trajectory(sym, r, 50.0);
  double gap = 0.0;
  for (double v : late) gap = std::max(gap, std::abs(v - r.s));
  rep.checks.push_back(at_most("symmetric_start_converges_to_saddle", gap, 1e-9));
  rep.seconds = sw.seconds();
  return rep;
}

/// Zero-loss, high-error student from the transposed Vandermonde solve.
inline SuiteReport verify_vandermonde(std::uint64_t seed = 5, std::size_t d = 12,
                                      std::size_t kappa = 6, double eps = 0.3) {
  detail::Stopwatch sw;
  SuiteReport rep{"vandermonde"};
  const auto teacher = canonical_teacher(d);
  const auto student = adversarial_zero_loss(teacher, kappa, d, eps);
  const auto ts = impulse_response(teacher, kappa + 1);
  const auto ss = impulse_response(student, kappa + 1);
  double head_dev = 0.0;
  for (std::size_t k = 0; k < kappa; ++k) head_dev = std::max(head_dev, std::abs(ss[k] - ts[k]));
  rep.checks.push_back(at_most("first_kappa_markov_parameters_match", head_dev, 1e-9));
  rep.checks.push_back(at_most("gap_at_index_kappa_equals_eps",
                               std::abs(ss[kappa] - ts[kappa] - eps), 1e-9));

  CounterRng rng(seed);
  double worst_loss = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    std::vector<std::size_t> all(kappa);
    for (std::size_t k = 0; k < kappa; ++k) all[k] = k + 1;
    const auto xs = gaussian_sequences({kappa, all, 1 + i % 5, seed}, rng);
    worst_loss = std::max(worst_loss, loss(student, label_set(teacher, xs)));
  }
  rep.checks.push_back(at_most("loss_on_20_teacher_labeled_sets", worst_loss, 1e-9));
  rep.checks.push_back(at_least("gen_error_over_kappa_plus_1",
                                generalization_error(student, teacher, kappa + 1), eps - 1e-6));
  const double tinf = *std::max_element(ts.begin(), ts.end());
  rep.checks.push_back(at_least("normalized_gen_error_margin",
                                normalized_generalization_error(student, teacher, kappa + 1) -
                                    (eps / tinf - 1e-6),
                                0.0));
  bool rejected = false;
  try {
    auto nodes = chebyshev_nodes(d);
    nodes[1] = nodes[0] - 1e-13;
    (void)adversarial_zero_loss(teacher, kappa, d, eps, nodes);
  } catch (const IllConditionedError&) {
    rejected = true;
  }
  rep.checks.push_back(holds("near_coincident_nodes_rejected", rejected));
  rep.seconds = sw.seconds();
  return rep;
}

/// Sampled PL inequality on the set of points whose entries spread by more than b.
inline SuiteReport verify_pl(std::uint64_t seed = 9, std::size_t points = 10000, double b = 0.5,
                             std::size_t d = 8, std::size_t L = 7) {
  detail::Stopwatch sw;
  SuiteReport rep{"pl"};
  const double mu = pl_coefficient(b, d, L);
  const auto s2 = s2_set(L, d);
  CounterRng rng(seed);
  double worst_ratio = INFINITY, worst_closed = 0.0;
  std::size_t kept = 0, drawn = 0;
  while (kept < points) {
    std::vector<double> a(d);
    for (auto& v : a) v = rng.uniform(-3.0, 3.0);
    ++drawn;
    if (!outside_diff_set(a, b)) continue;
    ++kept;
    const auto student = DiagonalSSM::with_unit_io(a);
    const double l = loss(student, s2);
    const auto g = grad(student, s2, false).da;
    const double g2 = detail::squared_norm(g);
    if (l > 0.0) worst_ratio = std::min(worst_ratio, g2 / (2.0 * mu * l));
    const auto gc = s2_gradient(a, L);
    for (std::size_t j = 0; j < d; ++j)
      worst_closed = std::max(worst_closed, std::abs(gc[j] - g[j]) / std::max(1.0, std::abs(g[j])));
  }
  rep.checks.push_back(at_least("min_grad_sq_over_2_mu_loss", worst_ratio, 1.0));
  rep.checks.push_back(at_most("closed_form_gradient_agreement", worst_closed, 1e-10));
  rep.checks.push_back(at_least("points_checked", static_cast<double>(kept), static_cast<double>(points)));
  (void)drawn;
  rep.seconds = sw.seconds();
  return rep;
}

/// Loss monotonicity, entry-order preservation and symmetric-start invariance
/// along gradient flow of the one- and two-example objectives.
inline SuiteReport verify_flow(std::uint64_t seed = 11, std::size_t d = 10, std::size_t L = 7) {
  detail::Stopwatch sw;
  SuiteReport rep{"flow"};
  OptimizerSpec spec;
  const double abs_tol = spec.ode_abs_tol;

  double worst_rise = 0.0, worst_order = 0.0;
  auto run = [&](const TrainingSet& set, const DiagonalSSM& init, double t_end) {
    spec.timestamps = linspace_times(t_end, 200);
    double prev = loss(init, set);
    gradient_flow({init}, set, spec, {}, [&](double, const Params& p, double l) {
      worst_rise = std::max(worst_rise, l - prev);
      prev = l;
      const auto& a = p.ssm.a();
      for (std::size_t j = 1; j < a.size(); ++j)
        worst_order = std::max(worst_order, a[j] - a[j - 1]);
    });
  };

  const auto s1 = s1_set(L, d), s2 = s2_set(L, d);
  for (std::size_t k = 0; k < 3; ++k) {
    InitSpec is;
    is.d = d;
    is.sd_a = 1e-3;
    is.diff = 0.05 * std::exp(5.0 * std::log10(is.sd_a));
    is.seed = seed + k;
    run(s2, sample_init(is).ssm(), 1e4);
  }
  rep.checks.push_back(at_most("s2_entry_order_violation", worst_order, 1e-8));
  {
    InitSpec is;
    is.d = d;
    is.sd_a = 1e-2;
    is.diff = 1e-4;
    is.seed = seed;
    run(s1, sample_init(is).ssm(), 1e8);
  }
  rep.checks.push_back(at_most("loss_rise_per_accepted_step", worst_rise, 10.0 * abs_tol));

  const auto saddle = find_saddle(d, L);
  double worst_w1 = 0.0, worst_gap = 0.0;
  for (double alpha : {0.02, 0.3}) {
    spec.timestamps = linspace_times(50.0, 200);
    const auto res = gradient_flow({DiagonalSSM::with_unit_io(std::vector<double>(d, alpha))}, s2,
                                   spec, {}, [&](double, const Params& p, double) {
                                     worst_w1 = std::max(worst_w1, w1_distance(p.ssm.a()));
                                   });
    for (double v : res.final.ssm.a()) worst_gap = std::max(worst_gap, std::abs(v - saddle.s));
  }
  rep.checks.push_back(at_most("symmetric_start_w1_distance", worst_w1, 1e-9));
  rep.checks.push_back(at_most("symmetric_start_reaches_saddle", worst_gap, 1e-6));
  rep.seconds = sw.seconds();
  return rep;
}

struct ArmOutcome {
  std::string arm;
  std::vector<RunSummary> runs;
};

inline std::vector<ArmOutcome> run_arms(const std::vector<ExperimentConfig>& arms) {
  std::vector<std::function<RunSummary()>> tasks;
  for (const auto& cfg : arms)
    for (auto seed : cfg.seeds) tasks.push_back([&cfg, seed] { return run_single(cfg, seed); });
  auto results = run_parallel(tasks, worker_count());
  std::vector<ArmOutcome> out;
  std::size_t k = 0;
  for (const auto& cfg : arms) {
    ArmOutcome o{cfg.arm, {}};
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) o.runs.push_back(std::move(results[k++]));
    out.push_back(std::move(o));
  }
  return out;
}

/// Clean (one example) vs poisoned (two examples) gradient flow for the
/// canonical teacher. `arms` must hold arms named "clean" and "poisoned".
inline SuiteReport verify_poisoning(const std::vector<ExperimentConfig>& arms) {
  detail::Stopwatch sw;
  SuiteReport rep{"poisoning"};
  const auto outcomes = run_arms(arms);
  const ArmOutcome *clean = nullptr, *poisoned = nullptr;
  std::size_t kappa = 0, d = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].arm == "clean") clean = &outcomes[i];
    if (outcomes[i].arm == "poisoned") poisoned = &outcomes[i];
    kappa = arms[i].data.kappa;
    d = arms[i].student.d;
  }
  if (!clean || !poisoned) {
    rep.checks.push_back(holds("config_has_clean_and_poisoned_arms", false));
    return rep;
  }
  auto collect = [&](const ArmOutcome& o, const std::string& tag, std::vector<double>& gen,
                     std::vector<double>& gen2) {
    double worst_loss = 0.0;
    bool ok = true;
    for (const auto& r : o.runs) {
      ok = ok && r.ok;
      if (!r.ok) continue;
      worst_loss = std::max(worst_loss, r.final_loss);
      gen.push_back(r.gen_norm);
      gen2.push_back(r.gen_error_kappa2);
    }
    rep.checks.push_back(holds(tag + "_all_runs_completed", ok));
    rep.checks.push_back(at_most(tag + "_max_final_loss", worst_loss, 1e-5));
  };
  std::vector<double> cg, cg2, pg, pg2;
  collect(*clean, "clean", cg, cg2);
  collect(*poisoned, "poisoned", pg, pg2);
  const double cm = mean_std(cg).mean, pm = mean_std(pg).mean;
  rep.checks.push_back(at_most("clean_mean_normalized_gen_error", cm, 5e-3));
  rep.checks.push_back(at_least("poisoned_mean_normalized_gen_error", pm, 2e-2));
  rep.checks.push_back(at_least("poisoned_over_clean_ratio", pm / cm, 10.0));
  double worst2 = pg2.empty() ? NAN : *std::min_element(pg2.begin(), pg2.end());
  rep.checks.push_back(at_least("poisoned_min_gen_error_over_kappa_plus_2", worst2,
                                poison_lower_bound(d, kappa)));
  rep.seconds = sw.seconds();
  return rep;
}

/// Effective rank of A at the first iterate with loss below loss_stop, with
/// and without special sequences, seed by seed.
inline SuiteReport verify_greedy(const ExperimentConfig& nospecial, const ExperimentConfig& special,
                                 double min_gap = 1.0, std::size_t min_seeds = 3) {
  detail::Stopwatch sw;
  SuiteReport rep{"greedy"};
  const auto outcomes = run_arms({nospecial, special});
  std::size_t wins = 0;
  const std::size_t n = std::min(outcomes[0].runs.size(), outcomes[1].runs.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = outcomes[0].runs[i];
    const auto& b = outcomes[1].runs[i];
    auto rank_at_stop = [](const RunSummary& r) {
      if (!r.ok || !r.first_below_stop) return static_cast<double>(NAN);
      return r.first_below_stop->probe("eff_rank").value_or(NAN);
    };
    const double ra = rank_at_stop(a), rb = rank_at_stop(b);
    const double gap = rb - ra;
    if (gap >= min_gap) ++wins;
    rep.notes.push_back("seed " + std::to_string(a.seed) + ": eff_rank special " +
                        format_double(rb) + ", without " + format_double(ra));
  }
  rep.checks.push_back(at_least("seeds_with_gap", static_cast<double>(wins),
                                static_cast<double>(min_seeds)));
  rep.seconds = sw.seconds();
  return rep;
}

}  // namespace ssmlab
