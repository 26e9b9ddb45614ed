#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ssmlab/analysis.hpp"
#include "ssmlab/config.hpp"
#include "ssmlab/data.hpp"
#include "ssmlab/loss.hpp"
#include "ssmlab/optimize.hpp"

namespace ssmlab {

/// Held-out sequences with their teacher outputs.
struct TestSet {
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
};

struct Experiment {
  DiagonalSSM teacher{DiagonalSSM::zero(1)};
  Head teacher_head = identity_head();
  std::optional<TrainingSet> train;
  Params init{DiagonalSSM::zero(1)};
  InitReport init_report;
  std::optional<TestSet> test;  // MLP runs only
};

/// ||pred - y||_2 / ||y||_2 over the test set, so the zero map scores 1.
inline double relative_test_error(const Params& p, const TestSet& test) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < test.xs.size(); ++i) {
    const double pred = head_forward(p.head, forward(p.ssm, test.xs[i]));
    num += (pred - test.ys[i]) * (pred - test.ys[i]);
    den += test.ys[i] * test.ys[i];
  }
  if (!(den > 0.0)) throw DomainError("relative_test_error: teacher outputs are all zero");
  return std::sqrt(num / den);
}

/// Everything a run needs, derived deterministically from (config, seed).
inline Experiment build_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  const CounterRng root(seed);
  Experiment ex;
  ex.teacher = cfg.teacher.kind == "canonical" ? canonical_teacher(cfg.teacher.d)
                                               : diag_teacher(cfg.teacher.values);
  if (cfg.teacher.head_width) ex.teacher_head = teacher_head(cfg.teacher.head_width);

  const std::size_t kappa = cfg.data.kappa;
  if (cfg.data.preset == "s1") {
    ex.train = s1_set(kappa, cfg.teacher.d);
  } else if (cfg.data.preset == "s2") {
    ex.train = s2_set(kappa, cfg.teacher.d);
  } else {
    CounterRng base_rng = root.split(10), special_rng = root.split(11);
    auto xs = gaussian_sequences(
        {kappa, cfg.data.baseline->indices, cfg.data.baseline->count, seed}, base_rng);
    if (cfg.data.use_special) {
      auto sp = gaussian_sequences(
          {kappa, cfg.data.special->indices, cfg.data.special->count, seed}, special_rng);
      xs.insert(xs.end(), sp.begin(), sp.end());
    }
    ex.train = label_set(ex.teacher, ex.teacher_head, xs);
  }

  InitSpec is;
  is.d = cfg.student.d;
  is.sd_a = cfg.init.sd_a;
  is.sd_bc = cfg.init.sd_bc;
  is.diff = cfg.init.diff.resolve(cfg.init.sd_a);
  is.extension_factors = cfg.init.extension_factors;
  is.shift_a = cfg.init.shift_a;
  is.shift_b = cfg.init.shift_b;
  is.absolute = cfg.init.absolute;
  is.seed = seed;
  CounterRng init_rng = root.split(20);
  const auto draw = sample_init(is, init_rng);
  ex.init_report = draw.report;
  ex.init.ssm = draw.ssm();
  if (cfg.student.head.mlp) {
    CounterRng head_rng = root.split(21);
    ex.init.head = sample_head(cfg.student.head.width, cfg.student.head.init_sd, head_rng);

    CounterRng test_rng = root.split(30);
    std::vector<std::size_t> all(cfg.eval.test_length);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i + 1;
    TestSet test;
    test.xs = gaussian_sequences({cfg.eval.test_length, all, cfg.eval.test_set_size, seed},
                                 test_rng);
    for (const auto& x : test.xs) test.ys.push_back(head_forward(ex.teacher_head, forward(ex.teacher, x)));
    ex.test = std::move(test);
  }
  return ex;
}

/// Generalization measure reported as gen_norm: normalized Markov-parameter
/// error for linear runs, relative held-out error for MLP runs.
inline double generalization_measure(const Params& p, const Experiment& ex,
                                     const ExperimentConfig& cfg) {
  if (ex.test) return relative_test_error(p, *ex.test);
  return normalized_generalization_error(p.ssm, ex.teacher, cfg.eval.gen_length);
}

inline Probe standard_probe(const Experiment& ex, const ExperimentConfig& cfg) {
  return [&ex, &cfg](double, const Params& p) {
    ProbeValues v;
    v.emplace_back("gen_norm", generalization_measure(p, ex, cfg));
    double er = NAN;
    try {
      er = effective_rank_of_diagonal(p.ssm.a());
    } catch (const DomainError&) {
    }
    v.emplace_back("eff_rank", er);
    v.emplace_back("gamma0", characterize(p.ssm, p.head, *ex.train).gammas.front());
    v.emplace_back("w1dist", w1_distance(p.ssm.a()));
    return v;
  };
}

struct RunSummary {
  std::string label;
  std::uint64_t seed = 0;
  bool ok = false;
  int exit_code = 0;
  std::string message;
  double final_loss = NAN;
  double gen_norm = NAN;
  double gen_error_kappa2 = NAN;  // unnormalized, over kappa + 2
  double eff_rank = NAN;
  std::size_t iterations = 0;
  std::optional<double> steady_time;
  std::optional<TrajectoryRow> first_below_stop;
  bool init_in_i0 = false;
  bool discrete = false;  // adaptive_gd / adam: loss_stop applies
  std::vector<double> final_a;
  OptimizeResult result;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(const std::string& path, const TrajectoryLog& log, std::size_t d) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "step,time,loss,gen_norm,eff_rank,gamma0,w1dist";
  for (std::size_t j = 1; j <= d; ++j) out << ",a_" << j;
  out << '\n';
  for (const auto& row : log.rows) {
    out << row.step << ',' << format_double(row.time) << ',' << format_double(row.loss);
    for (const char* k : {"gen_norm", "eff_rank", "gamma0", "w1dist"})
      out << ',' << format_double(row.probe(k).value_or(NAN));
    for (double a : row.a) out << ',' << format_double(a);
    out << '\n';
  }
}

/// Run one (config, seed) pair. Numerical failures are captured in the summary
/// (exit code 2) rather than thrown.
inline RunSummary run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunSummary s;
  s.label = cfg.label();
  s.seed = seed;
  try {
    const Experiment ex = build_experiment(cfg, seed);
    s.init_in_i0 = ex.init_report.in_i0();
    s.discrete = cfg.optimizer.kind != OptimizerKind::gradient_flow;
    auto res = optimize(ex.init, *ex.train, cfg.optimizer, standard_probe(ex, cfg));
    s.final_loss = res.final_loss;
    s.gen_norm = generalization_measure(res.final, ex, cfg);
    s.gen_error_kappa2 = generalization_error(res.final.ssm, ex.teacher, cfg.data.kappa + 2);
    s.eff_rank = effective_rank_of_diagonal(res.final.ssm.a());
    s.iterations = res.iterations;
    s.steady_time = res.steady_time;
    s.first_below_stop = res.first_below_stop;
    s.final_a = res.final.ssm.a();
    s.result = std::move(res);
    s.ok = true;
  } catch (const NumericalError& e) {
    s.exit_code = 2;
    s.message = e.what();
  } catch (const DomainError& e) {
    s.exit_code = 2;
    s.message = e.what();
  }
  return s;
}

/// Worker count: SSMLAB_THREADS if set and positive, else the hardware count.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("SSMLAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

/// Run tasks on a bounded pool; results keep task order.
template <class T>
std::vector<T> run_parallel(const std::vector<std::function<T()>>& tasks, std::size_t workers) {
  std::vector<T> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) results[i] = tasks[i]();
  };
  workers = std::max<std::size_t>(1, std::min(workers, tasks.size()));
  if (workers == 1) {
    work();
    return results;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  return results;
}

struct Stat {
  double mean = NAN;
  double std = NAN;
};

inline Stat mean_std(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  s.mean = m;
  s.std = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json run_to_json(const RunSummary& s) {
  Json j = {{"seed", s.seed}, {"ok", s.ok}};
  if (!s.ok) {
    j["error"] = s.message;
    return j;
  }
  j["final_loss"] = number_or_null(s.final_loss);
  j["gen_norm"] = number_or_null(s.gen_norm);
  j["gen_error_kappa_plus_2"] = number_or_null(s.gen_error_kappa2);
  j["eff_rank"] = number_or_null(s.eff_rank);
  j["iterations"] = s.iterations;
  j["init_in_i0"] = s.init_in_i0;
  j["final_a"] = s.final_a;
  if (s.steady_time) j["steady_time"] = *s.steady_time;
  if (s.discrete) j["reached_loss_stop"] = s.first_below_stop.has_value();
  if (s.first_below_stop) {
    j["first_below_stop"] = {
        {"step", s.first_below_stop->step},
        {"loss", s.first_below_stop->loss},
        {"eff_rank", number_or_null(s.first_below_stop->probe("eff_rank").value_or(NAN))}};
  }
  return j;
}

/// Per-seed finals plus mean and sample std over the successful seeds.
inline Json summarize(const std::string& label, const std::vector<RunSummary>& runs) {
  Json j;
  j["label"] = label;
  Json seeds = Json::array();
  std::vector<double> loss, gen, gen2, er;
  for (const auto& r : runs) {
    seeds.push_back(run_to_json(r));
    if (!r.ok) continue;
    loss.push_back(r.final_loss);
    gen.push_back(r.gen_norm);
    gen2.push_back(r.gen_error_kappa2);
    er.push_back(r.eff_rank);
  }
  j["runs"] = seeds;
  auto stat = [](const std::vector<double>& v) {
    const auto s = mean_std(v);
    return Json{{"mean", number_or_null(s.mean)}, {"std", number_or_null(s.std)}};
  };
  j["final_loss"] = stat(loss);
  j["gen_norm"] = stat(gen);
  j["gen_error_kappa_plus_2"] = stat(gen2);
  j["eff_rank"] = stat(er);
  return j;
}

}  // namespace ssmlab
