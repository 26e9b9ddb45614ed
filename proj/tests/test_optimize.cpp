#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "ssmlab/data.hpp"
#include "ssmlab/optimize.hpp"

using namespace ssmlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Length-2 set {(e_1, 1)}: a scalar student predicts a, so the flow is
// a' = 2 (1 - a) with solution a(t) = 1 - (1 - a0) exp(-2t).
TrainingSet scalar_set() { return s1_set(2, 2); }

Params scalar_student(double a0) { return Params{DiagonalSSM::with_unit_io({a0})}; }

}  // namespace

TEST_CASE("gradient flow follows the closed-form scalar solution") {
  OptimizerSpec spec;
  spec.kind = OptimizerKind::gradient_flow;
  spec.timestamps = linspace_times(3.0, 31);
  spec.ode_rel_tol = 1e-12;
  spec.ode_abs_tol = 1e-14;
  spec.steady_loss = 0.0;
  const auto res = gradient_flow(scalar_student(0.2), scalar_set(), spec);
  REQUIRE(res.log.rows.size() == 31);
  for (const auto& row : res.log.rows)
    CHECK_THAT(row.a[0], WithinAbs(1.0 - 0.8 * std::exp(-2.0 * row.time), 1e-10));
  CHECK(res.log.rows.front().time == 0.0);
  CHECK(res.log.rows.back().time == 3.0);
  CHECK_FALSE(res.steady_time.has_value());
  CHECK(res.final.ssm.a() == res.log.rows.back().a);
}

TEST_CASE("gradient flow freezes once the loss is steady") {
  OptimizerSpec spec;
  spec.kind = OptimizerKind::gradient_flow;
  spec.timestamps = {0.0, 1.0, 100.0, 1e6};
  spec.steady_loss = 1e-12;
  const auto res = gradient_flow(scalar_student(0.2), scalar_set(), spec);
  REQUIRE(res.steady_time.has_value());
  CHECK(*res.steady_time < 100.0);
  CHECK(res.log.rows[2].a == res.log.rows[3].a);
  CHECK(res.final_loss <= 1e-12);
}

TEST_CASE("probes and the step observer see every state") {
  OptimizerSpec spec;
  spec.kind = OptimizerKind::gradient_flow;
  spec.timestamps = linspace_times(1.0, 5);
  std::size_t calls = 0;
  double prev_loss = INFINITY;
  bool monotone = true;
  const auto res = gradient_flow(
      scalar_student(0.2), scalar_set(), spec,
      [](double t, const Params& p) { return ProbeValues{{"twice_a", 2.0 * p.ssm.a()[0]}, {"t", t}}; },
      [&](double, const Params&, double l) {
        ++calls;
        monotone &= l <= prev_loss;
        prev_loss = l;
      });
  CHECK(calls == res.ode.accepted);
  CHECK(monotone);
  for (const auto& row : res.log.rows) {
    CHECK(row.probe("twice_a").value() == 2.0 * row.a[0]);
    CHECK(row.probe("t").value() == row.time);
    CHECK_FALSE(row.probe("missing").has_value());
  }
}

TEST_CASE("adaptive GD takes a normalized first step") {
  OptimizerSpec spec;
  spec.kind = OptimizerKind::adaptive_gd;
  spec.base_lr = 0.01;
  spec.max_iters = 1;
  spec.loss_stop = 0.0;
  const auto res = adaptive_gd(scalar_student(0.2), scalar_set(), spec);
  const double g = -2.0 * 0.8;  // d/da (1 - a)^2 at a = 0.2
  const double want = 0.2 - 0.01 * g / std::sqrt(g * g + 1e-6);
  CHECK_THAT(res.final.ssm.a()[0], WithinAbs(want, 1e-15));
  CHECK(res.iterations == 1);
}

TEST_CASE("adam first step has magnitude close to the learning rate") {
  OptimizerSpec spec;
  spec.kind = OptimizerKind::adam;
  spec.base_lr = 0.001;
  spec.max_iters = 1;
  spec.loss_stop = 0.0;
  const auto res = adam(scalar_student(0.2), scalar_set(), spec);
  CHECK_THAT(res.final.ssm.a()[0] - 0.2, WithinRel(0.001, 1e-6));
}

TEST_CASE("discrete runs record the first state below the stop threshold") {
  OptimizerSpec spec;
  spec.kind = OptimizerKind::adaptive_gd;
  spec.base_lr = 0.01;
  spec.loss_stop = 0.01;
  spec.extra_iters_after_stop = 5;
  spec.log_every = 1000;
  const auto res = optimize(scalar_student(0.2), scalar_set(), spec);
  REQUIRE(res.first_below_stop.has_value());
  const auto& row = *res.first_below_stop;
  CHECK(row.loss < 0.01);
  CHECK(res.iterations == row.step + 5);
  // Row 0, the crossing and the final state are always logged.
  CHECK(res.log.rows.front().step == 0);
  CHECK(res.log.rows.back().step == res.iterations);
  bool crossing_logged = false;
  for (const auto& r : res.log.rows) crossing_logged |= r.step == row.step;
  CHECK(crossing_logged);
}

TEST_CASE("adam trains an MLP head jointly with the SSM") {
  const auto teacher = diag_teacher({0.9, 0.5});
  const Head th = teacher_head(3);
  CounterRng rng(1);
  const auto xs = gaussian_sequences({4, {1, 2, 3, 4}, 16, 0}, rng);
  const auto set = label_set(teacher, th, xs);
  CounterRng hr(2);
  Params init{DiagonalSSM({0.3, 0.2}, {0.5, 0.4}, {0.5, 0.3}), sample_head(3, 0.5, hr)};
  OptimizerSpec spec;
  spec.kind = OptimizerKind::adam;
  spec.base_lr = 0.01;
  spec.train_bc = true;
  spec.max_iters = 500;
  spec.loss_stop = 0.0;
  spec.log_every = 100;
  const auto res = adam(init, set, spec);
  CHECK(res.final_loss < 0.5 * res.log.rows.front().loss);
  CHECK(std::get<MLPHead>(res.final.head) != std::get<MLPHead>(init.head));

  spec.train_head = false;
  const auto frozen = adam(init, set, spec);
  CHECK(std::get<MLPHead>(frozen.final.head) == std::get<MLPHead>(init.head));
}

TEST_CASE("spec validation") {
  OptimizerSpec spec;
  spec.kind = OptimizerKind::gradient_flow;
  CHECK_THROWS_AS(spec.validate(), DomainError);
  spec.timestamps = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS(spec.validate(), DomainError);
  spec.timestamps = {0.0, 1.0};
  CHECK_NOTHROW(spec.validate());
  spec.kind = OptimizerKind::adam;
  spec.base_lr = 0.0;
  CHECK_THROWS_AS(spec.validate(), DomainError);
  CHECK_THROWS_AS(linspace_times(1.0, 1), DomainError);
  CHECK(std::string(to_string(OptimizerKind::adaptive_gd)) == "adaptive_gd");
}
