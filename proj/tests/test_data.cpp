#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "ssmlab/analysis.hpp"
#include "ssmlab/data.hpp"

using namespace ssmlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("unit sequences and the two-example sets") {
  CHECK(unit_sequence(4, 2) == std::vector<double>{0, 1, 0, 0});
  CHECK_THROWS_AS(unit_sequence(4, 0), DomainError);
  CHECK_THROWS_AS(unit_sequence(4, 5), DomainError);

  const auto s1 = s1_set(7, 10);
  REQUIRE(s1.size() == 1);
  CHECK(s1[0].x == unit_sequence(7, 1));
  CHECK(s1[0].y == 1.0);

  const auto s2 = s2_set(7, 10);
  REQUIRE(s2.size() == 2);
  CHECK(s2[1].x == unit_sequence(7, 6));
  CHECK(s2[1].y == 1.0);
}

TEST_CASE("training set validation") {
  CHECK_THROWS_AS(TrainingSet({}), DomainError);
  CHECK_THROWS_AS(TrainingSet({{{1.0}, 0.0}}), DomainError);
  CHECK_THROWS_AS(TrainingSet({{{1.0, 0.0}, 0.0}, {{1.0, 0.0, 0.0}, 0.0}}), DomainError);
  CHECK_THROWS_AS(TrainingSet({{{1.0, 0.0}, NAN}}), DomainError);
}

TEST_CASE("gaussian sequences fill only the listed positions") {
  const SequenceSpec spec{6, {1, 2}, 50, 9};
  const auto xs = gaussian_sequences(spec);
  REQUIRE(xs.size() == 50);
  for (const auto& x : xs) {
    CHECK(x[0] != 0.0);
    CHECK(x[1] != 0.0);
    for (std::size_t k = 2; k < 6; ++k) CHECK(x[k] == 0.0);
  }
  CHECK(gaussian_sequences(spec) == xs);
  CHECK_THROWS_AS(gaussian_sequences({6, {7}, 1, 0}), DomainError);
}

TEST_CASE("initialization places the runner-up diff below the leader") {
  InitSpec s;
  s.d = 10;
  s.sd_a = 1e-3;
  s.diff = 0.05 * 1e-15;
  s.seed = 3;
  const auto draw = sample_init(s);
  CHECK(draw.a[1] == draw.a[0] - s.diff);
  for (std::size_t j = 2; j < 10; ++j) CHECK(draw.a[j] <= draw.a[j - 1]);
  CHECK(draw.b == std::vector<double>(10, 1.0));
  CHECK(draw.report.all_positive);
  CHECK(draw.report.below_half_inverse_d);

  s.extension_factors = {1.01, 1.05};
  const auto ext = sample_init(s);
  CHECK(ext.a[2] == ext.a[0] - 1.01 * s.diff);
  CHECK(ext.a[3] == ext.a[0] - 1.05 * s.diff);

  s.absolute = false;
  s.seed = 4;
  bool any_negative = false;
  for (std::uint64_t seed = 0; seed < 5 && !any_negative; ++seed) {
    s.seed = seed;
    for (double v : sample_init(s).a) any_negative |= v < 0.0;
  }
  CHECK(any_negative);
}

TEST_CASE("I0 membership report") {
  CHECK(check_init({0.04, 0.03, 0.01}).in_i0());
  CHECK_FALSE(check_init({0.2, 0.03, 0.01}).in_i0());   // 0.2 >= 1/(2d)
  CHECK_FALSE(check_init({0.04, 0.04, 0.01}).in_i0());  // not strict
  CHECK_FALSE(check_init({0.04, 0.03, -0.01}).in_i0());
}

TEST_CASE("Vandermonde student matches kappa Markov parameters and misses the rest by eps") {
  const auto teacher = canonical_teacher(12);
  const auto student = adversarial_zero_loss(teacher, 6, 12, 0.3);
  const auto s = impulse_response(student, 12);
  const auto t = impulse_response(teacher, 12);
  for (std::size_t k = 0; k < 6; ++k) CHECK_THAT(s[k], WithinAbs(t[k], 1e-9));
  for (std::size_t k = 6; k < 12; ++k) CHECK_THAT(s[k] - t[k], WithinAbs(0.3, 1e-9));
  CHECK_THAT(generalization_error(student, teacher, 6), WithinAbs(0.0, 1e-9));
  CHECK_THAT(generalization_error(student, teacher, 7), WithinAbs(0.3, 1e-9));
}

TEST_CASE("near-coincident Vandermonde nodes are rejected") {
  auto nodes = chebyshev_nodes(12);
  nodes[1] = nodes[0] - 1e-13;
  CHECK_THROWS_AS(adversarial_zero_loss(canonical_teacher(12), 6, 12, 0.3, nodes),
                  IllConditionedError);
  CHECK_THROWS_AS(adversarial_zero_loss(canonical_teacher(12), 12, 12, 0.3), DomainError);
}

TEST_CASE("Chebyshev nodes lie strictly inside the radius") {
  for (double v : chebyshev_nodes(9)) CHECK(std::abs(v) < 0.95);
  CHECK_THAT(chebyshev_nodes(1)[0], WithinAbs(0.95 * std::cos(M_PI / 2.0), 1e-15));
}
