#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "ssmlab/analysis.hpp"
#include "ssmlab/data.hpp"
#include "ssmlab/loss.hpp"
#include "ssmlab/oracles.hpp"

using namespace ssmlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("effective rank") {
  CHECK_THAT(effective_rank({1.0, 0.0, 0.0}), WithinAbs(1.0, 1e-15));
  CHECK_THAT(effective_rank({2.0, 2.0, 2.0, 2.0}), WithinRel(4.0, 1e-14));
  CHECK_THAT(effective_rank_of_diagonal({-1.0, 1.0}), WithinRel(2.0, 1e-14));
  // p = (3/4, 1/4): exp(-(.75 ln .75 + .25 ln .25))
  CHECK_THAT(effective_rank({3.0, 1.0}),
             WithinRel(std::exp(-(0.75 * std::log(0.75) + 0.25 * std::log(0.25))), 1e-14));
  CHECK_THROWS_AS(effective_rank({0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(effective_rank({1.0, -0.5}), DomainError);
}

TEST_CASE("two-example gradient and Hessian match finite differences") {
  const std::vector<double> a{0.3, 0.25, 0.1, -0.05, 0.2};
  const std::size_t L = 7;
  const auto g = s2_gradient(a, L);
  const auto num = oracle::central_gradient(
      [&](const std::vector<double>& x) { return s2_loss(x, L); }, a, 1e-6);
  for (std::size_t j = 0; j < a.size(); ++j) CHECK_THAT(g[j], WithinAbs(num[j], 1e-9));

  const auto h = s2_hessian(a, L);
  const auto H = oracle::central_hessian(
      [&](const std::vector<double>& x) { return s2_gradient(x, L); }, a, 1e-5);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      CHECK_THAT(h[i * a.size() + j], WithinAbs(H(static_cast<long>(i), static_cast<long>(j)), 1e-8));

  // The generic loss gradient agrees with the specialized one.
  const auto generic = grad(DiagonalSSM::with_unit_io(a), s2_set(L, 10), false).da;
  for (std::size_t j = 0; j < a.size(); ++j) CHECK_THAT(generic[j], WithinAbs(g[j], 1e-14));
}

TEST_CASE("saddle solves its equation and has the predicted spectrum") {
  for (std::size_t d : {8u, 16u, 32u})
    for (std::size_t L : {7u, 9u, 11u}) {
      const auto r = find_saddle(d, L);
      CHECK(r.s > 1.0 / static_cast<double>(d));
      CHECK(r.s < 3.0 / static_cast<double>(d));
      CHECK(std::abs(saddle_equation(r.s, d, L)) < 1e-12);
      const std::vector<double> at(d, r.s);
      for (double gj : s2_gradient(at, L)) CHECK(std::abs(gj) < 1e-12);
      CHECK_THAT(r.loss_at_s, WithinAbs(s2_loss(at, L), 1e-15));
      const auto ev = oracle::symmetric_eigenvalues(oracle::central_hessian(
          [&](const std::vector<double>& x) { return s2_gradient(x, L); }, at, 1e-6));
      CHECK_THAT(ev.back(), WithinRel(r.lambda_plus, 1e-6));
      CHECK_THAT(ev.front(), WithinAbs(r.lambda_minus, 1e-6 * std::abs(r.lambda_plus)));
      CHECK(r.lambda_minus < 0.0);
    }
  CHECK_THROWS_AS(find_saddle(7, 7), DomainError);
  CHECK_THROWS_AS(find_saddle(10, 8), DomainError);
  CHECK_THROWS_AS(find_saddle(10, 5), DomainError);
}

TEST_CASE("rank-one shift eigenvalues") {
  const auto [big, small] = rank_one_shift_eigs(2.0, 0.5, 4);
  CHECK(big == 3.5);
  CHECK(small == 1.5);
}

TEST_CASE("W1 distance to the symmetric line") {
  CHECK_THAT(w1_distance({0.2, 0.2, 0.2}), WithinAbs(0.0, 1e-15));
  const std::size_t d = 10;
  std::vector<double> e1(d, 0.0);
  e1[0] = 1.0;
  CHECK_THAT(w1_distance(e1), WithinAbs(std::sqrt(1.0 - 1.0 / d), 1e-15));
}

TEST_CASE("linearized trajectory starts at a0 and is constant at the saddle") {
  const auto r = find_saddle(10, 7);
  const std::vector<double> a0{0.11, 0.1, 0.12, 0.09, 0.1, 0.1, 0.13, 0.1, 0.1, 0.08};
  const auto at0 = linearized_trajectory(a0, r, 0.0);
  for (std::size_t j = 0; j < a0.size(); ++j) CHECK_THAT(at0[j], WithinAbs(a0[j], 1e-15));
  const std::vector<double> flat(10, r.s);
  for (double v : linearized_trajectory(flat, r, 3.0)) CHECK_THAT(v, WithinAbs(r.s, 1e-15));
}

TEST_CASE("PL coefficient and poisoning bound") {
  const double mu = pl_coefficient(0.5, 8, 7);
  const double bt = std::pow(0.25, 5), bh = std::pow(0.5 / 6.0, 5);
  CHECK_THAT(mu, WithinRel(0.5 * std::min({16.0, std::pow(6.0 * bt, 2) / 4.0,
                                           std::pow(bh / (bh + 2.0), 2)}), 1e-14));
  CHECK(mu > 0.0);
  CHECK_THROWS_AS(pl_coefficient(0.0, 8, 7), DomainError);

  CHECK(outside_diff_set({0.1, 0.7}, 0.5));
  CHECK_FALSE(outside_diff_set({0.1, 0.5}, 0.5));

  CHECK_THAT(poison_lower_bound(10, 7), WithinRel(9.068e-4, 1e-3));
  CHECK_THAT(poison_lower_bound(10, 7),
             WithinRel((1.0 - std::pow(0.6, 1.0 / 6.0)) / 90.0, 1e-14));
  CHECK_THROWS_AS(poison_lower_bound(7, 7), DomainError);
  CHECK_THROWS_AS(poison_lower_bound(10, 6), DomainError);
}
