#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "ssmlab/ode.hpp"

using namespace ssmlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("exponential decay to tight tolerance") {
  OdeOptions o;
  o.rel_tol = 1e-12;
  o.abs_tol = 1e-14;
  const auto out = integrate([](double, const std::vector<double>& y,
                                std::vector<double>& dy) { dy[0] = -2.0 * y[0]; },
                             {1.0}, 0.0, {0.0, 0.5, 1.0, 3.0}, o);
  REQUIRE(out.size() == 4);
  CHECK(out[0][0] == 1.0);
  for (std::size_t i = 1; i < 4; ++i) {
    const double t = std::vector<double>{0.0, 0.5, 1.0, 3.0}[i];
    CHECK_THAT(out[i][0], WithinRel(std::exp(-2.0 * t), 1e-10));
  }
}

TEST_CASE("dense output of a harmonic oscillator") {
  OdeOptions o;
  o.rel_tol = 1e-10;
  o.abs_tol = 1e-12;
  DormandPrince45 s([](double, const std::vector<double>& y,
                       std::vector<double>& dy) { dy[0] = y[1]; dy[1] = -y[0]; },
                    {1.0, 0.0}, 0.0, o);
  double worst = 0.0;
  while (s.t() < 10.0) {
    s.step(10.0);
    const double mid = 0.5 * (s.t_prev() + s.t());
    const auto y = s.interpolate(mid);
    worst = std::max(worst, std::abs(y[0] - std::cos(mid)));
  }
  CHECK(s.t() == 10.0);
  CHECK(worst < 1e-7);
  CHECK_THAT(s.y()[0], WithinAbs(std::cos(10.0), 1e-8));
  CHECK(s.stats().accepted > 0);
  CHECK(s.stats().rhs_evals >= 6 * s.stats().accepted);
}

TEST_CASE("step never overshoots its limit") {
  DormandPrince45 s([](double, const std::vector<double>&, std::vector<double>& dy) { dy[0] = 1.0; },
                    {0.0}, 0.0);
  while (s.t() < 0.3) s.step(0.3);
  CHECK(s.t() == 0.3);
  CHECK_THROWS_AS(s.step(0.3), DomainError);
}

TEST_CASE("a right-hand side that is never finite raises IntegrationError") {
  DormandPrince45 s(
      [](double t, const std::vector<double>&, std::vector<double>& dy) {
        dy[0] = t > 0.0 ? NAN : 1.0;
      },
      {0.0}, 0.0);
  CHECK_THROWS_AS([&] { while (s.t() < 1.0) s.step(1.0); }(), IntegrationError);
}

TEST_CASE("bad tolerances are rejected") {
  OdeOptions o;
  o.rel_tol = 0.0;
  CHECK_THROWS_AS(DormandPrince45([](double, const std::vector<double>&,
                                     std::vector<double>& dy) { dy[0] = 0.0; },
                                  {0.0}, 0.0, o),
                  DomainError);
}
