#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "ssmlab/analysis.hpp"
#include "ssmlab/checks.hpp"
#include "ssmlab/data.hpp"
#include "ssmlab/loss.hpp"
#include "ssmlab/oracles.hpp"

using namespace ssmlab;
using Catch::Matchers::WithinAbs;

namespace {

// Loss of (a, b, c) packed end to end, for finite differences.
double packed_loss(const std::vector<double>& p, const Head& head, const TrainingSet& set) {
  const std::size_t d = p.size() / 3;
  return loss(DiagonalSSM({p.begin(), p.begin() + static_cast<long>(d)},
                          {p.begin() + static_cast<long>(d), p.begin() + static_cast<long>(2 * d)},
                          {p.begin() + static_cast<long>(2 * d), p.end()}),
              head, set);
}

}  // namespace

TEST_CASE("zero student on the two-example set has loss 1") {
  CHECK(loss(DiagonalSSM::zero(4), s2_set(7, 10)) == 1.0);
}

TEST_CASE("loss on the two-example set equals the closed form") {
  const std::vector<double> a{0.3, 0.1, -0.05, 0.2};
  for (std::size_t L : {7u, 9u}) {
    CHECK_THAT(loss(DiagonalSSM::with_unit_io(a), s2_set(L, 10)), WithinAbs(s2_loss(a, L), 1e-15));
  }
}

TEST_CASE("analytic gradient matches central differences for a plain SSM") {
  CounterRng rng(101);
  const auto xs = gaussian_sequences({5, {1, 2, 3, 4, 5}, 4, 0}, rng);
  std::vector<LabeledSequence> items;
  for (const auto& x : xs) items.push_back({x, rng.normal()});
  const TrainingSet set(items);
  const DiagonalSSM ssm({0.4, -0.3, 0.7}, {1.2, -0.5, 0.3}, {0.8, 0.9, -1.1});
  const auto g = grad(ssm, set, true);
  std::vector<double> p = ssm.a();
  p.insert(p.end(), ssm.b().begin(), ssm.b().end());
  p.insert(p.end(), ssm.c().begin(), ssm.c().end());
  const auto num = oracle::central_gradient(
      [&](const std::vector<double>& q) { return packed_loss(q, identity_head(), set); }, p, 1e-6);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK_THAT(g.da[j], WithinAbs(num[j], 1e-8));
    CHECK_THAT(g.db[j], WithinAbs(num[3 + j], 1e-8));
    CHECK_THAT(g.dc[j], WithinAbs(num[6 + j], 1e-8));
  }
  const auto frozen = grad(ssm, set, false);
  CHECK(frozen.db == std::vector<double>(3, 0.0));
  CHECK(frozen.da == g.da);
}

TEST_CASE("equation of motion is minus the A-gradient") {
  CounterRng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto prob = detail::random_problem(rng, trial % 2 == 1, true);
    const auto ch = characterize(prob.ssm, prob.head, *prob.set);
    const auto pred = predicted_a_dot(prob.ssm, ch);
    const auto g = grad(prob.ssm, prob.head, *prob.set, true);
    for (std::size_t j = 0; j < pred.size(); ++j) CHECK_THAT(pred[j], WithinAbs(-g.da[j], 1e-10));
  }
}

TEST_CASE("gamma on the one-example set") {
  // S1 = {(e_1, 1)}: only x_1 is nonzero, so only gamma^(kappa-2) survives,
  // with value 2 (kappa-1) delta.
  const std::size_t kappa = 7;
  const auto ssm = DiagonalSSM::with_unit_io({0.2, 0.1});
  const auto ch = characterize(ssm, s1_set(kappa, 10));
  const double delta = 1.0 - (std::pow(0.2, 6) + std::pow(0.1, 6));
  for (std::size_t l = 0; l + 2 < kappa; ++l) CHECK(ch.gammas[l] == 0.0);
  CHECK_THAT(ch.gammas[kappa - 2], WithinAbs(2.0 * 6.0 * delta, 1e-14));
}

TEST_CASE("checks report the expected structure") {
  const auto eom = check_equation_of_motion(1, 10);
  CHECK(eom.pass);
  const auto fd = check_gradients(2, 10);
  CHECK(fd.pass);
}
