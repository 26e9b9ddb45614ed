#include "catch_amalgamated.hpp"

#include <vector>

#include "ssmlab/data.hpp"
#include "ssmlab/head.hpp"
#include "ssmlab/loss.hpp"
#include "ssmlab/oracles.hpp"

using namespace ssmlab;
using Catch::Matchers::WithinAbs;

namespace {

// Width-2 head that reproduces the identity: relu(z) - relu(-z) = z.
MLPHead identity_mlp() { return MLPHead({1.0, -1.0}, {1.0, 0.0, 0.0, 1.0}, {1.0, -1.0}); }

std::vector<double> flatten(const MLPHead& h) {
  std::vector<double> v = h.d_in;
  v.insert(v.end(), h.d_hidden.begin(), h.d_hidden.end());
  v.insert(v.end(), h.d_out.begin(), h.d_out.end());
  return v;
}

MLPHead unflatten(const std::vector<double>& v, std::size_t w) {
  return MLPHead({v.begin(), v.begin() + static_cast<long>(w)},
                 {v.begin() + static_cast<long>(w), v.begin() + static_cast<long>(w + w * w)},
                 {v.begin() + static_cast<long>(w + w * w), v.end()});
}

}  // namespace

TEST_CASE("shape validation") {
  CHECK_THROWS_AS(MLPHead({1.0}, {1.0, 0.0}, {1.0}), DomainError);
  CHECK_THROWS_AS(MLPHead({}, {}, {}), DomainError);
  CHECK(MLPHead::zeros(3).parameter_count() == 15);
}

TEST_CASE("teacher head at z = 2 gives 15 with input derivative 7.5") {
  const auto h = teacher_head(15);
  CHECK_THAT(head_forward(h, 2.0), WithinAbs(15.0, 1e-14));
  CHECK_THAT(head_input_derivative(h, 2.0), WithinAbs(7.5, 1e-14));
  CHECK(head_forward(h, -1.0) == 0.0);
  CHECK(head_input_derivative(h, -1.0) == 0.0);
}

TEST_CASE("identity head and its width-2 MLP form agree bit for bit") {
  const Head id = identity_head();
  const Head mlp = identity_mlp();
  for (double z : {-3.5, -1e-3, 0.25, 2.0, 17.0}) {
    CHECK(head_forward(id, z) == head_forward(mlp, z));
    CHECK(head_input_derivative(id, z) == head_input_derivative(mlp, z));
  }
  const auto set = s2_set(7, 10);
  const auto ssm = DiagonalSSM::with_unit_io({0.3, 0.2, 0.1});
  CHECK(loss(ssm, id, set) == loss(ssm, mlp, set));
  const auto g1 = grad(ssm, id, set, true);
  const auto g2 = grad(ssm, mlp, set, true);
  CHECK(g1.da == g2.da);
  CHECK(g1.db == g2.db);
  CHECK(g1.dc == g2.dc);
}

TEST_CASE("input derivative and parameter gradients match central differences") {
  CounterRng rng(17);
  int checked = 0;
  while (checked < 20) {
    const std::size_t w = 1 + rng.next_u64() % 6;
    const auto h = sample_head(w, 0.8, rng);
    const double z = rng.normal(0.0, 2.0);
    if (min_abs_preactivation(h, z) < 1e-3) continue;
    ++checked;
    const double fd = (head_forward(h, z + 1e-6) - head_forward(h, z - 1e-6)) / 2e-6;
    CHECK_THAT(head_input_derivative(h, z), WithinAbs(fd, 1e-7));

    const double up = 1.7;
    const auto g = flatten(head_param_gradients(h, z, up));
    const auto num = oracle::central_gradient(
        [&](const std::vector<double>& p) { return up * head_forward(unflatten(p, w), z); },
        flatten(h), 1e-6);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK_THAT(g[i], WithinAbs(num[i], 1e-7));
  }
}

TEST_CASE("sampled head is reproducible") {
  CounterRng r1(5), r2(5);
  CHECK(sample_head(4, 0.03, r1) == sample_head(4, 0.03, r2));
}
