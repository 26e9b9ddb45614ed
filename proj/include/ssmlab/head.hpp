#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "ssmlab/errors.hpp"
#include "ssmlab/rng.hpp"

namespace ssmlab {

/// Scalar-to-scalar MLP with two ReLU hidden layers:
///   z -> d_out . relu(d_hidden * relu(d_in * z))
/// d_hidden is stored row-major (d_h x d_h). The same struct doubles as the
/// container for parameter gradients.
struct MLPHead {
  std::vector<double> d_in;
  std::vector<double> d_hidden;
  std::vector<double> d_out;

  MLPHead() = default;
  MLPHead(std::vector<double> in, std::vector<double> hidden, std::vector<double> out)
      : d_in(std::move(in)), d_hidden(std::move(hidden)), d_out(std::move(out)) {
    const std::size_t h = d_in.size();
    if (h == 0 || d_out.size() != h || d_hidden.size() != h * h)
      throw DomainError("MLPHead: inconsistent shapes for hidden width " + std::to_string(h));
  }

  static MLPHead zeros(std::size_t width) {
    return MLPHead(std::vector<double>(width, 0.0), std::vector<double>(width * width, 0.0),
                   std::vector<double>(width, 0.0));
  }

  std::size_t width() const noexcept { return d_in.size(); }
  double hidden(std::size_t row, std::size_t col) const { return d_hidden[row * width() + col]; }
  std::size_t parameter_count() const noexcept {
    return d_in.size() + d_hidden.size() + d_out.size();
  }

  friend bool operator==(const MLPHead&, const MLPHead&) = default;
};

/// sigma(z) = z. Lets plain-SSM code share the head-aware loss.
struct IdentityHead {
  friend bool operator==(const IdentityHead&, const IdentityHead&) = default;
};

using Head = std::variant<IdentityHead, MLPHead>;

inline Head identity_head() { return IdentityHead{}; }

inline bool is_identity(const Head& head) { return std::holds_alternative<IdentityHead>(head); }

namespace detail {

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
// Subderivative at 0 is taken as 0.
inline double relu_prime(double x) { return x > 0.0 ? 1.0 : 0.0; }

struct HeadActivations {
  std::vector<double> pre1, post1, pre2, post2;
  double out = 0.0;
};

inline HeadActivations activate(const MLPHead& head, double z) {
  const std::size_t h = head.width();
  HeadActivations act;
  act.pre1.resize(h);
  act.post1.resize(h);
  act.pre2.assign(h, 0.0);
  act.post2.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    act.pre1[k] = head.d_in[k] * z;
    act.post1[k] = relu(act.pre1[k]);
  }
  for (std::size_t i = 0; i < h; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < h; ++k) acc += head.hidden(i, k) * act.post1[k];
    act.pre2[i] = acc;
    act.post2[i] = relu(acc);
  }
  for (std::size_t i = 0; i < h; ++i) act.out += head.d_out[i] * act.post2[i];
  return act;
}

}  // namespace detail

inline double head_forward(const MLPHead& head, double z) { return detail::activate(head, z).out; }
inline double head_forward(const IdentityHead&, double z) { return z; }
inline double head_forward(const Head& head, double z) {
  return std::visit([z](const auto& h) { return head_forward(h, z); }, head);
}

/// d sigma / dz at z (the xi factor of the equation of motion for A).
inline double head_input_derivative(const MLPHead& head, double z) {
  const auto act = detail::activate(head, z);
  const std::size_t h = head.width();
  double xi = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    if (detail::relu_prime(act.pre2[i]) == 0.0) continue;
    double inner = 0.0;
    for (std::size_t k = 0; k < h; ++k)
      inner += head.hidden(i, k) * detail::relu_prime(act.pre1[k]) * head.d_in[k];
    xi += head.d_out[i] * inner;
  }
  return xi;
}
inline double head_input_derivative(const IdentityHead&, double) { return 1.0; }
inline double head_input_derivative(const Head& head, double z) {
  return std::visit([z](const auto& h) { return head_input_derivative(h, z); }, head);
}

/// Reverse-mode gradients of upstream * head_forward(head, z) with respect to
/// (d_in, d_hidden, d_out).
inline MLPHead head_param_gradients(const MLPHead& head, double z, double upstream) {
  const std::size_t h = head.width();
  MLPHead g = MLPHead::zeros(h);
  if (upstream == 0.0) return g;
  const auto act = detail::activate(head, z);
  std::vector<double> g2(h);
  for (std::size_t i = 0; i < h; ++i) {
    g.d_out[i] = upstream * act.post2[i];
    g2[i] = upstream * head.d_out[i] * detail::relu_prime(act.pre2[i]);
  }
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t k = 0; k < h; ++k) g.d_hidden[i * h + k] = g2[i] * act.post1[k];
  for (std::size_t k = 0; k < h; ++k) {
    double g1 = 0.0;
    for (std::size_t i = 0; i < h; ++i) g1 += g2[i] * head.hidden(i, k);
    g.d_in[k] = g1 * detail::relu_prime(act.pre1[k]) * z;
  }
  return g;
}

/// Smallest |preactivation| over both hidden layers; used to keep
/// finite-difference checks away from ReLU kinks.
inline double min_abs_preactivation(const MLPHead& head, double z) {
  const auto act = detail::activate(head, z);
  double m = INFINITY;
  for (double v : act.pre1) m = std::min(m, std::abs(v));
  for (double v : act.pre2) m = std::min(m, std::abs(v));
  return m;
}

/// Fixed head of the nonlinear teacher: d_in = 1, d_hidden = I, d_out = 1/2.
inline MLPHead teacher_head(std::size_t width) {
  std::vector<double> hidden(width * width, 0.0);
  for (std::size_t i = 0; i < width; ++i) hidden[i * width + i] = 1.0;
  return MLPHead(std::vector<double>(width, 1.0), std::move(hidden),
                 std::vector<double>(width, 0.5));
}

/// All entries i.i.d. N(0, sd).
inline MLPHead sample_head(std::size_t width, double sd, CounterRng& rng) {
  MLPHead head = MLPHead::zeros(width);
  for (auto& v : head.d_in) v = rng.normal(0.0, sd);
  for (auto& v : head.d_hidden) v = rng.normal(0.0, sd);
  for (auto& v : head.d_out) v = rng.normal(0.0, sd);
  return head;
}

}  // namespace ssmlab
