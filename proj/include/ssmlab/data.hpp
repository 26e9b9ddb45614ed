#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssmlab/errors.hpp"
#include "ssmlab/head.hpp"
#include "ssmlab/rng.hpp"
#include "ssmlab/ssm.hpp"

namespace ssmlab {

struct LabeledSequence {
  std::vector<double> x;
  double y = 0.0;
};

/// n >= 1 labeled sequences sharing one length kappa >= 2.
class TrainingSet {
 public:
  explicit TrainingSet(std::vector<LabeledSequence> items) : items_(std::move(items)) {
    if (items_.empty()) throw DomainError("TrainingSet: at least one sequence is required");
    const std::size_t k = items_.front().x.size();
    if (k < 2) throw DomainError("TrainingSet: sequence length must be at least 2");
    for (const auto& it : items_) {
      if (it.x.size() != k) throw DomainError("TrainingSet: sequences differ in length");
      if (!std::isfinite(it.y)) throw DomainError("TrainingSet: non-finite label");
    }
  }

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t length() const noexcept { return items_.front().x.size(); }
  const LabeledSequence& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<LabeledSequence>& items() const noexcept { return items_; }
  auto begin() const noexcept { return items_.begin(); }
  auto end() const noexcept { return items_.end(); }

 private:
  std::vector<LabeledSequence> items_;
};

/// Which positions of a length-`length` sequence carry N(0,1) entries.
/// Indices are 1-based, as in the experiment tables.
struct SequenceSpec {
  std::size_t length = 0;
  std::vector<std::size_t> nonzero_indices;
  std::size_t count = 0;
  std::uint64_t seed = 0;
};

struct InitSpec {
  std::size_t d = 0;
  double sd_a = 0.0;
  std::optional<double> sd_bc;  // absent: B = C = 1 (held fixed)
  double diff = 0.0;
  /// Entry j+3 (1-based) is set to entry 1 minus factor_j * diff.
  std::vector<double> extension_factors;
  /// Constants added to every entry of A and B after sampling (speed-up
  /// variants of the larger runs). Zero leaves the recipe untouched.
  double shift_a = 0.0;
  double shift_b = 0.0;
  /// Take |N(0, sd)| before sorting. Off reproduces the signed variant.
  bool absolute = true;
  std::uint64_t seed = 0;
};

/// Membership diagnostics for the initialization family
/// alpha * (1, zeta_2, ..., zeta_d), alpha in (0, 1/(2d)), 1 > zeta_2 > ... > 0.
struct InitReport {
  bool all_positive = false;
  bool strictly_descending = false;
  bool below_half_inverse_d = false;
  bool in_i0() const noexcept { return all_positive && strictly_descending && below_half_inverse_d; }
};

struct InitDraw {
  std::vector<double> a, b, c;
  InitReport report;
  DiagonalSSM ssm() const { return DiagonalSSM(a, b, c); }
};

/// d-dimensional form of the two-state teacher: A = diag(1,0,...,0), B = C = 1.
/// Impulse response (d, 1, 1, ...).
inline DiagonalSSM canonical_teacher(std::size_t d) {
  if (d < 2) throw DomainError("canonical_teacher: d must be at least 2");
  std::vector<double> a(d, 0.0);
  a[0] = 1.0;
  return DiagonalSSM::with_unit_io(std::move(a));
}

/// Two-state teacher A = diag(1, 0), B = C^T = (1, sqrt(d-1)); same mapping as
/// canonical_teacher(d).
inline DiagonalSSM compact_teacher(std::size_t d) {
  if (d < 2) throw DomainError("compact_teacher: d must be at least 2");
  const double r = std::sqrt(static_cast<double>(d - 1));
  return DiagonalSSM({1.0, 0.0}, {1.0, r}, {1.0, r});
}

/// Teacher with A = diag(values), B = C = 1. Keeps its own dimension.
inline DiagonalSSM diag_teacher(const std::vector<double>& values) {
  if (values.empty()) throw DomainError("diag_teacher: values must be non-empty");
  return DiagonalSSM::with_unit_io(values);
}

/// e_index (1-based) in R^length.
inline std::vector<double> unit_sequence(std::size_t length, std::size_t index) {
  if (index == 0 || index > length) throw DomainError("unit_sequence: index out of range");
  std::vector<double> x(length, 0.0);
  x[index - 1] = 1.0;
  return x;
}

inline std::vector<std::vector<double>> gaussian_sequences(const SequenceSpec& spec,
                                                           CounterRng& rng) {
  for (std::size_t idx : spec.nonzero_indices)
    if (idx == 0 || idx > spec.length)
      throw DomainError("gaussian_sequences: index " + std::to_string(idx) +
                        " outside [1, " + std::to_string(spec.length) + "]");
  std::vector<std::vector<double>> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    std::vector<double> x(spec.length, 0.0);
    for (std::size_t idx : spec.nonzero_indices) x[idx - 1] = rng.normal();
    out.push_back(std::move(x));
  }
  return out;
}

inline std::vector<std::vector<double>> gaussian_sequences(const SequenceSpec& spec) {
  CounterRng rng(spec.seed);
  return gaussian_sequences(spec, rng);
}

inline TrainingSet label_set(const DiagonalSSM& teacher, const Head& head,
                             const std::vector<std::vector<double>>& xs) {
  std::vector<LabeledSequence> items;
  items.reserve(xs.size());
  for (const auto& x : xs) items.push_back({x, head_forward(head, forward(teacher, x))});
  return TrainingSet(std::move(items));
}

inline TrainingSet label_set(const DiagonalSSM& teacher,
                             const std::vector<std::vector<double>>& xs) {
  return label_set(teacher, identity_head(), xs);
}

/// {(e_1, y)} labeled by the canonical teacher.
inline TrainingSet s1_set(std::size_t length, std::size_t d) {
  return label_set(canonical_teacher(d), {unit_sequence(length, 1)});
}

/// {(e_1, y), (e_{length-1}, y')} labeled by the canonical teacher.
inline TrainingSet s2_set(std::size_t length, std::size_t d) {
  return label_set(canonical_teacher(d),
                   {unit_sequence(length, 1), unit_sequence(length, length - 1)});
}

inline InitReport check_init(const std::vector<double>& a) {
  InitReport r;
  const double d = static_cast<double>(a.size());
  r.all_positive = std::all_of(a.begin(), a.end(), [](double v) { return v > 0.0; });
  r.strictly_descending = true;
  for (std::size_t j = 1; j < a.size(); ++j)
    if (!(a[j] < a[j - 1])) r.strictly_descending = false;
  r.below_half_inverse_d = !a.empty() && a.front() < 1.0 / (2.0 * d);
  return r;
}

namespace detail {

inline std::vector<double> sorted_draw(std::size_t d, double sd, bool absolute, CounterRng& rng) {
  std::vector<double> v(d);
  for (auto& x : v) {
    x = rng.normal(0.0, sd);
    if (absolute) x = std::abs(x);
  }
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

inline void apply_gaps(std::vector<double>& v, double diff, const std::vector<double>& factors) {
  if (v.size() >= 2) v[1] = v[0] - diff;
  for (std::size_t j = 0; j < factors.size() && j + 2 < v.size(); ++j)
    v[j + 2] = v[0] - factors[j] * diff;
}

}  // namespace detail

/// Near-zero initialization anchored to the reference trajectory: sorted
/// |N(0, sd)| draws with the runner-up pinned `diff` below the leader. I0
/// membership is reported, never enforced.
inline InitDraw sample_init(const InitSpec& spec, CounterRng& rng) {
  if (spec.d == 0) throw DomainError("sample_init: d must be positive");
  if (!(spec.sd_a > 0.0)) throw DomainError("sample_init: sd_a must be positive");
  if (spec.diff < 0.0) throw DomainError("sample_init: diff must be non-negative");
  InitDraw out;
  CounterRng a_rng = rng.split(1), b_rng = rng.split(2), c_rng = rng.split(3);
  out.a = detail::sorted_draw(spec.d, spec.sd_a, spec.absolute, a_rng);
  detail::apply_gaps(out.a, spec.diff, spec.extension_factors);
  if (spec.sd_bc) {
    out.b = detail::sorted_draw(spec.d, *spec.sd_bc, spec.absolute, b_rng);
    detail::apply_gaps(out.b, spec.diff, spec.extension_factors);
    out.c = detail::sorted_draw(spec.d, *spec.sd_bc, spec.absolute, c_rng);
  } else {
    out.b.assign(spec.d, 1.0);
    out.c.assign(spec.d, 1.0);
  }
  for (auto& v : out.a) v += spec.shift_a;
  if (spec.sd_bc)
    for (auto& v : out.b) v += spec.shift_b;
  out.report = check_init(out.a);
  return out;
}

inline InitDraw sample_init(const InitSpec& spec) {
  CounterRng rng(spec.seed);
  return sample_init(spec, rng);
}

/// `count` Chebyshev points of the first kind scaled into (-radius, radius).
inline std::vector<double> chebyshev_nodes(std::size_t count, double radius = 0.95) {
  std::vector<double> nodes(count);
  for (std::size_t i = 0; i < count; ++i)
    nodes[i] = radius * std::cos((2.0 * static_cast<double>(i) + 1.0) * std::numbers::pi /
                                 (2.0 * static_cast<double>(count)));
  return nodes;
}

struct AdversarialOptions {
  double max_condition = 1e12;
};

/// Student (diag(nodes), 1, g) whose first `kappa` Markov parameters equal the
/// teacher's and whose remaining d - kappa parameters exceed the teacher's by
/// exactly eps. g solves the transposed Vandermonde system V^T g = r with
/// V_{jk} = nodes_j^k.
inline DiagonalSSM adversarial_zero_loss(const DiagonalSSM& teacher, std::size_t kappa,
                                         std::size_t d, double eps,
                                         const std::vector<double>& nodes,
                                         AdversarialOptions opts = {}) {
  if (d <= kappa) throw DomainError("adversarial_zero_loss: need d > kappa");
  if (!(eps > 0.0)) throw DomainError("adversarial_zero_loss: eps must be positive");
  if (nodes.size() != d) throw DomainError("adversarial_zero_loss: need exactly d nodes");
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (nodes[i] == nodes[j]) throw DomainError("adversarial_zero_loss: nodes must be distinct");

  auto r = impulse_response(teacher, d);
  for (std::size_t i = kappa; i < d; ++i) r[i] += eps;

  Eigen::MatrixXd vt(d, d);  // (V^T)_{kj} = nodes_j^k
  for (std::size_t j = 0; j < d; ++j) {
    double p = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      vt(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = p;
      p *= nodes[j];
    }
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(vt);
  const double cond = 1.0 / lu.rcond();
  if (!(cond <= opts.max_condition))
    throw IllConditionedError(
        "adversarial_zero_loss: Vandermonde system is ill-conditioned (cond_1 ~ " +
            std::to_string(cond) + "); choose better separated nodes",
        cond);
  const Eigen::Map<const Eigen::VectorXd> rhs(r.data(), static_cast<Eigen::Index>(d));
  Eigen::VectorXd sol = lu.solve(rhs);
  sol += lu.solve(rhs - vt * sol);  // one step of iterative refinement
  std::vector<double> g(sol.data(), sol.data() + sol.size());
  return DiagonalSSM(nodes, std::vector<double>(d, 1.0), std::move(g));
}

inline DiagonalSSM adversarial_zero_loss(const DiagonalSSM& teacher, std::size_t kappa,
                                         std::size_t d, double eps) {
  return adversarial_zero_loss(teacher, kappa, d, eps, chebyshev_nodes(d));
}

}  // namespace ssmlab
