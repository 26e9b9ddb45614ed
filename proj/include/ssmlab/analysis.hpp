#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ssmlab/errors.hpp"

namespace ssmlab {

/// exp of the Shannon entropy of the l1-normalized values.
inline double effective_rank(const std::vector<double>& values) {
  double total = 0.0;
  for (double v : values) {
    if (!(v >= 0.0)) throw DomainError("effective_rank: values must be non-negative");
    total += v;
  }
  if (!(total > 0.0)) throw DomainError("effective_rank: undefined for an all-zero input");
  double entropy = 0.0;
  for (double v : values) {
    if (v == 0.0) continue;
    const double p = v / total;
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

/// Effective rank of diag(a), i.e. of |a_j|.
inline double effective_rank_of_diagonal(const std::vector<double>& a) {
  std::vector<double> mags(a.size());
  std::transform(a.begin(), a.end(), mags.begin(), [](double v) { return std::abs(v); });
  return effective_rank(mags);
}

// Closed forms of the two-example objective
//   l(a) = 1/2 [ (1 - sum a_j^{L-1})^2 + (1 - sum a_j)^2 ]
// obtained from the canonical teacher with inputs e_1 and e_{L-1}.

inline double s2_loss(const std::vector<double>& a, std::size_t L) {
  double p = 0.0, q = 0.0;
  for (double v : a) {
    p += std::pow(v, static_cast<double>(L - 1));
    q += v;
  }
  return 0.5 * ((1.0 - p) * (1.0 - p) + (1.0 - q) * (1.0 - q));
}

inline std::vector<double> s2_gradient(const std::vector<double>& a, std::size_t L) {
  const double l1 = static_cast<double>(L - 1);
  double p = 0.0, q = 0.0;
  for (double v : a) {
    p += std::pow(v, l1);
    q += v;
  }
  std::vector<double> g(a.size());
  for (std::size_t j = 0; j < a.size(); ++j)
    g[j] = l1 * (p - 1.0) * std::pow(a[j], l1 - 1.0) + (q - 1.0);
  return g;
}

/// Row-major d x d Hessian of s2_loss.
inline std::vector<double> s2_hessian(const std::vector<double>& a, std::size_t L) {
  const std::size_t d = a.size();
  const double l1 = static_cast<double>(L - 1);
  double p = 0.0;
  for (double v : a) p += std::pow(v, l1);
  std::vector<double> h(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double v = l1 * l1 * std::pow(a[i], l1 - 1.0) * std::pow(a[j], l1 - 1.0) + 1.0;
      if (i == j) v -= l1 * (l1 - 1.0) * std::pow(a[j], l1 - 2.0) * (1.0 - p);
      h[i * d + j] = v;
    }
  return h;
}

struct SaddleReport {
  double s = 0.0;
  double loss_at_s = 0.0;
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;
  std::size_t d = 0;
  std::size_t L = 0;
};

/// Derivative of the two-example objective along any single coordinate at a*1:
///   (L-1)(d a^{L-1} - 1) a^{L-2} + (d a - 1).
inline double saddle_equation(double a, std::size_t d, std::size_t L) {
  const double dd = static_cast<double>(d), l1 = static_cast<double>(L - 1);
  return l1 * (dd * std::pow(a, l1) - 1.0) * std::pow(a, l1 - 1.0) + (dd * a - 1.0);
}

/// Unique critical point s*1 of the two-example objective on span{1}, found by
/// bisection on [1/d, 3/d], with its value and Hessian eigenvalues.
inline SaddleReport find_saddle(std::size_t d, std::size_t L, double tol = 1e-14) {
  if (d < 8) throw DomainError("find_saddle: requires d >= 8 (got " + std::to_string(d) + ")");
  if (L < 7 || L % 2 == 0)
    throw DomainError("find_saddle: requires odd L >= 7 (got " + std::to_string(L) + ")");
  const double dd = static_cast<double>(d);
  double lo = 1.0 / dd, hi = 3.0 / dd;
  const double flo = saddle_equation(lo, d, L), fhi = saddle_equation(hi, d, L);
  if (!(flo < 0.0 && fhi > 0.0))
    throw DomainError("find_saddle: no sign change on [1/d, 3/d]; (d, L) outside the supported regime");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (saddle_equation(mid, d, L) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  SaddleReport r;
  r.d = d;
  r.L = L;
  r.s = 0.5 * (lo + hi);
  const double s = r.s, l1 = static_cast<double>(L - 1), l2 = static_cast<double>(L - 2);
  const double ds = dd * std::pow(s, l1);
  r.loss_at_s = 0.5 * ((1.0 - ds) * (1.0 - ds) + (1.0 - dd * s) * (1.0 - dd * s));
  r.lambda_plus = l1 * ((2.0 * l1 - 1.0) * ds - l2) * std::pow(s, l2 - 1.0) + dd;
  r.lambda_minus = l1 * l2 * (ds - 1.0) * std::pow(s, l2 - 1.0);
  return r;
}

/// Eigenvalues of (a - b) I + b 11^T in dimension d: a + (d-1) b on the
/// all-ones direction and a - b on its complement.
inline std::pair<double, double> rank_one_shift_eigs(double a, double b, std::size_t d) {
  if (d < 2) throw DomainError("rank_one_shift_eigs: d must be at least 2");
  return {a + static_cast<double>(d - 1) * b, a - b};
}

/// ||a - mean(a) 1||_2, the distance from span{1}.
inline double w1_distance(const std::vector<double>& a) {
  if (a.empty()) return 0.0;
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= static_cast<double>(a.size());
  double acc = 0.0;
  for (double v : a) acc += (v - mean) * (v - mean);
  return std::sqrt(acc);
}

/// Solution at time t of y' = -H (y - s1), H the Hessian at the saddle:
/// the span{1} part relaxes with rate lambda_plus, the rest grows with
/// rate -lambda_minus.
inline std::vector<double> linearized_trajectory(const std::vector<double>& a0,
                                                 const SaddleReport& report, double t) {
  if (a0.empty()) return {};
  double beta1 = 0.0;
  for (double v : a0) beta1 += v;
  beta1 /= static_cast<double>(a0.size());
  const double along = std::exp(-t * report.lambda_plus) * (beta1 - report.s) + report.s;
  const double across = std::exp(-t * report.lambda_minus);
  std::vector<double> out(a0.size());
  for (std::size_t j = 0; j < a0.size(); ++j) out[j] = along + across * (a0[j] - beta1);
  return out;
}

/// Lower bound on the PL coefficient of the two-example objective on the set of
/// points whose entries spread by more than b:
///   1/2 min{ 2d, ((L-1) bt)^2 / 4, (bh / (bh + 2))^2 },  bt = (b/2)^{L-2}, bh = (b/6)^{L-2}.
inline double pl_coefficient(double b, std::size_t d, std::size_t L) {
  if (!(b > 0.0)) throw DomainError("pl_coefficient: b must be positive");
  if (L < 2) throw DomainError("pl_coefficient: L must be at least 2");
  const double l2 = static_cast<double>(L - 2);
  const double bt = std::pow(b / 2.0, l2);
  const double bh = std::pow(b / 6.0, l2);
  const double branch2 = std::pow(static_cast<double>(L - 1) * bt, 2) / 4.0;
  const double branch3 = std::pow(bh / (bh + 2.0), 2);
  return 0.5 * std::min({2.0 * static_cast<double>(d), branch2, branch3});
}

/// max_i a_i - min_i a_i > b.
inline bool outside_diff_set(const std::vector<double>& a, double b) {
  if (a.empty()) return false;
  const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  return *hi - *lo > b;
}

/// min{0.1, (1 - 0.6^{1/(kappa-1)}) / (9d)}.
inline double poison_lower_bound(std::size_t d, std::size_t kappa) {
  if (d < 8) throw DomainError("poison_lower_bound: requires d >= 8");
  if (kappa < 7) throw DomainError("poison_lower_bound: requires kappa >= 7");
  const double v = (1.0 - std::pow(0.6, 1.0 / static_cast<double>(kappa - 1))) /
                   (9.0 * static_cast<double>(d));
  return std::min(0.1, v);
}

}  // namespace ssmlab
