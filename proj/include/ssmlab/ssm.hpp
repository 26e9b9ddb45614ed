#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ssmlab/errors.hpp"

namespace ssmlab {

/// Single-input single-output SSM with a diagonal state transition matrix.
///
/// The mapping realized on a length-k input x is
///   y = sum_{k'=0}^{k-1} (C A^{k'} B) x_{k-k'}
/// and is therefore fully determined by the impulse response (C A^{k'} B).
/// C is held as a vector; its row shape never matters here.
class DiagonalSSM {
 public:
  DiagonalSSM(std::vector<double> a, std::vector<double> b, std::vector<double> c)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    if (a_.empty()) throw DomainError("DiagonalSSM: dimension must be at least 1");
    if (b_.size() != a_.size() || c_.size() != a_.size())
      throw DomainError("DiagonalSSM: a, b, c must share one length (got " +
                        std::to_string(a_.size()) + ", " + std::to_string(b_.size()) +
                        ", " + std::to_string(c_.size()) + ")");
    auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(a_) || !finite(b_) || !finite(c_))
      throw DomainError("DiagonalSSM: parameters must be finite");
  }

  /// Student with B = 1, C = 1 and the given diagonal.
  static DiagonalSSM with_unit_io(std::vector<double> a) {
    const std::size_t d = a.size();
    return DiagonalSSM(std::move(a), std::vector<double>(d, 1.0), std::vector<double>(d, 1.0));
  }

  static DiagonalSSM zero(std::size_t d) {
    return DiagonalSSM(std::vector<double>(d, 0.0), std::vector<double>(d, 0.0),
                       std::vector<double>(d, 0.0));
  }

  std::size_t dim() const noexcept { return a_.size(); }
  const std::vector<double>& a() const noexcept { return a_; }
  const std::vector<double>& b() const noexcept { return b_; }
  const std::vector<double>& c() const noexcept { return c_; }

  friend bool operator==(const DiagonalSSM&, const DiagonalSSM&) = default;

 private:
  std::vector<double> a_;
  std::vector<double> b_;
  std::vector<double> c_;
};

/// Markov parameters (C A^{k'} B) for k' = 0..k-1, by running products.
inline std::vector<double> impulse_response(const DiagonalSSM& ssm, std::size_t k) {
  if (k == 0) throw DomainError("impulse_response: k must be positive");
  const auto& a = ssm.a();
  std::vector<double> power(ssm.dim());
  for (std::size_t j = 0; j < ssm.dim(); ++j) power[j] = ssm.b()[j] * ssm.c()[j];
  std::vector<double> out(k, 0.0);
  for (std::size_t step = 0; step < k; ++step) {
    double acc = 0.0;
    for (std::size_t j = 0; j < power.size(); ++j) {
      acc += power[j];
      power[j] *= a[j];
    }
    out[step] = acc;
  }
  return out;
}

/// Output on x = (x_1..x_k): sum of markov[k'] * x_{k-k'}.
inline double forward(const DiagonalSSM& ssm, std::span<const double> x) {
  if (x.empty()) throw DomainError("forward: input sequence must be non-empty");
  const auto markov = impulse_response(ssm, x.size());
  const std::size_t k = x.size();
  double y = 0.0;
  for (std::size_t kp = 0; kp < k; ++kp) y += markov[kp] * x[k - 1 - kp];
  return y;
}

/// Max over k' < k of |student markov - teacher markov|.
inline double generalization_error(const DiagonalSSM& student, const DiagonalSSM& teacher,
                                   std::size_t k) {
  const auto s = impulse_response(student, k);
  const auto t = impulse_response(teacher, k);
  double worst = 0.0;
  for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, std::abs(s[i] - t[i]));
  return worst;
}

/// Generalization error divided by the teacher's l-infinity impulse-response
/// norm over the same length, so the zero student scores exactly 1.
inline double normalized_generalization_error(const DiagonalSSM& student,
                                              const DiagonalSSM& teacher, std::size_t k) {
  const auto t = impulse_response(teacher, k);
  double scale = 0.0;
  for (double v : t) scale = std::max(scale, std::abs(v));
  if (scale == 0.0)
    throw DomainError("normalized_generalization_error: teacher impulse response is zero");
  return generalization_error(student, teacher, k) / scale;
}

}  // namespace ssmlab
