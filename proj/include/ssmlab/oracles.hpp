#pragma once

// Independent reference computations used to cross-check the fast paths:
// dense matrix powers, finite-difference derivatives and a dense symmetric
// eigensolver.

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ssmlab/ssm.hpp"

namespace ssmlab::oracle {

/// C A^{k'} B with A assembled as a dense matrix and raised by repeated
/// matrix-vector products.
inline std::vector<double> dense_impulse_response(const DiagonalSSM& ssm, std::size_t k) {
  const auto d = static_cast<Eigen::Index>(ssm.dim());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd B(d), C(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    A(j, j) = ssm.a()[static_cast<std::size_t>(j)];
    B(j) = ssm.b()[static_cast<std::size_t>(j)];
    C(j) = ssm.c()[static_cast<std::size_t>(j)];
  }
  std::vector<double> out(k);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(d, d);
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = C.dot(power * B);
    power = power * A;
  }
  return out;
}

using ScalarFn = std::function<double(const std::vector<double>&)>;
using VectorFn = std::function<std::vector<double>(const std::vector<double>&)>;

inline std::vector<double> central_gradient(const ScalarFn& f, std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Symmetrized central-difference Jacobian of a gradient map.
inline Eigen::MatrixXd central_hessian(const VectorFn& grad, std::vector<double> x, double h) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd H(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double x0 = x[ui];
    x[ui] = x0 + h;
    const auto gp = grad(x);
    x[ui] = x0 - h;
    const auto gm = grad(x);
    x[ui] = x0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      H(j, i) = (gp[uj] - gm[uj]) / (2.0 * h);
    }
  }
  return 0.5 * (H + H.transpose());
}

/// Ascending eigenvalues of a symmetric matrix.
inline std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& M) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::vector<double>(ev.data(), ev.data() + ev.size());
}

}  // namespace ssmlab::oracle
