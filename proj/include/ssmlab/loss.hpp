#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ssmlab/data.hpp"
#include "ssmlab/head.hpp"
#include "ssmlab/ssm.hpp"

namespace ssmlab {

/// Time-varying coefficients of the equation of motion
///   da_j/dt = b_j c_j sum_{l=0}^{kappa-2} gamma_l a_j^l.
struct Characterization {
  std::vector<double> gammas;  // gamma^(0) .. gamma^(kappa-2)
  std::vector<double> deltas;  // residual y_i - prediction_i
  std::vector<double> xis;     // head input-derivative at the SSM output
};

struct GradientBundle {
  std::vector<double> da, db, dc;
  std::optional<MLPHead> dhead;
};

namespace detail {

/// Per-example SSM output and head quantities, evaluated in index order.
struct Residuals {
  std::vector<double> ssm_out;
  std::vector<double> delta;
  std::vector<double> xi;
};

inline Residuals residuals(const DiagonalSSM& ssm, const Head& head, const TrainingSet& set,
                           bool want_xi) {
  Residuals r;
  r.ssm_out.reserve(set.size());
  r.delta.reserve(set.size());
  if (want_xi) r.xi.reserve(set.size());
  for (const auto& ex : set) {
    const double z = forward(ssm, ex.x);
    r.ssm_out.push_back(z);
    r.delta.push_back(ex.y - head_forward(head, z));
    if (want_xi) r.xi.push_back(head_input_derivative(head, z));
  }
  return r;
}

}  // namespace detail

/// Mean squared error of the composite model sigma(phi(x), w) on `set`.
inline double loss(const DiagonalSSM& ssm, const Head& head, const TrainingSet& set) {
  double acc = 0.0;
  for (const auto& ex : set) {
    const double r = ex.y - head_forward(head, forward(ssm, ex.x));
    acc += r * r;
  }
  return acc / static_cast<double>(set.size());
}

inline double loss(const DiagonalSSM& ssm, const TrainingSet& set) {
  return loss(ssm, identity_head(), set);
}

/// Analytic gradient of `loss`. With train_bc false, db and dc are zero.
/// Head gradients are produced only for an MLP head.
///
/// For example i with weight w_i = -(2/n) delta_i xi_i and reversed input
/// u_k = x_{kappa-k} (k = 0..kappa-1):
///   d/da_j = w_i b_j c_j sum_k k a_j^{k-1} u_k
///   d/db_j = w_i c_j     sum_k a_j^k u_k        (and symmetrically for c_j)
inline GradientBundle grad(const DiagonalSSM& ssm, const Head& head, const TrainingSet& set,
                           bool train_bc) {
  const std::size_t d = ssm.dim();
  const std::size_t kappa = set.length();
  const double n = static_cast<double>(set.size());
  const auto res = detail::residuals(ssm, head, set, true);

  GradientBundle g;
  g.da.assign(d, 0.0);
  g.db.assign(d, 0.0);
  g.dc.assign(d, 0.0);
  const MLPHead* mlp = std::get_if<MLPHead>(&head);
  if (mlp) g.dhead = MLPHead::zeros(mlp->width());

  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& x = set[i].x;
    const double w = -2.0 / n * res.delta[i] * res.xi[i];
    for (std::size_t j = 0; j < d; ++j) {
      const double a = ssm.a()[j];
      // Horner on value = sum_k a^k u_k and its a-derivative, k from kappa-1 down.
      double value = 0.0, slope = 0.0;
      for (std::size_t k = kappa; k-- > 0;) {
        slope = slope * a + value;
        value = value * a + x[kappa - 1 - k];
      }
      const double bc = ssm.b()[j] * ssm.c()[j];
      g.da[j] += w * bc * slope;
      if (train_bc) {
        g.db[j] += w * ssm.c()[j] * value;
        g.dc[j] += w * ssm.b()[j] * value;
      }
    }
    if (mlp) {
      const auto hg = head_param_gradients(*mlp, res.ssm_out[i], -2.0 / n * res.delta[i]);
      for (std::size_t p = 0; p < hg.d_in.size(); ++p) g.dhead->d_in[p] += hg.d_in[p];
      for (std::size_t p = 0; p < hg.d_hidden.size(); ++p) g.dhead->d_hidden[p] += hg.d_hidden[p];
      for (std::size_t p = 0; p < hg.d_out.size(); ++p) g.dhead->d_out[p] += hg.d_out[p];
    }
  }
  return g;
}

inline GradientBundle grad(const DiagonalSSM& ssm, const TrainingSet& set, bool train_bc) {
  return grad(ssm, identity_head(), set, train_bc);
}

/// gamma^(l) = 2(l+1)/n sum_i delta_i xi_i x^(i)_{kappa-l-1}, together with the
/// per-example deltas and xis.
inline Characterization characterize(const DiagonalSSM& ssm, const Head& head,
                                     const TrainingSet& set) {
  const std::size_t kappa = set.length();
  const double n = static_cast<double>(set.size());
  const auto res = detail::residuals(ssm, head, set, true);
  Characterization ch;
  ch.deltas = res.delta;
  ch.xis = res.xi;
  ch.gammas.assign(kappa - 1, 0.0);
  for (std::size_t l = 0; l + 1 < kappa; ++l) {
    double acc = 0.0;
    // 1-based position kappa-l-1 is 0-based kappa-l-2.
    for (std::size_t i = 0; i < set.size(); ++i)
      acc += res.delta[i] * res.xi[i] * set[i].x[kappa - l - 2];
    ch.gammas[l] = 2.0 * static_cast<double>(l + 1) / n * acc;
  }
  return ch;
}

inline Characterization characterize(const DiagonalSSM& ssm, const TrainingSet& set) {
  return characterize(ssm, identity_head(), set);
}

/// b_j c_j * sum_l gamma_l a_j^l, by Horner evaluation.
inline std::vector<double> predicted_a_dot(const DiagonalSSM& ssm, const Characterization& ch) {
  std::vector<double> out(ssm.dim());
  for (std::size_t j = 0; j < ssm.dim(); ++j) {
    const double a = ssm.a()[j];
    double poly = 0.0;
    for (std::size_t l = ch.gammas.size(); l-- > 0;) poly = poly * a + ch.gammas[l];
    out[j] = ssm.b()[j] * ssm.c()[j] * poly;
  }
  return out;
}

}  // namespace ssmlab
