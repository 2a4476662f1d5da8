#pragma once

#include <vector>

#include "timescale/filter.hpp"
#include "timescale/model.hpp"
#include "timescale/types.hpp"

namespace timescale {

/// First two moments of the initial prediction error x[0] - x_hat[0].
struct InitError {
  Vector mu0;  ///< nm mean
  Matrix Q0;   ///< nm x nm covariance, symmetric PSD

  /// Throws on dimension mismatch, asymmetry, or indefiniteness.
  void validate(const ModelParams& params) const;
};

/// Ensemble-symmetric initial error: mu0 = mu_hat (x) 1_m,
/// Q0 = q_hat (x) p I_m.  Every clock shares the same per-level mean and
/// the per-level covariance is exchangeable across clocks.
InitError structured_init(const Vector& mu_hat, const Matrix& q_hat, double p,
                          const ModelParams& params);

/// Observable-subspace gain sequence L_0..L_{horizon-1} driven from p_o0.
/// Depends only on the model and p_o0 -- the mixing block Gamma never enters
/// -- and is bit-identical to the gains a live structured filter run
/// produces from the same initial covariance.
std::vector<Matrix> gain_schedule(const EnsembleModel& model, const Matrix& p_o0,
                                  Index horizon);

/// Exact mean and variance of the atomic-time error TA[k] = D(x[k] - x_hat[k])
/// for k = 0..horizon.
struct TaMoments {
  Vector mean;  ///< horizon+1 entries, mean[0] = D mu0
  Vector var;   ///< horizon+1 entries, clipped at 0
};

/// Propagate the TA moments under the structured filter with mixing block
/// `gamma` and the given gain sequence.
///
/// The error is propagated in the decomposed coordinates as two coupled
/// blocks (observable / common-mode) rather than as one nm-dimensional
/// recursion.  The two forms are algebraically identical, but the split
/// keeps the huge dynamic range of the common-mode covariance out of the
/// observable block, which matters once these values feed finite
/// differences downstream.
TaMoments ta_moments(const EnsembleModel& model, const Matrix& gamma, const InitError& init,
                     const std::vector<Matrix>& gains);

/// Scalarized cost of a moment series: sum_k delta1 mean[k]^2 + delta2 var[k].
double cost_J(const TaMoments& moments, double delta1, double delta2);

/// Convenience overload: propagate then sum.
double cost_J(const EnsembleModel& model, const Matrix& gamma, const InitError& init,
              const std::vector<Matrix>& gains, double delta1, double delta2);

/// Inverse standard-normal CDF (rational approximation polished by one
/// Halley step on erfc); |error| < 1e-12 over (0, 1).
double normal_quantile(double p);

/// Symmetric two-sided confidence band mean -+ z sqrt(var).
struct ConfidenceBand {
  Vector lo;
  Vector hi;
};

ConfidenceBand confidence_interval(const TaMoments& moments, double level);

/// Reference propagation in the original coordinates: the filter error
/// recursion eps' = (F + G H) eps - G w + v taken literally on nm-vectors,
/// with G the full-space equivalent gain.  Same algebra as ta_moments;
/// scalar-templated so tests can run it in quad precision where the
/// common-mode covariance growth would otherwise drown double.
template <typename S>
TaMoments ta_moments_full(const EnsembleModel& model, const Matrix& gamma,
                          const InitError& init, const std::vector<Matrix>& gains) {
  init.validate(model.params);
  const Index nm = model.state_dim();
  const Index horizon = Index(gains.size());

  const MatrixX<S> f = model.F.template cast<S>();
  const MatrixX<S> h = model.H.template cast<S>();
  const MatrixX<S> w = model.W.template cast<S>();
  const MatrixX<S> r = model.R.template cast<S>();
  const MatrixX<S> dmap = model.D.template cast<S>();
  const MatrixX<S> lift =
      (kron<double>(Matrix::Identity(model.params.n, model.params.n), model.Vbar_pinv) +
       kron<double>(Matrix::Identity(model.params.n, model.params.n),
                    Matrix::Constant(model.params.m, 1, 1.0)) *
           gamma)
          .template cast<S>();

  VectorX<S> mean = init.mu0.template cast<S>();
  MatrixX<S> cov = init.Q0.template cast<S>();

  TaMoments out;
  out.mean.resize(horizon + 1);
  out.var.resize(horizon + 1);
  for (Index k = 0; k <= horizon; ++k) {
    out.mean[k] = static_cast<double>((dmap * mean).value());
    const double v = static_cast<double>((dmap * cov * dmap.transpose()).value());
    out.var[k] = v > 0 ? v : 0.0;
    if (k == horizon) break;

    const MatrixX<S> g = lift * gains[k].template cast<S>();
    const MatrixX<S> closed = f + g * h;
    mean = closed * mean;
    cov = closed * cov * closed.transpose() + g * r * g.transpose() + w;
    cov = ((cov + cov.transpose()) / S(2)).eval();
  }
  return out;
}

}  // namespace timescale
