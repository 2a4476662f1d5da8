#pragma once

#include <string>
#include <utility>
#include <vector>

#include "timescale/errors.hpp"
#include "timescale/model.hpp"
#include "timescale/types.hpp"

namespace timescale {

/// Conditioning estimate of a factored symmetric system: the ratio of the
/// smallest to largest LDLT pivot magnitude.  Cheap, scalar-agnostic, and
/// adequate for the innovation matrices here, which are symmetric positive
/// definite whenever the recursion is healthy.
template <typename S>
S ldlt_pivot_ratio(const Eigen::LDLT<MatrixX<S>>& ldlt) {
  const auto d = ldlt.vectorD().cwiseAbs().eval();
  const S dmax = d.maxCoeff();
  if (!(dmax > S(0))) return S(0);
  return d.minCoeff() / dmax;
}

/// One gain/covariance step of the prediction-form Kalman recursion,
/// shared by the full-state and observable-subspace filters:
///
///   L = -F P H^T (H P H^T + R)^{-1}
///   P <- (F + L H) P F^T + W        (resymmetrized)
///
/// The innovation system is solved by LDLT factorization, never by an
/// explicit inverse.  Templated on the scalar so the same recursion can run
/// in double or in quad precision.
template <typename S>
MatrixX<S> kalman_gain_cov_step(MatrixX<S>& p, const MatrixX<S>& f, const MatrixX<S>& h,
                                const MatrixX<S>& w, const MatrixX<S>& r) {
  const MatrixX<S> pht = p * h.transpose();
  MatrixX<S> innov = h * pht + r;
  innov = ((innov + innov.transpose()) / S(2)).eval();

  Eigen::LDLT<MatrixX<S>> ldlt(innov);
  const S ratio = ldlt_pivot_ratio<S>(ldlt);
  if (ldlt.info() != Eigen::Success || !(ratio > S(1e-14)))
    throw NumericalError("innovation covariance numerically singular, pivot ratio = " +
                         std::to_string(static_cast<double>(ratio)));

  const MatrixX<S> gain = -(f * ldlt.solve(pht.transpose()).transpose());
  p = ((f + gain * h) * p * f.transpose() + w).eval();
  p = ((p + p.transpose()) / S(2)).eval();
  return gain;
}

/// State half of the same step: x' = F x - L (y - H x).
template <typename S>
VectorX<S> kalman_state_step(const VectorX<S>& xhat, const VectorX<S>& y, const MatrixX<S>& f,
                             const MatrixX<S>& h, const MatrixX<S>& gain) {
  return f * xhat - gain * (y - h * xhat);
}

/// Covariance recursion restricted to the difference subspace.  The gain
/// regularizes the innovation with rho * (Vbar Vbar^T)^{-1} instead of R:
///
///   G = -F_oo P H_o^T (H_o P H_o^T + rho (Vbar Vbar^T)^{-1})^{-1}
///   P <- (F_oo + G H_o) P F_oo^T + W_single (x) I_{m-1}
///
/// With rho = r^2 this recursion mirrors the full-state covariance exactly
/// on the difference subspace (see the matching identity in the tests).
template <typename S>
MatrixX<S> reduced_gain_cov_step(MatrixX<S>& p, const MatrixX<S>& f_oo, const MatrixX<S>& h_o,
                                 const MatrixX<S>& w_reduced, const MatrixX<S>& vvt_inv,
                                 S rho) {
  const MatrixX<S> pht = p * h_o.transpose();
  MatrixX<S> innov = h_o * pht + rho * vvt_inv;
  innov = ((innov + innov.transpose()) / S(2)).eval();

  Eigen::LDLT<MatrixX<S>> ldlt(innov);
  const S ratio = ldlt_pivot_ratio<S>(ldlt);
  if (ldlt.info() != Eigen::Success || !(ratio > S(1e-14)))
    throw NumericalError("regularized innovation numerically singular, pivot ratio = " +
                         std::to_string(static_cast<double>(ratio)));

  const MatrixX<S> gain = -(f_oo * ldlt.solve(pht.transpose()).transpose());
  p = ((f_oo + gain * h_o) * p * f_oo.transpose() + w_reduced).eval();
  p = ((p + p.transpose()) / S(2)).eval();
  return gain;
}

/// Full-state filter state.
struct CkfState {
  Vector x_hat;  ///< nm predicted state
  Matrix P;      ///< nm x nm prediction-error covariance
  Index k = 0;
};

/// One full-state filter step; returns the new state and the gain used.
std::pair<CkfState, Matrix> ckf_step(const CkfState& state, const Vector& y,
                                     const EnsembleModel& model);

/// Structured filter state: Kalman recursion on the observable block plus an
/// open-loop predictor on the common-mode block.
struct SkfState {
  Vector xi_o;  ///< n(m-1) predicted observable state
  Vector xi_u;  ///< n predicted common-mode state
  Matrix P_o;   ///< n(m-1) x n(m-1) observable prediction-error covariance
  Index k = 0;
};

/// One structured filter step.  The common-mode prediction
/// xi_u' = F_uo xi_o + F_uu xi_u uses the observable state of the current
/// step, before its own update.  Returns the new state and the observable
/// gain (which does not depend on Gamma).
std::pair<SkfState, Matrix> skf_step(const SkfState& state, const Vector& y,
                                     const EnsembleModel& model, const Decomposition& decomp);

/// Reassembled full-space estimate T (xi_o; xi_u).
Vector skf_reconstruct(const SkfState& state, const Decomposition& decomp);

/// Full-space gain equivalent of an observable gain:
/// G = [I_n (x) Vbar^+ + (I_n (x) 1) Gamma] L.
Matrix skf_full_gain(const Matrix& gain_o, const EnsembleModel& model,
                     const Decomposition& decomp);

/// (xi_o, xi_u) split of a full-space vector under the decomposition.
std::pair<Vector, Vector> transform_state(const Decomposition& decomp, const Vector& x);

/// Observable-subspace image (I_n (x) Vbar) P (I_n (x) Vbar)^T of a
/// full-space covariance; the default observable initialization.
Matrix project_cov(const EnsembleModel& model, const Matrix& p_full);

/// Double-precision wrapper around reduced_gain_cov_step with the model's
/// matrices; returns (next P, gain).
std::pair<Matrix, Matrix> reduced_cov_step(const Matrix& p_check, const EnsembleModel& model,
                                           double rho);

/// Exact recursion of the common-mode error under ideal filtering:
/// eps' = A eps + (I_n (x) 1^T) v, fed by process noise only.
Vector ideal_unobs_error_step(const Vector& eps_u, const Vector& v, const EnsembleModel& model);

/// Scalar type used for the internal chain of a long filter run.
enum class Precision { Double, Extended };

struct FilterRunOptions {
  bool record_gains = true;
  bool record_cov_norm = false;
  bool record_common_cov_trace = false;      ///< trace of (I (x) 1^T) P (I (x) 1) per step
  std::vector<Index> cov_checkpoints;        ///< step indices at which to keep P
};

struct CkfRun {
  Matrix x_hat;                    ///< (K+1) x nm estimates, row per step
  std::vector<Matrix> gains;       ///< K gains (if recorded)
  Vector cov_norm;                 ///< K+1 Frobenius norms of P (if recorded)
  Vector common_cov_trace;         ///< K+1 common-mode covariance traces (if recorded)
  std::vector<Matrix> cov_checkpoints;  ///< P at the requested steps, in order
};

/// Run the full-state filter over a measurement block (row k = y[k]).
/// With Precision::Extended the whole state/covariance/gain chain is carried
/// in quad precision and cast to double only on output; the undetectable
/// model makes the full-state covariance the numerically hazardous object,
/// and the extended chain keeps long-horizon runs faithful to the exact
/// recursion.
CkfRun run_ckf(const EnsembleModel& model, const Vector& xhat0, const Matrix& p0,
               const Matrix& measurements, Precision precision = Precision::Double,
               const FilterRunOptions& options = {});

struct SkfRun {
  Matrix xi_o;                ///< (K+1) x n(m-1)
  Matrix xi_u;                ///< (K+1) x n
  Matrix x_hat;               ///< (K+1) x nm reconstructed estimates
  std::vector<Matrix> gains;  ///< K observable gains (if recorded)
  Vector p_norm;              ///< K+1 Frobenius norms of P_o (if recorded)
};

/// Run the structured filter over a measurement block.
SkfRun run_skf(const EnsembleModel& model, const Decomposition& decomp, const Vector& xi_o0,
               const Vector& xi_u0, const Matrix& p_o0, const Matrix& measurements,
               const FilterRunOptions& options = {});

/// Run the structured filter with a precomputed gain sequence (covariance
/// work already done once); bit-identical to run_skf when the schedule came
/// from the same initial covariance.
SkfRun run_skf_scheduled(const EnsembleModel& model, const Decomposition& decomp,
                         const Vector& xi_o0, const Vector& xi_u0,
                         const std::vector<Matrix>& gains, const Matrix& measurements);

}  // namespace timescale
