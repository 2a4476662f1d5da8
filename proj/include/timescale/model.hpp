#pragma once

#include "timescale/errors.hpp"
#include "timescale/types.hpp"

namespace timescale {

/// Parameters of the clock-ensemble state-space model.
///
/// Each of the m clocks carries n derivative levels (phase, frequency,
/// drift, ...).  The stacked state x = (x_1^T, ..., x_n^T)^T groups level i
/// of every clock into the m-vector x_i, so the full state has dimension
/// n*m.  Level-1 states are time deviations in seconds.
struct ModelParams {
  int n = 3;       ///< derivative levels per clock
  int m = 5;       ///< number of clocks in the ensemble
  double tau = 1;  ///< sampling interval [s]
  Vector q_sq;     ///< n process-noise intensities q_i^2 (one per level)
  double r_sq = 0; ///< measurement-noise variance r^2 on each phase difference

  /// Throws InvalidParameterError on inconsistent or out-of-range values.
  void validate() const;
};

/// Kronecker product, fully dense.
template <typename S>
MatrixX<S> kron(const MatrixX<S>& a, const MatrixX<S>& b) {
  MatrixX<S> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// n x n single-clock transition: unit upper-triangular Taylor matrix with
/// A(i,j) = tau^(j-i) / (j-i)!.
Matrix taylor_transition(int n, double tau);

/// n x n single-clock process covariance over one sampling interval,
/// in closed form:
///   W(i,j) = sum_{k >= max(i,j)} q_k^2 tau^(a+b+1) / (a! b! (a+b+1)),
/// with a = k-i, b = k-j (indices 1-based in the formula above).
Matrix process_noise_single(int n, double tau, const Vector& q_sq);

/// (m-1) x m pairwise difference map against the last clock:
/// [I_{m-1}, -1].  Its rows span the observable directions of one level.
Matrix difference_map(int m);

/// m x (m-1) Moore-Penrose pseudoinverse of difference_map(m), closed form.
Matrix difference_pinv(int m);

/// All system matrices for a given parameter set.
struct EnsembleModel {
  ModelParams params;

  Matrix A;         ///< n x n single-clock transition
  Matrix F;         ///< nm x nm full transition, A (x) I_m
  Matrix C;         ///< 1 x n level-1 selector
  Matrix Vbar;      ///< (m-1) x m difference map
  Matrix Vbar_pinv; ///< m x (m-1) pseudoinverse of Vbar
  Matrix H;         ///< (m-1) x nm measurement map, C (x) Vbar
  Matrix D;         ///< 1 x nm ensemble average of level-1 states
  Matrix W_single;  ///< n x n single-clock process covariance
  Matrix W;         ///< nm x nm process covariance, W_single (x) I_m
  Matrix R;         ///< (m-1) x (m-1) measurement covariance, r^2 I

  Index state_dim() const { return Index(params.n) * params.m; }
  Index meas_dim() const { return params.m - 1; }
};

EnsembleModel build_model(const ModelParams& params);

/// Coordinate change splitting the state into an observable block
/// (clock differences, dimension n(m-1)) and a common-mode block
/// (per-level ensemble means, dimension n) that no measurement reaches.
///
/// The n x n(m-1) matrix Gamma parameterizes the basis chosen for the
/// common-mode complement; Gamma = 0 gives the plain difference/mean split.
struct Decomposition {
  Matrix Gamma;  ///< n x n(m-1) mixing block
  Matrix T;      ///< nm x nm coordinate change, x = T (xi_o; xi_u)
  Matrix T_inv;  ///< structural inverse of T

  Matrix F_oo;   ///< n(m-1) x n(m-1) observable transition, A (x) I_{m-1}
  Matrix F_uo;   ///< n x n(m-1) coupling into the common mode, -Gamma F_oo + A Gamma
  Matrix F_uu;   ///< n x n common-mode transition (= A)
  Matrix H_o;    ///< (m-1) x n(m-1) observable measurement map, C (x) I_{m-1}
  Matrix W_o;    ///< n(m-1) x n(m-1) observable process covariance
  Matrix DT;     ///< 1 x nm ensemble-average map in transformed coordinates, [C Gamma, C]
};

Decomposition build_decomposition(const EnsembleModel& model, const Matrix& gamma);

/// Zero mixing block of the right shape for the given parameters.
Matrix zero_gamma(const ModelParams& params);

}  // namespace timescale
