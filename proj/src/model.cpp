#include "timescale/model.hpp"

#include <cmath>
#include <string>

namespace timescale {

namespace {

double factorial(int k) {
  double f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace

void ModelParams::validate() const {
  if (n < 1) throw InvalidParameterError("model.n: need at least one derivative level");
  if (m < 2) throw InvalidParameterError("model.m: need at least two clocks");
  if (!(tau > 0) || !std::isfinite(tau))
    throw InvalidParameterError("model.tau: sampling interval must be positive and finite");
  if (q_sq.size() != n)
    throw InvalidParameterError("model.q_sq: expected " + std::to_string(n) + " entries, got " +
                                std::to_string(q_sq.size()));
  for (Index i = 0; i < q_sq.size(); ++i)
    if (!(q_sq[i] >= 0) || !std::isfinite(q_sq[i]))
      throw InvalidParameterError("model.q_sq[" + std::to_string(i) + "]: must be finite and >= 0");
  if (!(r_sq >= 0) || !std::isfinite(r_sq))
    throw InvalidParameterError("model.r_sq: must be finite and >= 0");
}

Matrix taylor_transition(int n, double tau) {
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) a(i, j) = std::pow(tau, j - i) / factorial(j - i);
  return a;
}

Matrix process_noise_single(int n, double tau, const Vector& q_sq) {
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0;
      for (int k = std::max(i, j); k < n; ++k) {
        const int a = k - i, b = k - j;
        s += q_sq[k] * std::pow(tau, a + b + 1) / (factorial(a) * factorial(b) * (a + b + 1));
      }
      w(i, j) = s;
    }
  }
  return w;
}

Matrix difference_map(int m) {
  Matrix v = Matrix::Zero(m - 1, m);
  v.leftCols(m - 1).setIdentity();
  v.col(m - 1).setConstant(-1);
  return v;
}

Matrix difference_pinv(int m) {
  // Vbar Vbar^T = I + 1 1^T, whose inverse is I - (1/m) 1 1^T; the
  // pseudoinverse Vbar^T (Vbar Vbar^T)^{-1} then comes out in closed form.
  Matrix p(m, m - 1);
  p.topRows(m - 1) = Matrix::Identity(m - 1, m - 1) -
                     Matrix::Constant(m - 1, m - 1, 1.0 / m);
  p.row(m - 1).setConstant(-1.0 / m);
  return p;
}

EnsembleModel build_model(const ModelParams& params) {
  params.validate();
  const int n = params.n, m = params.m;

  EnsembleModel model;
  model.params = params;
  model.A = taylor_transition(n, params.tau);
  model.C = Matrix::Zero(1, n);
  model.C(0, 0) = 1;
  model.Vbar = difference_map(m);
  model.Vbar_pinv = difference_pinv(m);
  model.F = kron<double>(model.A, Matrix::Identity(m, m));
  model.H = kron<double>(model.C, model.Vbar);
  model.D = kron<double>(model.C, Matrix::Constant(1, m, 1.0 / m));
  model.W_single = process_noise_single(n, params.tau, params.q_sq);
  model.W = kron<double>(model.W_single, Matrix::Identity(m, m));
  model.R = params.r_sq * Matrix::Identity(m - 1, m - 1);
  return model;
}

Decomposition build_decomposition(const EnsembleModel& model, const Matrix& gamma) {
  const int n = model.params.n, m = model.params.m;
  if (gamma.rows() != n || gamma.cols() != Index(n) * (m - 1))
    throw InvalidParameterError("gamma: expected " + std::to_string(n) + " x " +
                                std::to_string(n * (m - 1)) + ", got " +
                                std::to_string(gamma.rows()) + " x " +
                                std::to_string(gamma.cols()));

  const Matrix eye_n = Matrix::Identity(n, n);
  const Matrix ones_col = Matrix::Constant(m, 1, 1.0);
  const Matrix in_ones = kron<double>(eye_n, ones_col);            // nm x n
  const Matrix in_vbar = kron<double>(eye_n, model.Vbar);          // n(m-1) x nm
  const Matrix in_vpinv = kron<double>(eye_n, model.Vbar_pinv);    // nm x n(m-1)

  Decomposition d;
  d.Gamma = gamma;

  d.T.resize(model.state_dim(), model.state_dim());
  d.T.leftCols(Index(n) * (m - 1)) = in_vpinv + in_ones * gamma;
  d.T.rightCols(n) = in_ones;

  // The inverse factors as [I 0; -Gamma I] * [In (x) Vbar; (1/m) In (x) 1^T],
  // so it never needs a numerical solve.
  d.T_inv.resize(model.state_dim(), model.state_dim());
  d.T_inv.topRows(Index(n) * (m - 1)) = in_vbar;
  d.T_inv.bottomRows(n) =
      -gamma * in_vbar + kron<double>(eye_n, Matrix::Constant(1, m, 1.0 / m));

  d.F_oo = kron<double>(model.A, Matrix::Identity(m - 1, m - 1));
  d.F_uo = -gamma * d.F_oo + model.A * gamma;
  d.F_uu = model.A;
  d.H_o = kron<double>(model.C, Matrix::Identity(m - 1, m - 1));
  d.W_o = kron<double>(model.W_single, model.Vbar * model.Vbar.transpose());
  d.DT.resize(1, model.state_dim());
  d.DT.leftCols(Index(n) * (m - 1)) = model.C * gamma;
  d.DT.rightCols(n) = model.C;
  return d;
}

Matrix zero_gamma(const ModelParams& params) {
  return Matrix::Zero(params.n, Index(params.n) * (params.m - 1));
}

}  // namespace timescale
