#include "timescale/moments.hpp"

#include <cmath>
#include <string>

#include "timescale/errors.hpp"

namespace timescale {

void InitError::validate(const ModelParams& params) const {
  const Index nm = Index(params.n) * params.m;
  if (mu0.size() != nm)
    throw InvalidParameterError("init.mu0: expected dimension " + std::to_string(nm));
  if (Q0.rows() != nm || Q0.cols() != nm)
    throw InvalidParameterError("init.Q0: expected " + std::to_string(nm) + " square");
  const double scale = Q0.norm();
  if (scale > 0 && (Q0 - Q0.transpose()).norm() > 1e-10 * scale)
    throw InvalidParameterError("init.Q0: not symmetric within tolerance");
  if (scale > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(Q0, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale)
      throw InvalidParameterError("init.Q0: indefinite, most negative eigenvalue " +
                                  std::to_string(es.eigenvalues().minCoeff()));
  }
}

InitError structured_init(const Vector& mu_hat, const Matrix& q_hat, double p,
                          const ModelParams& params) {
  if (mu_hat.size() != params.n || q_hat.rows() != params.n || q_hat.cols() != params.n)
    throw InvalidParameterError("structured_init: per-level blocks must have dimension n");
  if (!(p >= 0)) throw InvalidParameterError("structured_init: p must be >= 0");

  InitError init;
  Matrix mu_col = mu_hat;
  init.mu0 = kron<double>(mu_col, Matrix::Constant(params.m, 1, 1.0));
  init.Q0 = kron<double>(q_hat, p * Matrix::Identity(params.m, params.m));
  init.validate(params);
  return init;
}

std::vector<Matrix> gain_schedule(const EnsembleModel& model, const Matrix& p_o0,
                                  Index horizon) {
  const Decomposition decomp = build_decomposition(model, zero_gamma(model.params));
  const Index no = decomp.F_oo.rows();
  if (p_o0.rows() != no || p_o0.cols() != no)
    throw InvalidParameterError("gain_schedule: initial covariance must be n(m-1) square");

  std::vector<Matrix> gains;
  gains.reserve(horizon);
  Matrix p = p_o0;
  for (Index k = 0; k < horizon; ++k)
    gains.push_back(kalman_gain_cov_step<double>(p, decomp.F_oo, decomp.H_o, decomp.W_o,
                                                 model.R));
  return gains;
}

TaMoments ta_moments(const EnsembleModel& model, const Matrix& gamma, const InitError& init,
                     const std::vector<Matrix>& gains) {
  init.validate(model.params);
  const Decomposition decomp = build_decomposition(model, gamma);
  const int n = model.params.n, m = model.params.m;
  const Index horizon = Index(gains.size());
  const double r_sq = model.params.r_sq;

  const Matrix& f_oo = decomp.F_oo;
  const Matrix& h_o = decomp.H_o;
  const Matrix& w_o = decomp.W_o;
  const Matrix& a = model.A;
  const Matrix f_uo = decomp.F_uo;
  const Matrix cg = model.C * gamma;              // 1 x n(m-1)
  const Matrix w_mean = model.W_single / m;       // common-mode process noise

  const Matrix in_vbar = kron<double>(Matrix::Identity(n, n), model.Vbar);
  const Matrix mean_map = kron<double>(Matrix::Identity(n, n),
                                       Matrix::Constant(1, m, 1.0 / m));
  const Matrix bottom = -gamma * in_vbar + mean_map;  // n x nm

  // Error split eps = T^{-1}(x - x_hat): observable block from the
  // difference map, common-mode block from the mean map.
  Vector m_o = in_vbar * init.mu0;
  Vector m_u = -gamma * m_o + mean_map * init.mu0;
  Matrix s_oo = in_vbar * init.Q0 * in_vbar.transpose();
  Matrix s_ou = in_vbar * init.Q0 * bottom.transpose();
  Matrix s_uu = bottom * init.Q0 * bottom.transpose();

  TaMoments out;
  out.mean.resize(horizon + 1);
  out.var.resize(horizon + 1);
  out.mean[0] = (model.D * init.mu0).value();
  const double var0 = (model.D * init.Q0 * model.D.transpose()).value();
  out.var[0] = var0 > 0 ? var0 : 0.0;

  for (Index k = 0; k < horizon; ++k) {
    const Matrix& gain = gains[k];
    const Matrix closed_o = f_oo + gain * h_o;

    const Vector m_o_next = closed_o * m_o;
    const Vector m_u_next = f_uo * m_o + a * m_u;
    const Matrix s_oo_next =
        closed_o * s_oo * closed_o.transpose() + w_o + r_sq * (gain * gain.transpose());
    const Matrix s_ou_next =
        closed_o * (s_oo * f_uo.transpose() + s_ou * a.transpose()) - w_o * gamma.transpose();
    const Matrix s_uu_next = f_uo * s_oo * f_uo.transpose() + f_uo * s_ou * a.transpose() +
                             a * s_ou.transpose() * f_uo.transpose() +
                             a * s_uu * a.transpose() + gamma * w_o * gamma.transpose() +
                             w_mean;

    m_o = m_o_next;
    m_u = m_u_next;
    s_oo = s_oo_next;
    s_ou = s_ou_next;
    s_uu = s_uu_next;

    out.mean[k + 1] = (cg * m_o).value() + (model.C * m_u).value();
    const double v = (cg * s_oo * cg.transpose()).value() +
                     2.0 * (cg * s_ou * model.C.transpose()).value() +
                     (model.C * s_uu * model.C.transpose()).value();
    out.var[k + 1] = v > 0 ? v : 0.0;
  }
  return out;
}

double cost_J(const TaMoments& moments, double delta1, double delta2) {
  double acc = 0;
  for (Index k = 0; k < moments.mean.size(); ++k)
    acc += delta1 * moments.mean[k] * moments.mean[k] + delta2 * moments.var[k];
  return acc;
}

double cost_J(const EnsembleModel& model, const Matrix& gamma, const InitError& init,
              const std::vector<Matrix>& gains, double delta1, double delta2) {
  return cost_J(ta_moments(model, gamma, init, gains), delta1, delta2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidParameterError("normal_quantile: p must lie strictly inside (0, 1)");

  // Acklam's rational approximation, then one Halley step against erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;

  double x;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }

  const double err = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = err * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

ConfidenceBand confidence_interval(const TaMoments& moments, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw InvalidParameterError("confidence_interval: level must lie strictly inside (0, 1)");
  const double z = normal_quantile(0.5 + level / 2.0);
  ConfidenceBand band;
  band.lo = moments.mean - z * moments.var.cwiseSqrt();
  band.hi = moments.mean + z * moments.var.cwiseSqrt();
  return band;
}

}  // namespace timescale
