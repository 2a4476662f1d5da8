#include "timescale/filter.hpp"

#include <algorithm>

#include "timescale/extended.hpp"

namespace timescale {

namespace {

Matrix in_kron_ones(const EnsembleModel& model) {
  return kron<double>(Matrix::Identity(model.params.n, model.params.n),
                      Matrix::Constant(model.params.m, 1, 1.0));
}

Matrix in_kron_vbar(const EnsembleModel& model) {
  return kron<double>(Matrix::Identity(model.params.n, model.params.n), model.Vbar);
}

Matrix vvt_inverse(int m) {
  // (Vbar Vbar^T)^{-1} = (I + 1 1^T)^{-1} = I - (1/m) 1 1^T on R^{m-1}.
  return Matrix::Identity(m - 1, m - 1) - Matrix::Constant(m - 1, m - 1, 1.0 / m);
}

template <typename S>
CkfRun run_ckf_impl(const EnsembleModel& model, const Vector& xhat0, const Matrix& p0,
                    const Matrix& measurements, const FilterRunOptions& options) {
  const Index nm = model.state_dim();
  const Index horizon = measurements.rows();
  if (xhat0.size() != nm || p0.rows() != nm || p0.cols() != nm)
    throw InvalidParameterError("run_ckf: initial state/covariance dimensions do not match model");
  if (measurements.cols() != model.meas_dim())
    throw InvalidParameterError("run_ckf: measurement rows must have m-1 entries");

  const MatrixX<S> f = model.F.template cast<S>();
  const MatrixX<S> h = model.H.template cast<S>();
  const MatrixX<S> w = model.W.template cast<S>();
  const MatrixX<S> r = model.R.template cast<S>();
  const MatrixX<S> sum_map = in_kron_ones(model).template cast<S>();

  std::vector<Index> checkpoints = options.cov_checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  std::size_t next_checkpoint = 0;

  CkfRun run;
  run.x_hat.resize(horizon + 1, nm);
  if (options.record_gains) run.gains.reserve(horizon);
  if (options.record_cov_norm) run.cov_norm.resize(horizon + 1);
  if (options.record_common_cov_trace) run.common_cov_trace.resize(horizon + 1);

  VectorX<S> x = xhat0.template cast<S>();
  MatrixX<S> p = p0.template cast<S>();

  for (Index k = 0; k <= horizon; ++k) {
    run.x_hat.row(k) = x.template cast<double>().transpose();
    if (options.record_cov_norm) run.cov_norm[k] = static_cast<double>(p.norm());
    if (options.record_common_cov_trace)
      run.common_cov_trace[k] =
          static_cast<double>((sum_map.transpose() * p * sum_map).trace());
    while (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == k) {
      run.cov_checkpoints.push_back(p.template cast<double>());
      ++next_checkpoint;
    }
    if (k == horizon) break;

    const MatrixX<S> gain = kalman_gain_cov_step<S>(p, f, h, w, r);
    if (options.record_gains) run.gains.push_back(gain.template cast<double>());
    const VectorX<S> y = measurements.row(k).transpose().template cast<S>();
    x = kalman_state_step<S>(x, y, f, h, gain);
  }
  return run;
}

}  // namespace

std::pair<CkfState, Matrix> ckf_step(const CkfState& state, const Vector& y,
                                     const EnsembleModel& model) {
  CkfState next;
  next.P = state.P;
  Matrix gain = kalman_gain_cov_step<double>(next.P, model.F, model.H, model.W, model.R);
  next.x_hat = kalman_state_step<double>(state.x_hat, y, model.F, model.H, gain);
  next.k = state.k + 1;
  return {std::move(next), std::move(gain)};
}

std::pair<SkfState, Matrix> skf_step(const SkfState& state, const Vector& y,
                                     const EnsembleModel& model, const Decomposition& decomp) {
  SkfState next;
  // Common-mode prediction reads the observable state as it stands now.
  next.xi_u = decomp.F_uo * state.xi_o + decomp.F_uu * state.xi_u;
  next.P_o = state.P_o;
  Matrix gain = kalman_gain_cov_step<double>(next.P_o, decomp.F_oo, decomp.H_o, decomp.W_o,
                                             model.R);
  next.xi_o = kalman_state_step<double>(state.xi_o, y, decomp.F_oo, decomp.H_o, gain);
  next.k = state.k + 1;
  return {std::move(next), std::move(gain)};
}

Vector skf_reconstruct(const SkfState& state, const Decomposition& decomp) {
  Vector xi(state.xi_o.size() + state.xi_u.size());
  xi << state.xi_o, state.xi_u;
  return decomp.T * xi;
}

Matrix skf_full_gain(const Matrix& gain_o, const EnsembleModel& model,
                     const Decomposition& decomp) {
  const Matrix lift = kron<double>(Matrix::Identity(model.params.n, model.params.n),
                                   model.Vbar_pinv) +
                      in_kron_ones(model) * decomp.Gamma;
  return lift * gain_o;
}

std::pair<Vector, Vector> transform_state(const Decomposition& decomp, const Vector& x) {
  const Vector xi = decomp.T_inv * x;
  const Index no = decomp.F_oo.rows();
  return {xi.head(no), xi.tail(xi.size() - no)};
}

Matrix project_cov(const EnsembleModel& model, const Matrix& p_full) {
  const Matrix iv = in_kron_vbar(model);
  return iv * p_full * iv.transpose();
}

std::pair<Matrix, Matrix> reduced_cov_step(const Matrix& p_check, const EnsembleModel& model,
                                           double rho) {
  const int m = model.params.m;
  Matrix p = p_check;
  const Matrix f_oo = kron<double>(model.A, Matrix::Identity(m - 1, m - 1));
  const Matrix h_o = kron<double>(model.C, Matrix::Identity(m - 1, m - 1));
  const Matrix w_reduced = kron<double>(model.W_single, Matrix::Identity(m - 1, m - 1));
  Matrix gain = reduced_gain_cov_step<double>(p, f_oo, h_o, w_reduced, vvt_inverse(m), rho);
  return {std::move(p), std::move(gain)};
}

Vector ideal_unobs_error_step(const Vector& eps_u, const Vector& v, const EnsembleModel& model) {
  return model.A * eps_u + in_kron_ones(model).transpose() * v;
}

CkfRun run_ckf(const EnsembleModel& model, const Vector& xhat0, const Matrix& p0,
               const Matrix& measurements, Precision precision,
               const FilterRunOptions& options) {
  if (precision == Precision::Extended)
    return run_ckf_impl<Extended>(model, xhat0, p0, measurements, options);
  return run_ckf_impl<double>(model, xhat0, p0, measurements, options);
}

SkfRun run_skf(const EnsembleModel& model, const Decomposition& decomp, const Vector& xi_o0,
               const Vector& xi_u0, const Matrix& p_o0, const Matrix& measurements,
               const FilterRunOptions& options) {
  const Index no = decomp.F_oo.rows();
  const Index horizon = measurements.rows();
  if (xi_o0.size() != no || xi_u0.size() != model.params.n)
    throw InvalidParameterError("run_skf: initial state dimensions do not match decomposition");
  if (p_o0.rows() != no || p_o0.cols() != no)
    throw InvalidParameterError("run_skf: observable covariance must be n(m-1) square");

  SkfRun run;
  run.xi_o.resize(horizon + 1, no);
  run.xi_u.resize(horizon + 1, model.params.n);
  run.x_hat.resize(horizon + 1, model.state_dim());
  if (options.record_gains) run.gains.reserve(horizon);
  if (options.record_cov_norm) run.p_norm.resize(horizon + 1);

  SkfState state{xi_o0, xi_u0, p_o0, 0};
  for (Index k = 0; k <= horizon; ++k) {
    run.xi_o.row(k) = state.xi_o.transpose();
    run.xi_u.row(k) = state.xi_u.transpose();
    run.x_hat.row(k) = skf_reconstruct(state, decomp).transpose();
    if (options.record_cov_norm) run.p_norm[k] = state.P_o.norm();
    if (k == horizon) break;

    auto [next, gain] = skf_step(state, measurements.row(k).transpose(), model, decomp);
    if (options.record_gains) run.gains.push_back(std::move(gain));
    state = std::move(next);
  }
  return run;
}

SkfRun run_skf_scheduled(const EnsembleModel& model, const Decomposition& decomp,
                         const Vector& xi_o0, const Vector& xi_u0,
                         const std::vector<Matrix>& gains, const Matrix& measurements) {
  const Index no = decomp.F_oo.rows();
  const Index horizon = measurements.rows();
  if (Index(gains.size()) < horizon)
    throw InvalidParameterError("run_skf_scheduled: gain schedule shorter than measurement block");

  SkfRun run;
  run.xi_o.resize(horizon + 1, no);
  run.xi_u.resize(horizon + 1, model.params.n);
  run.x_hat.resize(horizon + 1, model.state_dim());

  SkfState state{xi_o0, xi_u0, Matrix(), 0};
  for (Index k = 0; k <= horizon; ++k) {
    run.xi_o.row(k) = state.xi_o.transpose();
    run.xi_u.row(k) = state.xi_u.transpose();
    run.x_hat.row(k) = skf_reconstruct(state, decomp).transpose();
    if (k == horizon) break;

    const Vector y = measurements.row(k).transpose();
    Vector xi_u_next = decomp.F_uo * state.xi_o + decomp.F_uu * state.xi_u;
    state.xi_o = kalman_state_step<double>(state.xi_o, y, decomp.F_oo, decomp.H_o, gains[k]);
    state.xi_u = std::move(xi_u_next);
    ++state.k;
  }
  return run;
}

}  // namespace timescale
