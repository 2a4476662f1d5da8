#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "test_support.hpp"
#include "timescale/errors.hpp"
#include "timescale/extended.hpp"
#include "timescale/filter.hpp"
#include "timescale/rng.hpp"
#include "timescale/simulate.hpp"

using namespace timescale;
using namespace testsupport;

namespace {

ModelParams two_clock_params(double q, double r) {
  ModelParams p;
  p.n = 1;
  p.m = 2;
  p.tau = 1.0;
  p.q_sq = Vector::Constant(1, q);
  p.r_sq = r;
  return p;
}

}  // namespace

TEST_CASE("gain/covariance kernel against a scalar-arithmetic filter") {
  // One level, two clocks: state (x1, x2), measurement x1 - x2.  Small
  // enough to run the whole recursion in named scalars.
  const double q = 0.3, r = 0.05;
  const EnsembleModel model = build_model(two_clock_params(q, r));

  double p11 = 2.0, p12 = -0.4, p22 = 1.3;
  Matrix p = (Matrix(2, 2) << p11, p12, p12, p22).finished();

  Vector xhat = (Vector(2) << 0.7, -0.2).finished();
  double x1 = xhat[0], x2 = xhat[1];

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> meas(-1, 1);
  for (int k = 0; k < 50; ++k) {
    const double y = meas(rng);

    // scalar filter: F = I, H = (1, -1), W = q I, R = r
    const double s = p11 - 2 * p12 + p22 + r;
    const double l1 = -(p11 - p12) / s;
    const double l2 = -(p12 - p22) / s;
    const double innov = y - (x1 - x2);
    const double nx1 = x1 - l1 * innov;
    const double nx2 = x2 - l2 * innov;
    // P' = (I + L H) P + W with L = (l1, l2)
    const double np11 = (1 + l1) * p11 - l1 * p12 + q;
    const double np12 = (1 + l1) * p12 - l1 * p22;
    const double np22 = l2 * p12 + (1 - l2) * p22 + q;

    const Matrix gain =
        kalman_gain_cov_step<double>(p, model.F, model.H, model.W, model.R);
    const Vector ynew = Vector::Constant(1, y);
    xhat = kalman_state_step<double>(xhat, ynew, model.F, model.H, gain);

    CHECK(gain(0, 0) == doctest::Approx(l1).epsilon(1e-14));
    CHECK(gain(1, 0) == doctest::Approx(l2).epsilon(1e-14));
    CHECK(xhat[0] == doctest::Approx(nx1).epsilon(1e-13));
    CHECK(xhat[1] == doctest::Approx(nx2).epsilon(1e-13));
    CHECK(p(0, 0) == doctest::Approx(np11).epsilon(1e-13));
    CHECK(p(0, 1) == doctest::Approx(np12).epsilon(1e-12));
    CHECK(p(1, 1) == doctest::Approx(np22).epsilon(1e-13));

    p11 = p(0, 0);
    p12 = p(0, 1);
    p22 = p(1, 1);
    x1 = xhat[0];
    x2 = xhat[1];
  }
}

TEST_CASE("zero covariance and zero process noise mean pure prediction") {
  ModelParams params = paper_params();
  params.q_sq = Vector::Zero(3);
  const EnsembleModel model = build_model(params);
  const Index nm = model.state_dim();

  CkfState state;
  state.x_hat = Vector::LinSpaced(nm, 0.0, 1.0);
  state.P = Matrix::Zero(nm, nm);

  Vector expected = state.x_hat;
  std::mt19937_64 rng(4);
  for (int k = 0; k < 10; ++k) {
    const Vector y = random_vector(rng, model.meas_dim());
    auto [next, gain] = ckf_step(state, y, model);
    CHECK(gain.norm() == 0.0);
    expected = (model.F * expected).eval();
    CHECK((next.x_hat - expected).norm() == 0.0);
    CHECK(next.P.norm() == 0.0);
    CHECK(next.k == state.k + 1);
    state = next;
  }
}

TEST_CASE("full-state runner is the single-step recursion iterated") {
  const EnsembleModel model = build_model(paper_params());
  const Index nm = model.state_dim();
  const SimTrace trace = simulate(model, Vector::Constant(nm, 1e-8), 40, 21, 0);

  const Matrix p0 = 0.01 * Matrix::Identity(nm, nm);
  const CkfRun run = run_ckf(model, Vector::Zero(nm), p0, trace.y);

  CkfState state;
  state.x_hat = Vector::Zero(nm);
  state.P = p0;
  for (Index k = 0; k < 40; ++k) {
    CHECK((run.x_hat.row(k).transpose() - state.x_hat).norm() == 0.0);
    auto [next, gain] = ckf_step(state, trace.y.row(k).transpose(), model);
    CHECK((run.gains[k] - gain).norm() == 0.0);
    state = next;
  }
  CHECK((run.x_hat.row(40).transpose() - state.x_hat).norm() == 0.0);
}

TEST_CASE("extended chain agrees with double on short benign horizons") {
  const EnsembleModel model = build_model(paper_params());
  const Index nm = model.state_dim();
  const SimTrace trace = simulate(model, Vector::Constant(nm, 1e-8), 20, 77, 0);
  const Matrix p0 = 1e-6 * Matrix::Identity(nm, nm);

  const CkfRun dbl = run_ckf(model, Vector::Zero(nm), p0, trace.y, Precision::Double);
  const CkfRun ext = run_ckf(model, Vector::Zero(nm), p0, trace.y, Precision::Extended);
  for (Index k = 0; k <= 20; ++k)
    CHECK((dbl.x_hat.row(k) - ext.x_hat.row(k)).norm() <=
          1e-10 * (1 + ext.x_hat.row(k).norm()));
}

TEST_CASE("observable gains do not depend on the mixing block") {
  std::mt19937_64 rng(14);
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const Index no = Index(params.n) * (params.m - 1);
  const SimTrace trace = simulate(model, Vector::Zero(model.state_dim()), 30, 3, 0);

  const Decomposition plain = build_decomposition(model, zero_gamma(params));
  const Decomposition mixed =
      build_decomposition(model, Matrix(random_matrix(rng, params.n, no)));

  const Matrix p_o0 = 1e-4 * Matrix::Identity(no, no);
  const Vector zo = Vector::Zero(no), zu = Vector::Zero(params.n);
  const SkfRun a = run_skf(model, plain, zo, zu, p_o0, trace.y);
  const SkfRun b = run_skf(model, mixed, zo, zu, p_o0, trace.y);

  REQUIRE(a.gains.size() == 30);
  for (size_t k = 0; k < a.gains.size(); ++k) CHECK((a.gains[k] - b.gains[k]).norm() == 0.0);
  // and so does the observable state stream
  CHECK((a.xi_o - b.xi_o).norm() == 0.0);
}

TEST_CASE("with a zero mixing block the common mode runs open loop, bitwise") {
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const SimTrace trace = simulate(model, Vector::Constant(model.state_dim(), 1e-8), 60, 9, 0);
  const Decomposition dec = build_decomposition(model, zero_gamma(params));
  CHECK(dec.F_uo.norm() == 0.0);

  const Index no = Index(params.n) * (params.m - 1);
  Vector xi_u0(params.n);
  xi_u0 << 3e-8, -2e-9, 1e-10;
  const SkfRun run = run_skf(model, dec, Vector::Zero(no), xi_u0,
                             Matrix(1e-4 * Matrix::Identity(no, no)), trace.y);

  Vector xi_u = xi_u0;
  for (Index k = 0; k <= 60; ++k) {
    CHECK((run.xi_u.row(k).transpose() - xi_u).norm() == 0.0);
    xi_u = (model.A * xi_u).eval();
  }
}

TEST_CASE("state transform and reconstruction round-trip") {
  std::mt19937_64 rng(5);
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const Index no = Index(params.n) * (params.m - 1);
  const Decomposition dec =
      build_decomposition(model, Matrix(0.2 * random_matrix(rng, params.n, no)));

  for (int trial = 0; trial < 10; ++trial) {
    const Vector x = random_vector(rng, model.state_dim());
    const auto [xi_o, xi_u] = transform_state(dec, x);
    SkfState s;
    s.xi_o = xi_o;
    s.xi_u = xi_u;
    s.P_o = Matrix::Zero(no, no);
    CHECK(rel_diff(skf_reconstruct(s, dec), x) < 1e-12);
  }
}

TEST_CASE("structured step commutes with the full-space step under the lifted gain") {
  std::mt19937_64 rng(6);
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const Index no = Index(params.n) * (params.m - 1);
  const Decomposition dec =
      build_decomposition(model, Matrix(0.1 * random_matrix(rng, params.n, no)));

  SkfState s;
  s.xi_o = 1e-8 * random_vector(rng, no);
  s.xi_u = 1e-8 * random_vector(rng, params.n);
  s.P_o = random_psd(rng, no, 1e-9);

  for (int k = 0; k < 20; ++k) {
    const Vector y = 1e-7 * random_vector(rng, model.meas_dim());
    const Vector x_before = skf_reconstruct(s, dec);
    auto [next, gain_o] = skf_step(s, y, model, dec);

    const Matrix g_full = skf_full_gain(gain_o, model, dec);
    const Vector x_after_full =
        model.F * x_before - g_full * (y - model.H * x_before);
    CHECK(rel_diff(skf_reconstruct(next, dec), x_after_full) < 1e-12);
    s = next;
  }
}

TEST_CASE("scheduled runner reproduces the live runner bit for bit") {
  std::mt19937_64 rng(26);
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const Index no = Index(params.n) * (params.m - 1);
  const Decomposition dec =
      build_decomposition(model, Matrix(0.1 * random_matrix(rng, params.n, no)));
  const SimTrace trace = simulate(model, Vector::Constant(model.state_dim(), 1e-8), 50, 31, 0);

  const Vector xi_o0 = 1e-9 * random_vector(rng, no);
  const Vector xi_u0 = 1e-9 * random_vector(rng, params.n);
  const Matrix p_o0 = 1e-4 * Matrix::Identity(no, no);

  const SkfRun live = run_skf(model, dec, xi_o0, xi_u0, p_o0, trace.y);
  const SkfRun replay = run_skf_scheduled(model, dec, xi_o0, xi_u0, live.gains, trace.y);
  CHECK((live.xi_o - replay.xi_o).norm() == 0.0);
  CHECK((live.xi_u - replay.xi_u).norm() == 0.0);
  CHECK((live.x_hat - replay.x_hat).norm() == 0.0);
}

TEST_CASE("full-state and structured filters coincide from matched starts") {
  // Exact-recursion property; the full-state side runs in the extended
  // chain because a double chain visibly corrupts past k ~ 50.
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const Index nm = model.state_dim();
  const Index no = Index(params.n) * (params.m - 1);

  GaussianStream init(substream_seed(12, StreamKind::InitDraw, 0));
  Vector x0(nm);
  for (Index i = 0; i < nm; ++i) x0[i] = init.next_uniform(-6e-8, 6e-8);
  const SimTrace trace = simulate(model, x0, 200, 81, 0);

  const double p = 0.1;
  const Matrix p0 = p * Matrix::Identity(nm, nm);
  const Decomposition dec = build_decomposition(model, zero_gamma(params));

  const CkfRun ckf = run_ckf(model, Vector::Zero(nm), p0, trace.y, Precision::Extended);
  const SkfRun skf = run_skf(model, dec, Vector::Zero(no), Vector::Zero(params.n),
                             project_cov(model, p0), trace.y);

  for (Index k = 0; k <= 200; ++k)
    CHECK((skf.x_hat.row(k) - ckf.x_hat.row(k)).norm() <=
          1e-6 * (1 + ckf.x_hat.row(k).norm()));

  // The covariance halves match on the difference subspace too.  The full
  // covariance mixes a common-mode block that grows like k^4 with difference
  // entries around 1e-9, so the projection has to happen in the extended
  // scalar -- a double image of P no longer holds the difference information.
  const MatrixE in_vbar = to_extended(
      kron<double>(Matrix::Identity(params.n, params.n), model.Vbar));
  MatrixE p_full = to_extended(p0);
  Matrix p_o = project_cov(model, p0);
  const MatrixE f = to_extended(model.F), h = to_extended(model.H), w = to_extended(model.W),
                r = to_extended(model.R);
  for (Index k = 0; k < 200; ++k) {
    if (k == 50 || k == 200) {
      const Matrix projected = to_double(MatrixE(in_vbar * p_full * in_vbar.transpose()));
      CHECK(rel_diff(projected, p_o) < 1e-6);
    }
    kalman_gain_cov_step<Extended>(p_full, f, h, w, r);
    kalman_gain_cov_step<double>(p_o, dec.F_oo, dec.H_o, dec.W_o, model.R);
  }
  const Matrix projected = to_double(MatrixE(in_vbar * p_full * in_vbar.transpose()));
  CHECK(rel_diff(projected, p_o) < 1e-6);
}

TEST_CASE("projected initial covariance of a scaled identity") {
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const Matrix vvt = model.Vbar * model.Vbar.transpose();
  const Matrix expect = kron<double>(Matrix(0.1 * Matrix::Identity(params.n, params.n)), vvt);
  const Matrix got =
      project_cov(model, Matrix(0.1 * Matrix::Identity(15, 15)));
  CHECK(rel_diff(got, expect) < 1e-14);
}

TEST_CASE("difference-subspace covariance chain mirrors the full recursion") {
  // Identity P_k Vp = Vp Pcheck_k with Vp the lifted pseudoinverse, run in
  // the extended chain on both sides where the algebra is visible.
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const Index nm = model.state_dim();
  const Index no = Index(params.n) * (params.m - 1);

  const double p = 1e-9;
  const MatrixE f = to_extended(model.F), h = to_extended(model.H), w = to_extended(model.W),
                r = to_extended(model.R);
  const Decomposition dec = build_decomposition(model, zero_gamma(params));
  const MatrixE f_oo = to_extended(dec.F_oo), h_o = to_extended(dec.H_o);
  const Matrix vvt = model.Vbar * model.Vbar.transpose();
  const MatrixE w_red =
      to_extended(kron<double>(model.W_single, Matrix(Matrix::Identity(params.m - 1, params.m - 1))));
  const MatrixE vvt_inv = to_extended(Matrix(vvt.fullPivLu().inverse()));
  const MatrixE lift = to_extended(
      kron<double>(Matrix::Identity(params.n, params.n), model.Vbar_pinv));

  MatrixE p_full = Extended(p) * MatrixE::Identity(nm, nm);
  MatrixE p_check = Extended(p) * MatrixE::Identity(no, no);

  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    const MatrixE lhs = p_full * lift;
    const MatrixE rhs = lift * p_check;
    worst = std::max(worst, static_cast<double>(Extended((lhs - rhs).norm() / rhs.norm())));
    kalman_gain_cov_step<Extended>(p_full, f, h, w, r);
    reduced_gain_cov_step<Extended>(p_check, f_oo, h_o, w_red, vvt_inv,
                                    Extended(params.r_sq));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("difference-chain regularizer must carry the squared noise scale") {
  // Same identity, wrong regularizer exponent: breaks at once.
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const Index nm = model.state_dim();
  const Index no = Index(params.n) * (params.m - 1);
  const Decomposition dec = build_decomposition(model, zero_gamma(params));
  const Matrix lift = kron<double>(Matrix::Identity(params.n, params.n), model.Vbar_pinv);

  Matrix p_full = 1e-9 * Matrix::Identity(nm, nm);
  Matrix p_check = 1e-9 * Matrix::Identity(no, no);
  double worst = 0;
  for (int k = 0; k < 30; ++k) {
    kalman_gain_cov_step<double>(p_full, model.F, model.H, model.W, model.R);
    auto [p_next, gain] =
        reduced_cov_step(p_check, model, std::sqrt(params.r_sq));  // rho = r, not r^2
    p_check = p_next;
    worst = std::max(worst, rel_diff(Matrix(p_full * lift), Matrix(lift * p_check)));
  }
  CHECK(worst > 1e-2);
}

TEST_CASE("reduced wrapper equals the raw kernel") {
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const Index no = Index(params.n) * (params.m - 1);
  const Decomposition dec = build_decomposition(model, zero_gamma(params));

  const Matrix vvt = model.Vbar * model.Vbar.transpose();
  const Matrix vvt_inv = vvt.fullPivLu().inverse();
  const Matrix w_red =
      kron<double>(model.W_single, Matrix(Matrix::Identity(params.m - 1, params.m - 1)));

  Matrix p1 = 1e-6 * Matrix::Identity(no, no);
  Matrix p2 = p1;
  for (int k = 0; k < 10; ++k) {
    const Matrix g1 = reduced_gain_cov_step<double>(p1, dec.F_oo, dec.H_o, w_red, vvt_inv,
                                                    params.r_sq);
    auto [p_next, g2] = reduced_cov_step(p2, model, params.r_sq);
    p2 = p_next;
    CHECK(rel_diff(g1, g2) < 1e-12);
    CHECK(rel_diff(p1, p2) < 1e-12);
  }
}

TEST_CASE("difference-subspace covariance reaches steady state") {
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const Index no = Index(params.n) * (params.m - 1);

  Matrix pa = project_cov(model, Matrix(0.1 * Matrix::Identity(15, 15)));
  Matrix pb = 1e-4 * Matrix::Identity(no, no);
  Matrix pa_prev, pb_prev;
  for (int k = 0; k < 4000; ++k) {
    pa_prev = pa;
    pb_prev = pb;
    pa = reduced_cov_step(pa_prev, model, params.r_sq).first;
    pb = reduced_cov_step(pb_prev, model, params.r_sq).first;
  }
  CHECK(rel_diff(pa, pa_prev) < 1e-6);
  CHECK(rel_diff(pb, pb_prev) < 1e-6);
  CHECK(rel_diff(pa, pb) < 1e-6);  // start-independent limit
}

TEST_CASE("common-mode covariance grows without bound while the structured filter stays put") {
  const ModelParams params = paper_params();
  const EnsembleModel model = build_model(params);
  const Index nm = model.state_dim();
  const Index no = Index(params.n) * (params.m - 1);
  const Index horizon = 600;
  const SimTrace trace = simulate(model, Vector::Zero(nm), horizon, 71, 0);

  FilterRunOptions opt;
  opt.record_gains = false;
  opt.record_common_cov_trace = true;
  const CkfRun ckf = run_ckf(model, Vector::Zero(nm), Matrix(1e-8 * Matrix::Identity(nm, nm)),
                             trace.y, Precision::Extended, opt);
  for (Index k = 0; k < horizon; ++k)
    CHECK(ckf.common_cov_trace[k + 1] >= ckf.common_cov_trace[k] * (1 - 1e-12));
  CHECK(ckf.common_cov_trace[horizon] >= 10 * ckf.common_cov_trace[0]);

  FilterRunOptions skf_opt;
  skf_opt.record_gains = false;
  skf_opt.record_cov_norm = true;
  const Decomposition dec = build_decomposition(model, zero_gamma(params));
  const SkfRun skf = run_skf(model, dec, Vector::Zero(no), Vector::Zero(params.n),
                             Matrix(1e-8 * Matrix::Identity(no, no)), trace.y, skf_opt);
  const double settled = skf.p_norm[horizon / 2];
  for (Index k = horizon / 2; k <= horizon; ++k) CHECK(skf.p_norm[k] <= 2 * settled);
}

TEST_CASE("ideal common-mode error recursion") {
  ModelParams p;
  p.n = 2;
  p.m = 3;
  p.tau = 1.0;
  p.q_sq = (Vector(2) << 0.1, 0.2).finished();
  p.r_sq = 1e-4;
  const EnsembleModel model = build_model(p);

  Vector eps(2), v(6);
  eps << 2, -1;
  v << 1, 2, 3, 4, 5, 6;  // level-1 noise (1,2,3), level-2 noise (4,5,6)
  const Vector next = ideal_unobs_error_step(eps, v, model);
  // A eps = (2 + (-1), -1) = (1, -1); summed noise = (6, 15)
  CHECK(next[0] == doctest::Approx(1 + 6).epsilon(1e-15));
  CHECK(next[1] == doctest::Approx(-1 + 15).epsilon(1e-15));
}

TEST_CASE("singular innovation raises a numerical error") {
  ModelParams params = paper_params();
  params.q_sq = Vector::Zero(3);
  params.r_sq = 0.0;
  const EnsembleModel model = build_model(params);
  const Index nm = model.state_dim();

  CkfState state;
  state.x_hat = Vector::Zero(nm);
  state.P = Matrix::Zero(nm, nm);
  CHECK_THROWS_WITH_AS(ckf_step(state, Vector::Zero(model.meas_dim()), model),
                       doctest::Contains("singular"), NumericalError);
}

TEST_CASE("run options record what they promise") {
  const EnsembleModel model = build_model(paper_params());
  const Index nm = model.state_dim();
  const SimTrace trace = simulate(model, Vector::Zero(nm), 25, 2, 0);
  const Matrix p0 = 1e-6 * Matrix::Identity(nm, nm);

  FilterRunOptions opt;
  opt.record_cov_norm = true;
  opt.cov_checkpoints = {7, 0, 25};
  const CkfRun run = run_ckf(model, Vector::Zero(nm), p0, trace.y, Precision::Double, opt);

  CHECK(run.gains.size() == 25);
  CHECK(run.cov_norm.size() == 26);
  CHECK(run.cov_norm[0] == doctest::Approx(p0.norm()));
  REQUIRE(run.cov_checkpoints.size() == 3);
  CHECK((run.cov_checkpoints[0] - p0).norm() == 0.0);  // sorted: k = 0 first

  // checkpoint at 7 equals an independent re-run of the kernel
  Matrix p = p0;
  for (int k = 0; k < 7; ++k)
    kalman_gain_cov_step<double>(p, model.F, model.H, model.W, model.R);
  CHECK((run.cov_checkpoints[1] - p).norm() == 0.0);
}
