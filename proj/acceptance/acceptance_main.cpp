// End-to-end acceptance checks for the time-scale toolkit.  Each criterion
// prints one [PASS]/[FAIL] line; the process exits nonzero if any failed.
// All tolerances are fixed here, in code.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "timescale/extended.hpp"
#include "timescale/filter.hpp"
#include "timescale/io.hpp"
#include "timescale/metrics.hpp"
#include "timescale/model.hpp"
#include "timescale/moments.hpp"
#include "timescale/optimize.hpp"
#include "timescale/rng.hpp"
#include "timescale/scenario.hpp"
#include "timescale/simulate.hpp"

using namespace timescale;
namespace fs = std::filesystem;

namespace {

ModelParams reference_params() {
  ModelParams p;
  p.n = 3;
  p.m = 5;
  p.tau = 1.0;
  p.q_sq = (Vector(3) << 2.9394e-10, 1.1785e-16, 4.5574e-35).finished();
  p.r_sq = 1e-12;
  return p;
}

// ---- quadrature oracle for the per-clock process noise ---------------------

void gauss_legendre(int points, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.resize(points);
  weights.resize(points);
  for (int i = 0; i < points; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (points + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < points; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      const double dp = points * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = x;
    double p0 = 1.0, p1 = 0.0;
    for (int j = 0; j < points; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
    }
    const double dp = points * (x * p0 - p1) / (x * x - 1.0);
    weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

Matrix taylor_row_scaled(int n, double s) {
  // Phi(s): unit upper-triangular with s^j / j! on the j-th superdiagonal.
  Matrix phi = Matrix::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    double f = 1.0;
    for (int j = 1; i + j < n; ++j) {
      f *= s / j;
      phi(i, i + j) = f;
    }
  }
  return phi;
}

Matrix process_noise_quadrature(int n, double tau, const Vector& q_sq) {
  std::vector<double> nodes, weights;
  gauss_legendre(8, nodes, weights);
  Matrix acc = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double s = 0.5 * tau * (nodes[i] + 1.0);
    const Matrix phi = taylor_row_scaled(n, s);
    acc += (0.5 * tau * weights[i]) * (phi * q_sq.asDiagonal() * phi.transpose());
  }
  return acc;
}

// ---- small local helpers ---------------------------------------------------

Matrix random_psd(std::mt19937_64& rng, Index dim, double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix b(dim, dim);
  for (Index r = 0; r < dim; ++r)
    for (Index c = 0; c < dim; ++c) b(r, c) = u(rng);
  return scale * (b * b.transpose());
}

Vector uniform_vector(std::mt19937_64& rng, Index dim, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = u(rng);
  return v;
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    files[entry.path().filename().string()] =
        std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

// Shared experiment pieces (computed lazily, reused across criteria).
struct Workbench {
  EnsembleModel model = build_model(reference_params());
  Index nm = model.state_dim();
  Index no = Index(model.params.n) * (model.params.m - 1);

  // mismatched-start setup: one uniform true state, near-zero initial guess
  Vector x0_spread = [this] {
    GaussianStream stream(substream_seed(777, StreamKind::InitDraw, 0));
    Vector x(nm);
    for (Index i = 0; i < nm; ++i) x[i] = stream.next_uniform(-6e-8, 6e-8);
    return x;
  }();
  Vector xhat0 = Vector::Constant(nm, 1e-28);

  std::vector<Matrix> gains_1000 =
      gain_schedule(model, Matrix(1e-4 * Matrix::Identity(no, no)), 1000);

  // matched-start comparison run shared by two criteria
  bool have_matched = false;
  CkfRun matched_ckf;
  SkfRun matched_skf;

  void ensure_matched_runs() {
    if (have_matched) return;
    std::mt19937_64 rng(2002);
    const Vector x0 = uniform_vector(rng, nm, -6e-8, 6e-8);
    const SimTrace trace = simulate(model, x0, 200, 515, 0);
    const Matrix p0 = 0.1 * Matrix::Identity(nm, nm);
    const Decomposition dec = build_decomposition(model, zero_gamma(model.params));
    // The full-state covariance is numerically fragile (that is criterion
    // 10's subject), so its chain runs in extended precision; both filters
    // see the same measurement stream.
    matched_ckf = run_ckf(model, Vector::Zero(nm), p0, trace.y, Precision::Extended);
    matched_skf = run_skf(model, dec, Vector::Zero(no), Vector::Zero(model.params.n),
                          project_cov(model, p0), trace.y);
    have_matched = true;
  }

  bool have_spread_form = false;
  QuadraticForm spread_form;
  ProbeStats spread_stats;
  OptimizeResult spread_sol;
  std::function<double(const Matrix&)> spread_cost;

  void ensure_spread_optimum() {
    if (have_spread_form) return;
    InitError init;
    init.mu0 = x0_spread - xhat0;
    init.Q0 = Matrix::Zero(nm, nm);
    const double delta1 = 1.0, delta2 = 5.4117;
    spread_cost = [this, init, delta1, delta2](const Matrix& gamma) {
      return cost_J(model, gamma, init, gains_1000, delta1, delta2);
    };
    spread_form = recover_quadratic(spread_cost, model.params.n, int(no), 1, &spread_stats);
    spread_sol = solve_optimal(spread_form);
    have_spread_form = true;
  }
};

}  // namespace

int main() {
  int failures = 0;
  const auto record = [&](int id, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
  };
  const auto guarded = [&](int id, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      record(id, false, std::string("unexpected error: ") + e.what());
    }
  };

  Workbench wb;

  // 1. closed-form per-clock process noise against numerical quadrature
  guarded(1, [&] {
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<int> pick_n(1, 4);
    std::uniform_real_distribution<double> pick_tau(0.2, 5.0);
    std::uniform_real_distribution<double> pick_exp(-35.0, -9.0);
    double worst = 0;
    for (int draw = 0; draw < 100; ++draw) {
      ModelParams p;
      p.n = pick_n(rng);
      p.m = 2;
      p.tau = pick_tau(rng);
      p.q_sq.resize(p.n);
      for (Index i = 0; i < p.n; ++i) p.q_sq[i] = std::pow(10.0, pick_exp(rng));
      p.r_sq = 1e-12;
      const Matrix closed = build_model(p).W_single;
      const Matrix quad = process_noise_quadrature(p.n, p.tau, p.q_sq);
      worst = std::max(worst, (closed - quad).norm() / quad.norm());
    }
    record(1, worst <= 1e-10,
           fmt("closed-form process noise matches quadrature on 100 random models "
               "(worst relative error %.2e, tolerance 1e-10)",
               worst));
  });

  // 2. structured filter == full-state filter from matched starts
  guarded(2, [&] {
    wb.ensure_matched_runs();
    double worst = 0;
    for (Index k = 0; k <= 200; ++k)
      worst = std::max(worst, (wb.matched_skf.x_hat.row(k) - wb.matched_ckf.x_hat.row(k)).norm() /
                                  (1 + wb.matched_ckf.x_hat.row(k).norm()));
    record(2, worst <= 1e-6,
           fmt("structured and full-state estimates coincide for 200 steps "
               "(worst scaled residual %.2e, tolerance 1e-6)",
               worst));
  });

  // 3. common-mode estimate stream ignores measurement noise entirely
  guarded(3, [&] {
    std::mt19937_64 rng(3003);
    const Vector x0 = uniform_vector(rng, wb.nm, -6e-8, 6e-8);
    const SimTrace trace = simulate(wb.model, x0, 300, 616, 0);
    const SimTrace redrawn = resample_measurements(wb.model, trace, 4);
    const Decomposition dec = build_decomposition(wb.model, zero_gamma(wb.model.params));

    bool identical = true;
    bool measurements_differ = (redrawn.y - trace.y).norm() > 0;
    for (int variant = 0; variant < 3; ++variant) {
      const Matrix p_hat0 = random_psd(rng, wb.no, std::pow(10.0, -3 - variant));
      const Vector xi_u0 = (Vector(3) << 3e-8, -2e-9, 1e-10).finished();
      const SkfRun a =
          run_skf(wb.model, dec, Vector::Zero(wb.no), xi_u0, p_hat0, trace.y);
      const SkfRun b =
          run_skf(wb.model, dec, Vector::Zero(wb.no), xi_u0, p_hat0, redrawn.y);
      if ((a.xi_u - b.xi_u).norm() != 0.0) identical = false;
    }
    record(3, identical && measurements_differ,
           "common-mode estimates are bitwise invariant under re-randomized "
           "measurement noise for 3 covariance starts");
  });

  // 4. reduced covariance chain mirrors the full one on the difference
  //    subspace, with the squared-noise regularizer
  guarded(4, [&] {
    const double p = 1e-9;
    const Decomposition dec = build_decomposition(wb.model, zero_gamma(wb.model.params));
    const MatrixE f = to_extended(wb.model.F), h = to_extended(wb.model.H),
                  w = to_extended(wb.model.W), r = to_extended(wb.model.R);
    const MatrixE f_oo = to_extended(dec.F_oo), h_o = to_extended(dec.H_o);
    const Matrix vvt = wb.model.Vbar * wb.model.Vbar.transpose();
    const MatrixE w_red = to_extended(kron<double>(
        wb.model.W_single, Matrix(Matrix::Identity(wb.model.params.m - 1,
                                                   wb.model.params.m - 1))));
    const MatrixE vvt_inv = to_extended(Matrix(vvt.fullPivLu().inverse()));
    const MatrixE lift =
        to_extended(kron<double>(Matrix::Identity(3, 3), wb.model.Vbar_pinv));

    MatrixE p_full = Extended(p) * MatrixE::Identity(wb.nm, wb.nm);
    MatrixE p_check = Extended(p) * MatrixE::Identity(wb.no, wb.no);
    double worst = 0;
    for (int k = 0; k < 100; ++k) {
      const MatrixE lhs = p_full * lift;
      const MatrixE rhs = lift * p_check;
      worst = std::max(worst, static_cast<double>(Extended((lhs - rhs).norm() / rhs.norm())));
      kalman_gain_cov_step<Extended>(p_full, f, h, w, r);
      reduced_gain_cov_step<Extended>(p_check, f_oo, h_o, w_red, vvt_inv,
                                      Extended(wb.model.params.r_sq));
    }
    record(4, worst <= 1e-8,
           fmt("difference-subspace covariance mirrors the full chain for 100 steps "
               "with regularizer r_sq (worst relative error %.2e, tolerance 1e-8)",
               worst));
  });

  // 5. full-state gains never touch the common mode
  guarded(5, [&] {
    wb.ensure_matched_runs();
    const Matrix sum_map =
        kron<double>(Matrix::Identity(3, 3), Matrix::Constant(5, 1, 1.0));
    double worst = 0;
    for (const Matrix& gain : wb.matched_ckf.gains)
      worst = std::max(worst, (sum_map.transpose() * gain).norm() / (1 + gain.norm()));
    record(5, worst <= 1e-8,
           fmt("full-state gains have no common-mode component over 200 steps "
               "(worst scaled norm %.2e, tolerance 1e-8)",
               worst));
  });

  // 6. the scalarized cost over mixing blocks is a convex quadratic
  guarded(6, [&] {
    wb.ensure_spread_optimum();
    Eigen::SelfAdjointEigenSolver<Matrix> es(wb.spread_form.M, Eigen::EigenvaluesOnly);
    const double lam_min = es.eigenvalues().minCoeff();
    const double m_norm = wb.spread_form.M.norm();
    bool pass = lam_min >= -1e-8 * m_norm;

    std::mt19937_64 rng(6006);
    double worst_fit = 0;
    for (int trial = 0; trial < 10; ++trial) {
      const Vector v = uniform_vector(rng, 36, -1.0, 1.0);
      const double exact = wb.spread_cost(wb.spread_form.devectorize(v));
      const double fit = std::abs(wb.spread_form.value(v) - exact) /
                         (std::abs(exact) + std::abs(wb.spread_form.c));
      worst_fit = std::max(worst_fit, fit);
    }
    pass = pass && worst_fit <= 1e-8;
    record(6, pass,
           fmt("recovered 36x36 cost curvature is positive semidefinite "
               "(min eigenvalue %.2e vs -1e-8*norm %.2e) and fits 10 fresh probes "
               "(worst relative residual %.2e)",
               lam_min, -1e-8 * m_norm, worst_fit));
  });

  // 7. exchangeable starts make the gradient vanish; a matched start makes
  //    the optimal mixing block vanish
  guarded(7, [&] {
    Vector mu_hat(3);
    mu_hat << 3e-8, -2e-9, 1e-10;
    const Matrix q_hat = (Vector(3) << 1e-16, 1e-18, 1e-20).finished().asDiagonal();
    const InitError exchangeable = structured_init(mu_hat, q_hat, 0.5, wb.model.params);
    const CostFn sym_cost = [&](const Matrix& gamma) {
      return cost_J(wb.model, gamma, exchangeable, wb.gains_1000, 1.0, 1.0);
    };
    const QuadraticForm sym_form =
        recover_quadratic(sym_cost, wb.model.params.n, int(wb.no), 1);
    const double grad_scale = std::abs(sym_form.c);
    const bool grad_ok = sym_form.b.norm() <= 1e-8 * grad_scale;

    // matched start: zero initial error, so nothing to mix away
    InitError matched;
    matched.mu0 = Vector::Zero(wb.nm);
    matched.Q0 = Matrix::Zero(wb.nm, wb.nm);
    const CostFn matched_cost = [&](const Matrix& gamma) {
      return cost_J(wb.model, gamma, matched, wb.gains_1000, 1.0, 1.0);
    };
    const QuadraticForm matched_form =
        recover_quadratic(matched_cost, wb.model.params.n, int(wb.no), 1);
    const OptimizeResult matched_sol = solve_optimal(matched_form);
    const bool gamma_ok = matched_sol.gamma_star.norm() <= 1e-6;

    record(7, grad_ok && gamma_ok,
           fmt("exchangeable start gives zero cost gradient (|b| = %.2e vs 1e-8*J(0) = "
               "%.2e); matched start yields a zero mixing block (|Gamma*| = %.2e)",
               sym_form.b.norm(), 1e-8 * grad_scale, matched_sol.gamma_star.norm()));
  });

  // 8. a mismatched start makes the optimal mixing block nonzero and
  //    strictly cheaper than no mixing
  guarded(8, [&] {
    wb.ensure_spread_optimum();
    const double j_zero = wb.spread_form.c;
    const double j_star = wb.spread_cost(wb.spread_sol.gamma_star);
    const bool pass = wb.spread_sol.gamma_star.norm() > 0 && j_star < j_zero;
    record(8, pass,
           fmt("mismatched start yields |Gamma*| = %.2e with J(Gamma*) = %.6e < J(0) = "
               "%.6e",
               wb.spread_sol.gamma_star.norm(), j_star, j_zero));
  });

  // 9. analytic moment propagation against 1000 Monte Carlo paths
  guarded(9, [&] {
    wb.ensure_spread_optimum();
    InitError init;
    init.mu0 = wb.x0_spread - wb.xhat0;
    init.Q0 = Matrix::Zero(wb.nm, wb.nm);
    const std::vector<Index> checkpoints{10, 100, 1000};
    const Index n_paths = 1000;

    bool pass = true;
    std::string note;
    for (const bool mixed : {false, true}) {
      const Matrix gamma =
          mixed ? wb.spread_sol.gamma_star : Matrix(zero_gamma(wb.model.params));
      const TaMoments analytic = ta_moments(wb.model, gamma, init, wb.gains_1000);
      const Decomposition dec = build_decomposition(wb.model, gamma);
      const auto [xi_o0, xi_u0] = transform_state(dec, wb.xhat0);

      Matrix ta_samples(n_paths, Index(checkpoints.size()));
      for (Index path = 0; path < n_paths; ++path) {
        const SimTrace trace = simulate(wb.model, wb.x0_spread, 1000, 424242, path);
        const SkfRun run =
            run_skf_scheduled(wb.model, dec, xi_o0, xi_u0, wb.gains_1000, trace.y);
        for (std::size_t i = 0; i < checkpoints.size(); ++i) {
          const Index k = checkpoints[i];
          ta_samples(path, Index(i)) =
              ((trace.x.row(k) - run.x_hat.row(k)) * wb.model.D.transpose()).value();
        }
      }

      for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        const Index k = checkpoints[i];
        const double mean = ta_samples.col(Index(i)).mean();
        const double var =
            (ta_samples.col(Index(i)).array() - mean).square().sum() / (n_paths - 1);
        const double mean_margin = 3.0 * std::sqrt(analytic.var[k] / n_paths);
        const bool mean_ok = std::abs(mean - analytic.mean[k]) <= mean_margin;
        const bool var_ok = std::abs(var / analytic.var[k] - 1.0) <= 0.20;
        if (!(mean_ok && var_ok)) {
          pass = false;
          note += fmt(" [k=%.0f mean dev %.2e/%.2e var ratio %.3f]", double(k),
                      std::abs(mean - analytic.mean[k]), mean_margin,
                      var / analytic.var[k]);
        }
      }
    }
    record(9, pass,
           "1000-path Monte Carlo moments match analytic propagation at k in "
           "{10, 100, 1000} for both mixing blocks" +
               note);
  });

  // 10. full-state common-mode covariance grows without bound; structured
  //     covariance stays put
  guarded(10, [&] {
    const Index horizon = 10000;
    const SimTrace trace =
        simulate(wb.model, Vector::Constant(wb.nm, 1e-8), horizon, 717, 0);
    FilterRunOptions opt;
    opt.record_gains = false;
    opt.record_common_cov_trace = true;
    const CkfRun ckf = run_ckf(wb.model, Vector::Zero(wb.nm),
                               Matrix(1e-8 * Matrix::Identity(wb.nm, wb.nm)), trace.y,
                               Precision::Extended, opt);
    bool monotone = true;
    for (Index k = 0; k < horizon; ++k)
      if (ckf.common_cov_trace[k + 1] < ckf.common_cov_trace[k] * (1 - 1e-12))
        monotone = false;
    const double growth = ckf.common_cov_trace[horizon] / ckf.common_cov_trace[0];

    FilterRunOptions skf_opt;
    skf_opt.record_gains = false;
    skf_opt.record_cov_norm = true;
    const Decomposition dec = build_decomposition(wb.model, zero_gamma(wb.model.params));
    const SkfRun skf = run_skf(wb.model, dec, Vector::Zero(wb.no),
                               Vector::Zero(wb.model.params.n),
                               Matrix(1e-8 * Matrix::Identity(wb.no, wb.no)), trace.y,
                               skf_opt);
    const double settled = skf.p_norm[2000];
    bool bounded = true;
    for (Index k = 2000; k <= horizon; ++k)
      if (skf.p_norm[k] > 2 * settled) bounded = false;

    record(10, monotone && growth >= 10.0 && bounded,
           fmt("full-state common-mode covariance trace is non-decreasing and grows "
               "%.1e-fold over 10000 steps; structured covariance stays within 2x of "
               "its step-2000 norm",
               growth));
  });

  // 11. deviation curve against the naive definitional oracle, plus the
  //     half-power law on integrated white noise
  guarded(11, [&] {
    std::mt19937_64 rng(1111);
    std::normal_distribution<double> gauss(0.0, 2e-9);
    Vector walk(4096);
    double acc = 0;
    for (Index i = 0; i < 4096; ++i) {
      acc += gauss(rng);
      walk[i] = acc;
    }
    const std::vector<Index> mults{1, 2, 5, 8, 32, 100};
    const AdevCurve curve = overlapping_adev(walk, 0.7, mults);
    double worst = 0;
    for (std::size_t i = 0; i < mults.size(); ++i) {
      const Index m = mults[i];
      const Index count = 4096 - 2 * m;
      long double sum = 0;
      for (Index j = 0; j < count; ++j) {
        const long double dd = (long double)(walk[j + 2 * m]) -
                               2.0L * (long double)(walk[j + m]) + (long double)(walk[j]);
        sum += dd * dd;
      }
      const long double tau = 0.7L * m;
      const double oracle = double(std::sqrt(sum / (2.0L * tau * tau * count)));
      worst = std::max(worst, std::abs(curve.sigmas[Index(i)] - oracle) / oracle);
    }

    Vector big(1000000);
    acc = 0;
    std::normal_distribution<double> fm(0.0, 3e-10);
    for (Index i = 0; i < big.size(); ++i) {
      acc += fm(rng);
      big[i] = acc;
    }
    const AdevCurve fm_curve =
        overlapping_adev(big, 1.0, {1, 2, 4, 8, 16, 32, 64, 128, 256});
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const Index pts = fm_curve.taus.size();
    for (Index i = 0; i < pts; ++i) {
      const double lx = std::log(fm_curve.taus[i]);
      const double ly = std::log(fm_curve.sigmas[i]);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double slope = (pts * sxy - sx * sy) / (pts * sxx - sx * sx);

    record(11, worst <= 1e-12 && std::abs(slope + 0.5) <= 0.05,
           fmt("deviation matches the naive oracle (worst relative error %.2e) and shows "
               "the half-power law on 1e6 integrated-white points (slope %.4f)",
               worst, slope));
  });

  // 12. the structured filter's atomic-time error forgets its covariance start
  guarded(12, [&] {
    std::mt19937_64 rng(1212);
    const Vector x0 = uniform_vector(rng, wb.nm, -6e-8, 6e-8);
    const SimTrace trace = simulate(wb.model, x0, 1000, 818, 0);
    const Decomposition dec = build_decomposition(wb.model, zero_gamma(wb.model.params));

    std::vector<Vector> ta_series;
    for (const double p : {0.01, 0.02, 0.04}) {
      const SkfRun run = run_skf(wb.model, dec, Vector::Zero(wb.no),
                                 Vector::Zero(wb.model.params.n),
                                 Matrix(p * Matrix::Identity(wb.no, wb.no)), trace.y);
      ta_series.push_back(atomic_time(trace, run.x_hat, wb.model, "skf").values);
    }

    double worst = 0;
    bool pass = true;
    for (std::size_t a = 0; a < ta_series.size(); ++a)
      for (std::size_t b = a + 1; b < ta_series.size(); ++b) {
        const double scale =
            1 + std::max(ta_series[a].tail(501).cwiseAbs().maxCoeff(),
                         ta_series[b].tail(501).cwiseAbs().maxCoeff());
        for (Index k = 500; k <= 1000; ++k) {
          const double diff = std::abs(ta_series[a][k] - ta_series[b][k]);
          worst = std::max(worst, diff / scale);
          if (diff > 1e-6 * scale) pass = false;
        }
      }
    record(12, pass,
           fmt("atomic-time error is start-independent beyond step 500 for covariance "
               "starts {0.01, 0.02, 0.04} I (worst scaled difference %.2e, tolerance "
               "1e-6)",
               worst));
  });

  // 13. the scenario pipeline is byte-deterministic
  guarded(13, [&] {
    const char* config_text = R"({
      "schema_version": 1,
      "name": "matched-start",
      "model": {"n": 3, "m": 5, "tau": 1.0,
                "q_sq": [2.9394e-10, 1.1785e-16, 4.5574e-35], "r_sq": 1e-12},
      "init": {"x0": {"kind": "constant", "value": 1e-28},
               "xhat0": {"kind": "constant", "value": 1e-28}},
      "filter": {"algo": "skf", "gamma": {"source": "optimize"}, "p0": 0.1,
                 "phat0": {"kind": "projected"}, "precision": "double"},
      "optimizer": {"delta1": 1.0, "delta2": 1.0, "horizon": 1000, "phat0": 1e-4},
      "run": {"horizon": 1000, "paths": 10, "seed": 20260815},
      "adev": {"enabled": true, "tau0": 1.0, "detrend": "none"},
      "outputs": {"emit": ["trace", "filter", "moments", "optimizer", "adev"]}
    })";
    const ScenarioConfig cfg = parse_scenario_text(config_text);

    const fs::path dir_a = fs::temp_directory_path() / "timescale_accept_a";
    const fs::path dir_b = fs::temp_directory_path() / "timescale_accept_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    run_scenario(cfg, dir_a.string());
    run_scenario(cfg, dir_b.string());

    const auto bytes_a = dir_bytes(dir_a);
    const auto bytes_b = dir_bytes(dir_b);
    const bool pass = !bytes_a.empty() && bytes_a == bytes_b;
    record(13, pass,
           fmt("repeated scenario runs produce byte-identical artifacts (%.0f files)",
               double(bytes_a.size())));
  });

  if (failures > 0) std::printf("%d of 13 criteria failed\n", failures);
  return failures > 0 ? 1 : 0;
}
