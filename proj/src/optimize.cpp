#include "timescale/optimize.hpp"

#include <atomic>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "timescale/errors.hpp"

namespace timescale {

double QuadraticForm::value(const Vector& v) const {
  return c + b.dot(v) + 0.5 * v.dot(M * v);
}

Vector QuadraticForm::vectorize(const Matrix& gamma) const {
  if (gamma.rows() != rows || gamma.cols() != cols)
    throw InvalidParameterError("vectorize: mixing block has the wrong shape");
  return Eigen::Map<const Vector>(gamma.data(), gamma.size());
}

Matrix QuadraticForm::devectorize(const Vector& v) const {
  if (v.size() != Index(rows) * cols)
    throw InvalidParameterError("devectorize: vector has the wrong length");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

namespace {

// Probe layout: [0] zero, [1..d] +e_i, [d+1..2d] -e_i, [2d+1..3d] 2e_i,
// then the strict upper-triangle pairs e_i + e_j in row order.
struct ProbePlan {
  int d;
  Index count() const { return 1 + 3 * Index(d) + Index(d) * (d - 1) / 2; }

  Vector direction(Index idx) const {
    Vector v = Vector::Zero(d);
    if (idx == 0) return v;
    if (idx <= d) {
      v[idx - 1] = 1;
    } else if (idx <= 2 * d) {
      v[idx - d - 1] = -1;
    } else if (idx <= 3 * d) {
      v[idx - 2 * d - 1] = 2;
    } else {
      Index r = idx - 3 * d - 1;
      int i = 0;
      while (r >= d - 1 - i) {
        r -= d - 1 - i;
        ++i;
      }
      const int j = i + 1 + int(r);
      v[i] = 1;
      v[j] = 1;
    }
    return v;
  }
};

std::vector<double> evaluate_probes(const CostFn& cost, const ProbePlan& plan, int rows,
                                    int cols, double step, int threads) {
  const Index total = plan.count();
  std::vector<double> values(total);
  std::atomic<Index> cursor{0};

  auto worker = [&]() {
    for (;;) {
      const Index idx = cursor.fetch_add(1);
      if (idx >= total) return;
      const Vector v = step * plan.direction(idx);
      values[idx] =
          cost(Eigen::Map<const Matrix>(v.data(), rows, cols));
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return values;
}

bool all_finite(const std::vector<double>& values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

QuadraticForm recover_quadratic(const CostFn& cost, int rows, int cols, int threads,
                                ProbeStats* stats) {
  if (rows < 1 || cols < 1)
    throw InvalidParameterError("recover_quadratic: mixing block must be non-empty");
  const int d = rows * cols;
  const ProbePlan plan{d};

  double step = 1.0;
  std::vector<double> values = evaluate_probes(cost, plan, rows, cols, step, threads);
  Index evaluations = plan.count();
  if (!all_finite(values)) {
    step = 1e-3;
    values = evaluate_probes(cost, plan, rows, cols, step, threads);
    evaluations += plan.count();
    if (!all_finite(values))
      throw NumericalError("recover_quadratic: cost overflows even at probe step 1e-3");
  }

  const double j0 = values[0];
  const auto plus = [&](int i) { return values[1 + i]; };
  const auto minus = [&](int i) { return values[1 + d + i]; };
  const auto twice = [&](int i) { return values[1 + 2 * d + i]; };

  QuadraticForm form;
  form.rows = rows;
  form.cols = cols;
  form.c = j0;
  form.b.resize(d);
  form.M.resize(d, d);
  for (int i = 0; i < d; ++i) {
    form.b[i] = (plus(i) - minus(i)) / (2 * step);
    form.M(i, i) = (plus(i) + minus(i) - 2 * j0) / (step * step);
  }
  Index pair_idx = 1 + 3 * Index(d);
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j, ++pair_idx) {
      const double mij = (values[pair_idx] - plus(i) - plus(j) + j0) / (step * step);
      form.M(i, j) = mij;
      form.M(j, i) = mij;
    }
  }

  // A genuine quadratic must also explain the 2h probes; anything else
  // means the cost has higher-order structure this recovery cannot model.
  double max_residual = 0;
  for (int i = 0; i < d; ++i) {
    const double predicted = j0 + 2 * step * form.b[i] + 2 * step * step * form.M(i, i);
    const double denom = std::abs(j0) + std::abs(twice(i)) + 1e-300;
    max_residual = std::max(max_residual, std::abs(twice(i) - predicted) / denom);
  }
  if (stats != nullptr) {
    stats->step = step;
    stats->evaluations = evaluations;
    stats->max_diag_residual = max_residual;
  }
  if (max_residual > 1e-6)
    throw NumericalError(
        "recover_quadratic: cost is not quadratic within tolerance (consistency residual " +
        std::to_string(max_residual) + ")");
  return form;
}

OptimizeResult solve_optimal(const QuadraticForm& form) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(form.M);
  if (es.info() != Eigen::Success)
    throw NumericalError("solve_optimal: eigendecomposition of the curvature failed");

  const Vector& lam = es.eigenvalues();
  const Matrix& u = es.eigenvectors();
  const double lam_max = lam.cwiseAbs().maxCoeff();
  const double cutoff = 1e-10 * lam_max;

  OptimizeResult result;
  result.eigenvalues = lam;
  result.null_cutoff = cutoff;
  result.null_count = 0;
  result.grad_norm_zero = form.b.norm();

  const Vector beta = u.transpose() * form.b;
  Vector coeff = Vector::Zero(lam.size());
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam[i] > cutoff) {
      coeff[i] = -beta[i] / lam[i];
    } else {
      ++result.null_count;
    }
  }
  const Vector v_star = u * coeff;

  // Residual of b + M v* seen only through the non-flat eigendirections.
  Vector grad_modes = beta;
  for (Index i = 0; i < lam.size(); ++i)
    grad_modes[i] = lam[i] > cutoff ? beta[i] + lam[i] * coeff[i] : 0.0;
  result.stationarity_residual = grad_modes.norm();

  result.gamma_star = form.devectorize(v_star);
  result.j_star = form.value(v_star);
  return result;
}

}  // namespace timescale
