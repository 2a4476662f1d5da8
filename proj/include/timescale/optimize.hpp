#pragma once

#include <functional>

#include "timescale/types.hpp"

namespace timescale {

/// Cost evaluator over mixing blocks.  Must be pure and thread-safe: the
/// prober may call it from several worker threads at once.
using CostFn = std::function<double(const Matrix& gamma)>;

/// Exact second-order model J(v) = c + b.v + (1/2) v^T M v over the
/// column-major vectorization v of the rows x cols mixing block.
struct QuadraticForm {
  Matrix M;   ///< d x d symmetric curvature
  Vector b;   ///< d gradient at zero
  double c;   ///< value at zero
  int rows;   ///< mixing-block row count (n)
  int cols;   ///< mixing-block column count (n(m-1))

  double value(const Vector& v) const;
  Vector vectorize(const Matrix& gamma) const;
  Matrix devectorize(const Vector& v) const;
};

struct ProbeStats {
  double step = 1.0;                ///< probe step actually used
  Index evaluations = 0;            ///< cost calls spent
  double max_diag_residual = 0.0;   ///< worst relative miss of the 2h checks
};

/// Recover the exact quadratic model of a quadratic cost by symmetric
/// differencing on the unit-coordinate probe set:
///
///   c     = J(0)
///   b_i   = (J(h e_i) - J(-h e_i)) / 2h
///   M_ii  = (J(h e_i) + J(-h e_i) - 2 J(0)) / h^2
///   M_ij  = (J(h e_i + h e_j) - J(h e_i) - J(h e_j) + J(0)) / h^2
///
/// with h = 1, falling back to h = 1e-3 only if some probe overflows.
/// Each diagonal is cross-checked at 2h e_i; a relative miss above 1e-6
/// means the cost is not the quadratic this recovery assumes, and raises
/// NumericalError.  Probes are split across `threads` workers; results are
/// identical for any thread count.
QuadraticForm recover_quadratic(const CostFn& cost, int rows, int cols, int threads = 1,
                                ProbeStats* stats = nullptr);

struct OptimizeResult {
  Matrix gamma_star;             ///< minimizer as a mixing block
  double j_star;                 ///< model value at the minimizer
  double grad_norm_zero;         ///< ||b||
  double stationarity_residual;  ///< ||(b + M v*) restricted to the range of M||
  Vector eigenvalues;            ///< spectrum of M, ascending
  double null_cutoff;            ///< eigenvalues at or below this count as flat
  int null_count;                ///< number of flat directions
};

/// Minimize the quadratic model.  Flat directions of M (eigenvalues below
/// 1e-10 of the largest) get a zero component, so the minimizer is the
/// minimum-norm one.
OptimizeResult solve_optimal(const QuadraticForm& form);

}  // namespace timescale
