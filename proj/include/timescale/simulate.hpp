#pragma once

#include <cstdint>

#include "timescale/model.hpp"
#include "timescale/types.hpp"

namespace timescale {

/// One sampled trajectory of the ensemble.
///
/// Row k of `x` is the true state at step k (horizon+1 rows); row k of `y`
/// is the measured phase-difference vector taken at step k (horizon rows,
/// since the final state has no measurement attached); z[k] = D x[k] is the
/// ensemble time deviation.
struct SimTrace {
  Matrix x;                           ///< (horizon+1) x nm true states
  Matrix y;                           ///< horizon x (m-1) measurements
  Vector z;                           ///< horizon+1 ensemble time deviations
  std::uint64_t seed = 0;             ///< base seed of the run family
  std::uint64_t path = 0;             ///< path index within the family
  std::uint64_t measurement_draw = 0; ///< measurement-noise draw counter
  Index horizon = 0;
};

/// Symmetric PSD square root via eigendecomposition.  Eigenvalues below
/// -1e-12 * ||S|| are rejected as indefinite; small negatives are clipped
/// to zero so rank-deficient covariances factor cleanly.
Matrix psd_sqrt(const Matrix& s);

/// Sample one trajectory: x[k+1] = F x[k] + v[k], y[k] = H x[k] + w[k],
/// with v ~ N(0, W) and w ~ N(0, R) drawn from independent substreams.
SimTrace simulate(const EnsembleModel& model, const Vector& x0, Index horizon,
                  std::uint64_t seed, std::uint64_t path = 0);

/// Same true states, fresh measurement noise: regenerates y from the stored
/// x using measurement substream `draw`.  draw = 0 reproduces the original
/// measurements bit-for-bit.
SimTrace resample_measurements(const EnsembleModel& model, const SimTrace& trace,
                               std::uint64_t draw);

}  // namespace timescale
