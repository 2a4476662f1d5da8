#pragma once

#include <string>
#include <vector>

#include "timescale/simulate.hpp"
#include "timescale/types.hpp"

namespace timescale {

/// Atomic-time error series TA[k] = z[k] - zhat[k] = D(x[k] - x_hat[k]).
struct TaSeries {
  Vector values;       ///< seconds, one entry per step
  std::string source;  ///< which filter produced the estimates
};

/// TA of an estimate sequence against the truth of a trace.  `estimates`
/// holds one full-space estimate per row, aligned with trace.x.
TaSeries atomic_time(const SimTrace& trace, const Matrix& estimates,
                     const EnsembleModel& model, std::string source);

/// Generated time scale: per-step mean of the member clock readings minus
/// the predicted ensemble time deviation.  `readings` holds one row per
/// step with the m member readings.
Vector generated_timescale(const Matrix& readings, const Vector& z_hat);

enum class Detrend {
  None,    ///< use the phase series as is
  Mean,    ///< subtract the mean
  Linear,  ///< subtract the least-squares line
};

/// Overlapping Allan deviation curve.
struct AdevCurve {
  Vector taus;                   ///< averaging times, strictly increasing [s]
  Vector sigmas;                 ///< deviations (dimensionless)
  std::vector<Index> n_samples;  ///< second-difference count per point
};

/// Overlapping Allan deviation of a phase series (seconds) sampled every
/// tau0 seconds, at averaging times {mult * tau0}:
///
///   sigma^2(m tau0) = sum_i (x[i+2m] - 2 x[i+m] + x[i])^2
///                     / (2 (m tau0)^2 (N - 2m))
///
/// Multiples too large for the series (N < 2m+1) are skipped with a warning
/// on stderr rather than an error.
AdevCurve overlapping_adev(const Vector& phase, double tau0,
                           const std::vector<Index>& multiples,
                           Detrend detrend = Detrend::None);

/// Octave-spaced multiples {1, 2, 4, ...} usable for a series of length n.
std::vector<Index> octave_multiples(Index n);

}  // namespace timescale
