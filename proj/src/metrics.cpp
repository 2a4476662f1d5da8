#include "timescale/metrics.hpp"

#include <cmath>
#include <iostream>
#include <string>

#include "timescale/errors.hpp"

namespace timescale {

TaSeries atomic_time(const SimTrace& trace, const Matrix& estimates,
                     const EnsembleModel& model, std::string source) {
  if (estimates.rows() != trace.x.rows() || estimates.cols() != trace.x.cols())
    throw InvalidParameterError("atomic_time: estimate block must match the trace, got " +
                                std::to_string(estimates.rows()) + " x " +
                                std::to_string(estimates.cols()));

  TaSeries series;
  series.source = std::move(source);
  series.values = trace.z - estimates * model.D.transpose();
  return series;
}

Vector generated_timescale(const Matrix& readings, const Vector& z_hat) {
  if (readings.rows() != z_hat.size())
    throw InvalidParameterError("generated_timescale: readings and z_hat lengths differ");
  return readings.rowwise().mean() - z_hat;
}

namespace {

Vector apply_detrend(const Vector& phase, Detrend detrend) {
  const Index n = phase.size();
  switch (detrend) {
    case Detrend::None:
      return phase;
    case Detrend::Mean:
      return phase.array() - phase.mean();
    case Detrend::Linear: {
      // Least-squares line over sample index.
      const double tbar = double(n - 1) / 2.0;
      double stt = 0, sty = 0;
      for (Index i = 0; i < n; ++i) {
        stt += (i - tbar) * (i - tbar);
        sty += (i - tbar) * phase[i];
      }
      const double slope = stt > 0 ? sty / stt : 0.0;
      const double intercept = phase.mean() - slope * tbar;
      Vector out(n);
      for (Index i = 0; i < n; ++i) out[i] = phase[i] - (intercept + slope * i);
      return out;
    }
  }
  return phase;
}

}  // namespace

AdevCurve overlapping_adev(const Vector& phase, double tau0,
                           const std::vector<Index>& multiples, Detrend detrend) {
  if (!(tau0 > 0)) throw InvalidParameterError("overlapping_adev: tau0 must be positive");
  const Index n = phase.size();
  if (n < 3) throw InvalidParameterError("overlapping_adev: need at least 3 phase samples");

  const Vector x = apply_detrend(phase, detrend);

  AdevCurve curve;
  std::vector<double> taus, sigmas;
  Index previous = 0;
  for (Index mult : multiples) {
    if (mult < 1) throw InvalidParameterError("overlapping_adev: multiples must be >= 1");
    if (mult <= previous)
      throw InvalidParameterError("overlapping_adev: multiples must be strictly increasing");
    previous = mult;
    if (n < 2 * mult + 1) {
      std::cerr << "overlapping_adev: skipping tau = " << mult * tau0
                << " s, series too short (" << n << " points)\n";
      continue;
    }
    const Index count = n - 2 * mult;
    double acc = 0;
    for (Index i = 0; i < count; ++i) {
      const double dd = x[i + 2 * mult] - 2.0 * x[i + mult] + x[i];
      acc += dd * dd;
    }
    const double tau = mult * tau0;
    taus.push_back(tau);
    sigmas.push_back(std::sqrt(acc / (2.0 * tau * tau * count)));
    curve.n_samples.push_back(count);
  }
  curve.taus = Eigen::Map<const Vector>(taus.data(), Index(taus.size()));
  curve.sigmas = Eigen::Map<const Vector>(sigmas.data(), Index(sigmas.size()));
  return curve;
}

std::vector<Index> octave_multiples(Index n) {
  std::vector<Index> multiples;
  for (Index mult = 1; n >= 2 * mult + 1; mult *= 2) multiples.push_back(mult);
  return multiples;
}

}  // namespace timescale
