#include "timescale/simulate.hpp"

#include <cmath>
#include <string>

#include "timescale/errors.hpp"
#include "timescale/rng.hpp"

namespace timescale {

Matrix psd_sqrt(const Matrix& s) {
  if (s.rows() != s.cols()) throw InvalidParameterError("psd_sqrt: matrix must be square");
  const double scale = s.norm();
  if (scale > 0 && (s - s.transpose()).norm() > 1e-10 * scale)
    throw InvalidParameterError("psd_sqrt: matrix is not symmetric within tolerance");

  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) throw NumericalError("psd_sqrt: eigendecomposition failed");

  Vector lam = es.eigenvalues();
  const double floor = -1e-12 * std::max(scale, 0.0);
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < floor)
      throw NumericalError("psd_sqrt: matrix is indefinite, most negative eigenvalue " +
                           std::to_string(lam[i]));
    lam[i] = lam[i] > 0 ? std::sqrt(lam[i]) : 0.0;
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

SimTrace simulate(const EnsembleModel& model, const Vector& x0, Index horizon,
                  std::uint64_t seed, std::uint64_t path) {
  if (horizon < 1) throw InvalidParameterError("simulate: horizon must be >= 1");
  if (x0.size() != model.state_dim())
    throw InvalidParameterError("simulate: x0 has dimension " + std::to_string(x0.size()) +
                                ", model expects " + std::to_string(model.state_dim()));
  if (!x0.allFinite()) throw InvalidParameterError("simulate: x0 must be finite");

  const Index nm = model.state_dim(), my = model.meas_dim();
  const Matrix lw = psd_sqrt(model.W);
  const double lr = std::sqrt(model.params.r_sq);

  GaussianStream process(substream_seed(seed, StreamKind::ProcessNoise, path));
  GaussianStream meas(substream_seed(seed, StreamKind::MeasurementNoise, path, 0));

  SimTrace trace;
  trace.seed = seed;
  trace.path = path;
  trace.measurement_draw = 0;
  trace.horizon = horizon;
  trace.x.resize(horizon + 1, nm);
  trace.y.resize(horizon, my);
  trace.z.resize(horizon + 1);

  Vector x = x0;
  for (Index k = 0; k < horizon; ++k) {
    trace.x.row(k) = x.transpose();
    trace.z[k] = (model.D * x).value();
    trace.y.row(k) = (model.H * x + lr * meas.draw(my)).transpose();
    x = model.F * x + lw * process.draw(nm);
  }
  trace.x.row(horizon) = x.transpose();
  trace.z[horizon] = (model.D * x).value();
  return trace;
}

SimTrace resample_measurements(const EnsembleModel& model, const SimTrace& trace,
                               std::uint64_t draw) {
  if (trace.x.cols() != model.state_dim())
    throw InvalidParameterError("resample_measurements: trace does not match model dimensions");

  const Index my = model.meas_dim();
  const double lr = std::sqrt(model.params.r_sq);
  GaussianStream meas(substream_seed(trace.seed, StreamKind::MeasurementNoise, trace.path, draw));

  SimTrace out = trace;
  out.measurement_draw = draw;
  for (Index k = 0; k < trace.horizon; ++k)
    out.y.row(k) =
        (model.H * trace.x.row(k).transpose() + lr * meas.draw(my)).transpose();
  return out;
}

}  // namespace timescale
