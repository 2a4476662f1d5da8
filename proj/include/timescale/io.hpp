#pragma once

#include <string>
#include <vector>

#include "timescale/metrics.hpp"
#include "timescale/model.hpp"
#include "timescale/moments.hpp"
#include "timescale/simulate.hpp"
#include "timescale/types.hpp"

namespace timescale {

/// Scientific notation with 17 significant digits — enough to round-trip
/// any double exactly.
std::string format_sci(double value);

/// Write a numeric table with the given column names.  Values are written
/// with format_sci, separated by commas.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& rows);

/// Read back a table written by write_csv; nan cells parse as NaN.
Matrix read_csv(const std::string& path, std::vector<std::string>* header = nullptr);

/// Trace table `k, x_1_1..x_n_m, y_1..y_{m-1}, z`.  The final row carries
/// the terminal state, which has no measurement; its y cells are written as
/// nan and dropped again on read.
void write_trace_csv(const std::string& path, const SimTrace& trace,
                     const EnsembleModel& model);
SimTrace read_trace_csv(const std::string& path, const EnsembleModel& model);

/// Filter-run table `k, xhat_1_1..xhat_n_m, TA`.
void write_filter_csv(const std::string& path, const Matrix& estimates, const Vector& ta,
                      const EnsembleModel& model);

/// Moment table `k, mean, var, lo98, hi98`.
void write_moments_csv(const std::string& path, const TaMoments& moments,
                       const ConfidenceBand& band);

/// Deviation table `tau, sigma, n_samples`.
void write_adev_csv(const std::string& path, const AdevCurve& curve);

/// Mixing block as JSON: row-major data plus shape metadata.
void write_gamma_json(const std::string& path, const Matrix& gamma);
Matrix read_gamma_json(const std::string& path);

}  // namespace timescale
