#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "test_support.hpp"
#include "timescale/errors.hpp"
#include "timescale/metrics.hpp"
#include "timescale/model.hpp"
#include "timescale/rng.hpp"
#include "timescale/simulate.hpp"

using namespace timescale;
using namespace testsupport;

namespace {

/// Straightforward quadratic-loop Allan deviation with long-double
/// accumulation, as an oracle for the production routine.
double adev_naive(const Vector& phase, double tau0, Index mult) {
  const Index n = phase.size();
  const Index count = n - 2 * mult;
  long double acc = 0;
  for (Index i = 0; i < count; ++i) {
    const long double dd = (long double)(phase[i + 2 * mult]) -
                           2.0L * (long double)(phase[i + mult]) +
                           (long double)(phase[i]);
    acc += dd * dd;
  }
  const long double tau = (long double)(mult)*tau0;
  return double(std::sqrt(acc / (2.0L * tau * tau * (long double)(count))));
}

Vector random_walk(std::mt19937_64& rng, Index n, double step) {
  std::normal_distribution<double> gauss(0.0, step);
  Vector x(n);
  double acc = 0;
  for (Index i = 0; i < n; ++i) {
    acc += gauss(rng);
    x[i] = acc;
  }
  return x;
}

}  // namespace

TEST_CASE("atomic-time error vanishes for perfect estimates and shifts affinely") {
  const EnsembleModel model = build_model(paper_params());
  const Index nm = model.state_dim();
  const SimTrace trace = simulate(model, Vector::Constant(nm, 1e-8), 80, 5, 0);

  const TaSeries exact = atomic_time(trace, trace.x, model, "perfect");
  CHECK(exact.values.size() == 81);
  CHECK(exact.source == "perfect");
  CHECK(exact.values.cwiseAbs().maxCoeff() < 1e-20);

  // constant estimate offset delta shows up as -D delta in every entry
  std::mt19937_64 rng(19);
  const Vector delta = 1e-8 * random_vector(rng, nm);
  const Matrix shifted = trace.x.rowwise() + delta.transpose();
  const TaSeries off = atomic_time(trace, shifted, model, "shifted");
  const double expect = -(model.D * delta).value();
  for (Index k = 0; k <= 80; ++k)
    CHECK(off.values[k] == doctest::Approx(expect).epsilon(1e-12));

  // general affinity: TA(est + delta_block) = TA(est) - delta_block D^T
  const Matrix block = 1e-8 * random_matrix(rng, 81, nm);
  const TaSeries base = atomic_time(trace, Matrix(trace.x + block), model, "a");
  const Vector predicted = exact.values - (block * model.D.transpose());
  CHECK((base.values - predicted).norm() <= 1e-16 * (1 + predicted.norm()));

  CHECK_THROWS_WITH_AS(atomic_time(trace, Matrix::Zero(5, nm), model, "bad"),
                       doctest::Contains("estimate block"), InvalidParameterError);
}

TEST_CASE("generated time scale is the reading mean minus predicted deviation") {
  std::mt19937_64 rng(23);
  const Matrix readings = random_matrix(rng, 12, 5);
  const Vector z_hat = random_vector(rng, 12);
  const Vector scale = generated_timescale(readings, z_hat);
  for (Index k = 0; k < 12; ++k) {
    double mean = 0;
    for (Index j = 0; j < 5; ++j) mean += readings(k, j);
    mean /= 5;
    CHECK(scale[k] == doctest::Approx(mean - z_hat[k]).epsilon(1e-15));
  }
  CHECK_THROWS_AS(generated_timescale(readings, Vector::Zero(7)), InvalidParameterError);
}

TEST_CASE("deviation of constant and linear phase is zero") {
  const Vector constant = Vector::Constant(64, 3.7);
  const AdevCurve flat = overlapping_adev(constant, 1.0, {1, 2, 4});
  for (Index i = 0; i < flat.sigmas.size(); ++i) CHECK(flat.sigmas[i] == 0.0);

  Vector ramp(64);
  for (Index i = 0; i < 64; ++i) ramp[i] = 0.25 + 1.5 * double(i);
  const AdevCurve line = overlapping_adev(ramp, 1.0, {1, 2, 4});
  for (Index i = 0; i < line.sigmas.size(); ++i)
    CHECK(line.sigmas[i] <= 1e-12);  // second differences cancel to rounding
}

TEST_CASE("deviation is invariant under offset and rate") {
  std::mt19937_64 rng(27);
  const Vector x = random_walk(rng, 300, 1.0);
  Vector shifted(300);
  for (Index i = 0; i < 300; ++i) shifted[i] = x[i] + 5.0 + 0.75 * double(i);

  const std::vector<Index> mults{1, 2, 5, 8};
  const AdevCurve a = overlapping_adev(x, 0.5, mults);
  const AdevCurve b = overlapping_adev(shifted, 0.5, mults);
  REQUIRE(a.sigmas.size() == b.sigmas.size());
  for (Index i = 0; i < a.sigmas.size(); ++i)
    CHECK(a.sigmas[i] == doctest::Approx(b.sigmas[i]).epsilon(1e-10));
}

TEST_CASE("deviation matches a naive quadratic-loop oracle") {
  std::mt19937_64 rng(31);
  const Vector x = random_walk(rng, 512, 2e-9);
  const double tau0 = 0.4;
  const std::vector<Index> mults{1, 2, 5, 8};
  const AdevCurve curve = overlapping_adev(x, tau0, mults);

  REQUIRE(curve.sigmas.size() == 4);
  for (size_t i = 0; i < mults.size(); ++i) {
    CHECK(curve.taus[Index(i)] == doctest::Approx(mults[i] * tau0).epsilon(1e-15));
    CHECK(curve.n_samples[i] == 512 - 2 * mults[i]);
    CHECK(curve.sigmas[Index(i)] ==
          doctest::Approx(adev_naive(x, tau0, mults[i])).epsilon(1e-12));
  }
}

TEST_CASE("integrated white frequency noise shows the half-power law") {
  std::mt19937_64 rng(35);
  const Index n = 200000;
  const Vector x = random_walk(rng, n, 3e-10);
  const std::vector<Index> mults{1, 2, 4, 8, 16, 32, 64};
  const AdevCurve curve = overlapping_adev(x, 1.0, mults);

  // least-squares slope of log sigma against log tau
  REQUIRE(curve.sigmas.size() == 7);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (Index i = 0; i < 7; ++i) {
    const double lx = std::log(curve.taus[i]), ly = std::log(curve.sigmas[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (7 * sxy - sx * sy) / (7 * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.1));
}

TEST_CASE("octave multiples fit the series length") {
  CHECK(octave_multiples(9) == std::vector<Index>{1, 2, 4});
  CHECK(octave_multiples(3) == std::vector<Index>{1});
  CHECK(octave_multiples(2).empty());
  const std::vector<Index> kilo = octave_multiples(1000);
  CHECK(kilo.back() == 256);  // 2*512+1 > 1000
  CHECK(kilo.size() == 9);
}

TEST_CASE("oversized multiples are skipped, malformed lists are rejected") {
  const Vector x = Vector::LinSpaced(100, 0.0, 1.0);
  const AdevCurve curve = overlapping_adev(x, 1.0, {1, 300});
  CHECK(curve.sigmas.size() == 1);  // tau = 300 s silently dropped (with a warning)
  CHECK(curve.taus.size() == 1);
  CHECK(curve.n_samples.size() == 1);

  CHECK_THROWS_WITH_AS(overlapping_adev(x, 1.0, {2, 2}),
                       doctest::Contains("strictly increasing"), InvalidParameterError);
  CHECK_THROWS_WITH_AS(overlapping_adev(x, 1.0, {0, 1}), doctest::Contains(">= 1"),
                       InvalidParameterError);
  CHECK_THROWS_AS(overlapping_adev(x, 0.0, {1}), InvalidParameterError);
  CHECK_THROWS_AS(overlapping_adev(Vector::Zero(2), 1.0, {1}), InvalidParameterError);
}

TEST_CASE("linear detrend removes an exact ramp and matches manual removal") {
  Vector ramp(128);
  for (Index i = 0; i < 128; ++i) ramp[i] = -2.0 + 0.03 * double(i);
  const AdevCurve zero = overlapping_adev(ramp, 1.0, {1, 2, 4}, Detrend::Linear);
  for (Index i = 0; i < zero.sigmas.size(); ++i) CHECK(zero.sigmas[i] <= 1e-10);

  // noisy series: internal linear detrend == external least-squares removal
  std::mt19937_64 rng(39);
  const Vector x = random_walk(rng, 256, 1e-9);
  const Index n = 256;
  const double tbar = double(n - 1) / 2.0;
  double stt = 0, sty = 0;
  for (Index i = 0; i < n; ++i) {
    stt += (i - tbar) * (i - tbar);
    sty += (i - tbar) * x[i];
  }
  const double slope = sty / stt;
  const double intercept = x.mean() - slope * tbar;
  Vector manual(n);
  for (Index i = 0; i < n; ++i) manual[i] = x[i] - (intercept + slope * double(i));

  const AdevCurve inside = overlapping_adev(x, 1.0, {1, 2, 4, 8}, Detrend::Linear);
  const AdevCurve outside = overlapping_adev(manual, 1.0, {1, 2, 4, 8});
  REQUIRE(inside.sigmas.size() == outside.sigmas.size());
  for (Index i = 0; i < inside.sigmas.size(); ++i)
    CHECK(inside.sigmas[i] == doctest::Approx(outside.sigmas[i]).epsilon(1e-12));

  // mean removal never changes second differences beyond rounding
  const AdevCurve centered = overlapping_adev(x, 1.0, {1, 2, 4, 8}, Detrend::Mean);
  const AdevCurve raw = overlapping_adev(x, 1.0, {1, 2, 4, 8});
  for (Index i = 0; i < raw.sigmas.size(); ++i)
    CHECK(centered.sigmas[i] == doctest::Approx(raw.sigmas[i]).epsilon(1e-10));
}
