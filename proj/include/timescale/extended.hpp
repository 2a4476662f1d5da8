#pragma once

// Quad-precision scalar for the long-horizon full-state covariance chain.
// Kept in its own header so translation units that never touch it do not
// pay for the multiprecision machinery.

#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/float128.hpp>

#include "timescale/types.hpp"

namespace timescale {

using Extended = boost::multiprecision::float128;
using MatrixE = MatrixX<Extended>;
using VectorE = VectorX<Extended>;

inline MatrixE to_extended(const Matrix& a) { return a.cast<Extended>(); }
inline VectorE to_extended(const Vector& a) { return a.cast<Extended>(); }
inline Matrix to_double(const MatrixE& a) { return a.cast<double>(); }
inline Vector to_double(const VectorE& a) { return a.cast<double>(); }

}  // namespace timescale
