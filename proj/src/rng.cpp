#include "timescale/rng.hpp"

#include <cmath>

namespace timescale {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t substream_seed(std::uint64_t base, StreamKind kind, std::uint64_t path,
                             std::uint64_t draw) {
  std::uint64_t s = mix64(base);
  s = mix64(s ^ static_cast<std::uint64_t>(kind));
  s = mix64(s ^ path);
  s = mix64(s ^ draw);
  return s;
}

double GaussianStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 53-bit uniforms in (0,1]; the +1 keeps log() away from zero.
  const double u1 = (double((engine_() >> 11)) + 1.0) * 0x1p-53;
  const double u2 = (double((engine_() >> 11)) + 1.0) * 0x1p-53;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Vector GaussianStream::draw(Index dim) {
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = next();
  return v;
}

double GaussianStream::next_uniform(double lo, double hi) {
  const double u = double(engine_() >> 11) * 0x1p-53;  // [0, 1)
  return lo + (hi - lo) * u;
}

}  // namespace timescale
