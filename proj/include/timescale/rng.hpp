#pragma once

#include <cstdint>
#include <random>

#include "timescale/types.hpp"

namespace timescale {

/// 64-bit finalizing mix (splitmix64 increment + avalanche).  Used to derive
/// decorrelated substream seeds from a base seed.
std::uint64_t mix64(std::uint64_t z);

/// Independent noise substreams of a simulation run.
///
/// Seeding layout: substream_seed(base, kind, path, draw) chains mix64 over
/// (base, kind, path, draw), so every (kind, path, draw) triple indexes its
/// own generator.  `draw` counts re-randomizations of the same stream; the
/// original draw is 0.  Process and measurement noise live in different
/// kinds, which is what lets measurement noise be resampled while the
/// process noise of a path stays fixed.
enum class StreamKind : std::uint64_t {
  ProcessNoise = 0x70726f63,
  MeasurementNoise = 0x6d656173,
  InitDraw = 0x696e6974,
};

std::uint64_t substream_seed(std::uint64_t base, StreamKind kind, std::uint64_t path,
                             std::uint64_t draw = 0);

/// Deterministic standard-normal stream: mt19937_64 driving a Box-Muller
/// transform.  Bit-reproducible for a fixed seed on a fixed platform.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  /// One standard-normal variate.
  double next();

  /// dim iid standard-normal variates.
  Vector draw(Index dim);

  /// One uniform variate on [lo, hi).
  double next_uniform(double lo, double hi);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0;
  bool has_spare_ = false;
};

}  // namespace timescale
