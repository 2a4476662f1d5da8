#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "timescale/metrics.hpp"
#include "timescale/model.hpp"
#include "timescale/types.hpp"

namespace timescale {

/// Fully resolved experiment description.  Parsed from a JSON document with
/// a versioned schema; every stochastic ingredient carries an explicit seed
/// so a config names exactly one set of artifact bytes.
struct ScenarioConfig {
  int schema_version = 1;
  std::string name = "scenario";

  ModelParams model;

  // Initial conditions.  The true state is either fixed (constant/explicit)
  // or one uniform draw over [lo, hi) made from x0_seed at resolution time.
  enum class InitKind { Constant, Explicit, Uniform };
  InitKind x0_kind = InitKind::Constant;
  double x0_value = 0;
  Vector x0_values;
  double x0_lo = 0, x0_hi = 0;
  std::uint64_t x0_seed = 0;
  InitKind xhat0_kind = InitKind::Constant;
  double xhat0_value = 0;
  Vector xhat0_values;

  // Filter selection.
  std::string algo = "skf";          ///< "skf" | "ckf"
  std::string gamma_source = "zero"; ///< "zero" | "file" | "optimize"
  std::string gamma_file;
  std::string precision = "double";  ///< "double" | "extended" (ckf chain)
  double p0 = 0;                     ///< full-space P0 = p0 * I
  bool phat0_projected = true;       ///< observable init from projected P0
  double phat0_value = 0;            ///< used when not projected

  // Optimizer block.
  double delta1 = 1.0;
  double delta2 = 1.0;
  Index optimizer_horizon = 1000;
  double optimizer_phat0 = 1e-4;

  // Run block.
  Index horizon = 1000;
  Index paths = 10;
  std::uint64_t seed = 0;
  bool seed_set = false;

  // Deviation block.
  bool adev_enabled = true;
  double tau0 = 1.0;
  Detrend detrend = Detrend::None;

  std::vector<std::string> emit;  ///< artifact kinds to write

  /// Throws ConfigError listing every violated field.
  void validate() const;
};

/// True initial state named by the config.  Uniform specs draw once,
/// deterministically from their own seed, independent of run.seed.
Vector resolved_x0(const ScenarioConfig& config);

/// Initial estimate named by the config (always deterministic).
Vector resolved_xhat0(const ScenarioConfig& config);

/// Mixing block named by the config without running the optimizer: zero, a
/// file, or -- for source "optimize" -- a gamma.json written earlier into
/// artifact_dir (missing one raises IoError naming the prerequisite stage).
Matrix resolve_gamma(const ScenarioConfig& config, const std::string& artifact_dir);

/// Observable initial covariance for the configured filter run: the
/// difference-subspace image of p0 * I, or the configured scalar * I.
Matrix resolved_phat0(const ScenarioConfig& config, const EnsembleModel& model);

/// Parse a config from JSON text; throws ConfigError with field-level
/// messages on malformed or incomplete input.
ScenarioConfig parse_scenario_text(const std::string& json_text);

/// Load and parse a config file.
ScenarioConfig load_scenario(const std::string& path);

/// Run the full pipeline described by the config into out_dir: simulate the
/// paths, resolve the mixing block (optimizing it if requested), filter
/// every path, and emit trace/filter/moment/deviation tables plus a
/// machine-readable summary.json.  Byte-deterministic for a fixed config.
/// `threads` parallelizes optimizer probes only; it never changes results.
void run_scenario(const ScenarioConfig& config, const std::string& out_dir, int threads = 1);

}  // namespace timescale
