// Command-line front end: scenario runner plus the staged pipeline
// (simulate / filter / optimize / moments / adev / compare) operating on
// file artifacts in a shared output directory.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "timescale/errors.hpp"
#include "timescale/filter.hpp"
#include "timescale/io.hpp"
#include "timescale/metrics.hpp"
#include "timescale/moments.hpp"
#include "timescale/optimize.hpp"
#include "timescale/scenario.hpp"
#include "timescale/simulate.hpp"

namespace fs = std::filesystem;
using namespace timescale;

namespace {

struct StageArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  int threads = 1;

  // filter-stage overrides
  std::string algo_override;
  std::string gamma_override;
  std::string phat0_override;

  // compare inputs
  std::vector<std::string> in_dirs;
};

ScenarioConfig load_config(const StageArgs& args) {
  ScenarioConfig cfg = load_scenario(args.config_path);
  if (args.has_seed_override) {
    cfg.seed = args.seed_override;
    cfg.seed_set = true;
  }
  if (!args.algo_override.empty()) cfg.algo = args.algo_override;
  if (!args.gamma_override.empty()) {
    if (args.gamma_override == "zero" || args.gamma_override == "optimize") {
      cfg.gamma_source = args.gamma_override;
    } else {
      cfg.gamma_source = "file";
      cfg.gamma_file = args.gamma_override;
    }
  }
  if (!args.phat0_override.empty()) {
    if (args.phat0_override == "projected") {
      cfg.phat0_projected = true;
    } else {
      cfg.phat0_projected = false;
      try {
        cfg.phat0_value = std::stod(args.phat0_override);
      } catch (const std::exception&) {
        throw ConfigError("--phat0: expected 'projected' or a number, got '" +
                          args.phat0_override + "'");
      }
    }
  }
  cfg.validate();
  return cfg;
}

std::string out_file(const StageArgs& args, const std::string& name) {
  fs::create_directories(args.out_dir);
  return (fs::path(args.out_dir) / name).string();
}

std::string path_tag(Index i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03lld", static_cast<long long>(i));
  return buf;
}

/// Sorted basenames in dir matching prefix...suffix.
std::vector<std::string> matching_files(const std::string& dir, const std::string& prefix,
                                        const std::string& suffix) {
  std::vector<std::string> names;
  if (!fs::is_directory(dir)) return names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() >= prefix.size() + suffix.size() && name.rfind(prefix, 0) == 0 &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  return names;
}

int cmd_run(const StageArgs& args) {
  run_scenario(load_config(args), args.out_dir, args.threads);
  return 0;
}

int cmd_simulate(const StageArgs& args) {
  const ScenarioConfig cfg = load_config(args);
  const EnsembleModel model = build_model(cfg.model);
  const Vector x0 = resolved_x0(cfg);
  for (Index path = 0; path < cfg.paths; ++path) {
    const SimTrace trace = simulate(model, x0, cfg.horizon, cfg.seed, path);
    write_trace_csv(out_file(args, "trace_path_" + path_tag(path) + ".csv"), trace, model);
  }
  return 0;
}

int cmd_filter(const StageArgs& args) {
  const ScenarioConfig cfg = load_config(args);
  const EnsembleModel model = build_model(cfg.model);
  const Vector xhat0 = resolved_xhat0(cfg);
  const Matrix gamma = resolve_gamma(cfg, args.out_dir);
  const Decomposition decomp = build_decomposition(model, gamma);
  const Matrix phat0 = resolved_phat0(cfg, model);
  const Matrix p0_full = cfg.p0 * Matrix::Identity(model.state_dim(), model.state_dim());

  const auto traces = matching_files(args.out_dir, "trace_path_", ".csv");
  if (traces.empty())
    throw IoError("filter: no trace_path_*.csv in " + args.out_dir +
                  " (run the simulate stage first)");
  for (const auto& name : traces) {
    const SimTrace trace = read_trace_csv((fs::path(args.out_dir) / name).string(), model);
    Matrix estimates;
    if (cfg.algo == "skf") {
      const auto [xi_o0, xi_u0] = transform_state(decomp, xhat0);
      estimates = run_skf(model, decomp, xi_o0, xi_u0, phat0, trace.y,
                          FilterRunOptions{.record_gains = false})
                      .x_hat;
    } else {
      const Precision precision =
          cfg.precision == "extended" ? Precision::Extended : Precision::Double;
      estimates = run_ckf(model, xhat0, p0_full, trace.y, precision,
                          FilterRunOptions{.record_gains = false})
                      .x_hat;
    }
    const TaSeries ta = atomic_time(trace, estimates, model, cfg.algo);
    const std::string tag = name.substr(std::string("trace_").size());
    write_filter_csv(out_file(args, cfg.algo + "_" + tag), estimates, ta.values, model);
  }
  return 0;
}

int cmd_optimize(const StageArgs& args) {
  const ScenarioConfig cfg = load_config(args);
  const EnsembleModel model = build_model(cfg.model);
  const Index no = Index(cfg.model.n) * (cfg.model.m - 1);

  const std::vector<Matrix> gains = gain_schedule(
      model, cfg.optimizer_phat0 * Matrix::Identity(no, no), cfg.optimizer_horizon);
  InitError init;
  init.mu0 = resolved_x0(cfg) - resolved_xhat0(cfg);
  init.Q0 = Matrix::Zero(model.state_dim(), model.state_dim());
  const CostFn cost = [&](const Matrix& g) {
    return cost_J(model, g, init, gains, cfg.delta1, cfg.delta2);
  };
  ProbeStats stats;
  const QuadraticForm form = recover_quadratic(cost, cfg.model.n, int(no), args.threads, &stats);
  const OptimizeResult sol = solve_optimal(form);

  write_gamma_json(out_file(args, "gamma.json"), sol.gamma_star);
  std::ofstream out(out_file(args, "optimize.json"));
  if (!out) throw IoError("optimize: cannot open " + out_file(args, "optimize.json"));
  out << "{\n";
  out << "  \"evaluations\": " << stats.evaluations << ",\n";
  out << "  \"gamma_norm\": " << format_sci(sol.gamma_star.norm()) << ",\n";
  out << "  \"grad_norm_zero\": " << format_sci(sol.grad_norm_zero) << ",\n";
  out << "  \"j_star\": " << format_sci(sol.j_star) << ",\n";
  out << "  \"j_zero\": " << format_sci(form.c) << ",\n";
  out << "  \"stationarity_residual\": " << format_sci(sol.stationarity_residual) << "\n";
  out << "}\n";
  return 0;
}

int cmd_moments(const StageArgs& args) {
  const ScenarioConfig cfg = load_config(args);
  const EnsembleModel model = build_model(cfg.model);
  const Matrix gamma = resolve_gamma(cfg, args.out_dir);
  const std::vector<Matrix> gains = gain_schedule(model, resolved_phat0(cfg, model), cfg.horizon);
  InitError init;
  init.mu0 = resolved_x0(cfg) - resolved_xhat0(cfg);
  init.Q0 = Matrix::Zero(model.state_dim(), model.state_dim());
  const TaMoments moments = ta_moments(model, gamma, init, gains);
  write_moments_csv(out_file(args, "moments.csv"), moments, confidence_interval(moments, 0.98));
  return 0;
}

int cmd_adev(const StageArgs& args) {
  const ScenarioConfig cfg = load_config(args);
  const EnsembleModel model = build_model(cfg.model);
  const auto runs = matching_files(args.out_dir, cfg.algo + "_path_", ".csv");
  if (runs.empty())
    throw IoError("adev: no " + cfg.algo + "_path_*.csv in " + args.out_dir +
                  " (run the filter stage first)");
  for (const auto& name : runs) {
    const Matrix table = read_csv((fs::path(args.out_dir) / name).string());
    if (table.cols() < model.state_dim() + 2)
      throw IoError("adev: " + name + " has too few columns for the configured model");
    const Matrix estimates = table.middleCols(1, model.state_dim());
    const Vector z_hat = estimates * model.D.transpose();
    const AdevCurve curve =
        overlapping_adev(z_hat, cfg.tau0, octave_multiples(z_hat.size()), cfg.detrend);
    const std::string tag = name.substr(cfg.algo.size() + 1);
    write_adev_csv(out_file(args, "adev_" + tag), curve);
  }
  return 0;
}

int cmd_compare(const StageArgs& args) {
  std::vector<std::string> dirs = args.in_dirs;
  if (dirs.empty()) dirs.push_back(args.out_dir);

  std::ofstream out(out_file(args, "compare.csv"));
  if (!out) throw IoError("compare: cannot open " + out_file(args, "compare.csv"));
  out << "run,series,ta_rms,ta_max_abs,ta_final,adev_first,adev_min\n";
  Index rows = 0;
  for (const auto& dir : dirs) {
    const std::string label = fs::path(dir).filename().string();
    for (const char* algo : {"skf", "ckf"}) {
      for (const auto& name : matching_files(dir, std::string(algo) + "_path_", ".csv")) {
        const Matrix table = read_csv((fs::path(dir) / name).string());
        const Vector ta = table.col(table.cols() - 1);
        const std::string stem = name.substr(0, name.size() - 4);

        double adev_first = std::nan("");
        double adev_min = std::nan("");
        const std::string adev_name = "adev_" + name.substr(std::string(algo).size() + 1);
        if (fs::exists(fs::path(dir) / adev_name)) {
          const Matrix curve = read_csv((fs::path(dir) / adev_name).string());
          if (curve.rows() > 0) {
            adev_first = curve(0, 1);
            adev_min = curve.col(1).minCoeff();
          }
        }
        out << label << ',' << stem << ',' << format_sci(std::sqrt(ta.squaredNorm() / ta.size()))
            << ',' << format_sci(ta.cwiseAbs().maxCoeff()) << ','
            << format_sci(ta[ta.size() - 1]) << ',' << format_sci(adev_first) << ','
            << format_sci(adev_min) << '\n';
        ++rows;
      }
    }
  }
  if (rows == 0)
    throw IoError("compare: no filter artifacts found (run the filter stage first)");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clock-ensemble time-scale simulation and filtering toolkit"};
  app.require_subcommand(1);

  StageArgs args;
  std::function<int()> action;

  const auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* config = sub->add_option("--config", args.config_path, "Scenario config file (JSON)");
    if (needs_config) config->required();
    sub->add_option("--out", args.out_dir, "Artifact directory")->required();
    auto* seed = sub->add_option("--seed-override", args.seed_override, "Replace run.seed");
    sub->add_option("--threads", args.threads, "Worker threads for optimizer probes")
        ->check(CLI::PositiveNumber);
    sub->parse_complete_callback([&args, seed] { args.has_seed_override = seed->count() > 0; });
  };

  auto* run = app.add_subcommand("run", "Run the full scenario pipeline");
  add_common(run, true);
  run->callback([&] { action = [&] { return cmd_run(args); }; });

  auto* simulate = app.add_subcommand("simulate", "Simulate the configured paths");
  add_common(simulate, true);
  simulate->callback([&] { action = [&] { return cmd_simulate(args); }; });

  auto* filter = app.add_subcommand("filter", "Filter previously simulated traces");
  add_common(filter, true);
  filter->add_option("--algo", args.algo_override, "Override filter.algo (skf|ckf)");
  filter->add_option("--gamma", args.gamma_override,
                     "Override the mixing block: zero, optimize, or a gamma JSON path");
  filter->add_option("--phat0", args.phat0_override,
                     "Override the observable init: 'projected' or a scalar");
  filter->callback([&] { action = [&] { return cmd_filter(args); }; });

  auto* optimize = app.add_subcommand("optimize", "Optimize the mixing block");
  add_common(optimize, true);
  optimize->callback([&] { action = [&] { return cmd_optimize(args); }; });

  auto* moments = app.add_subcommand("moments", "Write the analytic error moments");
  add_common(moments, true);
  moments->callback([&] { action = [&] { return cmd_moments(args); }; });

  auto* adev = app.add_subcommand("adev", "Allan deviation of filtered runs");
  add_common(adev, true);
  adev->callback([&] { action = [&] { return cmd_adev(args); }; });

  auto* compare = app.add_subcommand("compare", "Join filter runs into one comparison table");
  add_common(compare, false);
  compare->add_option("--in", args.in_dirs, "Artifact directories to join (default: --out)");
  compare->callback([&] { action = [&] { return cmd_compare(args); }; });

  try {
    app.parse(argc, argv);
    return action ? action() : 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InvalidParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << "\n";
    return 2;
  }
}
