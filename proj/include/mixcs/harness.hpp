#pragma once

// Experiment engine behind the CLI: streaming region updates over an
// observation sequence, the bundled simulation studies rendered as
// plot-ready CSV tables, and seeded Monte Carlo summaries.
//
// Every table is paired with a JSON sidecar echoing the exact configuration
// and the library version, and all randomness flows from explicit 64-bit
// seeds through per-stream derivation, so re-running a command with the same
// configuration reproduces the CSV byte for byte.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixcs/confseq.hpp"
#include "mixcs/priors.hpp"

namespace mixcs {

// One run's identity: prior, model, level, region method, horizon, seed, and
// the data-generating mean used by simulation commands.
struct RunConfig {
  Prior prior;
  double sigma = 1.0;
  double alpha = 0.1;
  Method method = Method::eville_grid;
  long n_max = 100;
  std::uint64_t seed = 1;
  double theta_star = 0.0;
  std::string output;

  void validate() const;
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct TrajectoryRecord {
  long n = 0;
  ConfidenceRegion region;
  double estimate = 0.0;                // posterior mean given (n, ybar_n)
  std::optional<double> conflict;       // proper priors only
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
};

// Incremental pass over the observations: after the k-th value the k-th
// record holds the region and estimate given (k, ybar_k); with_conflict adds
// the conflict index for proper priors (a tail integral per record, so it is
// opt-in). Non-finite observations are rejected with their index.
Trajectory stream(const RunConfig& config,
                  const std::vector<double>& observations,
                  bool with_conflict = false);

// The stream command's CSV: the fixed region row form, one row per interval.
std::string trajectory_csv(const Trajectory& trajectory,
                           const std::string& method_name);

// A rendered table plus its reproducibility sidecar.
struct TableResult {
  std::string name;  // base file name, extensionless
  std::string csv;
  nlohmann::json sidecar;
};

// Writes <name>.csv and <name>.json under dir for every result.
void write_results(const std::string& dir,
                   const std::vector<TableResult>& results);

// ---------------------------------------------------------------------------
// Simulation studies. Each config parses leniently from JSON ({} = defaults,
// unknown keys rejected) and echoes itself into the table sidecar.
// ---------------------------------------------------------------------------

// Trajectory comparison across priors and calibrations at several truths.
struct Fig1Config {
  double sigma = 1.0;
  double alpha = 0.1;
  long n_max = 100;
  std::uint64_t seed = 20240601;
  std::vector<double> theta_stars{0.0, 10.0, 100.0};
  double prior_location = 0.0;
  double prior_scale = 0.1;

  static Fig1Config from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
std::vector<TableResult> run_fig1(const Fig1Config& config);

// Region volume as a function of the observed mean.
struct VolumeConfig {
  double sigma = 1.0;
  double alpha = 0.1;
  double ybar_min = -30.0;
  double ybar_max = 30.0;
  int ybar_points = 241;
  std::vector<long> ns{1, 10, 50};
  double prior_location = 0.0;
  double prior_scale = 1.0;

  static VolumeConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
std::vector<TableResult> run_volume(const VolumeConfig& config);

// Time-uniform coverage Monte Carlo under one run configuration.
struct CoverageSummary {
  long replications = 0;
  long violations = 0;
  double rate = 0.0;
  double ci_lo = 0.0;  // normal-approximation binomial interval
  double ci_hi = 0.0;
};
CoverageSummary coverage_mc(const RunConfig& config, long replications);

struct CoverageConfig {
  RunConfig run;
  long replications = 2000;

  static CoverageConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
std::vector<TableResult> run_coverage(const CoverageConfig& config);

// p-value functions of theta0 for the three procedures, plus the threshold
// curves the sublevel-set constructions cut at.
struct PValueConfig {
  Prior prior = Prior::gaussian(0.0, 1.0);
  double sigma = 1.0;
  double alpha = 0.1;
  std::vector<double> ybars{0.25, 10.0, 30.0};
  int curve_points = 401;       // theta0 grid per ybar
  int threshold_points = 241;   // shared theta0 grid for threshold curves
  std::size_t n_mc = 10000;     // exceedance Monte Carlo size
  std::uint64_t seed = 20240602;

  static PValueConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
std::vector<TableResult> run_pvalue_curves(const PValueConfig& config);

// Interval counts/endpoints across an alpha sweep for the conflicted
// two-spike mixture prior, flagging the disconnected band.
struct DisconnectedConfig {
  Prior prior = Prior::mixture({0.8, 0.2}, {-10.0, 10.0}, {1e-2, 1e-2});
  double sigma = 1.0;
  std::vector<double> ybars{-1.5, 0.0, 1.5};
  double alpha_min = 0.01;
  double alpha_max = 0.99;
  int alpha_points = 99;
  int grid_points = 2001;

  static DisconnectedConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
std::vector<TableResult> run_disconnected(const DisconnectedConfig& config);

// Distance between the extended region and its closed-form limit, swept
// deterministically in ybar and by Monte Carlo median over the truth, with
// the high-density limit interval alongside for comparison.
struct ConvergenceConfig {
  double sigma = 1.0;
  double alpha = 0.1;
  std::vector<long> ns{1, 10, 50};
  std::vector<double> ybars{5.0, 10.0, 20.0, 50.0, 100.0, 200.0};
  std::vector<double> theta_stars{10.0, 50.0, 200.0};
  long replications = 11;
  std::uint64_t seed = 20240603;

  static ConvergenceConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
std::vector<TableResult> run_convergence(const ConvergenceConfig& config);

}  // namespace mixcs
