#include "mixcs/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mixcs/calibration.hpp"
#include "mixcs/errors.hpp"
#include "mixcs/numerics.hpp"
#include "mixcs/version.hpp"

namespace mixcs {

namespace {

// --- strict JSON config parsing -------------------------------------------

void check_keys(const nlohmann::json& j, const char* what,
                std::initializer_list<const char*> allowed) {
  if (j.is_null()) return;
  if (!j.is_object()) {
    throw config_error(std::string(what) + ": expected a JSON object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw config_error(std::string(what) + ": unknown field '" + it.key() +
                         "'");
    }
  }
}

double get_double(const nlohmann::json& j, const char* key, double fallback,
                  const char* what) {
  if (j.is_null() || !j.contains(key)) return fallback;
  if (!j.at(key).is_number()) {
    throw config_error(std::string(what) + ": field '" + key +
                       "' must be a number");
  }
  return j.at(key).get<double>();
}

long get_count(const nlohmann::json& j, const char* key, long fallback,
               const char* what) {
  if (j.is_null() || !j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) {
    throw config_error(std::string(what) + ": field '" + key +
                       "' must be an integer");
  }
  return j.at(key).get<long>();
}

std::uint64_t get_seed(const nlohmann::json& j, const char* key,
                       std::uint64_t fallback, const char* what) {
  if (j.is_null() || !j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<long long>() < 0)) {
    throw config_error(std::string(what) + ": field '" + key +
                       "' must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::string get_string(const nlohmann::json& j, const char* key,
                       std::string fallback, const char* what) {
  if (j.is_null() || !j.contains(key)) return fallback;
  if (!j.at(key).is_string()) {
    throw config_error(std::string(what) + ": field '" + key +
                       "' must be a string");
  }
  return j.at(key).get<std::string>();
}

std::vector<double> get_double_vec(const nlohmann::json& j, const char* key,
                                   std::vector<double> fallback,
                                   const char* what) {
  if (j.is_null() || !j.contains(key)) return fallback;
  if (!j.at(key).is_array()) {
    throw config_error(std::string(what) + ": field '" + key +
                       "' must be an array of numbers");
  }
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) {
      throw config_error(std::string(what) + ": field '" + key +
                         "' must be an array of numbers");
    }
  }
  return j.at(key).get<std::vector<double>>();
}

std::vector<long> get_long_vec(const nlohmann::json& j, const char* key,
                               std::vector<long> fallback, const char* what) {
  if (j.is_null() || !j.contains(key)) return fallback;
  if (!j.at(key).is_array()) {
    throw config_error(std::string(what) + ": field '" + key +
                       "' must be an array of integers");
  }
  for (const auto& v : j.at(key)) {
    if (!v.is_number_integer()) {
      throw config_error(std::string(what) + ": field '" + key +
                         "' must be an array of integers");
    }
  }
  return j.at(key).get<std::vector<long>>();
}

// --- common small utilities ------------------------------------------------

nlohmann::json make_sidecar(const char* command, nlohmann::json cfg) {
  return nlohmann::json{
      {"command", command}, {"config", std::move(cfg)}, {"version", kVersion}};
}

double grid_at(double lo, double hi, int points, int i) {
  if (i == points - 1) return hi;
  return lo + (hi - lo) * static_cast<double>(i) /
                  static_cast<double>(points - 1);
}

void require_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw config_error(std::string(what) + " must be positive and finite");
  }
}

void require_level(double alpha, const char* what) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw config_error(std::string(what) + " must lie in (0, 1)");
  }
}

void require_finite(const std::vector<double>& xs, const char* what) {
  if (xs.empty()) {
    throw config_error(std::string(what) + " must be non-empty");
  }
  for (double x : xs) {
    if (!std::isfinite(x)) {
      throw config_error(std::string(what) + " must contain finite values");
    }
  }
}

// log threshold the running likelihood ratio is compared against: region
// membership at theta0 is equivalent to log L_n <= threshold.
double log_threshold_for(const RunConfig& config, const GaussianModel& model) {
  switch (config.method) {
    case Method::ville:
      return -std::log(config.alpha);
    case Method::improper_closed_form:
    case Method::eville_grid:
    case Method::eville_bracket:
      if (!config.prior.proper()) {
        const double s = g_tilde_inv_s(config.prior.kappa, config.alpha);
        return 0.5 * s * s;
      }
      return Calibration(config.prior, model, config.theta_star)
          .g_inv_log(config.alpha);
  }
  throw config_error("config: unknown method");
}

}  // namespace

// --- RunConfig ---------------------------------------------------------------

void RunConfig::validate() const {
  prior.validate();
  require_positive(sigma, "config: sigma");
  require_level(alpha, "config: alpha");
  if (n_max < 1) throw config_error("config: n_max must be at least 1");
  if (!std::isfinite(theta_star)) {
    throw config_error("config: theta_star must be finite");
  }
  if (!prior.proper() &&
      (method == Method::ville || method == Method::eville_bracket)) {
    throw config_error("config: method '" +
                       std::string(method_to_string(method)) +
                       "' requires a proper prior");
  }
  if (prior.proper() && method == Method::improper_closed_form) {
    throw config_error(
        "config: improper_closed_form requires the tilted flat prior");
  }
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "config", {"prior", "sigma", "alpha", "method", "n_max",
                           "seed", "theta_star", "output"});
  RunConfig c;
  if (!j.is_null() && j.contains("prior")) c.prior = prior_from_json(j.at("prior"));
  c.sigma = get_double(j, "sigma", c.sigma, "config");
  c.alpha = get_double(j, "alpha", c.alpha, "config");
  c.method = method_from_string(
      get_string(j, "method", method_to_string(c.method), "config"));
  c.n_max = get_count(j, "n_max", c.n_max, "config");
  c.seed = get_seed(j, "seed", c.seed, "config");
  c.theta_star = get_double(j, "theta_star", c.theta_star, "config");
  c.output = get_string(j, "output", c.output, "config");
  c.validate();
  return c;
}

nlohmann::json RunConfig::to_json() const {
  return nlohmann::json{{"prior", prior_to_json(prior)},
                        {"sigma", sigma},
                        {"alpha", alpha},
                        {"method", method_to_string(method)},
                        {"n_max", n_max},
                        {"seed", seed},
                        {"theta_star", theta_star},
                        {"output", output}};
}

// --- streaming ---------------------------------------------------------------

Trajectory stream(const RunConfig& config,
                  const std::vector<double>& observations,
                  bool with_conflict) {
  config.validate();
  if (observations.empty()) {
    throw config_error("stream: observations must be non-empty");
  }
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (!std::isfinite(observations[i])) {
      throw config_error("stream: observation at index " + std::to_string(i) +
                         " is not finite");
    }
  }

  const GaussianModel model{config.sigma};
  RegionOptions opts;
  if (config.method != Method::ville) {
    // One shared calibration curve for the whole pass; region calls extend it.
    opts.curve = ensure_curve_window(config.prior, model, nullptr,
                                     opts.calib.curve_tol, observations[0],
                                     observations[0]);
  }

  Trajectory out;
  out.records.reserve(observations.size());
  CSQuery q;
  q.prior = config.prior;
  q.model = model;
  q.alpha = config.alpha;
  q.method = config.method;
  double sum = 0.0;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    sum += observations[i];
    q.stat.n = static_cast<long>(i) + 1;
    q.stat.ybar = sum / static_cast<double>(i + 1);
    TrajectoryRecord rec;
    rec.n = q.stat.n;
    rec.region = compute_region(q, opts);
    rec.estimate = posterior_mean(config.prior, model, q.stat);
    if (with_conflict && config.prior.proper()) {
      rec.conflict = conflict_index(config.prior, model, q.stat);
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

std::string trajectory_csv(const Trajectory& trajectory,
                           const std::string& method_name) {
  std::string out = "n,method,lo,hi\n";
  for (const auto& rec : trajectory.records) {
    out += region_csv_rows(rec.n, method_name, rec.region);
  }
  return out;
}

void write_results(const std::string& dir,
                   const std::vector<TableResult>& results) {
  std::filesystem::create_directories(dir);
  for (const auto& r : results) {
    const auto base = std::filesystem::path(dir) / r.name;
    {
      std::ofstream csv(base.string() + ".csv", std::ios::binary);
      if (!csv) {
        throw config_error("cannot write " + base.string() + ".csv");
      }
      csv << r.csv;
    }
    std::ofstream side(base.string() + ".json", std::ios::binary);
    if (!side) {
      throw config_error("cannot write " + base.string() + ".json");
    }
    side << r.sidecar.dump(2) << "\n";
  }
}

// --- fig1: trajectory comparison ----------------------------------------------

Fig1Config Fig1Config::from_json(const nlohmann::json& j) {
  check_keys(j, "fig1 config",
             {"sigma", "alpha", "n_max", "seed", "theta_stars",
              "prior_location", "prior_scale"});
  Fig1Config c;
  c.sigma = get_double(j, "sigma", c.sigma, "fig1 config");
  c.alpha = get_double(j, "alpha", c.alpha, "fig1 config");
  c.n_max = get_count(j, "n_max", c.n_max, "fig1 config");
  c.seed = get_seed(j, "seed", c.seed, "fig1 config");
  c.theta_stars =
      get_double_vec(j, "theta_stars", c.theta_stars, "fig1 config");
  c.prior_location =
      get_double(j, "prior_location", c.prior_location, "fig1 config");
  c.prior_scale = get_double(j, "prior_scale", c.prior_scale, "fig1 config");
  return c;
}

nlohmann::json Fig1Config::to_json() const {
  return nlohmann::json{{"sigma", sigma},
                        {"alpha", alpha},
                        {"n_max", n_max},
                        {"seed", seed},
                        {"theta_stars", theta_stars},
                        {"prior_location", prior_location},
                        {"prior_scale", prior_scale}};
}

std::vector<TableResult> run_fig1(const Fig1Config& config) {
  require_positive(config.sigma, "fig1 config: sigma");
  require_level(config.alpha, "fig1 config: alpha");
  if (config.n_max < 1) {
    throw config_error("fig1 config: n_max must be at least 1");
  }
  require_finite(config.theta_stars, "fig1 config: theta_stars");
  require_positive(config.prior_scale, "fig1 config: prior_scale");

  struct Combo {
    Prior prior;
    Method method;
    const char* method_label;
  };
  const Prior g = Prior::gaussian(config.prior_location, config.prior_scale);
  const Prior lp = Prior::laplace(config.prior_location, config.prior_scale);
  const Prior hs = Prior::horseshoe(config.prior_location, config.prior_scale);
  const Prior im = Prior::improper_tilted(0.0, config.prior_location);
  // The plain construction needs a proper prior, so the tilted-flat prior
  // appears only under the extended calibration.
  const std::vector<Combo> combos = {
      {g, Method::ville, "ville"},
      {lp, Method::ville, "ville"},
      {hs, Method::ville, "ville"},
      {g, Method::eville_bracket, "eville"},
      {lp, Method::eville_bracket, "eville"},
      {hs, Method::eville_bracket, "eville"},
      {im, Method::improper_closed_form, "eville"},
  };

  std::string csv = "prior,method,theta_star,n,lo,hi,width,estimate\n";
  for (std::size_t ti = 0; ti < config.theta_stars.size(); ++ti) {
    const double theta_star = config.theta_stars[ti];
    // One observation stream per truth, shared across all combos so the
    // panels are directly comparable.
    Rng rng(derive_seed(config.seed, ti));
    std::vector<double> obs(static_cast<std::size_t>(config.n_max));
    for (auto& o : obs) o = theta_star + config.sigma * rng.normal();

    for (const auto& combo : combos) {
      RunConfig rc;
      rc.prior = combo.prior;
      rc.sigma = config.sigma;
      rc.alpha = config.alpha;
      rc.method = combo.method;
      rc.n_max = config.n_max;
      rc.seed = config.seed;
      rc.theta_star = theta_star;
      const Trajectory t = stream(rc, obs);
      const std::string head =
          kind_name(combo.prior.kind) + "," + combo.method_label + "," +
          csv_number(theta_star) + ",";
      for (const auto& rec : t.records) {
        const std::string tail = "," + csv_number(rec.region.volume()) + "," +
                                 csv_number(rec.estimate) + "\n";
        if (rec.region.empty()) {
          csv += head + std::to_string(rec.n) + ",nan,nan" + tail;
          continue;
        }
        for (const auto& iv : rec.region.intervals) {
          csv += head + std::to_string(rec.n) + "," + csv_number(iv.first) +
                 "," + csv_number(iv.second) + tail;
        }
      }
    }
  }
  return {TableResult{"fig1", std::move(csv),
                      make_sidecar("fig1", config.to_json())}};
}

// --- volume sweep --------------------------------------------------------------

VolumeConfig VolumeConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "volume config",
             {"sigma", "alpha", "ybar_min", "ybar_max", "ybar_points", "ns",
              "prior_location", "prior_scale"});
  VolumeConfig c;
  c.sigma = get_double(j, "sigma", c.sigma, "volume config");
  c.alpha = get_double(j, "alpha", c.alpha, "volume config");
  c.ybar_min = get_double(j, "ybar_min", c.ybar_min, "volume config");
  c.ybar_max = get_double(j, "ybar_max", c.ybar_max, "volume config");
  c.ybar_points = static_cast<int>(
      get_count(j, "ybar_points", c.ybar_points, "volume config"));
  c.ns = get_long_vec(j, "ns", c.ns, "volume config");
  c.prior_location =
      get_double(j, "prior_location", c.prior_location, "volume config");
  c.prior_scale =
      get_double(j, "prior_scale", c.prior_scale, "volume config");
  return c;
}

nlohmann::json VolumeConfig::to_json() const {
  return nlohmann::json{{"sigma", sigma},
                        {"alpha", alpha},
                        {"ybar_min", ybar_min},
                        {"ybar_max", ybar_max},
                        {"ybar_points", ybar_points},
                        {"ns", ns},
                        {"prior_location", prior_location},
                        {"prior_scale", prior_scale}};
}

std::vector<TableResult> run_volume(const VolumeConfig& config) {
  require_positive(config.sigma, "volume config: sigma");
  require_level(config.alpha, "volume config: alpha");
  require_positive(config.prior_scale, "volume config: prior_scale");
  if (!(config.ybar_min < config.ybar_max) ||
      !std::isfinite(config.ybar_min) || !std::isfinite(config.ybar_max)) {
    throw config_error("volume config: need finite ybar_min < ybar_max");
  }
  if (config.ybar_points < 2) {
    throw config_error("volume config: ybar_points must be at least 2");
  }
  if (config.ns.empty()) {
    throw config_error("volume config: ns must be non-empty");
  }
  for (long n : config.ns) {
    if (n < 1) throw config_error("volume config: ns must be at least 1");
  }

  const GaussianModel model{config.sigma};
  const double loc = config.prior_location;
  const double sc = config.prior_scale;
  const std::vector<Prior> proper = {
      Prior::gaussian(loc, sc), Prior::laplace(loc, sc),
      Prior::horseshoe(loc, sc), Prior::student_t(5.0, loc, sc)};
  const Prior improper = Prior::improper_tilted(0.0, loc);

  std::string csv = "prior,method,n,ybar,volume,intervals\n";
  auto emit = [&](const std::string& prior_label, const char* method_label,
                  long n, double ybar, const ConfidenceRegion& region) {
    csv += prior_label + "," + method_label + "," + std::to_string(n) + "," +
           csv_number(ybar) + "," + csv_number(region.volume()) + "," +
           std::to_string(region.intervals.size()) + "\n";
  };

  for (const auto& prior : proper) {
    RegionOptions opts;
    opts.curve = ensure_curve_window(prior, model, nullptr,
                                     opts.calib.curve_tol, config.ybar_min,
                                     config.ybar_max);
    const std::string label = kind_name(prior.kind);
    for (const char* method_label : {"ville", "eville"}) {
      const bool extended = std::string(method_label) == "eville";
      for (long n : config.ns) {
        for (int i = 0; i < config.ybar_points; ++i) {
          const double ybar =
              grid_at(config.ybar_min, config.ybar_max, config.ybar_points, i);
          CSQuery q;
          q.prior = prior;
          q.model = model;
          q.alpha = config.alpha;
          q.stat = SufficientStat{n, ybar};
          q.method = extended ? Method::eville_bracket : Method::ville;
          const ConfidenceRegion r =
              extended ? evcs(q, opts) : vcs(q);
          emit(label, method_label, n, ybar, r);
        }
      }
    }
  }
  for (long n : config.ns) {
    for (int i = 0; i < config.ybar_points; ++i) {
      const double ybar =
          grid_at(config.ybar_min, config.ybar_max, config.ybar_points, i);
      const ConfidenceRegion r =
          evcs_improper(0.0, model, config.alpha, SufficientStat{n, ybar});
      emit(kind_name(PriorKind::ImproperTilted), "eville", n, ybar, r);
    }
  }
  return {TableResult{"volume", std::move(csv),
                      make_sidecar("volume", config.to_json())}};
}

// --- coverage Monte Carlo --------------------------------------------------------

CoverageSummary coverage_mc(const RunConfig& config, long replications) {
  config.validate();
  if (replications < 100) {
    throw config_error("coverage: replications must be at least 100");
  }
  const GaussianModel model{config.sigma};
  const double log_thr = log_threshold_for(config, model);

  long violations = 0;
  for (long r = 0; r < replications; ++r) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(r)));
    double sum = 0.0;
    bool hit = false;
    for (long n = 1; n <= config.n_max && !hit; ++n) {
      sum += config.theta_star + config.sigma * rng.normal();
      const SufficientStat s{n, sum / static_cast<double>(n)};
      hit = log_lr(config.prior, model, s, config.theta_star) > log_thr;
    }
    if (hit) ++violations;
  }

  CoverageSummary out;
  out.replications = replications;
  out.violations = violations;
  out.rate = static_cast<double>(violations) / static_cast<double>(replications);
  const double half =
      1.96 * std::sqrt(out.rate * (1.0 - out.rate) /
                       static_cast<double>(replications));
  out.ci_lo = std::max(0.0, out.rate - half);
  out.ci_hi = std::min(1.0, out.rate + half);
  return out;
}

CoverageConfig CoverageConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "coverage config",
             {"prior", "sigma", "alpha", "method", "n_max", "seed",
              "theta_star", "output", "replications"});
  CoverageConfig c;
  nlohmann::json run = j.is_null() ? nlohmann::json() : j;
  if (!run.is_null() && run.contains("replications")) {
    c.replications = get_count(j, "replications", c.replications,
                               "coverage config");
    run.erase("replications");
  }
  c.run = RunConfig::from_json(run);
  return c;
}

nlohmann::json CoverageConfig::to_json() const {
  nlohmann::json j = run.to_json();
  j["replications"] = replications;
  return j;
}

std::vector<TableResult> run_coverage(const CoverageConfig& config) {
  const CoverageSummary s = coverage_mc(config.run, config.replications);
  std::string csv =
      "prior,method,theta_star,alpha,n_max,replications,violations,rate,"
      "ci_lo,ci_hi\n";
  csv += kind_name(config.run.prior.kind) + "," +
         method_to_string(config.run.method) + "," +
         csv_number(config.run.theta_star) + "," +
         csv_number(config.run.alpha) + "," +
         std::to_string(config.run.n_max) + "," +
         std::to_string(s.replications) + "," + std::to_string(s.violations) +
         "," + csv_number(s.rate) + "," + csv_number(s.ci_lo) + "," +
         csv_number(s.ci_hi) + "\n";
  return {TableResult{"coverage", std::move(csv),
                      make_sidecar("coverage", config.to_json())}};
}

// --- p-value curves ---------------------------------------------------------------

PValueConfig PValueConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "pvalue config",
             {"prior", "sigma", "alpha", "ybars", "curve_points",
              "threshold_points", "n_mc", "seed"});
  PValueConfig c;
  if (!j.is_null() && j.contains("prior")) c.prior = prior_from_json(j.at("prior"));
  c.sigma = get_double(j, "sigma", c.sigma, "pvalue config");
  c.alpha = get_double(j, "alpha", c.alpha, "pvalue config");
  c.ybars = get_double_vec(j, "ybars", c.ybars, "pvalue config");
  c.curve_points = static_cast<int>(
      get_count(j, "curve_points", c.curve_points, "pvalue config"));
  c.threshold_points = static_cast<int>(get_count(
      j, "threshold_points", c.threshold_points, "pvalue config"));
  c.n_mc = static_cast<std::size_t>(
      get_count(j, "n_mc", static_cast<long>(c.n_mc), "pvalue config"));
  c.seed = get_seed(j, "seed", c.seed, "pvalue config");
  return c;
}

nlohmann::json PValueConfig::to_json() const {
  return nlohmann::json{{"prior", prior_to_json(prior)},
                        {"sigma", sigma},
                        {"alpha", alpha},
                        {"ybars", ybars},
                        {"curve_points", curve_points},
                        {"threshold_points", threshold_points},
                        {"n_mc", n_mc},
                        {"seed", seed}};
}

std::vector<TableResult> run_pvalue_curves(const PValueConfig& config) {
  config.prior.validate();
  if (!config.prior.proper()) {
    throw config_error(
        "pvalue config: the plain p-value needs a proper prior");
  }
  require_positive(config.sigma, "pvalue config: sigma");
  require_level(config.alpha, "pvalue config: alpha");
  require_finite(config.ybars, "pvalue config: ybars");
  if (config.curve_points < 2 || config.threshold_points < 2) {
    throw config_error("pvalue config: grids need at least 2 points");
  }
  if (config.n_mc < 10000) {
    throw config_error("pvalue config: n_mc must be at least 10^4");
  }

  const GaussianModel model{config.sigma};
  // Low-level envelope so the curves reach well below alpha at the edges.
  const double alpha_window = std::max(1e-6, 0.01 * config.alpha);

  RegionOptions ropts;
  double hull_lo = std::numeric_limits<double>::infinity();
  double hull_hi = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> windows;
  for (double ybar : config.ybars) {
    CSQuery q;
    q.prior = config.prior;
    q.model = model;
    q.alpha = alpha_window;
    q.stat = SufficientStat{1, ybar};
    q.method = Method::ville;
    const ConfidenceRegion enclosing = vcs(q);
    const double lo = enclosing.intervals.front().first;
    const double hi = enclosing.intervals.back().second;
    windows.emplace_back(lo, hi);
    hull_lo = std::min(hull_lo, lo);
    hull_hi = std::max(hull_hi, hi);
  }
  ropts.curve = ensure_curve_window(config.prior, model, nullptr,
                                    ropts.calib.curve_tol, hull_lo, hull_hi);

  std::string curves =
      "ybar,theta0,p_ville,p_eville,p_pratt,posterior_mean\n";
  std::uint64_t stream_idx = 0;
  for (std::size_t yi = 0; yi < config.ybars.size(); ++yi) {
    const double ybar = config.ybars[yi];
    const SufficientStat s{1, ybar};
    const double estimate = posterior_mean(config.prior, model, s);
    for (int i = 0; i < config.curve_points; ++i) {
      const double th = grid_at(windows[yi].first, windows[yi].second,
                                config.curve_points, i);
      const double pv = p_value_ville(config.prior, model, s, th);
      const double pe = p_value_eville(config.prior, model, s, th, ropts);
      const double pp =
          p_value_pratt(config.prior, model, s, th, config.n_mc,
                        derive_seed(config.seed, stream_idx++));
      curves += csv_number(ybar) + "," + csv_number(th) + "," +
                csv_number(pv) + "," + csv_number(pe) + "," + csv_number(pp) +
                "," + csv_number(estimate) + "\n";
    }
  }

  std::string thresholds =
      "theta0,one_over_alpha,g_inv,pratt_k,pratt_se_log,c_star\n";
  CalibOptions copts;
  const std::uint64_t threshold_salt = 0x7468726573686f6cULL;
  for (int i = 0; i < config.threshold_points; ++i) {
    const double th = grid_at(hull_lo, hull_hi, config.threshold_points, i);
    Calibration cal =
        ropts.curve ? Calibration(ropts.curve, th, copts)
                    : Calibration(config.prior, model, th, copts);
    const double g_inv = std::exp(cal.g_inv_log(config.alpha));
    const PrattResult pr = pratt_threshold(
        config.prior, model, 1, th, config.alpha, config.n_mc,
        derive_seed(config.seed ^ threshold_salt, static_cast<std::uint64_t>(i)));
    thresholds += csv_number(th) + "," + csv_number(1.0 / config.alpha) +
                  "," + csv_number(g_inv) + "," + csv_number(pr.k) + "," +
                  csv_number(pr.se_log) + "," +
                  csv_number(std::exp(cal.log_c_star())) + "\n";
  }

  nlohmann::json side = make_sidecar("pvalue", config.to_json());
  return {TableResult{"pvalue_curves", std::move(curves), side},
          TableResult{"pvalue_thresholds", std::move(thresholds), side}};
}

// --- disconnected-region sweep ------------------------------------------------------

DisconnectedConfig DisconnectedConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "disconnected config",
             {"prior", "sigma", "ybars", "alpha_min", "alpha_max",
              "alpha_points", "grid_points"});
  DisconnectedConfig c;
  if (!j.is_null() && j.contains("prior")) c.prior = prior_from_json(j.at("prior"));
  c.sigma = get_double(j, "sigma", c.sigma, "disconnected config");
  c.ybars = get_double_vec(j, "ybars", c.ybars, "disconnected config");
  c.alpha_min = get_double(j, "alpha_min", c.alpha_min, "disconnected config");
  c.alpha_max = get_double(j, "alpha_max", c.alpha_max, "disconnected config");
  c.alpha_points = static_cast<int>(get_count(
      j, "alpha_points", c.alpha_points, "disconnected config"));
  c.grid_points = static_cast<int>(
      get_count(j, "grid_points", c.grid_points, "disconnected config"));
  return c;
}

nlohmann::json DisconnectedConfig::to_json() const {
  return nlohmann::json{{"prior", prior_to_json(prior)},
                        {"sigma", sigma},
                        {"ybars", ybars},
                        {"alpha_min", alpha_min},
                        {"alpha_max", alpha_max},
                        {"alpha_points", alpha_points},
                        {"grid_points", grid_points}};
}

std::vector<TableResult> run_disconnected(const DisconnectedConfig& config) {
  config.prior.validate();
  if (!config.prior.proper()) {
    throw config_error("disconnected config: prior must be proper");
  }
  require_positive(config.sigma, "disconnected config: sigma");
  require_finite(config.ybars, "disconnected config: ybars");
  require_level(config.alpha_min, "disconnected config: alpha_min");
  require_level(config.alpha_max, "disconnected config: alpha_max");
  if (!(config.alpha_min < config.alpha_max)) {
    throw config_error("disconnected config: need alpha_min < alpha_max");
  }
  if (config.alpha_points < 2) {
    throw config_error("disconnected config: alpha_points must be >= 2");
  }

  const GaussianModel model{config.sigma};
  RegionOptions opts;
  opts.grid_points = config.grid_points;

  std::string csv = "ybar,alpha,n_intervals,interval_index,lo,hi\n";
  nlohmann::json bands = nlohmann::json::array();
  for (double ybar : config.ybars) {
    // One profile per data point serves the whole alpha sweep.
    EvilleProfile prof(config.prior, model, SufficientStat{1, ybar},
                       config.alpha_min, opts);
    double band_lo = 0.0, band_hi = 0.0;
    bool disconnected = false;
    for (int ai = 0; ai < config.alpha_points; ++ai) {
      const double alpha = grid_at(config.alpha_min, config.alpha_max,
                                   config.alpha_points, ai);
      const ConfidenceRegion r = prof.region(alpha);
      const std::string head = csv_number(ybar) + "," + csv_number(alpha) +
                               "," + std::to_string(r.intervals.size()) + ",";
      if (r.empty()) {
        csv += head + "0,nan,nan\n";
        continue;
      }
      for (std::size_t k = 0; k < r.intervals.size(); ++k) {
        csv += head + std::to_string(k + 1) + "," +
               csv_number(r.intervals[k].first) + "," +
               csv_number(r.intervals[k].second) + "\n";
      }
      if (r.intervals.size() >= 2) {
        if (!disconnected) band_lo = alpha;
        band_hi = alpha;
        disconnected = true;
      }
    }
    nlohmann::json band{{"ybar", ybar}, {"disconnected", disconnected}};
    if (disconnected) {
      band["alpha_lo"] = band_lo;
      band["alpha_hi"] = band_hi;
    }
    bands.push_back(std::move(band));
  }

  nlohmann::json side = make_sidecar("disconnected", config.to_json());
  side["bands"] = std::move(bands);
  return {TableResult{"disconnected", std::move(csv), std::move(side)}};
}

// --- convergence to the closed-form limit ---------------------------------------------

ConvergenceConfig ConvergenceConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "convergence config",
             {"sigma", "alpha", "ns", "ybars", "theta_stars", "replications",
              "seed"});
  ConvergenceConfig c;
  c.sigma = get_double(j, "sigma", c.sigma, "convergence config");
  c.alpha = get_double(j, "alpha", c.alpha, "convergence config");
  c.ns = get_long_vec(j, "ns", c.ns, "convergence config");
  c.ybars = get_double_vec(j, "ybars", c.ybars, "convergence config");
  c.theta_stars =
      get_double_vec(j, "theta_stars", c.theta_stars, "convergence config");
  c.replications =
      get_count(j, "replications", c.replications, "convergence config");
  c.seed = get_seed(j, "seed", c.seed, "convergence config");
  return c;
}

nlohmann::json ConvergenceConfig::to_json() const {
  return nlohmann::json{{"sigma", sigma},       {"alpha", alpha},
                        {"ns", ns},             {"ybars", ybars},
                        {"theta_stars", theta_stars},
                        {"replications", replications},
                        {"seed", seed}};
}

std::vector<TableResult> run_convergence(const ConvergenceConfig& config) {
  require_positive(config.sigma, "convergence config: sigma");
  require_level(config.alpha, "convergence config: alpha");
  if (config.ns.empty()) {
    throw config_error("convergence config: ns must be non-empty");
  }
  for (long n : config.ns) {
    if (n < 1) throw config_error("convergence config: ns must be >= 1");
  }
  require_finite(config.ybars, "convergence config: ybars");
  require_finite(config.theta_stars, "convergence config: theta_stars");
  if (config.replications < 1) {
    throw config_error("convergence config: replications must be >= 1");
  }

  const GaussianModel model{config.sigma};
  // The bounded-influence priors with a known tail rate: exponential tails
  // give kappa = sigma / scale, polynomial tails give kappa = 0.
  const std::vector<Prior> priors = {Prior::laplace(0.0, 0.1),
                                     Prior::horseshoe(0.0, 1.0),
                                     Prior::student_t(5.0, 0.0, 1.0)};
  const double z = norm_quantile(1.0 - config.alpha / 2.0);

  std::string sweep =
      "prior,kappa,n,ybar,direction,evcs_lo,evcs_hi,limit_lo,limit_hi,"
      "hausdorff,limit_half,hpd_half\n";
  std::string mc = "prior,kappa,n,theta_star,replications,median_hausdorff\n";

  std::uint64_t combo = 0;
  for (const auto& prior : priors) {
    const TailProfile tp = tail_profile(prior, model);
    const double kappa = tp.kappa.value_or(0.0);
    RegionOptions opts;
    opts.curve = ensure_curve_window(prior, model, nullptr,
                                     opts.calib.curve_tol, 0.0, 0.0);
    const std::string label = kind_name(prior.kind);

    auto evcs_at = [&](long n, double ybar) {
      CSQuery q;
      q.prior = prior;
      q.model = model;
      q.alpha = config.alpha;
      q.stat = SufficientStat{n, ybar};
      q.method = Method::eville_bracket;
      return evcs(q, opts);
    };
    auto limit_at = [&](long n, double ybar, Direction dir) {
      return limiting_interval(kappa, model, config.alpha,
                               SufficientStat{n, ybar}, dir);
    };

    for (long n : config.ns) {
      const double hpd_half =
          z * config.sigma / std::sqrt(static_cast<double>(n));
      for (double ybar : config.ybars) {
        const Direction dir =
            ybar >= 0.0 ? Direction::plus : Direction::minus;
        const ConfidenceRegion r = evcs_at(n, ybar);
        const ConfidenceRegion lim = limit_at(n, ybar, dir);
        sweep += label + "," + csv_number(kappa) + "," + std::to_string(n) +
                 "," + csv_number(ybar) + "," +
                 (dir == Direction::plus ? "plus" : "minus") + "," +
                 csv_number(r.intervals.front().first) + "," +
                 csv_number(r.intervals.back().second) + "," +
                 csv_number(lim.intervals[0].first) + "," +
                 csv_number(lim.intervals[0].second) + "," +
                 csv_number(hausdorff(r, lim)) + "," +
                 csv_number(lim.volume() / 2.0) + "," +
                 csv_number(hpd_half) + "\n";
      }
      for (double theta_star : config.theta_stars) {
        const Direction dir =
            theta_star >= 0.0 ? Direction::plus : Direction::minus;
        std::vector<double> dists(
            static_cast<std::size_t>(config.replications));
        for (long r = 0; r < config.replications; ++r) {
          Rng rng(derive_seed(config.seed,
                              combo * static_cast<std::uint64_t>(
                                          config.replications) +
                                  static_cast<std::uint64_t>(r)));
          const double ybar =
              theta_star +
              config.sigma / std::sqrt(static_cast<double>(n)) * rng.normal();
          dists[static_cast<std::size_t>(r)] =
              hausdorff(evcs_at(n, ybar), limit_at(n, ybar, dir));
        }
        std::sort(dists.begin(), dists.end());
        const double median = dists[(dists.size() - 1) / 2];
        mc += label + "," + csv_number(kappa) + "," + std::to_string(n) +
              "," + csv_number(theta_star) + "," +
              std::to_string(config.replications) + "," + csv_number(median) +
              "\n";
        ++combo;
      }
    }
  }

  nlohmann::json side = make_sidecar("convergence", config.to_json());
  return {TableResult{"convergence_sweep", std::move(sweep), side},
          TableResult{"convergence_mc", std::move(mc), side}};
}

}  // namespace mixcs
