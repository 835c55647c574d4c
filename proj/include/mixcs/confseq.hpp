#pragma once

// Confidence regions for a gaussian mean, valid uniformly over sample size,
// obtained by inverting mixture likelihood-ratio tests. Two constructions:
// the plain region keeps every theta0 whose ratio stays below 1/alpha, while
// the extended region swaps 1/alpha for the calibrated threshold
// g_theta0^{-1}(alpha), which stays informative when the data land far from
// where the prior expects them. Also here: p-value surfaces for both
// procedures, the closed-form region under the tilted flat prior, the
// far-data limiting interval, Monte Carlo estimates of the fixed-n (Pratt)
// threshold, and the Hausdorff distance between regions.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mixcs/calibration.hpp"
#include "mixcs/priors.hpp"

namespace mixcs {

// Disjoint union of closed intervals, sorted increasing. An empty list is a
// legitimate (empty) region.
struct ConfidenceRegion {
  std::vector<std::pair<double, double>> intervals;

  bool empty() const { return intervals.empty(); }
  double volume() const;
  bool contains(double theta) const;
};

// {"intervals": [[lo, hi], ...], "volume": v}
nlohmann::json region_to_json(const ConfidenceRegion& region);

// Deterministic short decimal rendering (%.12g) shared by all CSV output.
std::string csv_number(double x);

// For quadrature-backed priors: builds (when `curve` is null) or extends a
// shared n = 1 marginal curve so calibrations anchored anywhere in
// [theta_lo, theta_hi] find their working windows precovered. Returns the
// input pointer unchanged (possibly null) for closed-form marginals.
std::shared_ptr<MarginalCurve> ensure_curve_window(
    const Prior& prior, const GaussianModel& model,
    std::shared_ptr<MarginalCurve> curve, double curve_tol, double theta_lo,
    double theta_hi);

// CSV rows in the fixed region serialization form "n,method,lo,hi", one row
// per interval; an empty region emits a single row with nan endpoints.
std::string region_csv_rows(long n, const std::string& method,
                            const ConfidenceRegion& region);

enum class Method { ville, eville_grid, eville_bracket, improper_closed_form };

Method method_from_string(const std::string& name);
const char* method_to_string(Method method);

// A single region request.
struct CSQuery {
  Prior prior;
  GaussianModel model{};
  double alpha = 0.1;
  SufficientStat stat{};
  Method method = Method::eville_grid;
};

// Tuning knobs for the extended-region builders. The shared curve, when
// given, must be an n = 1 curve for the query's prior and model; the grid and
// bracket engines otherwise build their own for quadrature-backed priors.
struct RegionOptions {
  int grid_points = 2001;
  CalibOptions calib{};
  std::shared_ptr<MarginalCurve> curve;
};

// Plain region: single closed-form interval in theta0 (possibly empty).
// Requires a proper prior and method == ville.
ConfidenceRegion vcs(const CSQuery& query);

// Independent closed form for a gaussian prior, used as a cross-check of the
// generic route. Requires prior.kind == Gaussian.
ConfidenceRegion vcs_gaussian_closed(const CSQuery& query);

// Extended region. method == eville_grid evaluates membership on a uniform
// grid over the enclosing window (the plain region for proper priors, a
// padded closed-form window for the improper family) with one 10x-density
// refinement pass around every membership transition; eville_bracket
// (proper priors only) root-finds the two endpoints around the posterior
// mean. improper_closed_form delegates to evcs_improper.
ConfidenceRegion evcs(const CSQuery& query, const RegionOptions& options = {});

// Closed-form extended region under the tilted flat prior with rate kappa:
// center ybar - sigma*kappa/n, half-width (sigma/sqrt(n))*sqrt(log n + s^2)
// where s solves the tilted calibration at alpha.
ConfidenceRegion evcs_improper(double kappa, const GaussianModel& model,
                               double alpha, const SufficientStat& stat);

enum class Direction { plus, minus };

// Far-data limit of the extended region for a prior with exponential tail
// rate kappa >= 0: the improper-family interval with the center shifted
// against the tail the data ran off to.
ConfidenceRegion limiting_interval(double kappa, const GaussianModel& model,
                                   double alpha, const SufficientStat& stat,
                                   Direction direction);

// p-value of the plain procedure: min(1, 1/L_n). Proper priors only.
double p_value_ville(const Prior& prior, const GaussianModel& model,
                     const SufficientStat& stat, double theta0);

// p-value of the extended procedure: g_theta0(L_n). Any prior.
double p_value_eville(const Prior& prior, const GaussianModel& model,
                      const SufficientStat& stat, double theta0,
                      const RegionOptions& options = {});

struct PValueCurve {
  enum class Kind { ville, eville, pratt };
  Kind kind;
  std::vector<std::pair<double, double>> samples;  // (theta0, p)
};

// Reusable membership profile behind the grid method: p^eV evaluated on the
// enclosing window computed once, then thresholded at any alpha >= the
// alpha_min it was built for. Useful when sweeping alpha for fixed data.
class EvilleProfile {
 public:
  EvilleProfile(const Prior& prior, const GaussianModel& model,
                const SufficientStat& stat, double alpha_min,
                RegionOptions options = {});

  // Region at level alpha (>= alpha_min). Applies the 10x refinement pass
  // around the transitions found at this alpha.
  ConfidenceRegion region(double alpha) const;

  // Exact pointwise evaluation (not interpolated from the grid).
  double p_at(double theta) const;

  const std::vector<double>& thetas() const { return thetas_; }
  const std::vector<double>& pvalues() const { return pvals_; }
  double window_lo() const { return wlo_; }
  double window_hi() const { return whi_; }

 private:
  Prior prior_;
  GaussianModel model_;
  SufficientStat stat_;
  double alpha_min_ = 0.0;
  RegionOptions opts_;
  double log_mn_ = 0.0;  // log marginal at the observed (n, ybar)
  double wlo_ = 1.0, whi_ = -1.0;
  std::vector<double> thetas_;
  std::vector<double> pvals_;
};

struct PrattResult {
  double k = 0.0;      // threshold on the likelihood-ratio scale
  double log_k = 0.0;
  double se_log = 0.0;  // order-statistic standard error of log_k
  std::size_t n_mc = 0;
};

// Monte Carlo (1 - alpha) quantile of the likelihood ratio under theta0 at
// sample size n. Seeded and reproducible; n_mc must be at least 10^4.
PrattResult pratt_threshold(const Prior& prior, const GaussianModel& model,
                            long n, double theta0, double alpha,
                            std::size_t n_mc, std::uint64_t seed);

// Monte Carlo exceedance p-value of the fixed-n procedure at the observed
// ratio: the fraction of simulated ratios under theta0 at or above it.
double p_value_pratt(const Prior& prior, const GaussianModel& model,
                     const SufficientStat& stat, double theta0,
                     std::size_t n_mc, std::uint64_t seed);

// Hausdorff distance between two non-empty interval unions.
double hausdorff(const ConfidenceRegion& a, const ConfidenceRegion& b);

// Dispatch a query to the matching builder (vcs for ville, evcs otherwise).
ConfidenceRegion compute_region(const CSQuery& query,
                                const RegionOptions& options = {});

}  // namespace mixcs
