#pragma once

// Prior catalogue over the mean of a Gaussian observation model with known
// variance, plus the induced quantities the rest of the library consumes:
// prior densities, marginal densities of the sample mean (with d/dy of the
// log), shrinkage point estimates, tail behaviour descriptors, a
// prior/data-conflict diagnostic, and the mixture likelihood ratio.
//
// All heavy-tailed regimes are handled in the log domain: marginal values
// like exp(-2000) are routinely needed and would underflow as plain doubles.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixcs/errors.hpp"
#include "mixcs/numerics.hpp"

namespace mixcs {

// Observation model: Y_i ~ Normal(theta, sigma^2), sigma known.
struct GaussianModel {
  double sigma = 1.0;
};

// Sufficient statistic after n observations.
struct SufficientStat {
  long n = 1;
  double ybar = 0.0;
};

enum class PriorKind {
  Gaussian,
  Laplace,
  StudentT,
  Horseshoe,
  GaussianMixture,
  ImproperTilted,
};

std::string kind_name(PriorKind kind);

// Tail behaviour of a prior density written against the template
//   c1 * (2 pi sigma^2)^{-1/2} * |theta/sigma|^{-beta} * exp(-kappa|theta|/sigma)
// for the location-0 member of the family. kappa/beta are set whenever the
// family has a well-defined exponential/polynomial tail order; `known` is
// true only when the full profile including c1 is available.
struct TailProfile {
  std::optional<double> kappa;
  std::optional<double> beta;
  std::optional<double> c1;
  bool known = false;
};

struct Prior {
  PriorKind kind = PriorKind::Gaussian;
  double location = 0.0;
  double scale = 1.0;  // sd / Laplace b / Student scale / horseshoe scale
  double df = 0.0;     // StudentT only
  double kappa = 0.0;  // ImproperTilted only; signed tilt rate, sigma units
  std::vector<double> weights, locations, scales;  // GaussianMixture only

  static Prior gaussian(double location, double scale);
  static Prior laplace(double location, double scale);
  static Prior student_t(double df, double location, double scale);
  static Prior horseshoe(double location, double scale);
  static Prior mixture(std::vector<double> weights,
                       std::vector<double> locations,
                       std::vector<double> scales);
  static Prior improper_tilted(double kappa, double location = 0.0);

  bool proper() const { return kind != PriorKind::ImproperTilted; }
  bool log_concave() const {
    return kind == PriorKind::Gaussian || kind == PriorKind::Laplace;
  }
  // Throws config_error on invalid parameters.
  void validate() const;
};

// Marginal density of ybar under the prior mixture, reported in the log
// domain together with the derivative of the log with respect to ybar.
struct MarginalEval {
  double log_value = -std::numeric_limits<double>::infinity();
  double dlog_dy = 0.0;
  bool closed_form = false;
  double rel_error = 0.0;  // quadrature relative error estimate (0 if closed)

  double value() const { return std::exp(log_value); }
  double derivative() const { return std::exp(log_value) * dlog_dy; }
};

// Prior log density at theta. The horseshoe pole at theta == location
// returns +inf by convention. For ImproperTilted the defining unnormalized
// density (2 pi sigma^2)^{-1/2} exp(-kappa (theta - location)/sigma) is
// reported with sigma taken from `model`.
double log_density(const Prior& prior, double theta,
                   const GaussianModel& model = GaussianModel{1.0});
double density(const Prior& prior, double theta,
               const GaussianModel& model = GaussianModel{1.0});

MarginalEval marginal(const Prior& prior, const GaussianModel& model,
                      const SufficientStat& stat);

// Posterior mean of theta given ybar (shrinkage identity through the
// derivative of the log marginal).
double posterior_mean(const Prior& prior, const GaussianModel& model,
                      const SufficientStat& stat);

TailProfile tail_profile(const Prior& prior, const GaussianModel& model);

// Prior/data conflict index: total marginal mass of {t : m_n(t) <= m_n(ybar)}.
// Small values flag an observed mean sitting far into the marginal tails.
// Proper priors only.
double conflict_index(const Prior& prior, const GaussianModel& model,
                      const SufficientStat& stat);

// log density of ybar given theta: Normal(theta, sigma^2/n).
double log_suff_pdf(const GaussianModel& model, const SufficientStat& stat,
                    double theta);

// Log mixture likelihood ratio log L_n(ybar, theta0). For proper priors this
// is log marginal - log_suff_pdf. For ImproperTilted the tilt is anchored at
// the tested point theta0, giving
//   log L_n = -(1/2) log n + n (ybar - sigma kappa / n - theta0)^2 / (2 sigma^2).
double log_lr(const Prior& prior, const GaussianModel& model,
              const SufficientStat& stat, double theta0);

Prior prior_from_json(const nlohmann::json& j);
nlohmann::json prior_to_json(const Prior& prior);

}  // namespace mixcs
