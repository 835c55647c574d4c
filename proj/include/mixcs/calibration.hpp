#pragma once

// Calibration of mixture-ratio thresholds. For a prior/model pair and a
// candidate parameter value theta0, the calibration function g maps a
// threshold c to the total mass left after clipping the one-observation
// predictive density against the sampling density centred at theta0:
//
//   g(c) = integral of min(m1(y)/c, f(y | theta0)) dy.
//
// g decreases from 1 (reached at the saturation threshold c*) to 0, and its
// inverse supplies the threshold used by the extended confidence procedures.
// The exponentially tilted flat prior admits a closed form g_tilde(kappa, x)
// which also serves as the far-tail limit of g for bounded-influence priors.

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "mixcs/numerics.hpp"
#include "mixcs/priors.hpp"

namespace mixcs {

// ---------------------------------------------------------------------------
// Closed-form calibration family for exponentially tilted flat priors
// ---------------------------------------------------------------------------

// g_tilde(kappa, x) for x >= 1 (x < 1 is a config_error). Symmetric in the
// sign of kappa; g_tilde(kappa, 1) = 1 and g_tilde is strictly decreasing.
double g_tilde(double kappa, double x);

// Same function parameterised by s = sqrt(2 log x) >= 0. This form stays
// finite for thresholds far beyond double range (x = exp(s^2/2)).
double g_tilde_from_s(double kappa, double s);

// Inverse of g_tilde in x for alpha in (0,1]; may overflow to +inf for
// extremely small alpha. g_tilde_inv_s returns s = sqrt(2 log x) instead,
// which is always finite.
double g_tilde_inv(double kappa, double alpha);
double g_tilde_inv_s(double kappa, double alpha);

// Direct quadrature of the defining integral
//   int min(exp((u-kappa)^2/2)/x, 1) phi(u) du,
// used as an independent cross-check of the closed form.
double g_tilde_quadrature(double kappa, double x, const Tolerance& tol = {});

// ---------------------------------------------------------------------------
// Certified interpolant of the log predictive density
// ---------------------------------------------------------------------------

// Piecewise cubic Hermite interpolant of y -> log m_n(y) built from direct
// marginal evaluations (value and derivative at each node). Segments are
// subdivided until the interpolant reproduces a directly evaluated midpoint
// within `tol` on the log scale, so lookups inherit that accuracy at a tiny
// fraction of the cost of quadrature-backed marginals. Outside the covered
// window, eval() falls back to direct evaluation.
//
// Not thread-safe: build/extend the curve before sharing it read-only.
class MarginalCurve {
 public:
  MarginalCurve(Prior prior, GaussianModel model, long n, double tol = 5e-7);

  // Extends certified coverage to include [lo, hi].
  void ensure(double lo, double hi);

  bool covers(double y) const { return y >= lo_ && y <= hi_; }

  // (log m_n(y), d/dy log m_n(y)); interpolated inside the window.
  std::pair<double, double> eval(double y) const;
  double log_m(double y) const { return eval(y).first; }

  std::size_t node_count() const { return nodes_.size(); }
  const Prior& prior() const { return prior_; }
  const GaussianModel& model() const { return model_; }
  long n() const { return n_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  struct Node {
    double y, l, d;  // abscissa, log marginal, d/dy log marginal
  };

  std::pair<double, double> direct(double y) const;
  // Appends refined nodes covering (a, b]; `a` is assumed already emitted.
  void subdivide(const Node& a, const Node& b, int depth,
                 std::vector<Node>& out) const;
  std::vector<Node> build_range(double lo, double hi) const;

  Prior prior_;
  GaussianModel model_;
  long n_ = 1;
  double tol_ = 5e-7;
  double step0_ = 0.4;  // initial node spacing before refinement
  double lo_ = 1.0, hi_ = -1.0;  // empty window until first ensure()
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// General calibration
// ---------------------------------------------------------------------------

struct CalibOptions {
  // Use a MarginalCurve for quadrature-backed priors in the scan/integration
  // hot paths. Closed-form marginals always evaluate directly.
  bool use_curve = true;
  double curve_tol = 5e-7;             // log-scale interpolation tolerance
  Tolerance quad{1e-12, 1e-9, 400};    // tolerance for the clipped integral
  int scan_points = 801;               // switch-point scan density
};

// Calibration state for one (prior, model, theta0) triple. Thresholds are
// handled on the log scale throughout so that far-out theta0 (where the
// relevant c underflow double range) stay representable.
class Calibration {
 public:
  Calibration(const Prior& prior, const GaussianModel& model, double theta0,
              CalibOptions opts = {});

  // Shares a prebuilt n=1 curve across many theta0 values. The curve must
  // have n() == 1; its prior/model become this calibration's prior/model.
  Calibration(std::shared_ptr<MarginalCurve> curve, double theta0,
              CalibOptions opts = {});

  // g evaluated at log(c). Clamped to [0, 1]; exactly 1 below the
  // saturation threshold.
  double g(double log_c) const;

  // log of the threshold c with g(c) = alpha, for alpha in (0, 1].
  double g_inv_log(double alpha) const;

  // log c* = inf_y { log m1(y) - log f(y | theta0) }; cached after the
  // first call.
  double log_c_star() const;

  double theta0() const { return theta0_; }
  const Prior& prior() const { return prior_; }
  const GaussianModel& model() const { return model_; }

 private:
  double log_m1(double y) const;
  double log_f(double y) const;      // log f(y | theta0), one observation
  double log_ratio(double y) const;  // log L1(y, theta0), anchored at theta0
  std::pair<double, double> curve_window() const;
  // Sorted scan abscissae covering the likelihood window and prior mass.
  std::vector<double> scan_grid() const;
  std::vector<double> find_switches(double log_c) const;
  void add_breakpoints(std::vector<double>* bp) const;

  Prior prior_;
  GaussianModel model_;
  double theta0_ = 0.0;
  CalibOptions opts_;
  std::shared_ptr<MarginalCurve> curve_;  // null for closed-form marginals
  mutable std::optional<double> lcstar_;
};

// Convenience wrappers on the natural threshold scale. g_theta_inv can
// underflow to 0 for far-out theta0; prefer Calibration::g_inv_log there.
double g_theta(const Calibration& cal, double c);
double g_theta_inv(const Calibration& cal, double alpha);
double c_star(const Calibration& cal);

}  // namespace mixcs
