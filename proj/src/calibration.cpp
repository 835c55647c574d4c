#include "mixcs/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace mixcs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sinhc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 + x * x / 6.0;
  return std::sinh(x) / x;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tilted-flat closed form
// ---------------------------------------------------------------------------

double g_tilde_from_s(double kappa, double s) {
  if (!std::isfinite(kappa)) {
    throw config_error("g_tilde: kappa must be finite");
  }
  if (!(s >= 0.0) || !std::isfinite(s)) {
    throw config_error("g_tilde: s must be a finite value >= 0");
  }
  if (s == 0.0) return 1.0;
  const double k = std::abs(kappa);
  // Mass of the two clipped tails plus the exponential bulge between them.
  const double tails = norm_cdf(k - s) + norm_cdf(-k - s);
  const double ks = k * s;
  double bulge;
  if (ks < 30.0) {
    // (phi(k-s) - phi(k+s)) / k written without cancellation.
    bulge = 2.0 * s * norm_pdf(s) * std::exp(-0.5 * k * k) * sinhc(ks);
  } else {
    bulge = norm_pdf(s - k) / k;  // the phi(s+k) piece is exp(-2ks) smaller
  }
  return std::min(1.0, tails + bulge);
}

double g_tilde(double kappa, double x) {
  if (!(x >= 1.0)) {
    throw config_error("g_tilde: threshold x must be >= 1");
  }
  return g_tilde_from_s(kappa, std::sqrt(2.0 * std::log(x)));
}

double g_tilde_inv_s(double kappa, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw config_error("g_tilde_inv: alpha must lie in (0, 1]");
  }
  if (alpha == 1.0) return 0.0;
  double hi = 2.0;
  while (g_tilde_from_s(kappa, hi) > alpha) {
    hi *= 2.0;
    if (hi > 1e8) {
      throw numeric_error("g_tilde_inv: failed to bracket the target level");
    }
  }
  return find_root_monotone(
      [&](double s) { return g_tilde_from_s(kappa, s) - alpha; },
      Bracket{0.0, hi}, Tolerance{1e-14, 1e-15, 200});
}

double g_tilde_inv(double kappa, double alpha) {
  const double s = g_tilde_inv_s(kappa, alpha);
  return std::exp(0.5 * s * s);
}

double g_tilde_quadrature(double kappa, double x, const Tolerance& tol) {
  if (!(x >= 1.0)) {
    throw config_error("g_tilde_quadrature: threshold x must be >= 1");
  }
  const double lx = std::log(x);
  const double s = std::sqrt(2.0 * lx);
  auto f = [&](double u) {
    const double e = 0.5 * (u - kappa) * (u - kappa) - lx;
    return std::exp(std::min(e, 0.0)) * norm_pdf(u);
  };
  const std::vector<double> bp = {kappa - s - 10.0,
                                  kappa - s,
                                  kappa,
                                  kappa + s,
                                  kappa + s + 10.0,
                                  -8.0,
                                  0.0,
                                  8.0};
  const QuadResult q = integrate_line(f, tol, bp);
  return std::min(1.0, q.value);
}

// ---------------------------------------------------------------------------
// MarginalCurve
// ---------------------------------------------------------------------------

MarginalCurve::MarginalCurve(Prior prior, GaussianModel model, long n,
                             double tol)
    : prior_(std::move(prior)), model_(model), n_(n), tol_(tol) {
  prior_.validate();
  if (!(model_.sigma > 0.0) || !std::isfinite(model_.sigma)) {
    throw config_error("MarginalCurve: sigma must be positive and finite");
  }
  if (n_ < 1) throw config_error("MarginalCurve: n must be >= 1");
  if (!(tol_ > 0.0)) throw config_error("MarginalCurve: tol must be positive");
  step0_ = 0.4 * model_.sigma / std::sqrt(static_cast<double>(n_));
}

std::pair<double, double> MarginalCurve::direct(double y) const {
  const MarginalEval e = marginal(prior_, model_, SufficientStat{n_, y});
  return {e.log_value, e.dlog_dy};
}

void MarginalCurve::subdivide(const Node& a, const Node& b, int depth,
                              std::vector<Node>& out) const {
  const double h = b.y - a.y;
  const double ym = 0.5 * (a.y + b.y);
  if (depth <= 0 || h < 1e-9 * (1.0 + std::abs(ym))) {
    out.push_back(b);
    return;
  }
  const auto [lm, dm] = direct(ym);
  const double pred = 0.5 * (a.l + b.l) + 0.125 * h * (a.d - b.d);
  if (std::abs(pred - lm) <= tol_) {
    out.push_back(b);
    return;
  }
  const Node mid{ym, lm, dm};
  subdivide(a, mid, depth - 1, out);
  subdivide(mid, b, depth - 1, out);
}

std::vector<MarginalCurve::Node> MarginalCurve::build_range(double lo,
                                                            double hi) const {
  const double span = hi - lo;
  const double kd = std::ceil(span / step0_);
  if (!(kd < 200000.0)) {
    throw config_error("MarginalCurve: requested window is too wide");
  }
  const int k = std::max(1, static_cast<int>(kd));
  std::vector<Node> coarse(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) {
    const double y = lo + span * static_cast<double>(i) / k;
    const auto [l, d] = direct(y);
    coarse[static_cast<std::size_t>(i)] = Node{y, l, d};
  }
  std::vector<Node> out;
  out.reserve(coarse.size() * 2);
  out.push_back(coarse.front());
  for (int i = 0; i < k; ++i) {
    subdivide(coarse[static_cast<std::size_t>(i)],
              coarse[static_cast<std::size_t>(i) + 1], 24, out);
  }
  return out;
}

void MarginalCurve::ensure(double lo, double hi) {
  if (!(std::isfinite(lo) && std::isfinite(hi)) || lo > hi) {
    throw config_error("MarginalCurve::ensure: invalid window");
  }
  if (nodes_.empty()) {
    nodes_ = build_range(lo, hi);
    lo_ = lo;
    hi_ = hi;
    return;
  }
  if (lo < lo_) {
    std::vector<Node> left = build_range(lo, lo_);
    left.pop_back();  // duplicates the existing node at lo_
    nodes_.insert(nodes_.begin(), left.begin(), left.end());
    lo_ = lo;
  }
  if (hi > hi_) {
    std::vector<Node> right = build_range(hi_, hi);
    nodes_.insert(nodes_.end(), right.begin() + 1, right.end());
    hi_ = hi;
  }
}

std::pair<double, double> MarginalCurve::eval(double y) const {
  if (!std::isfinite(y)) {
    throw config_error("MarginalCurve::eval: y must be finite");
  }
  if (nodes_.size() < 2 || y < lo_ || y > hi_) return direct(y);
  auto it = std::upper_bound(
      nodes_.begin(), nodes_.end(), y,
      [](double v, const Node& nd) { return v < nd.y; });
  std::size_t i =
      it == nodes_.begin()
          ? 0
          : static_cast<std::size_t>(it - nodes_.begin()) - 1;
  if (i >= nodes_.size() - 1) i = nodes_.size() - 2;
  const Node& a = nodes_[i];
  const Node& b = nodes_[i + 1];
  const double h = b.y - a.y;
  if (!(h > 0.0)) return direct(y);
  const double u = (y - a.y) / h;
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double h00 = 1.0 - 3.0 * u2 + 2.0 * u3;
  const double h10 = u - 2.0 * u2 + u3;
  const double h01 = 3.0 * u2 - 2.0 * u3;
  const double h11 = u3 - u2;
  const double val = h00 * a.l + h * (h10 * a.d + h11 * b.d) + h01 * b.l;
  const double du00 = 6.0 * (u2 - u);
  const double du10 = 1.0 - 4.0 * u + 3.0 * u2;
  const double du01 = 6.0 * (u - u2);
  const double du11 = 3.0 * u2 - 2.0 * u;
  const double der =
      (du00 * a.l + du01 * b.l) / h + du10 * a.d + du11 * b.d;
  return {val, der};
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

namespace {

bool quadrature_backed(PriorKind kind) {
  return kind == PriorKind::Laplace || kind == PriorKind::StudentT ||
         kind == PriorKind::Horseshoe;
}

}  // namespace

Calibration::Calibration(const Prior& prior, const GaussianModel& model,
                         double theta0, CalibOptions opts)
    : prior_(prior), model_(model), theta0_(theta0), opts_(opts) {
  prior_.validate();
  if (!(model_.sigma > 0.0) || !std::isfinite(model_.sigma)) {
    throw config_error("Calibration: sigma must be positive and finite");
  }
  if (!std::isfinite(theta0_)) {
    throw config_error("Calibration: theta0 must be finite");
  }
  if (opts_.use_curve && quadrature_backed(prior_.kind)) {
    curve_ = std::make_shared<MarginalCurve>(prior_, model_, 1,
                                             opts_.curve_tol);
    const auto [wlo, whi] = curve_window();
    curve_->ensure(wlo, whi);
  }
}

Calibration::Calibration(std::shared_ptr<MarginalCurve> curve, double theta0,
                         CalibOptions opts)
    : theta0_(theta0), opts_(opts), curve_(std::move(curve)) {
  if (!curve_) {
    throw config_error("Calibration: shared curve must not be null");
  }
  if (curve_->n() != 1) {
    throw config_error("Calibration: shared curve must be built at n = 1");
  }
  if (!std::isfinite(theta0_)) {
    throw config_error("Calibration: theta0 must be finite");
  }
  prior_ = curve_->prior();
  model_ = curve_->model();
  const auto [wlo, whi] = curve_window();
  curve_->ensure(wlo, whi);
}

std::pair<double, double> Calibration::curve_window() const {
  const double s = model_.sigma;
  double lo = theta0_ - 38.0 * s;
  double hi = theta0_ + 38.0 * s;
  const double w = 14.0 * (s + prior_.scale);
  lo = std::min(lo, prior_.location - w);
  hi = std::max(hi, prior_.location + w);
  return {lo, hi};
}

double Calibration::log_m1(double y) const {
  if (curve_) return curve_->log_m(y);
  return marginal(prior_, model_, SufficientStat{1, y}).log_value;
}

double Calibration::log_f(double y) const {
  const double z = (y - theta0_) / model_.sigma;
  return norm_log_pdf(z) - std::log(model_.sigma);
}

double Calibration::log_ratio(double y) const {
  if (prior_.kind == PriorKind::ImproperTilted) {
    // The marginal's arbitrary anchoring constant cancels in the likelihood
    // ratio, which is centred at theta0 + kappa*sigma with unit gain.
    const double z =
        (y - theta0_ - prior_.kappa * model_.sigma) / model_.sigma;
    return 0.5 * z * z;
  }
  return log_m1(y) - log_f(y);
}

std::vector<double> Calibration::scan_grid() const {
  const double s = model_.sigma;
  std::vector<double> ys;
  ys.reserve(2048);
  const int n0 = std::max(65, opts_.scan_points);
  // Cover the whole zone where the likelihood factor is representable in
  // doubles (it underflows beyond ~38.6 sigma), so clip switch points far
  // from the prior are still seen.
  const double a0 = theta0_ - 38.0 * s;
  const double b0 = theta0_ + 38.0 * s;
  for (int i = 0; i < n0; ++i) {
    ys.push_back(a0 + (b0 - a0) * static_cast<double>(i) / (n0 - 1));
  }
  const double clip_lo = a0;
  const double clip_hi = b0;
  auto add_center = [&](double mu, double sc) {
    const double w = 13.0 * (s + sc);
    const double a = std::max(mu - w, clip_lo);
    const double b = std::min(mu + w, clip_hi);
    if (!(a < b)) return;
    for (int i = 0; i < 401; ++i) {
      ys.push_back(a + (b - a) * static_cast<double>(i) / 400.0);
    }
  };
  switch (prior_.kind) {
    case PriorKind::GaussianMixture:
      for (std::size_t j = 0; j < prior_.locations.size(); ++j) {
        add_center(prior_.locations[j], prior_.scales[j]);
      }
      break;
    case PriorKind::ImproperTilted:
      break;  // switch points are analytic; no scan needed
    default:
      add_center(prior_.location, prior_.scale);
      break;
  }
  const auto [mn, mx] = std::minmax_element(ys.begin(), ys.end());
  const double lo = *mn;
  const double hi = *mx;
  for (int i = 0; i < 201; ++i) {
    ys.push_back(lo + (hi - lo) * static_cast<double>(i) / 200.0);
  }
  std::sort(ys.begin(), ys.end());
  std::vector<double> out;
  out.reserve(ys.size());
  for (double y : ys) {
    if (out.empty() || y - out.back() > 1e-12 * (1.0 + std::abs(y))) {
      out.push_back(y);
    }
  }
  return out;
}

std::vector<double> Calibration::find_switches(double log_c) const {
  if (prior_.kind == PriorKind::ImproperTilted) {
    if (log_c <= 0.0) return {};
    const double ctr = theta0_ + prior_.kappa * model_.sigma;
    const double r = model_.sigma * std::sqrt(2.0 * log_c);
    return {ctr - r, ctr + r};
  }
  const std::vector<double> ys = scan_grid();
  std::vector<double> hv(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    hv[i] = log_ratio(ys[i]) - log_c;
  }
  std::vector<double> sw;
  for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
    if ((hv[i] > 0.0) == (hv[i + 1] > 0.0)) continue;
    const double root = find_root_monotone(
        [&](double y) { return log_ratio(y) - log_c; },
        Bracket{ys[i], ys[i + 1]},
        Tolerance{1e-11 * model_.sigma, 1e-13, 120});
    sw.push_back(root);
  }
  return sw;
}

void Calibration::add_breakpoints(std::vector<double>* bp) const {
  const double s = model_.sigma;
  for (double k : {1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 11.0, 15.0, 20.0, 27.0,
                   35.0}) {
    bp->push_back(theta0_ - k * s);
    bp->push_back(theta0_ + k * s);
  }
  const double clip_lo = theta0_ - 37.0 * s;
  const double clip_hi = theta0_ + 37.0 * s;
  auto add_center = [&](double mu, double sc) {
    if (mu > clip_lo && mu < clip_hi) bp->push_back(mu);
    for (double k : {1.0, 3.0, 8.0, 13.0}) {
      const double w = k * (s + sc);
      if (mu - w > clip_lo) bp->push_back(mu - w);
      if (mu + w < clip_hi) bp->push_back(mu + w);
    }
  };
  switch (prior_.kind) {
    case PriorKind::GaussianMixture:
      for (std::size_t j = 0; j < prior_.locations.size(); ++j) {
        add_center(prior_.locations[j], prior_.scales[j]);
      }
      break;
    case PriorKind::ImproperTilted:
      bp->push_back(theta0_ + prior_.kappa * s);
      break;
    default:
      add_center(prior_.location, prior_.scale);
      break;
  }
}

double Calibration::g(double log_c) const {
  if (!std::isfinite(log_c)) {
    throw config_error("Calibration::g: log threshold must be finite");
  }
  const std::vector<double> sw = find_switches(log_c);
  if (sw.empty()) {
    if (prior_.kind == PriorKind::ImproperTilted) return 1.0;
    const double h0 = log_ratio(theta0_) - log_c;
    // Either the clip never binds (g = 1) or it binds across the whole zone
    // where the likelihood factor is representable; in the latter case the
    // integral is the predictive mass near theta0 divided by c. Estimate
    // that mass by width * sup over the scan so anchors far from the prior
    // underflow to zero instead of inflating toward 1/c.
    if (h0 > 0.0) return 1.0;
    const double s = model_.sigma;
    double sup_lm = -kInf;
    for (double y : scan_grid()) {
      if (std::abs(y - theta0_) > 38.0 * s) continue;
      sup_lm = std::max(sup_lm, log_m1(y));
    }
    const double log_mass = std::min(0.0, sup_lm + std::log(76.0 * s));
    const double lg = -log_c + log_mass;
    return lg >= 0.0 ? 1.0 : std::exp(lg);
  }
  std::vector<double> bp = sw;
  add_breakpoints(&bp);
  auto psi = [&](double y) {
    const double e = log_f(y) + std::min(log_ratio(y) - log_c, 0.0);
    return e < -745.0 ? 0.0 : std::exp(e);
  };
  const QuadResult q = integrate_line(psi, opts_.quad, bp);
  return std::clamp(q.value, 0.0, 1.0);
}

double Calibration::g_inv_log(double alpha) const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw config_error("Calibration::g_inv_log: alpha must lie in (0, 1]");
  }
  double lo = log_c_star();
  if (alpha == 1.0) return lo;
  double glo = g(lo);
  double step = 1.0;
  int guard = 0;
  while (glo < alpha) {  // saturation estimate sat too high; walk down
    lo -= step;
    step *= 2.0;
    glo = g(lo);
    if (++guard > 200) {
      throw numeric_error("Calibration::g_inv_log: failed to bracket (down)");
    }
  }
  double hi = lo;
  double ghi = glo;
  step = 1.0;
  guard = 0;
  while (ghi > alpha) {
    lo = hi;
    hi += step;
    step *= 2.0;
    ghi = g(hi);
    if (++guard > 200) {
      throw numeric_error("Calibration::g_inv_log: failed to bracket (up)");
    }
  }
  if (ghi == alpha) return hi;
  return find_root_monotone([&](double lc) { return g(lc) - alpha; },
                            Bracket{lo, hi}, Tolerance{5e-13, 1e-15, 200});
}

double Calibration::log_c_star() const {
  if (lcstar_) return *lcstar_;
  if (prior_.kind == PriorKind::ImproperTilted) {
    lcstar_ = 0.0;
    return 0.0;
  }
  const double s = model_.sigma;
  auto q = [&](double y) { return log_ratio(y); };
  std::vector<double> ys = scan_grid();
  auto add = [&](double y) {
    if (std::isfinite(y)) ys.push_back(y);
  };
  // Stationary-point candidates from the marginal's tail behaviour. These
  // matter when the minimiser sits far outside the likelihood window (e.g.
  // a narrow prior component far from theta0).
  switch (prior_.kind) {
    case PriorKind::Gaussian: {
      const double t2 = prior_.scale * prior_.scale;
      add(((s * s + t2) * theta0_ - prior_.location * s * s) / t2);
      break;
    }
    case PriorKind::GaussianMixture:
      for (std::size_t j = 0; j < prior_.locations.size(); ++j) {
        const double t2 = prior_.scales[j] * prior_.scales[j];
        add(((s * s + t2) * theta0_ - prior_.locations[j] * s * s) / t2);
      }
      break;
    case PriorKind::Laplace: {
      const double kappa = s / prior_.scale;
      add(theta0_ + kappa * s);
      add(theta0_ - kappa * s);
      break;
    }
    case PriorKind::StudentT:
    case PriorKind::Horseshoe: {
      const double beta =
          prior_.kind == PriorKind::StudentT ? prior_.df + 1.0 : 2.0;
      const double mu = prior_.location;
      const double rt = std::sqrt((theta0_ - mu) * (theta0_ - mu) +
                                  4.0 * beta * s * s);
      add(0.5 * (theta0_ + mu + rt));
      add(0.5 * (theta0_ + mu - rt));
      break;
    }
    default:
      break;
  }
  // Log-spaced far ladder for closed-form marginals, whose minimiser can sit
  // many orders of magnitude away from theta0 when a component is narrow.
  if (prior_.kind == PriorKind::Gaussian ||
      prior_.kind == PriorKind::GaussianMixture) {
    for (double e = 0.0; e <= 6.5; e += 0.25) {
      const double d = s * std::pow(10.0, e);
      ys.push_back(theta0_ - d);
      ys.push_back(theta0_ + d);
    }
  }
  std::sort(ys.begin(), ys.end());
  std::size_t best = 0;
  double qbest = kInf;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double v = q(ys[i]);
    if (v < qbest) {
      qbest = v;
      best = i;
    }
  }
  const double a = best > 0 ? ys[best - 1] : ys[best];
  const double b = best + 1 < ys.size() ? ys[best + 1] : ys[best];
  double out = qbest;
  if (a < b) {
    const double ystar = golden_min(q, a, b, 200);
    out = std::min(out, q(ystar));
  }
  lcstar_ = out;
  return out;
}

double g_theta(const Calibration& cal, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw config_error("g_theta: threshold c must be positive and finite");
  }
  return cal.g(std::log(c));
}

double g_theta_inv(const Calibration& cal, double alpha) {
  return std::exp(cal.g_inv_log(alpha));
}

double c_star(const Calibration& cal) {
  return std::exp(cal.log_c_star());
}

}  // namespace mixcs
