#include "mixcs/confseq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mixcs/errors.hpp"
#include "mixcs/numerics.hpp"

namespace mixcs {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

void check_model(const GaussianModel& model) {
  if (!(model.sigma > 0.0) || !std::isfinite(model.sigma)) {
    throw config_error("confseq: sigma must be positive and finite");
  }
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw config_error("confseq: alpha must lie in (0, 1)");
  }
}

void check_stat(const SufficientStat& stat) {
  if (stat.n < 1) {
    throw config_error("confseq: n must be at least 1");
  }
  if (!std::isfinite(stat.ybar)) {
    throw config_error("confseq: ybar must be finite");
  }
}

void check_query(const CSQuery& query) {
  query.prior.validate();
  check_model(query.model);
  check_alpha(query.alpha);
  check_stat(query.stat);
}

bool curve_backed(PriorKind kind) {
  return kind == PriorKind::Laplace || kind == PriorKind::StudentT ||
         kind == PriorKind::Horseshoe;
}

}  // namespace

// Build (or extend) a shared n = 1 curve wide enough that every Calibration
// over theta in [theta_lo, theta_hi] finds its working window ready.
std::shared_ptr<MarginalCurve> ensure_curve_window(
    const Prior& prior, const GaussianModel& model,
    std::shared_ptr<MarginalCurve> curve, double curve_tol, double theta_lo,
    double theta_hi) {
  if (!curve) {
    if (!curve_backed(prior.kind)) return nullptr;
    curve = std::make_shared<MarginalCurve>(prior, model, 1, curve_tol);
  }
  const double s = model.sigma;
  const double w = 14.0 * (s + prior.scale);
  curve->ensure(std::min(theta_lo - 38.0 * s, prior.location - w),
                std::max(theta_hi + 38.0 * s, prior.location + w));
  return curve;
}

namespace {

// p^eV at one theta. log_mn is the cached log marginal at the observed
// (n, ybar); unused for the improper family, whose ratio is local to theta.
double p_eville_at(const Prior& prior, const GaussianModel& model,
                   const SufficientStat& stat, double log_mn, double theta,
                   const RegionOptions& opts) {
  if (!std::isfinite(theta)) {
    throw config_error("confseq: theta0 must be finite");
  }
  if (prior.kind == PriorKind::ImproperTilted) {
    const double ll = log_lr(prior, model, stat, theta);
    if (ll <= 0.0) return 1.0;
    return g_tilde_from_s(prior.kappa, std::sqrt(2.0 * ll));
  }
  const double ll = log_mn - log_suff_pdf(model, stat, theta);
  if (opts.curve) {
    Calibration cal(opts.curve, theta, opts.calib);
    return cal.g(ll);
  }
  Calibration cal(prior, model, theta, opts.calib);
  return cal.g(ll);
}

double sufficient_sd(const GaussianModel& model, long n) {
  return model.sigma / std::sqrt(static_cast<double>(n));
}

}  // namespace

double ConfidenceRegion::volume() const {
  double v = 0.0;
  for (const auto& iv : intervals) v += iv.second - iv.first;
  return v;
}

bool ConfidenceRegion::contains(double theta) const {
  for (const auto& iv : intervals) {
    if (theta >= iv.first && theta <= iv.second) return true;
  }
  return false;
}

std::string csv_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string region_csv_rows(long n, const std::string& method,
                            const ConfidenceRegion& region) {
  std::string out;
  const std::string head = std::to_string(n) + "," + method + ",";
  if (region.empty()) {
    return head + "nan,nan\n";
  }
  for (const auto& iv : region.intervals) {
    out += head + csv_number(iv.first) + "," + csv_number(iv.second) + "\n";
  }
  return out;
}

nlohmann::json region_to_json(const ConfidenceRegion& region) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& iv : region.intervals) {
    arr.push_back({iv.first, iv.second});
  }
  return nlohmann::json{{"intervals", arr}, {"volume", region.volume()}};
}

Method method_from_string(const std::string& name) {
  if (name == "ville") return Method::ville;
  if (name == "eville" || name == "eville_grid") return Method::eville_grid;
  if (name == "eville_bracket") return Method::eville_bracket;
  if (name == "improper_closed_form") return Method::improper_closed_form;
  throw config_error("confseq: unknown method '" + name + "'");
}

const char* method_to_string(Method method) {
  switch (method) {
    case Method::ville: return "ville";
    case Method::eville_grid: return "eville_grid";
    case Method::eville_bracket: return "eville_bracket";
    case Method::improper_closed_form: return "improper_closed_form";
  }
  return "?";
}

ConfidenceRegion vcs(const CSQuery& query) {
  check_query(query);
  if (query.method != Method::ville) {
    throw config_error("vcs: query method must be ville");
  }
  if (!query.prior.proper()) {
    throw config_error("vcs: requires a proper prior");
  }
  const MarginalEval me = marginal(query.prior, query.model, query.stat);
  const double sn = sufficient_sd(query.model, query.stat.n);
  const double arg =
      -std::log(query.alpha) - me.log_value - std::log(sn) - kLogSqrt2Pi;
  ConfidenceRegion out;
  if (!(arg >= 0.0)) return out;
  const double half = sn * std::sqrt(2.0 * arg);
  out.intervals.emplace_back(query.stat.ybar - half, query.stat.ybar + half);
  return out;
}

ConfidenceRegion vcs_gaussian_closed(const CSQuery& query) {
  check_query(query);
  if (query.prior.kind != PriorKind::Gaussian) {
    throw config_error("vcs_gaussian_closed: requires a gaussian prior");
  }
  const double n = static_cast<double>(query.stat.n);
  const double s2 = query.model.sigma * query.model.sigma;
  const double tau2 = query.prior.scale * query.prior.scale;
  const double d = query.stat.ybar - query.prior.location;
  const double arg = std::log1p(n * tau2 / s2) + d * d / (s2 / n + tau2) -
                     2.0 * std::log(query.alpha);
  ConfidenceRegion out;
  if (!(arg >= 0.0)) return out;
  const double half = sufficient_sd(query.model, query.stat.n) * std::sqrt(arg);
  out.intervals.emplace_back(query.stat.ybar - half, query.stat.ybar + half);
  return out;
}

ConfidenceRegion evcs_improper(double kappa, const GaussianModel& model,
                               double alpha, const SufficientStat& stat) {
  if (!std::isfinite(kappa)) {
    throw config_error("evcs_improper: kappa must be finite");
  }
  check_model(model);
  check_alpha(alpha);
  check_stat(stat);
  const double n = static_cast<double>(stat.n);
  const double sn = sufficient_sd(model, stat.n);
  const double s = g_tilde_inv_s(kappa, alpha);
  const double half = sn * std::sqrt(s * s + std::log(n));
  const double center = stat.ybar - model.sigma * kappa / n;
  ConfidenceRegion out;
  out.intervals.emplace_back(center - half, center + half);
  return out;
}

ConfidenceRegion limiting_interval(double kappa, const GaussianModel& model,
                                   double alpha, const SufficientStat& stat,
                                   Direction direction) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw config_error("limiting_interval: kappa must be nonnegative");
  }
  const double tilt = direction == Direction::plus ? kappa : -kappa;
  return evcs_improper(tilt, model, alpha, stat);
}

double p_value_ville(const Prior& prior, const GaussianModel& model,
                     const SufficientStat& stat, double theta0) {
  if (!prior.proper()) {
    throw config_error("p_value_ville: requires a proper prior");
  }
  if (!std::isfinite(theta0)) {
    throw config_error("p_value_ville: theta0 must be finite");
  }
  const double ll = log_lr(prior, model, stat, theta0);
  return std::exp(-std::max(ll, 0.0));
}

double p_value_eville(const Prior& prior, const GaussianModel& model,
                      const SufficientStat& stat, double theta0,
                      const RegionOptions& options) {
  prior.validate();
  check_model(model);
  check_stat(stat);
  double log_mn = 0.0;
  if (prior.kind != PriorKind::ImproperTilted) {
    log_mn = marginal(prior, model, stat).log_value;
  }
  return p_eville_at(prior, model, stat, log_mn, theta0, options);
}

EvilleProfile::EvilleProfile(const Prior& prior, const GaussianModel& model,
                             const SufficientStat& stat, double alpha_min,
                             RegionOptions options)
    : prior_(prior),
      model_(model),
      stat_(stat),
      alpha_min_(alpha_min),
      opts_(std::move(options)) {
  prior_.validate();
  check_model(model_);
  check_alpha(alpha_min_);
  check_stat(stat_);
  if (opts_.grid_points < 16) {
    throw config_error("EvilleProfile: grid_points must be at least 16");
  }

  if (prior_.kind == PriorKind::ImproperTilted) {
    // The region has a closed form for this prior, so the scan window is the
    // exact interval dilated enough to keep both transitions interior. A
    // fixed padding around the data point would clip strong tilts, whose
    // half-width grows with kappa.
    const ConfidenceRegion exact =
        evcs_improper(prior_.kappa, model_, alpha_min_, stat_);
    const double lo = exact.intervals[0].first;
    const double hi = exact.intervals[0].second;
    const double pad = 0.05 * (hi - lo) + sufficient_sd(model_, stat_.n);
    wlo_ = lo - pad;
    whi_ = hi + pad;
  } else {
    CSQuery vq{prior_, model_, alpha_min_, stat_, Method::ville};
    const ConfidenceRegion enclosing = vcs(vq);
    if (enclosing.empty()) return;  // empty profile; region() stays empty
    wlo_ = enclosing.intervals.front().first;
    whi_ = enclosing.intervals.back().second;
    log_mn_ = marginal(prior_, model_, stat_).log_value;
    opts_.curve = ensure_curve_window(prior_, model_, opts_.curve,
                                   opts_.calib.curve_tol, wlo_, whi_);
  }

  const int k = opts_.grid_points;
  thetas_.resize(static_cast<std::size_t>(k));
  pvals_.resize(static_cast<std::size_t>(k));
  const double step = (whi_ - wlo_) / (k - 1);
  for (int i = 0; i < k; ++i) {
    const double th = i == k - 1 ? whi_ : wlo_ + step * i;
    thetas_[static_cast<std::size_t>(i)] = th;
    pvals_[static_cast<std::size_t>(i)] = p_at(th);
  }
}

double EvilleProfile::p_at(double theta) const {
  return p_eville_at(prior_, model_, stat_, log_mn_, theta, opts_);
}

ConfidenceRegion EvilleProfile::region(double alpha) const {
  check_alpha(alpha);
  if (alpha < alpha_min_ * (1.0 - 1e-12)) {
    throw config_error(
        "EvilleProfile: alpha below the level the window was built for");
  }
  ConfidenceRegion out;
  if (thetas_.empty()) return out;

  const std::size_t k = thetas_.size();
  std::vector<std::pair<double, bool>> samples;
  samples.reserve(k + 64);
  for (std::size_t i = 0; i < k; ++i) {
    samples.emplace_back(thetas_[i], pvals_[i] >= alpha);
  }
  // One refinement pass at 10x density around every membership transition.
  const double step = (whi_ - wlo_) / static_cast<double>(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if ((pvals_[i] >= alpha) == (pvals_[i + 1] >= alpha)) continue;
    for (int j = 1; j <= 9; ++j) {
      const double th = thetas_[i] + step * j / 10.0;
      samples.emplace_back(th, p_at(th) >= alpha);
    }
  }
  std::sort(samples.begin(), samples.end());

  for (std::size_t i = 0; i < samples.size();) {
    if (!samples[i].second) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < samples.size() && samples[j + 1].second) ++j;
    out.intervals.emplace_back(samples[i].first, samples[j].first);
    i = j + 1;
  }
  return out;
}

namespace {

ConfidenceRegion evcs_bracket(const CSQuery& query,
                              const RegionOptions& options) {
  if (!query.prior.proper()) {
    throw config_error("evcs: bracket method requires a proper prior");
  }
  CSQuery vq = query;
  vq.method = Method::ville;
  const ConfidenceRegion enclosing = vcs(vq);
  if (enclosing.empty()) return {};
  const double wlo = enclosing.intervals.front().first;
  const double whi = enclosing.intervals.back().second;

  RegionOptions opts = options;
  opts.curve = ensure_curve_window(query.prior, query.model, opts.curve,
                                opts.calib.curve_tol, wlo, whi);
  const double log_mn =
      marginal(query.prior, query.model, query.stat).log_value;
  const auto p = [&](double theta) {
    return p_eville_at(query.prior, query.model, query.stat, log_mn, theta,
                       opts);
  };

  const double center = posterior_mean(query.prior, query.model, query.stat);
  if (!(p(center) >= query.alpha)) {
    // The posterior mean belongs to the extended region for the priors the
    // bracket method is meant for; a mixture at extreme conflict can defeat
    // the single-interval assumption, so fall back to the grid there.
    if (query.prior.kind == PriorKind::GaussianMixture) {
      CSQuery gq = query;
      gq.method = Method::eville_grid;
      return evcs(gq, options);
    }
    throw numeric_error("evcs: posterior mean failed the membership test");
  }

  const Tolerance tol{1e-10, 1e-12, 160};
  const auto f = [&](double theta) { return p(theta) - query.alpha; };
  // When the prior is diffuse relative to sigma/sqrt(n) the extended
  // calibration degenerates to the plain one, and p at the enclosing
  // endpoint lands on alpha up to rounding (possibly a hair above). The
  // endpoint itself is then the answer to machine precision.
  ConfidenceRegion out;
  const double lo =
      f(wlo) >= 0.0 ? wlo : find_root_monotone(f, Bracket{wlo, center}, tol);
  const double hi =
      f(whi) >= 0.0 ? whi : find_root_monotone(f, Bracket{center, whi}, tol);
  out.intervals.emplace_back(lo, hi);
  return out;
}

}  // namespace

ConfidenceRegion evcs(const CSQuery& query, const RegionOptions& options) {
  check_query(query);
  switch (query.method) {
    case Method::ville:
      throw config_error("evcs: query method must be an eville method");
    case Method::improper_closed_form:
      if (query.prior.kind != PriorKind::ImproperTilted) {
        throw config_error(
            "evcs: improper_closed_form requires the tilted flat prior");
      }
      return evcs_improper(query.prior.kappa, query.model, query.alpha,
                           query.stat);
    case Method::eville_grid: {
      EvilleProfile profile(query.prior, query.model, query.stat, query.alpha,
                            options);
      return profile.region(query.alpha);
    }
    case Method::eville_bracket:
      return evcs_bracket(query, options);
  }
  throw config_error("evcs: unknown method");
}

ConfidenceRegion compute_region(const CSQuery& query,
                                const RegionOptions& options) {
  if (query.method == Method::ville) return vcs(query);
  return evcs(query, options);
}

PrattResult pratt_threshold(const Prior& prior, const GaussianModel& model,
                            long n, double theta0, double alpha,
                            std::size_t n_mc, std::uint64_t seed) {
  prior.validate();
  check_model(model);
  check_alpha(alpha);
  if (n < 1) throw config_error("pratt_threshold: n must be at least 1");
  if (!std::isfinite(theta0)) {
    throw config_error("pratt_threshold: theta0 must be finite");
  }
  if (n_mc < 10000) {
    throw config_error("pratt_threshold: n_mc must be at least 10^4");
  }

  const double sn = sufficient_sd(model, n);
  std::shared_ptr<MarginalCurve> curve;
  if (curve_backed(prior.kind)) {
    curve = std::make_shared<MarginalCurve>(prior, model, n, 5e-7);
    curve->ensure(theta0 - 7.0 * sn, theta0 + 7.0 * sn);
  }

  Rng rng(seed);
  std::vector<double> logt(n_mc);
  SufficientStat draw{n, 0.0};
  for (std::size_t i = 0; i < n_mc; ++i) {
    draw.ybar = theta0 + sn * rng.normal();
    if (prior.kind == PriorKind::ImproperTilted) {
      logt[i] = log_lr(prior, model, draw, theta0);
    } else {
      const double lm = curve && curve->covers(draw.ybar)
                            ? curve->log_m(draw.ybar)
                            : marginal(prior, model, draw).log_value;
      logt[i] = lm - log_suff_pdf(model, draw, theta0);
    }
  }
  std::sort(logt.begin(), logt.end());

  const double level = 1.0 - alpha;
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(level * static_cast<double>(n_mc)));
  rank = std::min(std::max<std::size_t>(rank, 1), n_mc);
  const double log_k = logt[rank - 1];

  // Order-statistic spread around the quantile rank as a standard error.
  const auto d = static_cast<std::size_t>(std::ceil(
      1.96 * std::sqrt(static_cast<double>(n_mc) * alpha * (1.0 - alpha))));
  const std::size_t r_lo = rank > d ? rank - d : 1;
  const std::size_t r_hi = std::min(n_mc, rank + d);
  const double se_log = 0.5 * (logt[r_hi - 1] - logt[r_lo - 1]) / 1.96;

  PrattResult out;
  out.log_k = log_k;
  out.k = std::exp(log_k);
  out.se_log = se_log;
  out.n_mc = n_mc;
  return out;
}

double p_value_pratt(const Prior& prior, const GaussianModel& model,
                     const SufficientStat& stat, double theta0,
                     std::size_t n_mc, std::uint64_t seed) {
  prior.validate();
  check_model(model);
  check_stat(stat);
  if (!std::isfinite(theta0)) {
    throw config_error("p_value_pratt: theta0 must be finite");
  }
  if (n_mc < 1) throw config_error("p_value_pratt: n_mc must be positive");

  const double obs = log_lr(prior, model, stat, theta0);
  const double sn = sufficient_sd(model, stat.n);
  std::shared_ptr<MarginalCurve> curve;
  if (curve_backed(prior.kind)) {
    curve = std::make_shared<MarginalCurve>(prior, model, stat.n, 5e-7);
    curve->ensure(theta0 - 7.0 * sn, theta0 + 7.0 * sn);
  }

  Rng rng(seed);
  SufficientStat draw{stat.n, 0.0};
  std::size_t exceed = 0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    draw.ybar = theta0 + sn * rng.normal();
    double lt;
    if (prior.kind == PriorKind::ImproperTilted) {
      lt = log_lr(prior, model, draw, theta0);
    } else {
      const double lm = curve && curve->covers(draw.ybar)
                            ? curve->log_m(draw.ybar)
                            : marginal(prior, model, draw).log_value;
      lt = lm - log_suff_pdf(model, draw, theta0);
    }
    if (lt >= obs) ++exceed;
  }
  return static_cast<double>(exceed) / static_cast<double>(n_mc);
}

namespace {

double distance_to(const ConfidenceRegion& region, double x) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& iv : region.intervals) {
    if (x < iv.first) {
      best = std::min(best, iv.first - x);
    } else if (x > iv.second) {
      best = std::min(best, x - iv.second);
    } else {
      return 0.0;
    }
  }
  return best;
}

// sup over x in a of dist(x, b): attained at an endpoint of a or at the
// point of a nearest to a gap midpoint of b.
double directed_hausdorff(const ConfidenceRegion& a,
                          const ConfidenceRegion& b) {
  std::vector<double> candidates;
  for (const auto& iv : a.intervals) {
    candidates.push_back(iv.first);
    candidates.push_back(iv.second);
  }
  for (std::size_t j = 0; j + 1 < b.intervals.size(); ++j) {
    const double mid =
        0.5 * (b.intervals[j].second + b.intervals[j + 1].first);
    for (const auto& iv : a.intervals) {
      candidates.push_back(std::clamp(mid, iv.first, iv.second));
    }
  }
  double best = 0.0;
  for (double x : candidates) best = std::max(best, distance_to(b, x));
  return best;
}

}  // namespace

double hausdorff(const ConfidenceRegion& a, const ConfidenceRegion& b) {
  if (a.empty() || b.empty()) {
    throw config_error("hausdorff: regions must be non-empty");
  }
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

}  // namespace mixcs
