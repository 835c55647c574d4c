#include "mixcs/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mixcs {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kInf = std::numeric_limits<double>::infinity();
// 0.5 * log(2 * pi^3)
const double kLogSqrt2Pi3 = 0.5 * std::log(2.0 * 31.006276680299820175);
// Horseshoe pole exclusion radius, in units of the prior scale.
constexpr double kHsBallRadius = 1e-8;
constexpr double kEulerGamma = 0.57721566490153286061;

double log_sum_exp(const std::vector<double>& v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void require(bool ok, const char* msg) {
  if (!ok) throw config_error(msg);
}

// Student-t log normalising constant: log Gamma((v+1)/2) - log Gamma(v/2)
// - 0.5 log(v pi).
double student_log_norm(double df) {
  return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * 3.14159265358979323846);
}

// Standard horseshoe log density at z (unit scale, location 0); +inf at 0.
double horseshoe_std_log_density(double z) {
  const double a = 0.5 * z * z;
  if (a == 0.0) return kInf;
  return std::log(exp_e1(a)) - kLogSqrt2Pi3;
}

// Mass of the standard horseshoe density on (-u, u) for tiny u, from the
// small-argument expansion exp(a)E1(a) = -gamma + log 2 - 2 log|z| + O(z^2).
double horseshoe_ball_mass(double u) {
  const double k = std::exp(-kLogSqrt2Pi3);
  return 2.0 * k * u * (-kEulerGamma + std::log(2.0) + 2.0 - 2.0 * std::log(u));
}

struct QuadMarginalResult {
  double log_value;
  double dlog_dy;
  double rel_error;
};

// Peak-normalised quadrature of the prior/likelihood product over theta.
// Works entirely with log integrands so that regimes where the marginal is
// exp(-2000) remain well conditioned.
QuadMarginalResult marginal_by_quadrature(const Prior& prior,
                                          const GaussianModel& model,
                                          const SufficientStat& stat) {
  const double y = stat.ybar;
  const double sig = model.sigma;
  const double n = static_cast<double>(stat.n);
  const double sn = sig / std::sqrt(n);
  const double lf_const = -std::log(sn) - kLogSqrt2Pi;
  const double mu = prior.location;
  const double s = prior.scale;
  const bool is_horseshoe = prior.kind == PriorKind::Horseshoe;
  const double ball = is_horseshoe ? kHsBallRadius * s : 0.0;

  auto log_joint = [&](double t) -> double {
    if (is_horseshoe && std::abs(t - mu) < ball) return -kInf;
    const double z = (y - t) / sn;
    return log_density(prior, t, model) + lf_const - 0.5 * z * z;
  };

  // Geometric ladders around the data bump (width sigma/sqrt(n)) and the
  // prior centre. Narrow panels keep the per-panel dynamic range bounded so
  // the Kronrod error estimate stays honest for exponential shoulders.
  std::vector<double> bp = {y, mu};
  for (double k : {1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 11.0, 15.0, 20.0, 27.0,
                   35.0}) {
    bp.push_back(y - k * sn);
    bp.push_back(y + k * sn);
  }
  for (double k : {1.0, 2.0, 4.0, 8.0, 20.0}) {
    bp.push_back(mu - k * s);
    bp.push_back(mu + k * s);
  }
  if (is_horseshoe) {
    bp.push_back(mu - ball);
    bp.push_back(mu + ball);
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  // Peak-normalisation constant from a probe sweep (breakpoints plus a
  // uniform fill over their hull).
  double peak = -kInf;
  auto probe = [&](double t) {
    const double l = log_joint(t);
    if (std::isfinite(l)) peak = std::max(peak, l);
  };
  for (double t : bp) probe(t);
  const double lo = bp.front(), hi = bp.back();
  for (int i = 1; i < 32; ++i) {
    probe(lo + (hi - lo) * (static_cast<double>(i) / 32.0));
  }
  if (!std::isfinite(peak)) {
    throw numeric_error("marginal: could not locate integrand peak");
  }
  const double shift = peak;

  auto f = [&](double t) {
    const double l = log_joint(t) - shift;
    return l > -745.0 ? std::exp(l) : 0.0;
  };
  const double dscale = n / (sig * sig);
  auto fd = [&](double t) { return (t - y) * dscale * f(t); };

  Tolerance qt;
  qt.abs_tol = 1e-13;
  qt.rel_tol = 1e-10;
  qt.max_iter = 400;
  QuadResult num = integrate_line(f, qt, bp);
  Tolerance qtd = qt;
  qtd.abs_tol = std::max(1e-13, 1e-10 * num.value);
  QuadResult der = integrate_line(fd, qtd, bp);

  double total = num.value;
  double dtotal = der.value;
  if (is_horseshoe) {
    // Analytic contribution of the excluded pole ball.
    const double zf = (y - mu) / sn;
    const double log_like_at_pole = lf_const - 0.5 * zf * zf;
    const double mass = horseshoe_ball_mass(kHsBallRadius);
    const double add = std::exp(log_like_at_pole + std::log(mass) - shift);
    total += add;
    dtotal += (mu - y) * dscale * add;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw numeric_error("marginal: quadrature produced a non-positive mass");
  }
  QuadMarginalResult out;
  out.log_value = shift + std::log(total);
  out.dlog_dy = dtotal / total;
  out.rel_error = (num.error + der.error) / total;
  return out;
}

}  // namespace

std::string kind_name(PriorKind kind) {
  switch (kind) {
    case PriorKind::Gaussian: return "Gaussian";
    case PriorKind::Laplace: return "Laplace";
    case PriorKind::StudentT: return "StudentT";
    case PriorKind::Horseshoe: return "Horseshoe";
    case PriorKind::GaussianMixture: return "GaussianMixture";
    case PriorKind::ImproperTilted: return "ImproperTilted";
  }
  return "?";
}

Prior Prior::gaussian(double location, double scale) {
  Prior p;
  p.kind = PriorKind::Gaussian;
  p.location = location;
  p.scale = scale;
  p.validate();
  return p;
}

Prior Prior::laplace(double location, double scale) {
  Prior p;
  p.kind = PriorKind::Laplace;
  p.location = location;
  p.scale = scale;
  p.validate();
  return p;
}

Prior Prior::student_t(double df, double location, double scale) {
  Prior p;
  p.kind = PriorKind::StudentT;
  p.df = df;
  p.location = location;
  p.scale = scale;
  p.validate();
  return p;
}

Prior Prior::horseshoe(double location, double scale) {
  Prior p;
  p.kind = PriorKind::Horseshoe;
  p.location = location;
  p.scale = scale;
  p.validate();
  return p;
}

Prior Prior::mixture(std::vector<double> weights, std::vector<double> locations,
                     std::vector<double> scales) {
  Prior p;
  p.kind = PriorKind::GaussianMixture;
  p.weights = std::move(weights);
  p.locations = std::move(locations);
  p.scales = std::move(scales);
  p.validate();
  // normalise the weights exactly
  double sum = 0.0;
  for (double w : p.weights) sum += w;
  for (double& w : p.weights) w /= sum;
  return p;
}

Prior Prior::improper_tilted(double kappa, double location) {
  Prior p;
  p.kind = PriorKind::ImproperTilted;
  p.kappa = kappa;
  p.location = location;
  p.validate();
  return p;
}

void Prior::validate() const {
  require(std::isfinite(location), "prior: location must be finite");
  switch (kind) {
    case PriorKind::Gaussian:
    case PriorKind::Laplace:
    case PriorKind::Horseshoe:
      require(std::isfinite(scale) && scale > 0.0,
              "prior: scale must be positive");
      break;
    case PriorKind::StudentT:
      require(std::isfinite(scale) && scale > 0.0,
              "prior: scale must be positive");
      require(std::isfinite(df) && df > 0.0,
              "prior: degrees of freedom must be positive");
      break;
    case PriorKind::ImproperTilted:
      require(std::isfinite(kappa), "prior: tilt rate must be finite");
      break;
    case PriorKind::GaussianMixture: {
      require(!weights.empty(), "prior: mixture needs at least one component");
      require(weights.size() == locations.size() &&
                  weights.size() == scales.size(),
              "prior: mixture arrays must have equal length");
      double sum = 0.0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        require(std::isfinite(weights[i]) && weights[i] > 0.0,
                "prior: mixture weights must be positive");
        require(std::isfinite(locations[i]),
                "prior: mixture locations must be finite");
        require(std::isfinite(scales[i]) && scales[i] > 0.0,
                "prior: mixture scales must be positive");
        sum += weights[i];
      }
      require(std::abs(sum - 1.0) < 1e-6,
              "prior: mixture weights must sum to 1");
      break;
    }
  }
}

double log_density(const Prior& prior, double theta,
                   const GaussianModel& model) {
  switch (prior.kind) {
    case PriorKind::Gaussian: {
      const double z = (theta - prior.location) / prior.scale;
      return norm_log_pdf(z) - std::log(prior.scale);
    }
    case PriorKind::Laplace:
      return -std::abs(theta - prior.location) / prior.scale -
             std::log(2.0 * prior.scale);
    case PriorKind::StudentT: {
      const double z = (theta - prior.location) / prior.scale;
      return student_log_norm(prior.df) - std::log(prior.scale) -
             0.5 * (prior.df + 1.0) * std::log1p(z * z / prior.df);
    }
    case PriorKind::Horseshoe: {
      const double z = (theta - prior.location) / prior.scale;
      return horseshoe_std_log_density(z) - std::log(prior.scale);
    }
    case PriorKind::GaussianMixture: {
      std::vector<double> terms(prior.weights.size());
      for (std::size_t j = 0; j < prior.weights.size(); ++j) {
        const double z = (theta - prior.locations[j]) / prior.scales[j];
        terms[j] = std::log(prior.weights[j]) + norm_log_pdf(z) -
                   std::log(prior.scales[j]);
      }
      return log_sum_exp(terms);
    }
    case PriorKind::ImproperTilted: {
      const double sig = model.sigma;
      return -kLogSqrt2Pi - std::log(sig) -
             prior.kappa * (theta - prior.location) / sig;
    }
  }
  throw config_error("prior: unknown kind");
}

double density(const Prior& prior, double theta, const GaussianModel& model) {
  return std::exp(log_density(prior, theta, model));
}

double log_suff_pdf(const GaussianModel& model, const SufficientStat& stat,
                    double theta) {
  const double sn = model.sigma / std::sqrt(static_cast<double>(stat.n));
  const double z = (stat.ybar - theta) / sn;
  return -0.5 * z * z - kLogSqrt2Pi - std::log(sn);
}

MarginalEval marginal(const Prior& prior, const GaussianModel& model,
                      const SufficientStat& stat) {
  prior.validate();
  require(model.sigma > 0.0 && std::isfinite(model.sigma),
          "model: sigma must be positive");
  require(stat.n >= 1, "stat: n must be at least 1");
  require(std::isfinite(stat.ybar), "stat: ybar must be finite");

  const double n = static_cast<double>(stat.n);
  const double y = stat.ybar;
  MarginalEval out;
  switch (prior.kind) {
    case PriorKind::Gaussian: {
      const double v = model.sigma * model.sigma / n + prior.scale * prior.scale;
      const double d = y - prior.location;
      out.log_value = -0.5 * d * d / v - 0.5 * std::log(v) - kLogSqrt2Pi;
      out.dlog_dy = -d / v;
      out.closed_form = true;
      return out;
    }
    case PriorKind::GaussianMixture: {
      const std::size_t m = prior.weights.size();
      std::vector<double> lj(m);
      for (std::size_t j = 0; j < m; ++j) {
        const double v =
            model.sigma * model.sigma / n + prior.scales[j] * prior.scales[j];
        const double d = y - prior.locations[j];
        lj[j] = std::log(prior.weights[j]) - 0.5 * d * d / v -
                0.5 * std::log(v) - kLogSqrt2Pi;
      }
      const double lse = log_sum_exp(lj);
      double dsum = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double v =
            model.sigma * model.sigma / n + prior.scales[j] * prior.scales[j];
        dsum += std::exp(lj[j] - lse) * (-(y - prior.locations[j]) / v);
      }
      out.log_value = lse;
      out.dlog_dy = dsum;
      out.closed_form = true;
      return out;
    }
    case PriorKind::ImproperTilted: {
      const double sig = model.sigma;
      out.log_value = -kLogSqrt2Pi - std::log(sig) +
                      prior.kappa * (prior.location - y) / sig +
                      prior.kappa * prior.kappa / (2.0 * n);
      out.dlog_dy = -prior.kappa / sig;
      out.closed_form = true;
      return out;
    }
    default: {
      const QuadMarginalResult q = marginal_by_quadrature(prior, model, stat);
      out.log_value = q.log_value;
      out.dlog_dy = q.dlog_dy;
      out.closed_form = false;
      out.rel_error = q.rel_error;
      return out;
    }
  }
}

double posterior_mean(const Prior& prior, const GaussianModel& model,
                      const SufficientStat& stat) {
  const MarginalEval m = marginal(prior, model, stat);
  const double n = static_cast<double>(stat.n);
  return stat.ybar + (model.sigma * model.sigma / n) * m.dlog_dy;
}

TailProfile tail_profile(const Prior& prior, const GaussianModel& model) {
  prior.validate();
  const double sig = model.sigma;
  TailProfile tp;
  switch (prior.kind) {
    case PriorKind::Laplace:
      tp.kappa = sig / prior.scale;
      tp.beta = 0.0;
      tp.c1 = std::sqrt(2.0 * 3.14159265358979323846) * sig /
              (2.0 * prior.scale);
      tp.known = true;
      return tp;
    case PriorKind::StudentT: {
      const double nu = prior.df;
      const double s = prior.scale;
      const double log_a = student_log_norm(nu) - std::log(s);
      tp.kappa = 0.0;
      tp.beta = nu + 1.0;
      tp.c1 = std::sqrt(2.0 * 3.14159265358979323846) * sig *
              std::exp(log_a +
                       (nu + 1.0) * std::log(std::sqrt(nu) * s / sig));
      tp.known = true;
      return tp;
    }
    case PriorKind::Horseshoe:
      // Polynomial order is known; the leading constant is not exposed.
      tp.kappa = 0.0;
      tp.beta = 2.0;
      tp.known = false;
      return tp;
    case PriorKind::ImproperTilted:
      tp.kappa = std::abs(prior.kappa);
      tp.beta = 0.0;
      tp.c1 = 1.0;
      tp.known = true;
      return tp;
    case PriorKind::Gaussian:
    case PriorKind::GaussianMixture:
      // Gaussian-type tails fall outside the exponential/polynomial template.
      tp.known = false;
      return tp;
  }
  return tp;
}

double conflict_index(const Prior& prior, const GaussianModel& model,
                      const SufficientStat& stat) {
  prior.validate();
  require(prior.proper(), "conflict_index: prior must be proper");
  require(stat.n >= 1, "stat: n must be at least 1");
  const double n = static_cast<double>(stat.n);
  const double y = stat.ybar;

  if (prior.kind == PriorKind::Gaussian) {
    const double v = model.sigma * model.sigma / n + prior.scale * prior.scale;
    const double d = std::abs(y - prior.location) / std::sqrt(v);
    return std::erfc(d / 1.4142135623730950488);
  }

  if (prior.kind == PriorKind::GaussianMixture) {
    // General level-set computation against the closed-form marginal.
    const std::size_t m = prior.weights.size();
    std::vector<double> sds(m);
    double lo = kInf, hi = -kInf, sdmax = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      sds[j] = std::sqrt(model.sigma * model.sigma / n +
                         prior.scales[j] * prior.scales[j]);
      lo = std::min(lo, prior.locations[j]);
      hi = std::max(hi, prior.locations[j]);
      sdmax = std::max(sdmax, sds[j]);
    }
    lo = std::min(lo - 12.0 * sdmax, y - 2.0 * sdmax);
    hi = std::max(hi + 12.0 * sdmax, y + 2.0 * sdmax);
    const double level = marginal(prior, model, stat).log_value;
    auto excess = [&](double t) {
      return marginal(prior, model, SufficientStat{stat.n, t}).log_value -
             level;
    };
    const int grid_n = 8000;
    std::vector<double> cross;
    double prev_t = lo, prev_v = excess(lo);
    for (int i = 1; i <= grid_n; ++i) {
      const double t = lo + (hi - lo) * static_cast<double>(i) / grid_n;
      const double v = excess(t);
      if ((prev_v > 0.0) != (v > 0.0)) {
        Tolerance rt;
        rt.abs_tol = 1e-11;
        rt.rel_tol = 1e-11;
        cross.push_back(
            find_root_monotone(excess, Bracket{prev_t, t}, rt));
      }
      prev_t = t;
      prev_v = v;
    }
    auto mix_cdf = [&](double t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        acc += prior.weights[j] * norm_cdf((t - prior.locations[j]) / sds[j]);
      }
      return acc;
    };
    double above = 0.0;
    std::sort(cross.begin(), cross.end());
    std::vector<double> edges = {lo};
    edges.insert(edges.end(), cross.begin(), cross.end());
    edges.push_back(hi);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      const double mid = 0.5 * (edges[i] + edges[i + 1]);
      if (excess(mid) > 0.0) above += mix_cdf(edges[i + 1]) - mix_cdf(edges[i]);
    }
    return std::min(1.0, std::max(0.0, 1.0 - above));
  }

  // Laplace / Student-t / horseshoe: the marginal is symmetric about the
  // prior location and unimodal, so the sub-level set is two equal tails.
  const double d = std::abs(y - prior.location);
  if (d == 0.0) return 1.0;
  const double a = prior.location + d;
  const double sn = model.sigma / std::sqrt(n);
  auto mdens = [&](double t) {
    return std::exp(marginal(prior, model, SufficientStat{stat.n, t}).log_value);
  };
  Tolerance qt;
  qt.abs_tol = 1e-11;
  qt.rel_tol = 1e-8;
  qt.max_iter = 300;
  const QuadResult tail = integrate_ray(
      mdens, a, qt,
      {a + sn, a + 3.0 * sn, a + prior.scale, a + 3.0 * prior.scale,
       a + 10.0 * (sn + prior.scale)});
  return std::min(1.0, 2.0 * tail.value);
}

double log_lr(const Prior& prior, const GaussianModel& model,
              const SufficientStat& stat, double theta0) {
  require(std::isfinite(theta0), "log_lr: theta0 must be finite");
  if (prior.kind == PriorKind::ImproperTilted) {
    // Tilt anchored at the tested point.
    const double n = static_cast<double>(stat.n);
    const double sig = model.sigma;
    const double d = stat.ybar - sig * prior.kappa / n - theta0;
    return -0.5 * std::log(n) + n * d * d / (2.0 * sig * sig);
  }
  return marginal(prior, model, stat).log_value -
         log_suff_pdf(model, stat, theta0);
}

Prior prior_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw config_error("prior json: expected an object");
  if (!j.contains("kind") || !j.at("kind").is_string()) {
    throw config_error("prior json: missing string field 'kind'");
  }
  std::string raw = j.at("kind").get<std::string>();
  std::string norm;
  for (char c : raw) {
    if (c == '_' || c == '-' || c == ' ') continue;
    norm.push_back(static_cast<char>(std::tolower(c)));
  }
  auto get_num = [&](const char* key, double fallback,
                     bool required) -> double {
    if (!j.contains(key)) {
      if (required) {
        throw config_error(std::string("prior json: missing field '") + key +
                           "'");
      }
      return fallback;
    }
    if (!j.at(key).is_number()) {
      throw config_error(std::string("prior json: field '") + key +
                         "' must be a number");
    }
    return j.at(key).get<double>();
  };

  Prior p;
  if (norm == "gaussian" || norm == "normal") {
    p = Prior::gaussian(get_num("location", 0.0, false),
                        get_num("scale", 1.0, false));
  } else if (norm == "laplace") {
    p = Prior::laplace(get_num("location", 0.0, false),
                       get_num("scale", 1.0, false));
  } else if (norm == "studentt") {
    p = Prior::student_t(get_num("df", 0.0, true),
                         get_num("location", 0.0, false),
                         get_num("scale", 1.0, false));
  } else if (norm == "horseshoe") {
    p = Prior::horseshoe(get_num("location", 0.0, false),
                         get_num("scale", 1.0, false));
  } else if (norm == "gaussianmixture" || norm == "mixture") {
    for (const char* key : {"weights", "locations", "scales"}) {
      if (!j.contains(key) || !j.at(key).is_array()) {
        throw config_error(std::string("prior json: missing array field '") +
                           key + "'");
      }
    }
    p = Prior::mixture(j.at("weights").get<std::vector<double>>(),
                       j.at("locations").get<std::vector<double>>(),
                       j.at("scales").get<std::vector<double>>());
  } else if (norm == "impropertilted" || norm == "improper") {
    p = Prior::improper_tilted(get_num("kappa", 0.0, true),
                               get_num("location", 0.0, false));
  } else {
    throw config_error("prior json: unknown kind '" + raw + "'");
  }
  return p;
}

nlohmann::json prior_to_json(const Prior& prior) {
  nlohmann::json j;
  j["kind"] = kind_name(prior.kind);
  switch (prior.kind) {
    case PriorKind::GaussianMixture:
      j["weights"] = prior.weights;
      j["locations"] = prior.locations;
      j["scales"] = prior.scales;
      break;
    case PriorKind::ImproperTilted:
      j["kappa"] = prior.kappa;
      j["location"] = prior.location;
      break;
    case PriorKind::StudentT:
      j["df"] = prior.df;
      j["location"] = prior.location;
      j["scale"] = prior.scale;
      break;
    default:
      j["location"] = prior.location;
      j["scale"] = prior.scale;
      break;
  }
  return j;
}

}  // namespace mixcs
