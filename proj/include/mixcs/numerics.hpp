#pragma once

// Scalar numerical kernels: normal distribution functions, scaled
// complementary error function, exponential integral products, adaptive
// Gauss-Kronrod quadrature on intervals and on the whole real line,
// a bracketed root finder for monotone crossings, Monte Carlo quantiles,
// and a bit-reproducible random number stream.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mixcs/errors.hpp"

namespace mixcs {

// Shared convergence policy. abs_tol/rel_tol gate termination; max_iter
// bounds refinement steps (quadrature segment splits, root-finder steps).
struct Tolerance {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_iter = 200;
};

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;   // estimated absolute error
  long evals = 0;       // integrand evaluations used
};

// ---------------------------------------------------------------------------
// Special functions (implemented in numerics.cpp)
// ---------------------------------------------------------------------------

double norm_pdf(double z);
double norm_log_pdf(double z);
double norm_cdf(double z);
// Inverse of norm_cdf on (0,1); monotone, accurate to ~1e-14 after polish.
double norm_quantile(double p);

// exp(x^2) * erfc(x); avoids underflow of erfc for large positive x.
// For x < -26.6 the result overflows to +inf.
double erfcx(double x);

// exp(a) * E1(a) for a > 0, where E1 is the exponential integral.
// Well-conditioned for all positive a (value ~ 1/a as a -> inf).
double exp_e1(double a);

// ---------------------------------------------------------------------------
// Random numbers (bit-reproducible across platforms)
// ---------------------------------------------------------------------------

// SplitMix64 step: advances state and returns the next 64-bit value.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic per-stream seed derivation (master seed + stream index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master + 0x9E3779B97F4A7C15ull * (stream + 1);
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

// mt19937_64 core with inverse-CDF normals. std::mt19937_64 output is pinned
// by the standard, and the uniform/normal maps below are explicit arithmetic,
// so streams are identical across compilers and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on (0,1), never exactly 0 or 1.
  double uniform01() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1p-53;
  }

  double normal() { return norm_quantile(uniform01()); }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod quadrature
// ---------------------------------------------------------------------------

namespace detail {

// 15-point Kronrod extension of 7-point Gauss on [-1,1].
// Entry 0 is the centre node; remaining entries are +/- pairs.
// wg is zero on Kronrod-only nodes.
struct Gk15Node {
  double x, wg, wk;
};
inline constexpr Gk15Node kGk15[8] = {
    {0.0000000000000000e+00, 4.1795918367346939e-01, 2.0948214108472783e-01},
    {2.0778495500789847e-01, 0.0000000000000000e+00, 2.0443294007529889e-01},
    {4.0584515137739717e-01, 3.8183005050511894e-01, 1.9035057806478541e-01},
    {5.8608723546769113e-01, 0.0000000000000000e+00, 1.6900472663926790e-01},
    {7.4153118559939444e-01, 2.7970539148927667e-01, 1.4065325971552592e-01},
    {8.6486442335976907e-01, 0.0000000000000000e+00, 1.0479001032225018e-01},
    {9.4910791234275852e-01, 1.2948496616886969e-01, 6.3092092629978553e-02},
    {9.9145537112081264e-01, 0.0000000000000000e+00, 2.2935322010529225e-02},
};

struct GkEstimate {
  double value = 0.0;   // Kronrod value
  double error = 0.0;   // QUADPACK-style error estimate
  double resabs = 0.0;  // integral of |f|
};

// One GK15 panel over [a,b].
template <class F>
GkEstimate gk15_panel(F&& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double fv[15];
  const double fc = f(c);
  double resg = fc * kGk15[0].wg;
  double resk = fc * kGk15[0].wk;
  double resabs = std::abs(fc) * kGk15[0].wk;
  fv[0] = fc;
  for (int j = 1; j < 8; ++j) {
    const double dx = h * kGk15[j].x;
    const double f1 = f(c - dx);
    const double f2 = f(c + dx);
    fv[2 * j - 1] = f1;
    fv[2 * j] = f2;
    resg += kGk15[j].wg * (f1 + f2);
    resk += kGk15[j].wk * (f1 + f2);
    resabs += kGk15[j].wk * (std::abs(f1) + std::abs(f2));
  }
  const double reskh = resk * 0.5;
  double resasc = kGk15[0].wk * std::abs(fc - reskh);
  for (int j = 1; j < 8; ++j) {
    resasc += kGk15[j].wk *
              (std::abs(fv[2 * j - 1] - reskh) + std::abs(fv[2 * j] - reskh));
  }
  const double ah = std::abs(h);
  GkEstimate out;
  out.value = resk * h;
  out.resabs = resabs * ah;
  resasc *= ah;
  double err = std::abs((resk - resg) * h);
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  const double eps50 = 50.0 * std::numeric_limits<double>::epsilon();
  if (out.resabs > std::numeric_limits<double>::min() / eps50) {
    err = std::max(err, eps50 * out.resabs);
  }
  out.error = err;
  if (!std::isfinite(out.value)) {
    throw numeric_error("quadrature: integrand produced a non-finite panel");
  }
  return out;
}

struct QuadSegment {
  double a, b;        // segment in its own coordinate (t in [0,1] for tails)
  double value, error;
  int map;            // 0 direct, 1 upper tail, 2 lower tail
  bool operator<(const QuadSegment& o) const { return error < o.error; }
};

}  // namespace detail

// Adaptive GK15 over the finite interval [a,b].
template <class F>
QuadResult integrate_interval(F&& f, double a, double b, Tolerance tol = {}) {
  if (!(std::isfinite(a) && std::isfinite(b))) {
    throw config_error("integrate_interval: endpoints must be finite");
  }
  QuadResult res;
  if (a == b) return res;
  std::priority_queue<detail::QuadSegment> heap;
  auto panel = [&](double lo, double hi) {
    detail::GkEstimate e = detail::gk15_panel(f, lo, hi);
    res.evals += 15;
    return detail::QuadSegment{lo, hi, e.value, e.error, 0};
  };
  detail::QuadSegment s0 = panel(a, b);
  double total = s0.value, err = s0.error;
  heap.push(s0);
  for (int it = 0; it < tol.max_iter; ++it) {
    if (err <= std::max(tol.abs_tol, tol.rel_tol * std::abs(total))) break;
    detail::QuadSegment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {  // cannot split further
      heap.push(worst);
      break;
    }
    detail::QuadSegment l = panel(worst.a, mid);
    detail::QuadSegment r = panel(mid, worst.b);
    total += l.value + r.value - worst.value;
    err += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
  }
  if (!(err <= std::max(tol.abs_tol, tol.rel_tol * std::abs(total))) &&
      !(err <= 1e-6 * std::abs(total))) {
    throw numeric_error("integrate_interval: failed to converge");
  }
  res.value = total;
  res.error = err;
  return res;
}

// Adaptive GK15 over the whole real line. Finite breakpoints partition the
// line; tails are mapped to [0,1] via y = anchor +/- t/(1-t). Breakpoints
// should include every kink/peak location the caller knows about.
template <class F>
QuadResult integrate_line(F&& f, Tolerance tol = {},
                          std::vector<double> breakpoints = {}) {
  std::vector<double> bp;
  for (double v : breakpoints) {
    if (std::isfinite(v)) bp.push_back(v);
  }
  if (bp.empty()) bp = {-8.0, -1.0, 0.0, 1.0, 8.0};
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  const double lo_anchor = bp.front();
  const double hi_anchor = bp.back();
  auto f_up = [&](double t) {
    const double om = 1.0 - t;
    const double y = hi_anchor + t / om;
    return f(y) / (om * om);
  };
  auto f_dn = [&](double t) {
    const double om = 1.0 - t;
    const double y = lo_anchor - t / om;
    return f(y) / (om * om);
  };

  QuadResult res;
  std::priority_queue<detail::QuadSegment> heap;
  auto panel = [&](double lo, double hi, int map) {
    detail::GkEstimate e;
    switch (map) {
      case 0: e = detail::gk15_panel(f, lo, hi); break;
      case 1: e = detail::gk15_panel(f_up, lo, hi); break;
      default: e = detail::gk15_panel(f_dn, lo, hi); break;
    }
    res.evals += 15;
    return detail::QuadSegment{lo, hi, e.value, e.error, map};
  };

  double total = 0.0, err = 0.0;
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    detail::QuadSegment s = panel(bp[i], bp[i + 1], 0);
    total += s.value;
    err += s.error;
    heap.push(s);
  }
  for (int map : {1, 2}) {
    detail::QuadSegment s = panel(0.0, 1.0, map);
    total += s.value;
    err += s.error;
    heap.push(s);
  }
  for (int it = 0; it < tol.max_iter; ++it) {
    if (err <= std::max(tol.abs_tol, tol.rel_tol * std::abs(total))) break;
    detail::QuadSegment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push(worst);
      break;
    }
    detail::QuadSegment l = panel(worst.a, mid, worst.map);
    detail::QuadSegment r = panel(mid, worst.b, worst.map);
    total += l.value + r.value - worst.value;
    err += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
  }
  if (!(err <= std::max(tol.abs_tol, tol.rel_tol * std::abs(total))) &&
      !(err <= 1e-6 * std::abs(total))) {
    throw numeric_error("integrate_line: failed to converge");
  }
  res.value = total;
  res.error = err;
  return res;
}

// Adaptive GK15 over the ray [a, +inf). Finite breakpoints beyond `a`
// partition the finite part; the tail beyond the last one is mapped to [0,1].
template <class F>
QuadResult integrate_ray(F&& f, double a, Tolerance tol = {},
                         std::vector<double> breakpoints = {}) {
  if (!std::isfinite(a)) {
    throw config_error("integrate_ray: start point must be finite");
  }
  std::vector<double> bp = {a};
  for (double v : breakpoints) {
    if (std::isfinite(v) && v > a) bp.push_back(v);
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  if (bp.size() == 1) bp.push_back(a + 1.0);

  const double hi_anchor = bp.back();
  auto f_up = [&](double t) {
    const double om = 1.0 - t;
    const double y = hi_anchor + t / om;
    return f(y) / (om * om);
  };

  QuadResult res;
  std::priority_queue<detail::QuadSegment> heap;
  auto panel = [&](double lo, double hi, int map) {
    detail::GkEstimate e = map == 0 ? detail::gk15_panel(f, lo, hi)
                                    : detail::gk15_panel(f_up, lo, hi);
    res.evals += 15;
    return detail::QuadSegment{lo, hi, e.value, e.error, map};
  };
  double total = 0.0, err = 0.0;
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    detail::QuadSegment s = panel(bp[i], bp[i + 1], 0);
    total += s.value;
    err += s.error;
    heap.push(s);
  }
  {
    detail::QuadSegment s = panel(0.0, 1.0, 1);
    total += s.value;
    err += s.error;
    heap.push(s);
  }
  for (int it = 0; it < tol.max_iter; ++it) {
    if (err <= std::max(tol.abs_tol, tol.rel_tol * std::abs(total))) break;
    detail::QuadSegment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push(worst);
      break;
    }
    detail::QuadSegment l = panel(worst.a, mid, worst.map);
    detail::QuadSegment r = panel(mid, worst.b, worst.map);
    total += l.value + r.value - worst.value;
    err += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
  }
  if (!(err <= std::max(tol.abs_tol, tol.rel_tol * std::abs(total))) &&
      !(err <= 1e-6 * std::abs(total))) {
    throw numeric_error("integrate_ray: failed to converge");
  }
  res.value = total;
  res.error = err;
  return res;
}

// ---------------------------------------------------------------------------
// Root finding and 1-D minimisation
// ---------------------------------------------------------------------------

// Chandrupatla's bracketed root finder: inverse quadratic interpolation when
// well conditioned, bisection otherwise. The iterate never leaves the
// bracket. Requires f(lo), f(hi) with opposite signs.
template <class F>
double find_root_monotone(F&& f, Bracket br, Tolerance tol = {}) {
  double x0 = br.lo, x1 = br.hi;
  if (!(std::isfinite(x0) && std::isfinite(x1)) || x0 == x1) {
    throw numeric_error("find_root_monotone: invalid bracket endpoints");
  }
  double f0 = f(x0), f1 = f(x1);
  if (f0 == 0.0) return x0;
  if (f1 == 0.0) return x1;
  if (std::signbit(f0) == std::signbit(f1) || !std::isfinite(f0) ||
      !std::isfinite(f1)) {
    throw numeric_error("find_root_monotone: bracket does not straddle root");
  }
  // Orient so that the root lies between x0 and x1 with x2 the previous x1.
  double x2 = x0, f2 = f0;
  double t = 0.5;
  for (int it = 0; it < tol.max_iter; ++it) {
    const double x = x0 + t * (x1 - x0);
    const double fx = f(x);
    if (fx == 0.0) return x;
    if (!std::isfinite(fx)) {
      throw numeric_error("find_root_monotone: non-finite function value");
    }
    if (std::signbit(fx) == std::signbit(f0)) {
      x2 = x0; f2 = f0;
      x0 = x;  f0 = fx;
    } else {
      x2 = x1; f2 = f1;
      x1 = x0; f1 = f0;
      x0 = x;  f0 = fx;
    }
    const bool zero_smaller = std::abs(f0) < std::abs(f1);
    const double xm = zero_smaller ? x0 : x1;
    const double tol_x =
        2.0 * tol.rel_tol * std::abs(xm) + 0.5 * tol.abs_tol;
    const double dx = x1 - x0;
    const double tlim = std::abs(tol_x / dx);
    if (tlim > 0.5 || f0 == 0.0) return xm;
    // Inverse quadratic step if the points are well arranged for it.
    const double xi = (x0 - x1) / (x2 - x1);
    const double phi = (f0 - f1) / (f2 - f1);
    if (phi * phi < xi && (1.0 - phi) * (1.0 - phi) < 1.0 - xi) {
      t = (f0 / (f1 - f0)) * (f2 / (f1 - f2)) +
          ((x2 - x0) / (x1 - x0)) * (f0 / (f2 - f0)) * (f1 / (f2 - f1));
    } else {
      t = 0.5;
    }
    t = std::min(1.0 - tlim, std::max(tlim, t));
  }
  return std::abs(f0) < std::abs(f1) ? x0 : x1;
}

// Golden-section minimisation of a unimodal function on [a,b].
template <class F>
double golden_min(F&& f, double a, double b, int iters = 160) {
  constexpr double kInv = 0.6180339887498949;  // (sqrt(5)-1)/2
  double x1 = b - kInv * (b - a);
  double x2 = a + kInv * (b - a);
  double fx1 = f(x1), fx2 = f(x2);
  for (int i = 0; i < iters && (b - a) > 1e-14 * (1.0 + std::abs(a)); ++i) {
    if (fx1 < fx2) {
      b = x2; x2 = x1; fx2 = fx1;
      x1 = b - kInv * (b - a);
      fx1 = f(x1);
    } else {
      a = x1; x1 = x2; fx1 = fx2;
      x2 = a + kInv * (b - a);
      fx2 = f(x2);
    }
  }
  return fx1 < fx2 ? x1 : x2;
}

// ---------------------------------------------------------------------------
// Monte Carlo quantile
// ---------------------------------------------------------------------------

// Empirical level-quantile of n_samples draws from `sampler`. Uses the
// ceil(level*n)-th order statistic; ties resolve to the same value for any
// stable ordering, so the result is deterministic given the sampler stream.
template <class Sampler>
double mc_quantile(Sampler&& sampler, double level, std::size_t n_samples) {
  if (!(level > 0.0 && level < 1.0)) {
    throw config_error("mc_quantile: level must lie in (0,1)");
  }
  if (n_samples < 100) {
    throw config_error("mc_quantile: need at least 100 samples");
  }
  std::vector<double> draws(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) draws[i] = sampler();
  const double kd = std::ceil(level * static_cast<double>(n_samples));
  std::size_t k = static_cast<std::size_t>(kd);
  k = std::min(std::max<std::size_t>(k, 1), n_samples) - 1;
  std::nth_element(draws.begin(), draws.begin() + static_cast<long>(k),
                   draws.end());
  return draws[k];
}

}  // namespace mixcs
