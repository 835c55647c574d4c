#include "mixcs/numerics.hpp"

#include <cmath>
#include <limits>

namespace mixcs {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kSqrtPi = 1.7724538509055160273;
constexpr double kSqrt2Pi = 2.5066282746310005024;
constexpr double kEulerGamma = 0.57721566490153286061;

// Rational initial guess for the normal quantile (Acklam's approximation,
// relative error ~1e-9 over the full open unit interval), then one Halley
// step against norm_cdf to polish to near machine precision.
double norm_quantile_guess(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
            a[5]) *
           q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r +
            1.0);
  }
  const double q = std::sqrt(-2.0 * std::log1p(-p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
           c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace

double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double norm_log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double norm_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw config_error("norm_quantile: p must lie in (0,1)");
  }
  double x = norm_quantile_guess(p);
  if (std::abs(x) < 37.0) {
    // Halley refinement: e is the cdf residual, u the Newton step.
    const double e = norm_cdf(x) - p;
    const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double erfcx(double x) {
  if (std::isnan(x)) return x;
  if (x >= 25.0) {
    // Asymptotic expansion: erfcx(x) ~ (1/(x sqrt(pi))) sum (-1)^k (2k-1)!!/(2x^2)^k
    const double ix2 = 0.5 / (x * x);
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= 12; ++k) {
      term *= -(2.0 * k - 1.0) * ix2;
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum / (x * kSqrtPi);
  }
  if (x >= 0.0) {
    return std::exp(x * x) * std::erfc(x);
  }
  // Reflection; overflows (correctly, to +inf) once x < about -26.6.
  return 2.0 * std::exp(x * x) - erfcx(-x);
}

double exp_e1(double a) {
  if (std::isnan(a)) return a;
  if (a < 0.0) throw config_error("exp_e1: argument must be non-negative");
  if (a == 0.0) return std::numeric_limits<double>::infinity();
  if (a <= 1.0) {
    // Power series for E1, then scale by exp(a).
    double sum = 0.0, term = 1.0;
    for (int k = 1; k <= 30; ++k) {
      term *= a / k;
      const double add = ((k & 1) ? term : -term) / k;
      sum += add;
      if (std::abs(add) < 1e-18) break;
    }
    const double e1 = -kEulerGamma - std::log(a) + sum;
    return std::exp(a) * e1;
  }
  // Stieltjes continued fraction for exp(a) E1(a) =
  //   1/(a+1 - 1/(a+3 - 4/(a+5 - 9/(a+7 - ...)))),
  // evaluated with the modified Lentz algorithm.
  const double kFpMin = 1e-300;
  double bb = a + 1.0;
  double cc = 1.0 / kFpMin;
  double dd = 1.0 / bb;
  double h = dd;
  for (int i = 1; i <= 400; ++i) {
    const double an = -static_cast<double>(i) * static_cast<double>(i);
    bb += 2.0;
    dd = an * dd + bb;
    if (std::abs(dd) < kFpMin) dd = kFpMin;
    cc = bb + an / cc;
    if (std::abs(cc) < kFpMin) cc = kFpMin;
    dd = 1.0 / dd;
    const double del = dd * cc;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) return h;
  }
  throw numeric_error("exp_e1: continued fraction failed to converge");
}

}  // namespace mixcs
