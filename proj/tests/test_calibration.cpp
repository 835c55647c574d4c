#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "mixcs/calibration.hpp"

using namespace mixcs;

namespace {

bool close(double got, double want, double tol) {
  return std::isfinite(got) && std::abs(got - want) <= tol;
}

}  // namespace

TEST_CASE("g_tilde matches frozen high-precision values") {
  struct Row {
    double kappa, x, want;
  };
  // Reference values computed at 40-digit precision from the closed form and
  // cross-checked against the defining integral.
  const Row rows[] = {
      {0.0, 2.0, 0.708750530799337588},
      {0.0, 10.0, 0.203099005345177542},
      {0.0, 1e3, 0.00316733934690427921},
      {0.0, 1e6, 4.34090296956111553e-6},
      {0.5, 2.0, 0.734691604069511009},
      {0.5, 10.0, 0.235772011671644831},
      {0.5, 1e3, 0.00506666358332861443},
      {0.5, 1e6, 1.06902093903774903e-5},
      {2.0, 2.0, 0.93630665133162058},
      {2.0, 10.0, 0.639311542327029667},
      {2.0, 1e3, 0.0886811658786026962},
      {2.0, 1e6, 0.00155715700303413386},
  };
  for (const Row& r : rows) {
    const double got = g_tilde(r.kappa, r.x);
    CHECK(close(got, r.want, 1e-12 * r.want + 1e-16));
  }
  CHECK(g_tilde(0.0, 1.0) == 1.0);
  CHECK(g_tilde(0.5, 1.0) == 1.0);
  CHECK(g_tilde(2.0, 1.0) == 1.0);
}

TEST_CASE("g_tilde agrees with its defining integral") {
  for (double kappa : {0.0, 0.5, 2.0, -1.5}) {
    for (double x : {1.0, 2.0, 10.0, 1e3, 1e6}) {
      const double closed = g_tilde(kappa, x);
      const double quad = g_tilde_quadrature(kappa, x);
      CHECK(close(closed, quad, 2e-8));
    }
  }
}

TEST_CASE("g_tilde edge cases, symmetry, and monotonicity") {
  CHECK_THROWS_AS(g_tilde(0.5, 0.999), config_error);
  CHECK_THROWS_AS(g_tilde(0.5, -2.0), config_error);
  CHECK_THROWS_AS(g_tilde_from_s(0.0, -0.1), config_error);
  CHECK_THROWS_AS(g_tilde_from_s(std::nan(""), 1.0), config_error);

  // Sign of kappa is irrelevant.
  CHECK(g_tilde(-2.0, 10.0) == g_tilde(2.0, 10.0));
  CHECK(g_tilde(-0.5, 1e3) == g_tilde(0.5, 1e3));

  // Continuous at kappa -> 0.
  CHECK(close(g_tilde(1e-12, 10.0), g_tilde(0.0, 10.0), 1e-12));

  // Strictly decreasing in the threshold.
  double prev = 2.0;
  for (double x : {1.0, 1.5, 2.0, 5.0, 10.0, 100.0, 1e4}) {
    const double v = g_tilde(0.5, x);
    CHECK(v < prev);
    prev = v;
  }

  // Very large kappa*s uses the one-sided branch and stays finite.
  const double far = g_tilde_from_s(20.0, 25.0);
  CHECK(std::isfinite(far));
  CHECK(far > 0.0);
  CHECK(far < 1.0);
}

TEST_CASE("g_tilde_inv round trips and frozen inverses") {
  // Flat-prior thresholds at standard levels (kappa = 0).
  struct Row {
    double alpha, want;
  };
  const Row robbins[] = {
      {0.01, 3.36821417521872738},
      {0.05, 2.79548348291510747},
      {0.1, 2.50027771080940591},
      {0.25, 2.02690526064547892},
      {0.5, 1.53817225445505233},
  };
  for (const Row& r : robbins) {
    CHECK(close(g_tilde_inv_s(0.0, r.alpha), r.want, 1e-12));
  }
  CHECK(close(g_tilde_inv_s(0.5, 0.1), 2.60125562699490867, 1e-12));
  CHECK(close(g_tilde_inv_s(0.5, 0.05), 2.90704860905427753, 1e-12));
  CHECK(close(g_tilde_inv_s(2.0, 0.1), 3.65324306708513802, 1e-12));
  CHECK(close(g_tilde_inv_s(2.0, 0.05), 3.9976490124508539, 1e-12));

  for (double kappa : {0.0, 0.7, 3.0}) {
    for (double alpha : {0.01, 0.1, 0.5, 0.9}) {
      const double s = g_tilde_inv_s(kappa, alpha);
      CHECK(close(g_tilde_from_s(kappa, s), alpha, 1e-12));
      const double x = g_tilde_inv(kappa, alpha);
      CHECK(close(g_tilde(kappa, x), alpha, 1e-10));
    }
  }
  CHECK(g_tilde_inv_s(0.3, 1.0) == 0.0);
  CHECK(g_tilde_inv(0.3, 1.0) == 1.0);
  CHECK_THROWS_AS(g_tilde_inv(0.0, 0.0), config_error);
  CHECK_THROWS_AS(g_tilde_inv(0.0, 1.2), config_error);
  CHECK_THROWS_AS(g_tilde_inv_s(0.0, std::nan("")), config_error);
}

TEST_CASE("calibration g matches frozen dual-route values") {
  const GaussianModel m{1.0};

  SUBCASE("gaussian prior, closed-form marginal") {
    const Prior pr = Prior::gaussian(0.0, 1.0);
    const Calibration cal0(pr, m, 0.0);
    CHECK(close(cal0.g(std::log(2.0)), 0.46676931203996699, 5e-9));
    CHECK(close(cal0.g(std::log(10.0)), 0.098998333298297895, 5e-9));
    CHECK(close(cal0.g(std::log(100.0)), 0.0099920703631692937, 5e-9));
    const Calibration cal2(pr, m, 2.0);
    CHECK(close(cal2.g(std::log(10.0)), 0.069119316401348773, 5e-9));
  }

  SUBCASE("laplace prior, interpolated and direct paths") {
    const Prior pr = Prior::laplace(0.0, 1.0);
    const Calibration cal0(pr, m, 0.0);
    CHECK(close(cal0.g(std::log(2.0)), 0.43697014597316863, 5e-7));
    CHECK(close(cal0.g(std::log(50.0)), 0.019400329979949678, 5e-7));
    const Calibration cal3(pr, m, 3.0);
    CHECK(close(cal3.g(std::log(2.0)), 0.14558718109939149, 5e-7));
    CHECK(close(cal3.g(std::log(50.0)), 0.011320921427653011, 5e-7));

    CalibOptions direct;
    direct.use_curve = false;
    const Calibration cal3d(pr, m, 3.0, direct);
    CHECK(close(cal3d.g(std::log(2.0)), 0.14558718109939149, 2e-8));
    CHECK(close(cal3d.g(std::log(50.0)), 0.011320921427653011, 2e-8));
  }

  SUBCASE("student-t prior") {
    const Prior pr = Prior::student_t(5.0, 0.0, 1.0);
    const Calibration cal(pr, m, 0.0);
    CHECK(close(cal.g(std::log(10.0)), 0.0962769310893583, 5e-7));
    CalibOptions direct;
    direct.use_curve = false;
    const Calibration cald(pr, m, 0.0, direct);
    CHECK(close(cald.g(std::log(10.0)), 0.0962769310893583, 2e-8));
  }

  SUBCASE("horseshoe prior") {
    const Prior pr = Prior::horseshoe(0.0, 1.0);
    const Calibration cal(pr, m, 0.0);
    CHECK(close(cal.g(std::log(10.0)), 0.0847940159605644, 5e-7));
    CalibOptions direct;
    direct.use_curve = false;
    const Calibration cald(pr, m, 0.0, direct);
    CHECK(close(cald.g(std::log(10.0)), 0.0847940159605644, 5e-8));
  }

  SUBCASE("two-component mixture") {
    const Prior pr =
        Prior::mixture({0.5, 0.5}, {-2.0, 2.0}, {0.5, 0.5});
    const Calibration cal(pr, m, 0.0);
    CHECK(close(cal.g(std::log(10.0)), 0.07962764815433882, 5e-9));
  }
}

TEST_CASE("calibration g saturates below c_star and decays like 1/c above") {
  const GaussianModel m{1.0};
  const Prior pr = Prior::gaussian(0.0, 1.0);
  const Calibration cal(pr, m, 0.0);

  // At theta0 = 0 the ratio minimum is -log(2)/2.
  CHECK(close(cal.log_c_star(), -0.5 * std::log(2.0), 1e-10));
  CHECK(cal.g(cal.log_c_star() - 0.5) == 1.0);
  CHECK(cal.g(cal.log_c_star()) > 1.0 - 1e-9);

  double prev = 2.0;
  for (double lc : {-1.0, 0.0, std::log(2.0), std::log(10.0), 3.0, 10.0}) {
    const double v = cal.g(lc);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }

  // Far above every crossing the clipped mass is exactly the predictive
  // mass over c.
  const double far = cal.g(50.0);
  CHECK(close(far / std::exp(-50.0), 1.0, 1e-6));
}

TEST_CASE("calibration c_star matches frozen values") {
  const GaussianModel m{1.0};

  const Calibration g3(Prior::gaussian(0.0, 1.0), m, 3.0);
  CHECK(close(g3.log_c_star(), -4.8465735902799727, 1e-9));

  // Minimiser sits at 2*theta0, far outside the likelihood window.
  const Calibration g250(Prior::gaussian(0.0, 1.0), m, 250.0);
  CHECK(close(g250.log_c_star(), -31250.34657359028, 1e-8));

  const Calibration l3(Prior::laplace(0.0, 1.0), m, 3.0);
  CHECK(close(l3.log_c_star(), -2.7747056416476453, 2e-6));
  CalibOptions direct;
  direct.use_curve = false;
  const Calibration l3d(Prior::laplace(0.0, 1.0), m, 3.0, direct);
  CHECK(close(l3d.log_c_star(), -2.7747056416476453, 1e-8));

  const Calibration h10(Prior::horseshoe(0.0, 1.0), m, 10.0);
  CHECK(close(h10.log_c_star(), -5.06650556031819, 5e-6));

  const Calibration imp(Prior::improper_tilted(1.2, 4.0), m, 7.0);
  CHECK(imp.log_c_star() == 0.0);
}

TEST_CASE("calibration c_star is self-consistent for awkward mixtures") {
  // A narrow component far from theta0 pushes stationary points far out;
  // the searched minimum must still satisfy the defining inequality on a
  // wide probe grid.
  const GaussianModel m{1.0};
  const Prior pr = Prior::mixture({0.6, 0.4}, {0.0, 5.0}, {0.01, 1.0});
  const Calibration cal(pr, m, 3.0);
  const double lcs = cal.log_c_star();
  CHECK(std::isfinite(lcs));
  for (double y = -40.0; y <= 40.0; y += 0.37) {
    const double lr = log_lr(pr, m, SufficientStat{1, y}, 3.0);
    CHECK(lr >= lcs - 1e-7);
  }
  CHECK(cal.g(lcs) > 1.0 - 1e-6);
  CHECK(cal.g(lcs + 0.2) < 1.0);
}

TEST_CASE("calibration matches the tilted closed form for improper priors") {
  const GaussianModel m{1.0};
  for (double kappa : {0.5, 2.0, -1.5}) {
    for (double theta0 : {0.0, 3.0}) {
      const Calibration cal(Prior::improper_tilted(kappa, 0.0), m, theta0);
      CHECK(cal.g(0.0) == 1.0);
      CHECK(cal.g(-3.0) == 1.0);
      for (double c : {2.0, 10.0, 1e3, 1e6}) {
        CHECK(close(cal.g(std::log(c)), g_tilde(kappa, c), 1e-8));
      }
      for (double alpha : {0.1, 0.5}) {
        const double want = std::log(g_tilde_inv(kappa, alpha));
        CHECK(close(cal.g_inv_log(alpha), want, 1e-7));
      }
    }
  }
}

TEST_CASE("calibration inverse round trips through g") {
  const GaussianModel m{1.0};

  const Calibration gauss(Prior::gaussian(0.0, 1.0), m, 0.0);
  for (double alpha : {0.9, 0.5, 0.1, 0.01}) {
    const double lc = gauss.g_inv_log(alpha);
    CHECK(close(gauss.g(lc), alpha, 1e-10));
  }
  CHECK(gauss.g_inv_log(1.0) == gauss.log_c_star());
  CHECK(gauss.g_inv_log(0.05) > gauss.g_inv_log(0.1));

  const Calibration t5(Prior::student_t(5.0, 0.0, 1.0), m, 1.0);
  const double lc_t = t5.g_inv_log(0.1);
  CHECK(close(t5.g(lc_t), 0.1, 1e-10));

  const Calibration hs(Prior::horseshoe(0.0, 1.0), m, 1.0);
  const double lc_h = hs.g_inv_log(0.1);
  CHECK(close(hs.g(lc_h), 0.1, 1e-10));
}

TEST_CASE("calibration thresholds interleave correctly") {
  const GaussianModel m{1.0};
  const double alpha = 0.1;
  const std::vector<Prior> priors = {
      Prior::gaussian(0.0, 1.0),
      Prior::laplace(0.0, 1.0),
      Prior::horseshoe(0.0, 1.0),
  };
  for (const Prior& pr : priors) {
    const Calibration cal(pr, m, 1.0);
    const double inv = cal.g_inv_log(alpha);
    CHECK(std::log(1.0 / alpha) >= inv - 1e-12);
    CHECK(inv >= cal.log_c_star() - 1e-6);
  }
}

TEST_CASE("calibration tracks the tilted limit for far-out theta0") {
  // For an exponential-tail prior the threshold at far theta0 approaches
  // prior_density(theta0) * sqrt(2*pi*sigma^2) * g_tilde_inv(kappa, alpha).
  const GaussianModel m{1.0};
  const Prior pr = Prior::laplace(0.0, 1.0);
  const double s = g_tilde_inv_s(1.0, 0.1);
  for (double theta0 : {10.0, 25.0}) {
    const Calibration cal(pr, m, theta0);
    const double got = cal.g_inv_log(0.1);
    const double want =
        std::log(0.5) - theta0 + 0.5 * std::log(2.0 * M_PI) + 0.5 * s * s;
    CHECK(close(got, want, 1e-5));
  }
  const Calibration cal10(pr, m, 10.0);
  CHECK(close(cal10.g_inv_log(0.1), -5.65566579478, 1e-5));
}

TEST_CASE("marginal curve certifies its interpolation error") {
  const GaussianModel m{1.0};

  SUBCASE("student-t, wide window") {
    MarginalCurve curve(Prior::student_t(5.0, 0.0, 1.0), m, 1);
    curve.ensure(-30.0, 30.0);
    CHECK(curve.node_count() >= 100);
    CHECK(curve.node_count() < 4000);
    Rng rng(7);
    double worst = 0.0;
    double worst_d = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double y = -30.0 + 60.0 * rng.uniform01();
      const auto [l, d] = curve.eval(y);
      const MarginalEval ref = marginal(Prior::student_t(5.0, 0.0, 1.0), m,
                                        SufficientStat{1, y});
      worst = std::max(worst, std::abs(l - ref.log_value));
      worst_d = std::max(worst_d,
                         std::abs(d - ref.dlog_dy) / (1.0 + std::abs(ref.dlog_dy)));
    }
    CHECK(worst <= 2e-6);
    CHECK(worst_d <= 1e-4);

    // Outside the window the curve falls back to direct evaluation.
    const auto [lo_out, do_out] = curve.eval(45.0);
    const MarginalEval ref = marginal(Prior::student_t(5.0, 0.0, 1.0), m,
                                      SufficientStat{1, 45.0});
    CHECK(lo_out == ref.log_value);
    CHECK(do_out == ref.dlog_dy);

    // Extension keeps certified accuracy on the new range.
    curve.ensure(-45.0, 40.0);
    CHECK(curve.covers(-41.0));
    const auto [l2, d2] = curve.eval(-41.0);
    const MarginalEval ref2 = marginal(Prior::student_t(5.0, 0.0, 1.0), m,
                                       SufficientStat{1, -41.0});
    CHECK(close(l2, ref2.log_value, 2e-6));
    CHECK(close(d2, ref2.dlog_dy, 1e-4 * (1.0 + std::abs(ref2.dlog_dy))));
  }

  SUBCASE("laplace, smoothed kink near the prior location") {
    const Prior pr = Prior::laplace(0.0, 1.0);
    MarginalCurve curve(pr, m, 1);
    curve.ensure(-5.0, 5.0);
    for (int i = 0; i <= 50; ++i) {
      const double y = -2.0 + 4.0 * i / 50.0;
      const MarginalEval ref = marginal(pr, m, SufficientStat{1, y});
      CHECK(close(curve.log_m(y), ref.log_value, 2e-6));
    }
  }

  SUBCASE("n greater than one uses the matching predictive") {
    const Prior pr = Prior::horseshoe(0.0, 1.0);
    MarginalCurve curve(pr, m, 10);
    curve.ensure(-3.0, 3.0);
    CHECK(curve.n() == 10);
    const MarginalEval ref = marginal(pr, m, SufficientStat{10, 1.3});
    CHECK(close(curve.log_m(1.3), ref.log_value, 2e-6));
  }
}

TEST_CASE("calibration validates its inputs") {
  const GaussianModel m{1.0};
  const Prior pr = Prior::gaussian(0.0, 1.0);

  CHECK_THROWS_AS(Calibration(pr, GaussianModel{-1.0}, 0.0), config_error);
  CHECK_THROWS_AS(Calibration(pr, m, std::nan("")), config_error);

  const Calibration cal(pr, m, 0.0);
  CHECK_THROWS_AS(cal.g(std::nan("")), config_error);
  CHECK_THROWS_AS(cal.g_inv_log(0.0), config_error);
  CHECK_THROWS_AS(cal.g_inv_log(1.5), config_error);
  CHECK_THROWS_AS(g_theta(cal, 0.0), config_error);
  CHECK_THROWS_AS(g_theta(cal, -2.0), config_error);

  CHECK_THROWS_AS(Calibration(std::shared_ptr<MarginalCurve>(), 0.0),
                  config_error);
  auto n10 = std::make_shared<MarginalCurve>(Prior::laplace(0.0, 1.0), m, 10);
  CHECK_THROWS_AS(Calibration(n10, 0.0), config_error);

  CHECK_THROWS_AS(MarginalCurve(pr, m, 0), config_error);
  MarginalCurve curve(pr, m, 1);
  CHECK_THROWS_AS(curve.ensure(2.0, 1.0), config_error);
  CHECK_THROWS_AS(curve.ensure(0.0, 1e9), config_error);
}

TEST_CASE("shared-curve calibrations agree with per-theta0 construction") {
  const GaussianModel m{1.0};
  const Prior pr = Prior::student_t(5.0, 0.0, 1.0);
  auto curve = std::make_shared<MarginalCurve>(pr, m, 1);
  curve->ensure(-45.0, 45.0);
  for (double theta0 : {-4.0, 0.0, 2.5}) {
    const Calibration shared(curve, theta0);
    const Calibration owned(pr, m, theta0);
    CHECK(shared.theta0() == theta0);
    for (double lc : {0.5, std::log(10.0), 5.0}) {
      CHECK(close(shared.g(lc), owned.g(lc), 2e-7));
    }
    CHECK(close(shared.g_inv_log(0.1), owned.g_inv_log(0.1), 1e-5));
  }
}
