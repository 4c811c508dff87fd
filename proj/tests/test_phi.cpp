#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pmflow/errors.hpp"
#include "pmflow/phi.hpp"

using namespace pmflow;

namespace {

std::vector<NonlinearityModel> builtins() {
  return {NonlinearityModel::log_quadratic(), NonlinearityModel::arctan_square(),
          NonlinearityModel::quartic_root()};
}

}  // namespace

TEST_CASE("log model point values") {
  const auto m = NonlinearityModel::log_quadratic();
  CHECK(phi_eval(m, 0.0) == 0.0);
  CHECK(phi_eval(m, 1.0) == doctest::Approx(0.34657359027997265).epsilon(1e-15));
  CHECK(phi_prime(m, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(phi_prime(m, 0.0) == 0.0);
  CHECK(phi_prime(m, 10.0) == doctest::Approx(10.0 / 101.0).epsilon(1e-15));
  CHECK(phi_second(m, 0.0) == doctest::Approx(1.0));
  CHECK(std::abs(phi_second(m, 1.0)) < 1e-16);
  CHECK(phi_second(m, 2.0) == doctest::Approx(-0.12).epsilon(1e-14));
  CHECK(phi_second(m, 0.99) == doctest::Approx(0.0050754999620600002).epsilon(1e-12));
  CHECK(m.sigma1() == 1.0);
}

TEST_CASE("thresholds of the other built-ins") {
  CHECK(NonlinearityModel::arctan_square().sigma1() == doctest::Approx(std::pow(3.0, -0.25)).epsilon(1e-12));
  CHECK(NonlinearityModel::quartic_root().sigma1() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  for (const auto& m : builtins()) {
    CHECK(std::abs(m.d2phi(m.sigma1())) < 1e-10);
    CHECK(m.dphi(m.sigma1()) >= m.dphi(m.sigma1() * 0.999));
    CHECK(m.dphi(m.sigma1()) >= m.dphi(m.sigma1() * 1.001));
  }
}

TEST_CASE("evenness and bit-exact oddness") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> d(-50.0, 50.0);
  for (const auto& m : builtins()) {
    for (double s : {0.3, 1.0, 7.0}) CHECK(phi_eval(m, -s) == phi_eval(m, s));
    for (int k = 0; k < 1000; ++k) {
      const double s = d(gen);
      CHECK(m.dphi(-s) == -m.dphi(s));
      CHECK(s * m.dphi(s) >= 0.0);
    }
    CHECK(m.phi(0.0) == 0.0);
    CHECK(m.dphi(0.0) == 0.0);
    CHECK(m.d2phi(0.0) > 0.0);
  }
}

TEST_CASE("finite-difference consistency") {
  for (const auto& m : builtins()) {
    for (int k = 0; k < 100; ++k) {
      const double s = -4.0 + 8.0 * k / 99.0;
      for (double h : {1e-3, 1e-4}) {
        const double e1 = std::abs((m.phi(s + h) - m.phi(s - h)) / (2 * h) - m.dphi(s));
        const double e2 = std::abs((m.dphi(s + h) - m.dphi(s - h)) / (2 * h) - m.d2phi(s));
        // C h^2 with C bounded by a few units for these smooth models.
        CHECK(e1 <= 10.0 * h * h + 1e-11);
        CHECK(e2 <= 10.0 * h * h + 1e-11);
      }
    }
  }
}

TEST_CASE("second derivative bounded by phi2_sup") {
  for (const auto& m : builtins())
    for (int k = 0; k <= 2000; ++k) {
      const double s = -20.0 + 40.0 * k / 2000.0;
      CHECK(std::abs(m.d2phi(s)) <= m.phi2_sup() * (1 + 1e-12));
    }
}

TEST_CASE("sublinear growth") {
  for (const auto& m : builtins()) CHECK(m.dphi(1e8 * m.sigma1()) < 1e-3 * m.dphi(m.sigma1()));
  CHECK(NonlinearityModel::log_quadratic().dphi(1e6) < 1e-3 * 0.5);
  // The quartic root decays like s^(-1/2): 1e6 sigma1 is not yet far enough.
  const auto q = NonlinearityModel::quartic_root();
  CHECK(q.dphi(1e6 * q.sigma1()) > 1e-3 * q.dphi(q.sigma1()));
}

TEST_CASE("non-finite input is a domain error") {
  const auto m = NonlinearityModel::log_quadratic();
  CHECK_THROWS_AS(phi_eval(m, NAN), DomainError);
  CHECK_THROWS_AS(phi_prime(m, INFINITY), DomainError);
  CHECK_THROWS_AS(phi_second(m, -INFINITY), DomainError);
}

TEST_CASE("model lookup by name") {
  CHECK(NonlinearityModel::from_name("log").kind() == ModelKind::LogQuadratic);
  CHECK(NonlinearityModel::from_name("atan2").kind() == ModelKind::ArctanSquare);
  CHECK(NonlinearityModel::from_name("quartic").kind() == ModelKind::QuarticRoot);
  CHECK_THROWS_AS(NonlinearityModel::from_name("cubic"), ConfigError);
}

TEST_CASE("built-ins pass the structural checks") {
  for (const auto& m : builtins()) CHECK(model_violations(m).empty());
}

TEST_CASE("conjugate slope") {
  const auto log = NonlinearityModel::log_quadratic();
  CHECK(conjugate_slope(log, 10.0) == doctest::Approx(0.1).epsilon(1e-11));
  CHECK(conjugate_slope(log, 1.0) == 1.0);
  CHECK_THROWS_AS(conjugate_slope(log, 0.5), DomainError);

  const auto at = NonlinearityModel::arctan_square();
  const double g = conjugate_slope(at, 5.0);
  CHECK(std::abs(at.dphi(g) - at.dphi(5.0)) <= 1e-12);
  // Independent dense scan of dphi on [0, sigma1].
  double best = 0.0, err = INFINITY;
  for (int k = 0; k <= 200000; ++k) {
    const double s = at.sigma1() * k / 200000.0;
    const double e = std::abs(at.dphi(s) - at.dphi(5.0));
    if (e < err) {
      err = e;
      best = s;
    }
  }
  CHECK(g == doctest::Approx(best).epsilon(1e-4));

  for (const auto& m : builtins()) {
    for (int k = 0; k < 100; ++k) {
      const double s = m.sigma1() * std::pow(1e4 / m.sigma1(), k / 99.0);
      const double gs = conjugate_slope(m, s);
      CHECK(gs >= 0.0);
      CHECK(gs <= m.sigma1());
      CHECK(std::abs(m.dphi(gs) - m.dphi(s)) <= 1e-12);
    }
    CHECK(conjugate_slope(m, 1e6) < conjugate_slope(m, 1e3));
  }
}

TEST_CASE("bi-Lipschitz window") {
  const auto log = NonlinearityModel::log_quadratic();
  const auto w = bilipschitz_window(log, 0.5);
  CHECK(w.sigma0 == 0.5);
  CHECK(w.lambda0 == doctest::Approx(0.48).epsilon(1e-8));
  CHECK(w.lambda0 <= 0.48);
  CHECK(w.Lambda0 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(w.Lambda0 >= 1.0);

  const auto w99 = bilipschitz_window(log, 0.99);
  CHECK(w99.lambda0 == doctest::Approx(0.0050754999620600002).epsilon(1e-6));

  const auto tiny = bilipschitz_window(log, 1e-4);
  CHECK(tiny.lambda0 == doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(bilipschitz_window(log, 1.0), DomainError);
  CHECK_THROWS_AS(bilipschitz_window(log, 0.0), DomainError);

  std::mt19937_64 gen(11);
  for (const auto& m : builtins()) {
    const double s0 = 0.6 * m.sigma1();
    const auto win = bilipschitz_window(m, s0);
    std::uniform_real_distribution<double> d(0.0, s0);
    for (int k = 0; k < 10000; ++k) {
      double a = d(gen), b = d(gen);
      if (a < b) std::swap(a, b);
      const double diff = m.dphi(a) - m.dphi(b);
      CHECK(win.lambda0 * (a - b) <= diff + 1e-15);
      CHECK(diff <= win.Lambda0 * (a - b) + 1e-15);
    }
  }
}

TEST_CASE("custom models are validated") {
  const auto base = NonlinearityModel::log_quadratic();
  CustomLagrangian ok;
  ok.phi = [base](double s) { return base.phi(s); };
  ok.dphi = [base](double s) { return base.dphi(s); };
  ok.d2phi = [base](double s) { return base.d2phi(s); };
  ok.sigma1 = 1.0;
  ok.phi2_sup = 1.0;
  const auto m = NonlinearityModel::custom(ok);
  CHECK(m.kind() == ModelKind::Custom);
  CHECK(m.dphi(2.0) == base.dphi(2.0));
  CHECK(m.dphi(-2.0) == -base.dphi(2.0));

  CustomLagrangian flipped = ok;
  flipped.dphi = [base](double s) { return -base.dphi(s); };
  CHECK_THROWS_AS(NonlinearityModel::custom(flipped), ModelError);
  CHECK_FALSE(lagrangian_violations(flipped).empty());
  // Skipping validation keeps the wrong sign visible.
  const auto bad = NonlinearityModel::custom(flipped, false);
  CHECK(bad.dphi(2.0) < 0.0);

  CustomLagrangian quadratic = ok;  // convex everywhere: no sublinear growth
  quadratic.phi = [](double s) { return 0.5 * s * s; };
  quadratic.dphi = [](double s) { return s; };
  quadratic.d2phi = [](double) { return 1.0; };
  CHECK_THROWS_AS(NonlinearityModel::custom(quadratic), ModelError);
}
