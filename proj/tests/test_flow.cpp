#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "pmflow/analysis.hpp"
#include "pmflow/errors.hpp"
#include "pmflow/flow.hpp"
#include "pmflow/oracles.hpp"

using namespace pmflow;
using BC = BoundaryCondition;

namespace {

const NonlinearityModel kLog = NonlinearityModel::log_quadratic();

GridFunction random_grid(std::mt19937_64& gen, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return GridFunction(v);
}

double max_diff(const GridFunction& a, const GridFunction& b) {
  double e = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) e = std::max(e, std::abs(a(i) - b(i)));
  return e;
}

double mean(const GridFunction& u) {
  return std::accumulate(u.values().begin(), u.values().end(), 0.0) / static_cast<double>(u.size());
}

}  // namespace

TEST_CASE("right-hand side") {
  for (double d : rhs(GridFunction(std::vector<double>(7, 0.4)), kLog, BC::NeumannNeumann)) CHECK(d == 0.0);

  const double s = 0.6;
  const auto f = rhs(GridFunction({0.0, s / 3.0, 2.0 * s / 3.0}), kLog, BC::NeumannNeumann);
  CHECK(f[0] == doctest::Approx(3.0 * kLog.dphi(s)).epsilon(1e-14));
  CHECK(std::abs(f[1]) < 1e-14);
  CHECK(f[2] == doctest::Approx(-3.0 * kLog.dphi(s)).epsilon(1e-14));

  std::mt19937_64 gen(41);
  for (int k = 0; k < 100; ++k) {
    const auto u = random_grid(gen, 2 + k % 40);
    const auto g = rhs(u, kLog, BC::NeumannNeumann);
    double sum = 0.0, mag = 0.0;
    for (double x : g) {
      sum += x;
      mag += std::abs(x);
    }
    CHECK(std::abs(sum) <= 1e-12 * std::max(1.0, mag));
  }

  // Dirichlet ghost: flux n * dphi(n u(1)) leaves through the left end.
  const auto d = rhs(GridFunction({0.1, 0.1}), kLog, BC::DirichletNeumann);
  CHECK(d[0] == doctest::Approx(-2.0 * kLog.dphi(0.2)).epsilon(1e-14));
  CHECK(d[1] == 0.0);
}

TEST_CASE("discrete energy") {
  CHECK(dpm_energy(GridFunction({0.3, 0.3, 0.3}), kLog) == 0.0);
  CHECK(dpm_energy(GridFunction({0.0, 1.0}), kLog) == doctest::Approx(0.40235947810852509).epsilon(1e-15));
  // Dirichlet-Neumann adds the boundary jump term h phi(n u(1)).
  CHECK(dpm_energy(GridFunction({0.5, 0.5}), kLog, BC::DirichletNeumann) ==
        doctest::Approx(0.5 * kLog.phi(1.0)).epsilon(1e-15));
}

TEST_CASE("integrator names") {
  CHECK(parse_integrator("dopri54") == Integrator::DormandPrince54);
  CHECK(parse_integrator("ros3p") == Integrator::Rosenbrock32);
  CHECK(to_string(Integrator::Rosenbrock32) == "ros3p");
  CHECK_THROWS(parse_integrator("euler"));
}

TEST_CASE("constant datum is a fixed point") {
  const GridFunction u(std::vector<double>(10, 0.25));
  for (auto method : {Integrator::DormandPrince54, Integrator::Rosenbrock32}) {
    IntegrateOptions o;
    o.method = method;
    const auto traj = integrate(u, kLog, BC::NeumannNeumann, 1.0, o);
    CHECK(traj.states.size() == 101);
    for (const auto& s : traj.states) CHECK(s == u);
    CHECK(traj.dissipation == 0.0);
    CHECK(traj.diagnostics.clean());
  }
}

TEST_CASE("sample times are hit exactly") {
  IntegrateOptions o;
  o.sample_times = {0.0, 0.013, 0.1, 0.37};
  const auto traj = integrate(GridFunction({0.0, 1.0, 0.0}), kLog, BC::NeumannNeumann, 0.37, o);
  CHECK(traj.times == o.sample_times);
  CHECK(traj.states.front() == GridFunction({0.0, 1.0, 0.0}));
  CHECK(traj.dissipation_at.size() == traj.times.size());
  CHECK(traj.dissipation == traj.dissipation_at.back());

  IntegrateOptions bad;
  bad.sample_times = {0.0, 0.2, 0.1};
  CHECK_THROWS_AS(integrate(GridFunction({0.0, 1.0}), kLog, BC::NeumannNeumann, 0.2, bad), ConfigError);
  CHECK_THROWS_AS(integrate(GridFunction({0.0, 1.0}), kLog, BC::NeumannNeumann, -1.0), ConfigError);
}

TEST_CASE("n = 3 bump against the RK4 oracle") {
  const GridFunction u0({0.0, 1.0, 0.0});
  IntegrateOptions o;
  o.rtol = 1e-11;
  o.atol = 1e-13;
  o.samples = 2;
  const auto ref = oracle::rk4(u0, kLog, BC::NeumannNeumann, 0.1, 1e-6);
  const auto traj = integrate(u0, kLog, BC::NeumannNeumann, 0.1, o);
  CHECK(max_diff(traj.states.back(), ref) <= 1e-8);

  o.method = Integrator::Rosenbrock32;
  o.rtol = 1e-9;
  o.atol = 1e-11;
  const auto ros = integrate(u0, kLog, BC::NeumannNeumann, 0.1, o);
  CHECK(max_diff(ros.states.back(), ref) <= 1e-7);
}

TEST_CASE("small systems against the RK4 oracle") {
  for (const auto& model : {kLog, NonlinearityModel::arctan_square(), NonlinearityModel::quartic_root()}) {
    for (std::size_t n = 3; n <= 8; ++n) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = (i % 2) ? 0.3 : 0.0;
      for (auto bc : {BC::NeumannNeumann, BC::DirichletNeumann}) {
        IntegrateOptions o;
        o.samples = 2;
        const auto traj = integrate(GridFunction(v), model, bc, 0.1, o);
        const auto ref = oracle::rk4(GridFunction(v), model, bc, 0.1, 1e-6);
        CHECK(max_diff(traj.states.back(), ref) <= 1e-6);
      }
    }
  }
}

TEST_CASE("Rosenbrock method converges with order three") {
  const GridFunction u0({0.0, 0.3, 0.1, 0.25});
  const auto ref = oracle::rk4(u0, kLog, BC::NeumannNeumann, 0.2, 1e-5);
  std::vector<double> errs;
  for (double h : {0.01, 0.005, 0.0025}) {
    IntegrateOptions o;
    o.method = Integrator::Rosenbrock32;
    o.rtol = 1.0;  // accept every step: fixed step h
    o.atol = 1.0;
    o.max_step = h;
    o.samples = 2;
    const auto traj = integrate(u0, kLog, BC::NeumannNeumann, 0.2, o);
    errs.push_back(max_diff(traj.states.back(), ref));
  }
  for (std::size_t k = 1; k < errs.size(); ++k) {
    const double order = std::log2(errs[k - 1] / errs[k]);
    CHECK(order > 2.5);
    CHECK(order < 3.5);
  }
}

TEST_CASE("long-time limit is the mean") {
  const GridFunction u0({0.1, 0.25, 0.2});
  IntegrateOptions o;
  o.samples = 2;
  const auto traj = integrate(u0, kLog, BC::NeumannNeumann, 5.0, o);
  const double m = mean(u0);
  for (std::size_t i = 1; i <= 3; ++i) CHECK(std::abs(traj.states.back()(i) - m) <= 1e-3);
  const auto ref = oracle::rk4(u0, kLog, BC::NeumannNeumann, 5.0, 1e-4);
  CHECK(max_diff(traj.states.back(), ref) <= 1e-8);
}

TEST_CASE("invariants on random data") {
  std::mt19937_64 gen(43);
  for (int k = 0; k < 10; ++k) {
    const auto u0 = random_grid(gen, 32);
    const auto traj = integrate(u0, kLog, BC::NeumannNeumann, 1.0);
    CHECK(traj.diagnostics.clean());
    const double e0 = dpm_energy(u0, kLog);
    CHECK(traj.dissipation <= e0 * (1 + 1e-4) + 1e-10);
    CHECK(traj.dissipation >= 0.0);
    for (const auto& s : traj.states) CHECK(std::abs(mean(s) - mean(u0)) <= 1e-9 * (1 + sup_norm(u0)));
    for (std::size_t j = 1; j < traj.dissipation_at.size(); ++j)
      CHECK(traj.dissipation_at[j] >= traj.dissipation_at[j - 1]);
  }
}

TEST_CASE("diagnostics flag increases") {
  Trajectory fake;
  fake.model = "log";
  fake.n = 3;
  fake.times = {0.0, 1.0};
  fake.states = {GridFunction({0.0, 0.1, 0.0}), GridFunction({0.0, 0.5, 0.0})};
  const auto table = run_diagnostics(fake, kLog);
  CHECK_FALSE(table.clean());
  bool saw_max = false, saw_tv = false;
  for (const auto& v : table.violations) {
    saw_max |= v.quantity == "max";
    saw_tv |= v.quantity == "tv";
  }
  CHECK(saw_max);
  CHECK(saw_tv);

  fake.states = {GridFunction({0.0, 0.1, 0.2}), GridFunction({0.0, 0.15, 0.1})};
  bool saw_space = false;
  for (const auto& v : run_diagnostics(fake, kLog).violations) saw_space |= v.quantity == "space_monotonicity";
  CHECK(saw_space);
}

TEST_CASE("subcritical indices are preserved") {
  std::mt19937_64 gen(47);
  std::uniform_real_distribution<double> slope(-3.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    const std::size_t n = 32;
    std::vector<double> v(n);
    v[0] = 0.0;
    for (std::size_t i = 1; i < n; ++i) v[i] = v[i - 1] + slope(gen) / n;
    const auto traj = integrate(GridFunction(v), kLog, BC::NeumannNeumann, 1.0);
    for (const auto& s : traj.states)
      for (double d : forward_diff(s, BC::NeumannNeumann)) CHECK(d <= 1.0 + 1e-8);
    const auto& first = traj.diagnostics.records.front().subcritical;
    for (const auto& rec : traj.diagnostics.records)
      for (std::size_t i = 0; i < first.size(); ++i)
        if (first[i]) CHECK(rec.subcritical[i]);
  }
}

TEST_CASE("nondecreasing data stay nondecreasing") {
  std::vector<double> v(40);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(8.0 * (static_cast<double>(i) / 40 - 0.5));
  const auto traj = integrate(GridFunction(v), kLog, BC::NeumannNeumann, 0.5);
  CHECK(traj.diagnostics.clean());
  for (const auto& s : traj.states)
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s(i + 1) >= s(i));
}

TEST_CASE("failure paths") {
  IntegrateOptions tight;
  tight.rtol = 1e-30;
  tight.atol = 1e-32;
  CHECK_THROWS_AS(integrate(GridFunction({0.0, 1.0, 0.0, 0.5}), kLog, BC::NeumannNeumann, 1.0, tight),
                  StiffnessError);

  CustomLagrangian broken;
  broken.phi = [](double s) { return 0.5 * std::log1p(s * s); };
  broken.dphi = [](double s) { return s > 0.5 ? NAN : s / (1 + s * s); };
  broken.d2phi = [](double s) { return (1 - s * s) / ((1 + s * s) * (1 + s * s)); };
  broken.sigma1 = 1.0;
  broken.phi2_sup = 1.0;
  const auto model = NonlinearityModel::custom(broken, false);
  CHECK_THROWS_AS(integrate(GridFunction({0.0, 1.0}), model, BC::NeumannNeumann, 1.0), IntegrationError);
}

TEST_CASE("domain length rescales the grid") {
  // The odd reflection on (-1, 1) with 2n cells has the same cell width as
  // the original grid, so interior rhs values agree.
  const GridFunction u({0.1, 0.3, 0.35, 0.6});
  const auto w = odd_reflection(u);
  const auto fu = rhs(u, kLog, BC::NeumannNeumann);
  const auto fw = rhs(w, kLog, BC::NeumannNeumann, 2.0);
  CHECK(fw[7] == doctest::Approx(fu[3]).epsilon(1e-14));
  CHECK(fw[6] == doctest::Approx(fu[2]).epsilon(1e-14));
}
