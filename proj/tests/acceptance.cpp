// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pmflow/analysis.hpp"
#include "pmflow/counterexample.hpp"
#include "pmflow/errors.hpp"
#include "pmflow/flow.hpp"
#include "pmflow/oracles.hpp"

using namespace pmflow;
using BC = BoundaryCondition;

namespace {

const NonlinearityModel kLog = NonlinearityModel::log_quadratic();
constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

GridFunction uniform_datum(std::mt19937_64& gen, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return GridFunction(v);
}

IntegrateOptions dopri(double rtol) {
  IntegrateOptions o;
  o.rtol = rtol;
  o.atol = rtol * 1e-2;
  return o;
}

IntegrateOptions ros(double rtol) {
  IntegrateOptions o = dopri(rtol);
  o.method = Integrator::Rosenbrock32;
  return o;
}

// Every trajectory produced here, for the sign-condition sweep.
std::vector<const Trajectory*> g_all;
std::vector<Trajectory> g_random_runs;
// Sign-measure evaluations on states that are not part of a trajectory.
std::size_t g_static_states = 0, g_static_sign_failures = 0;

Outcome criterion_monotone() {
  Outcome r;
  std::mt19937_64 gen(kSeed);
  for (int k = 0; k < 50; ++k) {
    g_random_runs.push_back(integrate(uniform_datum(gen, 64, -1.0, 1.0), kLog, BC::NeumannNeumann, 1.0, dopri(1e-8)));
    const auto& t = g_random_runs.back();
    if (t.times.size() != 101) r.fail("run " + std::to_string(k) + ": expected 101 samples");
    for (const auto& v : t.diagnostics.violations)
      r.fail("run " + std::to_string(k) + ": " + v.quantity + " increased by " + fmt(v.amount));
  }
  r.detail = r.pass ? "50 random runs, max/min/tv/energy monotone within 1e-6" : r.detail;
  return r;
}

Outcome criterion_dissipation() {
  Outcome r;
  double worst = -INFINITY;
  for (std::size_t k = 0; k < g_random_runs.size(); ++k) {
    const auto& t = g_random_runs[k];
    const double e0 = t.diagnostics.records.front().energy;
    const double e1 = t.diagnostics.records.back().energy;
    worst = std::max(worst, t.dissipation - e0);
    if (t.dissipation > e0 * (1.0 + 1e-4) + 1e-10) r.fail("run " + std::to_string(k) + ": dissipation exceeds energy");
    // Energy identity: E(0) - E(T) equals the dissipated amount.
    if (std::abs((e0 - e1) - t.dissipation) > 1e-4 * e0 + 1e-10)
      r.fail("run " + std::to_string(k) + ": energy identity off by " + fmt((e0 - e1) - t.dissipation));
  }
  if (r.pass) r.detail = "max(dissipation - E(0)) = " + fmt(worst);
  return r;
}

Outcome criterion_subcritical() {
  Outcome r;
  std::mt19937_64 gen(kSeed + 1);
  static std::vector<Trajectory> runs;
  double worst = -INFINITY;
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 64;
    std::uniform_real_distribution<double> slope(-3.0, kLog.sigma1());
    std::vector<double> v(n);
    double acc = 0.0;
    for (auto& x : v) {
      x = acc;
      acc += slope(gen) / static_cast<double>(n);
    }
    runs.push_back(integrate(GridFunction(v), kLog, BC::NeumannNeumann, 1.0, dopri(1e-8)));
    for (const auto& s : runs.back().states)
      for (double d : forward_diff(s, BC::NeumannNeumann)) worst = std::max(worst, d);
  }
  for (const auto& t : runs) g_all.push_back(&t);
  if (worst > kLog.sigma1() + 1e-8) r.fail("max D+u = " + fmt(worst));
  else r.detail = "20 runs, max D+u = " + fmt(worst) + " <= sigma1";
  return r;
}

Outcome criterion_tv_m_plus() {
  Outcome r;
  std::mt19937_64 gen(kSeed + 2);
  std::uniform_int_distribution<int> nd(1, 12), md(1, 3);
  int mismatches = 0;
  for (int k = 0; k < 500; ++k) {
    const auto u = uniform_datum(gen, static_cast<std::size_t>(nd(gen)), -1.0, 1.0);
    const int m = md(gen);
    if (tv_m_plus(u, m) != oracle::tv_m_plus_brute(u, m)) ++mismatches;
    for (auto bc : {BC::NeumannNeumann, BC::DirichletNeumann})
      for (double x : sign_measure(u, kLog, bc)) g_static_sign_failures += !(x >= 0.0);
    ++g_static_states;
  }
  if (mismatches) r.fail(std::to_string(mismatches) + " of 500 draws differ from brute force");
  else r.detail = "500 draws bit-identical to brute force";
  return r;
}

Outcome criterion_integrator_oracle() {
  Outcome r;
  double worst = 0.0;
  static std::vector<Trajectory> runs;
  for (std::size_t n = 3; n <= 8; ++n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i % 2 ? 0.3 : 0.0;
    for (auto bc : {BC::NeumannNeumann, BC::DirichletNeumann}) {
      IntegrateOptions o = dopri(1e-8);
      o.samples = 2;
      runs.push_back(integrate(GridFunction(v), kLog, bc, 0.1, o));
      const auto ref = oracle::rk4(GridFunction(v), kLog, bc, 0.1, 1e-6);
      for (std::size_t i = 1; i <= n; ++i) worst = std::max(worst, std::abs(runs.back().states.back()(i) - ref(i)));
    }
  }
  for (const auto& t : runs) g_all.push_back(&t);
  if (worst > 1e-6) r.fail("max deviation from RK4 = " + fmt(worst));
  else r.detail = "n = 3..8, both boundary rules, max deviation " + fmt(worst);
  return r;
}

// Counterexample runs shared by criteria 6 to 10.
const std::vector<std::size_t> kNs = {100, 400, 1600};
SubcriticalWindow g_window;
std::vector<CounterexampleParams> g_params;
std::vector<Trajectory> g_runs;
std::vector<Trajectory> g_cross;  // explicit cross-check runs

Outcome criterion_hypotheses() {
  Outcome r;
  // The window of the log model at sigma0 = 0.5 is exactly (0.48, 1); the
  // numerical extrema search must agree with it.
  g_window = SubcriticalWindow{0.5, 0.48, 1.0};
  const auto found = bilipschitz_window(kLog, 0.5);
  if (std::abs(found.lambda0 - 0.48) > 1e-8 || std::abs(found.Lambda0 - 1.0) > 1e-8)
    r.fail("window search gives (" + fmt(found.lambda0) + ", " + fmt(found.Lambda0) + ")");
  double min_margin = INFINITY;
  for (std::size_t n : kNs) {
    const auto p = params_for(n, kLog, g_window, 1.0);
    g_params.push_back(p);
    if (!p.admissible) {
      r.fail("n = " + std::to_string(n) + " inadmissible");
      continue;
    }
    g_runs.push_back(integrate(staircase_datum(p, kLog), kLog, BC::DirichletNeumann, 1.0, ros(1e-6)));
    std::vector<const Trajectory*> check = {&g_runs.back()};
    if (n <= 400) {
      g_cross.push_back(integrate(staircase_datum(p, kLog), kLog, BC::DirichletNeumann, 1.0, dopri(1e-6)));
      check.push_back(&g_cross.back());
    }
    for (const auto* t : check) {
      const auto rep = check_lemma_hypotheses(*t, p, kLog);
      for (const auto& c : rep.checks) {
        if (!c.passed() || c.degenerate) r.fail("n = " + std::to_string(n) + ": " + c.name + " margin " + fmt(c.min_margin));
        if (c.strict) min_margin = std::min(min_margin, c.min_margin);
      }
      const auto ord = check_lemma_conclusion(*t, p);
      if (!ord.holds) r.fail("n = " + std::to_string(n) + ": ordering crossed at i = " + std::to_string(ord.first_crossing_i));
    }
  }
  for (const auto& t : g_runs) g_all.push_back(&t);
  for (const auto& t : g_cross) g_all.push_back(&t);
  if (r.pass) r.detail = "n = 100, 400, 1600 (Rosenbrock, explicit cross-check at 100 and 400), min strict margin " + fmt(min_margin);
  return r;
}

Outcome criterion_gap() {
  Outcome r;
  if (g_runs.size() != kNs.size()) {
    r.fail("counterexample runs missing");
    return r;
  }
  IntegrateOptions o = ros(1e-7);
  o.atol = 1e-10;
  static Trajectory ref = reference_solution(4096, g_window, kLog, 1.0, BC::DirichletNeumann, o);
  g_all.push_back(&ref);
  for (std::size_t k = 0; k < kNs.size(); ++k) {
    const double tv1 = tv(g_runs[k].states.back(), BC::DirichletNeumann);
    const double edge = g_runs[k].states.back()(kNs[k]);
    if (tv1 < 0.25) r.fail("n = " + std::to_string(kNs[k]) + ": tv(1) = " + fmt(tv1));
    if (std::abs(tv1 - edge) > 1e-12) r.fail("n = " + std::to_string(kNs[k]) + ": tv(1) differs from u(1, n)");
  }
  const double ref_tv = tv(ref.states.back(), BC::DirichletNeumann);
  if (ref_tv > 0.175) r.fail("reference tv(1) = " + fmt(ref_tv));
  const auto rep = tabulate_gaps(g_runs, ref);
  double min_gap = INFINITY;
  for (std::size_t j = 1; j < rep.times.size(); ++j) min_gap = std::min({min_gap, rep.gaps[j].tv, rep.gaps[j].sup});
  if (min_gap < 0.075) r.fail("min gap for t > 0 is " + fmt(min_gap));
  double prev_bound = INFINITY;
  for (std::size_t k = 0; k < kNs.size(); ++k) {
    const auto& p = g_params[k];
    const double ratio = static_cast<double>(p.m) / static_cast<double>(p.n);
    const double bound = p.J + 0.25 * (1.0 - std::sin(std::numbers::pi / 2.0 * ratio));
    const double gap0 = std::max(rep.sup_tv[k][0].tv - rep.ref[0].tv, rep.sup_tv[k][0].sup - rep.ref[0].sup);
    if (gap0 > bound + 1e-12) r.fail("n = " + std::to_string(kNs[k]) + ": t = 0 gap " + fmt(gap0) + " above bound");
    if (bound >= prev_bound) r.fail("t = 0 bound not decreasing in n");
    prev_bound = bound;
  }
  if (r.pass)
    r.detail = "tv(1) >= 0.25 on every grid, reference tv(1) = " + fmt(ref_tv) + ", min gap " + fmt(min_gap);
  return r;
}

Outcome criterion_key_bounds() {
  Outcome r;
  if (g_runs.size() < 2) {
    r.fail("n = 400 run missing");
    return r;
  }
  const auto kb = key_bounds_report(g_runs[1], g_params[1], {0.1, 0.25, 0.5});
  if (!kb.holds())
    r.fail("upper margin " + fmt(kb.min_upper_margin) + ", lower margin " + fmt(kb.min_lower_margin));
  else
    r.detail = "n = 400, upper margin " + fmt(kb.min_upper_margin) + ", lower margin " + fmt(kb.min_lower_margin);
  return r;
}

Outcome criterion_odd_reflection() {
  Outcome r;
  static std::vector<Trajectory> runs;
  double defect = 0.0;
  for (std::size_t k = 0; k < 2 && k < g_params.size(); ++k) {
    auto o = ros(1e-6);
    o.length = 2.0;
    runs.push_back(integrate(odd_reflection(staircase_datum(g_params[k], kLog)), kLog, BC::NeumannNeumann, 1.0, o));
    const auto rep = odd_reflection_report(runs.back(), g_params[k]);
    defect = std::max(defect, rep.max_odd_defect);
    if (!rep.holds())
      r.fail("n = " + std::to_string(kNs[k]) + ": defect " + fmt(rep.max_odd_defect) + ", edge margin " +
             fmt(rep.min_edge_margin));
  }
  for (const auto& t : runs) g_all.push_back(&t);
  if (r.pass) r.detail = "n = 100, 400, odd defect " + fmt(defect);
  return r;
}

Outcome criterion_sign() {
  Outcome r;
  for (const auto& t : g_random_runs) g_all.push_back(&t);
  std::size_t states = g_static_states;
  if (g_static_sign_failures) r.fail(std::to_string(g_static_sign_failures) + " negative entries on random draws");
  for (const auto* t : g_all) {
    states += t->states.size();
    if (!sign_condition_holds(*t, kLog)) r.fail("negative sign measure on a " + std::to_string(t->n) + "-cell run");
  }
  if (r.pass) r.detail = std::to_string(g_all.size()) + " runs plus 500 draws, " + std::to_string(states) + " states";
  return r;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::function<Outcome()> run;
  };
  // Order matters: later criteria reuse earlier runs; the sign sweep goes last.
  const std::vector<Criterion> order = {
      {1, criterion_monotone},    {2, criterion_dissipation}, {3, criterion_subcritical},
      {4, criterion_tv_m_plus},   {5, criterion_integrator_oracle}, {6, criterion_hypotheses},
      {7, criterion_gap},         {8, criterion_key_bounds},  {10, criterion_odd_reflection},
      {9, criterion_sign},
  };
  std::vector<Outcome> results(11);
  for (const auto& c : order) {
    try {
      results[c.id] = c.run();
    } catch (const std::exception& e) {
      results[c.id].fail(std::string("exception: ") + e.what());
    }
  }
  int failures = 0;
  for (int id = 1; id <= 10; ++id) {
    const auto& o = results[id];
    std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    failures += !o.pass;
  }
  std::fflush(stdout);
  return failures == 0 ? 0 : 1;
}
