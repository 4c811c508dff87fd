#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmflow/analysis.hpp"
#include "pmflow/counterexample.hpp"
#include "pmflow/errors.hpp"
#include "pmflow/flow.hpp"
#include "pmflow/grid.hpp"
#include "pmflow/io.hpp"
#include "pmflow/oracles.hpp"
#include "pmflow/phi.hpp"

namespace pmflow::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- plumbing

/// Serializes all artifact writes of a command.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path root) : root_(std::move(root)) {}

  void write(const std::string& name, const std::string& content) {
    std::lock_guard<std::mutex> lock(mu_);
    io::write_file(root_ / name, content);
    written_.push_back(name);
  }
  void write_json(const std::string& name, const json& j) { write(name, io::dump(j)); }

  const std::vector<std::string>& written() const { return written_; }

 private:
  std::filesystem::path root_;
  std::mutex mu_;
  std::vector<std::string> written_;
};

/// 64-bit Mersenne twister with an explicit 53-bit mantissa mapping, so the
/// streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double a, double b) {
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return a + (b - a) * u;
  }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return lo + static_cast<std::size_t>(gen_() % (hi - lo + 1));
  }

 private:
  std::mt19937_64 gen_;
};

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) out += (k ? sep : "") + parts[k];
  return out;
}

void validate_common(const RunConfig& c) {
  if (!(c.t_end > 0.0) || !std::isfinite(c.t_end)) throw ConfigError("--t-end must be positive");
  if (c.samples < 2) throw ConfigError("--samples must be at least 2");
  if (!(c.sigma0 > 0.0)) throw ConfigError("--sigma0 must be positive");
  if (c.rtol && !(*c.rtol > 0.0)) throw ConfigError("--rtol must be positive");
  if (c.atol && !(*c.atol > 0.0)) throw ConfigError("--atol must be positive");
  if (!(c.c_step > 0.0)) throw ConfigError("--c-step must be positive");
  if (c.lambda0 && !(*c.lambda0 > 0.0)) throw ConfigError("--lambda0 must be positive");
  if (c.Lambda0 && !(*c.Lambda0 > 0.0)) throw ConfigError("--Lambda0 must be positive");
  if (!c.inject_fault.empty() && c.inject_fault != "sign-flip")
    throw ConfigError("--inject-fault accepts only 'sign-flip'");
}

SubcriticalWindow window_of(const RunConfig& c, const NonlinearityModel& model) {
  SubcriticalWindow w = bilipschitz_window(model, c.sigma0);
  if (c.lambda0) w.lambda0 = *c.lambda0;
  if (c.Lambda0) w.Lambda0 = *c.Lambda0;
  if (w.lambda0 > w.Lambda0) throw ConfigError("window: lambda0 exceeds Lambda0");
  return w;
}

IntegrateOptions options_of(const RunConfig& c, Integrator default_method, double default_rtol) {
  IntegrateOptions o;
  o.rtol = c.rtol.value_or(default_rtol);
  o.atol = c.atol.value_or(o.rtol * 1e-2);
  o.samples = c.samples;
  o.c_step = c.c_step;
  o.method = c.method ? parse_integrator(*c.method) : default_method;
  return o;
}

/// Sample indices closest to 0, t_end/2 and t_end.
std::vector<std::size_t> plot_indices(const std::vector<double>& times) {
  std::vector<std::size_t> idx{0, (times.size() - 1) / 2, times.size() - 1};
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

std::vector<double> at(const std::vector<double>& times, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  for (std::size_t k : idx) out.push_back(times[k]);
  return out;
}

std::string barrier_csv(const CounterexampleParams& p, const std::vector<double>& times) {
  std::string out = "t,i,value\n";
  for (double t : times) {
    const std::string ts = io::format_double(t);
    for (std::size_t i = 1; i <= p.n; ++i)
      out += ts + ',' + std::to_string(i) + ',' + io::format_double(barrier(p, t, i)) + '\n';
  }
  return out;
}

double initial_gap_bound(const CounterexampleParams& p) {
  const double ratio = static_cast<double>(p.m) / static_cast<double>(p.n);
  return p.J + p.window.sigma0 / 2.0 * (1.0 - std::sin(std::numbers::pi / 2.0 * ratio));
}

json failure_json(const std::string& kind, const std::string& what) {
  return {{"error", kind}, {"message", what}};
}

GridFunction random_datum(std::size_t n, Rng& rng, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return GridFunction(std::move(v));
}

/// Datum with every forward difference drawn in [slope_lo, slope_hi].
GridFunction random_slope_datum(std::size_t n, Rng& rng, double slope_lo, double slope_hi) {
  std::vector<double> v(n);
  v[0] = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 1; i < n; ++i) v[i] = v[i - 1] + rng.uniform(slope_lo, slope_hi) / static_cast<double>(n);
  return GridFunction(std::move(v));
}

bool dissipation_ok(const Trajectory& traj) {
  const double e0 = traj.diagnostics.records.front().energy;
  return traj.dissipation <= e0 * (1.0 + 1e-4) + 1e-10;
}

// ---------------------------------------------------------------- config

void assign_key(RunConfig& c, const std::string& raw_key, const json& v) {
  std::string key = raw_key;
  std::replace(key.begin(), key.end(), '-', '_');
  if (v.is_object() || (v.is_array() && key != "ns" && key != "probes"))
    throw ConfigError("config: '" + raw_key + "' must be a scalar");
  try {
    if (key == "model") c.model = v.get<std::string>();
    else if (key == "bc") c.bc = v.get<std::string>();
    else if (key == "n") {
      c.n = v.get<std::size_t>();
      if (c.n == 0) throw ConfigError("config: n must be positive");
    }
    else if (key == "ns") c.ns = v.get<std::vector<std::size_t>>();
    else if (key == "sigma0") c.sigma0 = v.get<double>();
    else if (key == "lambda0") c.lambda0 = v.get<double>();
    else if (key == "Lambda0") c.Lambda0 = v.get<double>();
    else if (key == "t_end") c.t_end = v.get<double>();
    else if (key == "samples") c.samples = v.get<int>();
    else if (key == "rtol") c.rtol = v.get<double>();
    else if (key == "atol") c.atol = v.get<double>();
    else if (key == "method") c.method = v.get<std::string>();
    else if (key == "c_step") c.c_step = v.get<double>();
    else if (key == "datum") c.datum = v.get<std::string>();
    else if (key == "file") c.file = v.get<std::string>();
    else if (key == "out") c.out = v.get<std::string>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "n_ref") c.n_ref = v.get<std::size_t>();
    else if (key == "odd_reflection") c.odd_reflection = v.get<bool>();
    else if (key == "probes") c.probes = v.get<std::vector<double>>();
    else if (key == "inject_fault") c.inject_fault = v.get<std::string>();
    else if (key == "trials") c.trials = v.get<int>();
    else throw ConfigError("config: unknown key '" + raw_key + "'");
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + raw_key + "': " + e.what());
  }
}

// ---------------------------------------------------------------- selftest suites

struct SuiteResult {
  explicit SuiteResult(std::string suite) : name(std::move(suite)) {}

  std::string name;
  bool passed = true;
  std::string detail;
  std::size_t cases = 0;
};

SuiteResult suite_phi_finite_differences(Rng& rng) {
  SuiteResult r{"phi_finite_differences"};
  for (const auto& model :
       {NonlinearityModel::log_quadratic(), NonlinearityModel::arctan_square(), NonlinearityModel::quartic_root()}) {
    for (int k = 0; k < 200; ++k) {
      const double s = rng.uniform(-5.0, 5.0);
      const double h = 1e-5 * std::max(1.0, std::abs(s));
      const double fd1 = (model.phi(s + h) - model.phi(s - h)) / (2.0 * h);
      const double fd2 = (model.dphi(s + h) - model.dphi(s - h)) / (2.0 * h);
      ++r.cases;
      if (std::abs(fd1 - model.dphi(s)) > 1e-6 * std::max(1.0, std::abs(fd1)) ||
          std::abs(fd2 - model.d2phi(s)) > 1e-6 * std::max(1.0, std::abs(fd2))) {
        r.passed = false;
        r.detail = model.name() + " derivative mismatch at sigma=" + io::format_double(s);
        return r;
      }
    }
  }
  return r;
}

SuiteResult suite_phi_structure() {
  SuiteResult r{"phi_structure"};
  for (const auto& model :
       {NonlinearityModel::log_quadratic(), NonlinearityModel::arctan_square(), NonlinearityModel::quartic_root()}) {
    ++r.cases;
    const auto v = model_violations(model);
    if (!v.empty()) {
      r.passed = false;
      r.detail = model.name() + ": " + v.front();
      return r;
    }
  }
  return r;
}

SuiteResult suite_sign_measure(const NonlinearityModel& model, Rng& rng) {
  SuiteResult r{"sign_measure"};
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = rng.index(2, 64);
    const GridFunction u = random_datum(n, rng, -1.0, 1.0);
    for (auto bc : {BoundaryCondition::NeumannNeumann, BoundaryCondition::DirichletNeumann}) {
      ++r.cases;
      for (double s : sign_measure(u, model, bc)) {
        if (!(s >= 0.0)) {
          r.passed = false;
          r.detail = "negative component " + io::format_double(s) + " (model " + model.name() + ")";
          return r;
        }
      }
    }
  }
  return r;
}

SuiteResult suite_tv_m_plus(Rng& rng, int trials) {
  SuiteResult r{"tv_m_plus_oracle"};
  for (int k = 0; k < trials; ++k) {
    const std::size_t n = rng.index(1, 12);
    const int m = static_cast<int>(rng.index(1, 3));
    const GridFunction u = random_datum(n, rng, -1.0, 1.0);
    ++r.cases;
    const double dp = tv_m_plus(u, m), brute = oracle::tv_m_plus_brute(u, m);
    if (dp != brute) {
      r.passed = false;
      r.detail = "n=" + std::to_string(n) + " m=" + std::to_string(m) + ": dp " + io::format_double(dp) +
                 " vs brute " + io::format_double(brute);
      return r;
    }
  }
  return r;
}

SuiteResult suite_integrator_oracle() {
  SuiteResult r{"integrator_oracle"};
  const auto model = NonlinearityModel::log_quadratic();
  for (std::size_t n = 3; n <= 8; ++n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = (i % 2 == 0) ? 0.0 : 0.3;
    const GridFunction u0(v);
    for (auto bc : {BoundaryCondition::NeumannNeumann, BoundaryCondition::DirichletNeumann}) {
      IntegrateOptions o;
      o.samples = 2;
      const auto traj = integrate(u0, model, bc, 0.1, o);
      const auto ref = oracle::rk4(u0, model, bc, 0.1, 1e-6);
      double err = 0.0;
      for (std::size_t i = 1; i <= n; ++i) err = std::max(err, std::abs(traj.states.back()(i) - ref(i)));
      ++r.cases;
      if (err > 1e-6) {
        r.passed = false;
        r.detail = "n=" + std::to_string(n) + " bc=" + std::string(to_string(bc)) + " error " + io::format_double(err);
        return r;
      }
    }
  }
  return r;
}

/// Random-data runs under NeumannNeumann: time monotonicity, dissipation,
/// mass conservation, the v-field identity and the sign condition on states.
std::vector<SuiteResult> suite_flow_runs(Rng& rng, int runs, std::size_t n) {
  SuiteResult mono{"monotonicity"}, diss{"dissipation_bound"}, mass{"mass_conservation"},
      uv{"uv_identity"}, sign{"sign_condition_on_states"};
  const auto model = NonlinearityModel::log_quadratic();
  for (int k = 0; k < runs; ++k) {
    const GridFunction u0 = random_datum(n, rng, -1.0, 1.0);
    const auto traj = integrate(u0, model, BoundaryCondition::NeumannNeumann, 1.0);
    const std::string tag = "run " + std::to_string(k);
    ++mono.cases;
    ++diss.cases;
    ++mass.cases;
    ++uv.cases;
    ++sign.cases;
    if (!traj.diagnostics.clean() && mono.passed) {
      mono.passed = false;
      const auto& v = traj.diagnostics.violations.front();
      mono.detail = tag + ": " + v.quantity + " increased by " + io::format_double(v.amount);
    }
    if (!dissipation_ok(traj) && diss.passed) {
      diss.passed = false;
      diss.detail = tag + ": dissipation " + io::format_double(traj.dissipation);
    }
    const double m0 = std::accumulate(u0.values().begin(), u0.values().end(), 0.0) / static_cast<double>(n);
    for (const auto& u : traj.states) {
      const double m = std::accumulate(u.values().begin(), u.values().end(), 0.0) / static_cast<double>(n);
      if (std::abs(m - m0) > 1e-9 * (1.0 + sup_norm(u0)) && mass.passed) {
        mass.passed = false;
        mass.detail = tag + ": mean drift " + io::format_double(m - m0);
      }
    }
    for (const auto& row : uv_residual(traj, model)) {
      if ((row.max_abs_residual > 1e-14 * std::max(1.0, static_cast<double>(n)) || row.ghost_left != 0.0 ||
           row.ghost_right != 0.0) &&
          uv.passed) {
        uv.passed = false;
        uv.detail = tag + ": residual " + io::format_double(row.max_abs_residual);
      }
    }
    if (!sign_condition_holds(traj, model) && sign.passed) {
      sign.passed = false;
      sign.detail = tag;
    }
  }
  return {mono, diss, mass, uv, sign};
}

SuiteResult suite_subcritical(Rng& rng, int runs, std::size_t n) {
  SuiteResult r{"subcritical_preservation"};
  const auto model = NonlinearityModel::log_quadratic();
  for (int k = 0; k < runs; ++k) {
    const GridFunction u0 = random_slope_datum(n, rng, -3.0, model.sigma1());
    const auto traj = integrate(u0, model, BoundaryCondition::NeumannNeumann, 1.0);
    ++r.cases;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& u : traj.states) {
      const auto d = forward_diff(u, BoundaryCondition::NeumannNeumann);
      worst = std::max(worst, *std::max_element(d.begin(), d.end()));
    }
    if (worst > model.sigma1() + 1e-8) {
      r.passed = false;
      r.detail = "run " + std::to_string(k) + ": max slope " + io::format_double(worst);
      return r;
    }
  }
  return r;
}

SuiteResult suite_counterexample_ladder() {
  SuiteResult r{"counterexample_ladder"};
  const auto model = NonlinearityModel::log_quadratic();
  const auto window = bilipschitz_window(model, 0.5);
  const auto p = params_for(100, model, window, 1.0);
  ++r.cases;
  if (!p.admissible) {
    r.passed = false;
    r.detail = "n=100 inadmissible: " + join(p.failed, ", ");
    return r;
  }
  IntegrateOptions o;
  o.method = Integrator::Rosenbrock32;
  o.rtol = 1e-6;
  o.atol = 1e-8;
  const auto traj = integrate(staircase_datum(p, model), model, BoundaryCondition::DirichletNeumann, 1.0, o);
  const auto hyp = check_lemma_hypotheses(traj, p, model);
  const auto ord = check_lemma_conclusion(traj, p);
  if (!hyp.passed() || !ord.holds) {
    r.passed = false;
    r.detail = hyp.passed() ? "ordering crossed" : "hypothesis " + hyp.failures.front().check + " failed";
  }
  return r;
}

NonlinearityModel sign_flipped_log() {
  const auto base = NonlinearityModel::log_quadratic();
  CustomLagrangian l;
  l.name = "log-sign-flip";
  l.phi = [base](double s) { return base.phi(s); };
  l.dphi = [base](double s) { return -base.dphi(s); };
  l.d2phi = [base](double s) { return -base.d2phi(s); };
  l.sigma1 = base.sigma1();
  l.phi2_sup = base.phi2_sup();
  return NonlinearityModel::custom(std::move(l), /*validate=*/false);
}

}  // namespace

// ---------------------------------------------------------------- config API

RunConfig merge_config_json(RunConfig base, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) assign_key(base, it.key(), it.value());
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return merge_config_json(RunConfig{}, text);
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const RunConfig& c, std::ostream& log) {
  validate_common(c);
  const auto model = NonlinearityModel::from_name(c.model);
  const std::size_t n = c.n ? c.n : 256;
  const std::string datum = c.datum.empty() ? "smooth" : c.datum;
  BoundaryCondition bc = parse_boundary_condition(c.bc.value_or("nn"));
  double length = 1.0;
  ArtifactWriter writer(c.out);

  GridFunction u0;
  if (datum == "smooth") {
    u0 = smooth_datum(n, window_of(c, model));
  } else if (datum == "staircase") {
    const auto p = params_for(n, model, window_of(c, model), c.t_end);
    writer.write_json("params.json", io::params_json(p));
    if (!p.admissible) {
      log << "inadmissible ladder at n=" << n << ": " << join(p.failed, ", ") << "\n";
      return kInadmissible;
    }
    u0 = staircase_datum(p, model);
    if (c.odd_reflection) {
      u0 = odd_reflection(u0);
      bc = BoundaryCondition::NeumannNeumann;
      length = 2.0;
    } else {
      if (bc != BoundaryCondition::DirichletNeumann) log << "staircase datum: using dirichlet-neumann\n";
      bc = BoundaryCondition::DirichletNeumann;
    }
  } else if (datum == "constant") {
    u0 = GridFunction(std::vector<double>(n, c.sigma0 / 2.0));
  } else if (datum == "random") {
    Rng rng(c.seed);
    u0 = random_datum(n, rng, -1.0, 1.0);
  } else if (datum == "file") {
    if (c.file.empty()) throw ConfigError("--datum file needs --file");
    const std::string text = io::read_file(c.file);
    u0 = std::filesystem::path(c.file).extension() == ".json" ? grid_from_json(text) : grid_from_csv(text);
  } else {
    throw ConfigError("unknown datum '" + datum + "' (smooth, staircase, constant, random, file)");
  }

  auto opts = options_of(c, Integrator::DormandPrince54, 1e-8);
  opts.length = length;
  Trajectory traj;
  try {
    traj = integrate(u0, model, bc, c.t_end, opts);
  } catch (const IntegrationError& e) {
    writer.write_json("failure.json", failure_json("integration", e.what()));
    log << "integration failed: " << e.what() << "\n";
    return kIntegrationFailure;
  }

  const bool sign_ok = sign_condition_holds(traj, model);
  const bool diss_ok = dissipation_ok(traj);
  json diag = io::diagnostics_json(traj);
  diag["sign_condition"] = sign_ok;
  diag["dissipation_bound_holds"] = diss_ok;
  diag["datum"] = datum;
  writer.write("trajectory.csv", io::trajectory_csv(traj));
  writer.write_json("diagnostics.json", diag);
  const auto idx = plot_indices(traj.times);
  writer.write("plot.gp", io::plot_script({{"trajectory.csv", "u_n", traj.n, length}}, at(traj.times, idx),
                                          "trajectory.png"));

  log << "simulate: n=" << traj.n << " bc=" << to_string(bc) << " samples=" << traj.times.size()
      << " steps=" << traj.stats.accepted << " dissipation=" << io::format_double(traj.dissipation) << "\n";
  if (!traj.diagnostics.clean() || !sign_ok || !diss_ok) {
    for (const auto& v : traj.diagnostics.violations)
      log << "violation: " << v.quantity << " at t=" << v.t << " by " << v.amount << "\n";
    if (!sign_ok) log << "violation: sign condition\n";
    if (!diss_ok) log << "violation: dissipation bound\n";
    return kInvariantViolation;
  }
  return kOk;
}

// ---------------------------------------------------------------- counterexample

int cmd_counterexample(const RunConfig& c, std::ostream& log) {
  validate_common(c);
  const auto model = NonlinearityModel::from_name(c.model);
  const auto window = window_of(c, model);
  const std::size_t n = c.n ? c.n : 100;
  if (c.bc && parse_boundary_condition(*c.bc) != BoundaryCondition::DirichletNeumann)
    log << "counterexample: staircase datum, using dirichlet-neumann\n";
  ArtifactWriter writer(c.out);

  const auto p = params_for(n, model, window, c.t_end);
  writer.write_json("params.json", io::params_json(p));
  if (!p.admissible) {
    log << "inadmissible ladder at n=" << n << ": " << join(p.failed, ", ") << "\n";
    return kInadmissible;
  }

  std::vector<double> probes = c.probes;
  if (probes.empty()) {
    for (double x : {0.1, 0.25, 0.5})
      if (cell_index(n, x) <= p.split()) probes.push_back(x);
  }

  const auto opts = options_of(c, Integrator::Rosenbrock32, 1e-6);
  IntegrateOptions ref_opts = opts;
  ref_opts.method = Integrator::Rosenbrock32;
  ref_opts.rtol = std::min(opts.rtol, 1e-7);
  ref_opts.atol = std::min(opts.atol, 1e-10);

  const auto dn = BoundaryCondition::DirichletNeumann;
  const GridFunction u0 = staircase_datum(p, model);
  Trajectory traj, ref, odd;
  try {
    traj = integrate(u0, model, dn, c.t_end, opts);
    ref = reference_solution(c.n_ref, window, model, c.t_end, dn, ref_opts);
    if (c.odd_reflection) {
      IntegrateOptions o = opts;
      o.length = 2.0;
      odd = integrate(odd_reflection(u0), model, BoundaryCondition::NeumannNeumann, c.t_end, o);
    }
  } catch (const IntegrationError& e) {
    writer.write_json("failure.json", failure_json("integration", e.what()));
    log << "integration failed: " << e.what() << "\n";
    return kIntegrationFailure;
  }

  const auto hyp = check_lemma_hypotheses(traj, p, model);
  const auto ord = check_lemma_conclusion(traj, p);
  const auto kb = key_bounds_report(traj, p, probes);
  const auto gaps = tabulate_gaps({traj}, ref);
  const double bound0 = initial_gap_bound(p);
  const double threshold = derived_gap_threshold(window, gaps);
  const auto gap_check = check_gap_invariants(gaps, bound0 + 1e-12, threshold);
  const bool sign_ok = sign_condition_holds(traj, model) && sign_condition_holds(ref, model);

  const std::string tag = "n" + std::to_string(n);
  writer.write_json("hypotheses.json", io::check_report_json(hyp));
  writer.write_json("conclusion.json", io::ordering_json(ord));
  writer.write_json("key_bounds.json", io::key_bounds_json(kb));
  writer.write("trajectory_" + tag + ".csv", io::trajectory_csv(traj));
  json diag = io::diagnostics_json(traj);
  diag["sign_condition"] = sign_ok;
  writer.write_json("diagnostics_" + tag + ".json", diag);
  const auto idx = plot_indices(traj.times);
  writer.write("barrier_" + tag + ".csv", barrier_csv(p, at(traj.times, idx)));
  writer.write("reference.csv", io::trajectory_csv(ref, idx));
  writer.write("gap.csv", io::gap_table_csv(gaps, 0));
  json gj = io::gap_report_json(gaps);
  gj["initial_gap_bound"] = bound0;
  gj["threshold"] = threshold;
  gj["invariants_hold"] = gap_check.ok;
  gj["messages"] = gap_check.messages;
  writer.write_json("gap.json", gj);
  writer.write("plot.gp", io::plot_script({{"trajectory_" + tag + ".csv", "u_n", n, 1.0},
                                           {"barrier_" + tag + ".csv", "barrier v_n", n, 1.0},
                                           {"reference.csv", "reference", c.n_ref, 1.0}},
                                          at(traj.times, idx), "counterexample.png"));

  bool odd_ok = true;
  if (c.odd_reflection) {
    const auto rep = odd_reflection_report(odd, p);
    odd_ok = rep.holds();
    writer.write_json("odd_reflection.json", {{"max_odd_defect", rep.max_odd_defect},
                                              {"min_edge_margin", rep.min_edge_margin},
                                              {"edge_at_end", rep.edge_at_end},
                                              {"holds", odd_ok}});
  }

  const double edge = traj.states.back()(n);
  log << "counterexample: n=" << n << " m=" << p.m << " mu=" << p.mu << " u(T,n)=" << io::format_double(edge)
      << " reference tv(T)=" << io::format_double(gaps.ref.back().tv)
      << " gap tv(T)=" << io::format_double(gaps.gaps.back().tv) << "\n";
  bool ok = true;
  for (const auto& chk : hyp.checks) {
    if (!chk.passed()) {
      ok = false;
      log << "hypothesis failed: " << chk.name << " margin " << io::format_double(chk.min_margin) << " at t="
          << chk.t_at_min << " i=" << chk.i_at_min << "\n";
    } else if (chk.degenerate) {
      log << "degenerate pass: " << chk.name << "\n";
    }
  }
  if (!ord.holds) {
    ok = false;
    log << "ordering crossed at t=" << ord.first_crossing_t << " i=" << ord.first_crossing_i << "\n";
  }
  if (!kb.holds()) {
    ok = false;
    log << "key bounds violated\n";
  }
  if (!gap_check.ok) {
    ok = false;
    for (const auto& m : gap_check.messages) log << "gap: " << m << "\n";
  }
  if (!sign_ok) {
    ok = false;
    log << "sign condition violated\n";
  }
  if (!odd_ok) {
    ok = false;
    log << "odd reflection check failed\n";
  }
  return ok ? kOk : kInvariantViolation;
}

// ---------------------------------------------------------------- converge

int cmd_converge(const RunConfig& c, std::ostream& log) {
  validate_common(c);
  if (c.ns.empty()) throw ConfigError("converge: --ns is empty");
  if (c.ns.front() < 2) throw ConfigError("converge: every grid size must be at least 2");
  for (std::size_t k = 1; k < c.ns.size(); ++k)
    if (c.ns[k] <= c.ns[k - 1]) throw ConfigError("converge: --ns must be strictly increasing");
  const auto model = NonlinearityModel::from_name(c.model);
  const auto window = window_of(c, model);
  const std::string datum = c.datum.empty() ? "staircase" : c.datum;
  const auto bc = datum == "staircase" ? BoundaryCondition::DirichletNeumann
                                       : parse_boundary_condition(c.bc.value_or("dn"));
  ArtifactWriter writer(c.out);

  std::vector<CounterexampleParams> params;
  DatumBuilder builder;
  if (datum == "staircase") {
    for (std::size_t n : c.ns) {
      params.push_back(params_for(n, model, window, c.t_end));
      if (!params.back().admissible) {
        log << "inadmissible ladder at n=" << n << ": " << join(params.back().failed, ", ") << "\n";
        return kInadmissible;
      }
    }
    builder = [&](std::size_t n) {
      for (const auto& p : params)
        if (p.n == n) return staircase_datum(p, model);
      throw ConfigError("converge: no parameters for n=" + std::to_string(n));
    };
  } else if (datum == "smooth") {
    builder = [&](std::size_t n) { return smooth_datum(n, window); };
  } else {
    throw ConfigError("converge: datum must be staircase or smooth");
  }

  StudyConfig study;
  study.ns = c.ns;
  study.bc = bc;
  study.t_end = c.t_end;
  study.options = options_of(c, Integrator::Rosenbrock32, 1e-6);
  IntegrateOptions ref_opts = study.options;
  ref_opts.method = Integrator::Rosenbrock32;
  ref_opts.rtol = std::min(ref_opts.rtol, 1e-7);
  ref_opts.atol = std::min(ref_opts.atol, 1e-10);

  Trajectory ref;
  try {
    ref = reference_solution(c.n_ref, window, model, c.t_end, bc, ref_opts);
  } catch (const IntegrationError& e) {
    writer.write_json("failure.json", failure_json("integration", e.what()));
    log << "reference integration failed: " << e.what() << "\n";
    return kIntegrationFailure;
  }
  const auto rep = convergence_study(study, builder, model, ref);

  json gj = io::gap_report_json(rep);
  writer.write("gap.csv", io::gap_report_csv(rep));
  for (std::size_t k = 0; k < rep.ns.size(); ++k)
    writer.write("gap_n" + std::to_string(rep.ns[k]) + ".csv", io::gap_table_csv(rep, k));
  if (!rep.failed_ns.empty()) {
    writer.write_json("gap.json", gj);
    log << "integration failed for n=" << rep.failed_ns.front() << ": " << rep.failure << "\n";
    return kIntegrationFailure;
  }

  bool ok = true;
  std::vector<std::string> messages;
  // Lower semicontinuity on the two largest grids.
  for (std::size_t j = 0; j < rep.gaps.size(); ++j) {
    if (rep.gaps[j].sup < -1e-3 || rep.gaps[j].tv < -1e-3) {
      ok = false;
      messages.push_back("liminf inequality violated at t=" + io::format_double(rep.times[j]));
    }
  }
  if (datum == "staircase") {
    const auto& p = params[params.size() >= 2 ? params.size() - 2 : 0];
    const double bound0 = initial_gap_bound(p);
    const double threshold = derived_gap_threshold(window, rep);
    const auto chk = check_gap_invariants(rep, bound0 + 1e-12, threshold);
    gj["initial_gap_bound"] = bound0;
    gj["threshold"] = threshold;
    if (!chk.ok) ok = false;
    messages.insert(messages.end(), chk.messages.begin(), chk.messages.end());
  } else {
    const std::size_t last = rep.times.size() - 1;
    for (std::size_t k = 1; k < rep.ns.size(); ++k) {
      const double prev = std::abs(rep.sup_tv[k - 1][last].tv - rep.ref[last].tv);
      const double cur = std::abs(rep.sup_tv[k][last].tv - rep.ref[last].tv);
      if (cur > prev) {
        ok = false;
        messages.push_back("tv gap grows from n=" + std::to_string(rep.ns[k - 1]) + " to n=" +
                           std::to_string(rep.ns[k]));
      }
    }
  }
  gj["invariants_hold"] = ok;
  gj["messages"] = messages;
  writer.write_json("gap.json", gj);
  for (std::size_t k = 0; k < rep.ns.size(); ++k)
    log << "converge: n=" << rep.ns[k] << " tv(T)=" << io::format_double(rep.sup_tv[k].back().tv)
        << " l2(T)=" << io::format_double(rep.l2_to_ref[k].back()) << "\n";
  log << "reference tv(T)=" << io::format_double(rep.ref.back().tv) << "\n";
  for (const auto& m : messages) log << "gap: " << m << "\n";
  return ok ? kOk : kInvariantViolation;
}

// ---------------------------------------------------------------- selftest

int cmd_selftest(const RunConfig& c, std::ostream& log) {
  validate_common(c);
  Rng rng(c.seed);
  const NonlinearityModel under_test =
      c.inject_fault == "sign-flip" ? sign_flipped_log() : NonlinearityModel::log_quadratic();
  const int trials = c.trials > 0 ? c.trials : 500;

  std::vector<SuiteResult> results;
  results.push_back(suite_phi_finite_differences(rng));
  results.push_back(suite_phi_structure());
  results.push_back(suite_sign_measure(under_test, rng));
  results.push_back(suite_tv_m_plus(rng, trials));
  results.push_back(suite_integrator_oracle());
  for (auto& r : suite_flow_runs(rng, std::max(1, trials / 50), 64)) results.push_back(std::move(r));
  results.push_back(suite_subcritical(rng, std::max(1, trials / 100), 64));
  results.push_back(suite_counterexample_ladder());

  json report = json::array();
  std::vector<std::string> failed;
  for (const auto& r : results) {
    log << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.cases << " cases)";
    if (!r.detail.empty()) log << ": " << r.detail;
    log << "\n";
    report.push_back({{"suite", r.name}, {"passed", r.passed}, {"cases", r.cases}, {"detail", r.detail}});
    if (!r.passed) failed.push_back(r.name);
  }
  ArtifactWriter writer(c.out);
  writer.write_json("selftest.json", {{"seed", c.seed}, {"suites", report}, {"failed", failed}});
  if (!failed.empty()) {
    log << "selftest failed: " << join(failed, ", ") << "\n";
    return kInvariantViolation;
  }
  return kOk;
}

// ---------------------------------------------------------------- dispatch

namespace {

/// Flag storage for one subcommand; values are applied only when given.
struct Flags {
  std::string model, bc, method, datum, file, out, inject_fault, config;
  std::size_t n = 0, n_ref = 0;
  std::vector<std::size_t> ns;
  std::vector<double> probes;
  double sigma0 = 0, lambda0 = 0, Lambda0 = 0, t_end = 0, rtol = 0, atol = 0, c_step = 0;
  int samples = 0, trials = 0;
  std::uint64_t seed = 0;
  bool odd_reflection = false;
  std::vector<std::pair<std::string, CLI::Option*>> opts;

  void add(CLI::App* app) {
    auto reg = [&](const std::string& name, CLI::Option* o) { opts.emplace_back(name, o); };
    reg("config", app->add_option("--config", config, "flat JSON config; flags override its values"));
    reg("model", app->add_option("--model", model, "log | atan2 | quartic"));
    reg("bc", app->add_option("--bc", bc, "nn | dn"));
    reg("n", app->add_option("--n", n, "grid size"));
    reg("ns", app->add_option("--ns", ns, "grid sizes for converge")->delimiter(','));
    reg("sigma0", app->add_option("--sigma0", sigma0, "upper end of the subcritical slope window"));
    reg("lambda0", app->add_option("--lambda0", lambda0, "override the window's lower bound on phi''"));
    reg("Lambda0", app->add_option("--Lambda0", Lambda0, "override the window's upper bound on phi''"));
    reg("t_end", app->add_option("--t-end", t_end, "final time"));
    reg("samples", app->add_option("--samples", samples, "number of uniform sample times"));
    reg("rtol", app->add_option("--rtol", rtol, "relative tolerance"));
    reg("atol", app->add_option("--atol", atol, "absolute tolerance (default rtol/100)"));
    reg("method", app->add_option("--method", method, "dopri54 | ros3p"));
    reg("c_step", app->add_option("--c-step", c_step, "explicit step cap constant"));
    reg("datum", app->add_option("--datum", datum, "smooth | staircase | constant | random | file"));
    reg("file", app->add_option("--file", file, "datum file (CSV i,value or JSON)"));
    reg("out", app->add_option("--out", out, "output directory"));
    reg("seed", app->add_option("--seed", seed, "seed for randomized suites and data"));
    reg("n_ref", app->add_option("--n-ref", n_ref, "reference grid size"));
    reg("odd_reflection", app->add_flag("--odd-reflection", odd_reflection, "run the doubled odd grid"));
    reg("probes", app->add_option("--probes", probes, "x probes for the key bounds")->delimiter(','));
    reg("inject_fault", app->add_option("--inject-fault", inject_fault, "sign-flip"));
    reg("trials", app->add_option("--trials", trials, "draws per randomized selftest suite"));
  }

  bool given(const std::string& name) const {
    for (const auto& [k, o] : opts)
      if (k == name) return o->count() > 0;
    return false;
  }

  RunConfig resolve() const {
    RunConfig c = given("config") ? load_config(config) : RunConfig{};
    if (given("model")) c.model = model;
    if (given("bc")) c.bc = bc;
    if (given("n")) {
      if (n == 0) throw ConfigError("--n must be positive");
      c.n = n;
    }
    if (given("ns")) c.ns = ns;
    if (given("sigma0")) c.sigma0 = sigma0;
    if (given("lambda0")) c.lambda0 = lambda0;
    if (given("Lambda0")) c.Lambda0 = Lambda0;
    if (given("t_end")) c.t_end = t_end;
    if (given("samples")) c.samples = samples;
    if (given("rtol")) c.rtol = rtol;
    if (given("atol")) c.atol = atol;
    if (given("method")) c.method = method;
    if (given("c_step")) c.c_step = c_step;
    if (given("datum")) c.datum = datum;
    if (given("file")) c.file = file;
    if (given("out")) c.out = out;
    if (given("seed")) c.seed = seed;
    if (given("n_ref")) c.n_ref = n_ref;
    if (given("odd_reflection")) c.odd_reflection = odd_reflection;
    if (given("probes")) c.probes = probes;
    if (given("inject_fault")) c.inject_fault = inject_fault;
    if (given("trials")) c.trials = trials;
    return c;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-discrete Perona-Malik flow: simulation, counterexample and convergence studies"};
  app.require_subcommand(1);
  struct Entry {
    CLI::App* app;
    Flags flags;
    std::function<int(const RunConfig&, std::ostream&)> fn;
  };
  std::vector<Entry> entries;
  entries.reserve(4);
  entries.push_back({app.add_subcommand("simulate", "integrate one datum and record diagnostics"), {}, cmd_simulate});
  entries.push_back({app.add_subcommand("counterexample", "staircase run against the barrier"), {}, cmd_counterexample});
  entries.push_back({app.add_subcommand("converge", "cross-n study against a fine reference"), {}, cmd_converge});
  entries.push_back({app.add_subcommand("selftest", "randomized invariant suites"), {}, cmd_selftest});
  for (auto& e : entries) e.flags.add(e.app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kConfigError;
  }

  for (auto& e : entries) {
    if (!e.app->parsed()) continue;
    try {
      return e.fn(e.flags.resolve(), out);
    } catch (const IntegrationError& ex) {
      err << "integration error: " << ex.what() << "\n";
      return kIntegrationFailure;
    } catch (const std::exception& ex) {
      err << "error: " << ex.what() << "\n";
      return kConfigError;
    }
  }
  return kConfigError;
}

}  // namespace pmflow::cli
