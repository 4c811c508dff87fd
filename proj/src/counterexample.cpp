#include "pmflow/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pmflow/errors.hpp"

namespace pmflow {

CounterexampleParams params_for(std::size_t n, const NonlinearityModel& model,
                                const SubcriticalWindow& window, double T) {
  if (n < 2) throw ConfigError("params_for: n must be at least 2");
  if (!(T > 0.0)) throw ConfigError("params_for: T must be positive");
  CounterexampleParams p;
  p.n = n;
  p.window = window;
  p.T = T;
  const double nd = static_cast<double>(n);
  const double s0 = window.sigma0;
  p.h = 1.0 / std::sqrt(nd);
  const double nh = nd * p.h;

  if (nh < model.sigma1()) {
    p.failed = {"supercritical_jump", "split_index"};
    return p;
  }
  p.g = conjugate_slope(model, nh);
  p.mu = static_cast<long>(std::ceil(nd * std::sqrt(p.g))) + 2;
  p.m = static_cast<long>(n) - p.mu;
  p.A = model.dphi(nh) + s0 * window.lambda0 / (2.0 * nd);
  p.C = nd * p.g / (2.0 * static_cast<double>(p.mu) - 3.0);
  p.E = 2.0 * window.Lambda0 * p.C + 1.0 / nd;
  p.B = p.A + p.C + p.h + std::sqrt(p.E);
  p.J = p.B + 1.0 / nd;

  if (!(std::numbers::pi / 2.0 * (s0 / 2.0) + p.A <= s0)) p.failed.push_back("slope_bound");
  if (!(2.0 * p.C <= s0)) p.failed.push_back("quadratic_bound");
  if (!(nh >= model.sigma1())) p.failed.push_back("supercritical_jump");
  if (!(std::sqrt(p.E) - p.E * T >= 0.0)) p.failed.push_back("time_horizon");
  if (!(p.m > 0 && p.m < static_cast<long>(n))) p.failed.push_back("split_index");
  p.admissible = p.failed.empty();
  return p;
}

std::size_t find_admissible_n(const NonlinearityModel& model, const SubcriticalWindow& window,
                              double T, std::size_t n_min, std::size_t n_max) {
  for (std::size_t n = std::max<std::size_t>(n_min, 2); n <= n_max; ++n)
    if (params_for(n, model, window, T).admissible) return n;
  return 0;
}

GridFunction staircase_datum(const CounterexampleParams& p, const NonlinearityModel&) {
  if (!p.admissible) throw ConfigError("staircase_datum: inadmissible parameters");
  const double s0 = p.window.sigma0;
  const double nd = static_cast<double>(p.n);
  std::vector<double> v(p.n);
  for (std::size_t i = 1; i <= p.n; ++i)
    v[i - 1] = i <= p.split() ? s0 / 2.0 * std::sin(std::numbers::pi / 2.0 * (i / nd))
                              : s0 / 2.0 + p.J;
  return GridFunction(std::move(v));
}

GridFunction smooth_datum(std::size_t n, const SubcriticalWindow& window) {
  if (n == 0) throw ConfigError("smooth_datum: n must be positive");
  const double nd = static_cast<double>(n);
  std::vector<double> v(n);
  for (std::size_t i = 1; i <= n; ++i)
    v[i - 1] = window.sigma0 / 2.0 * std::sin(std::numbers::pi / 2.0 * (i / nd));
  return GridFunction(std::move(v));
}

double barrier(const CounterexampleParams& p, double t, std::size_t i) {
  const double s0 = p.window.sigma0;
  const double x = static_cast<double>(i) / static_cast<double>(p.n);
  if (i <= p.split())
    return s0 / 2.0 * std::sin(std::numbers::pi / 2.0 * x) * std::exp(-p.window.lambda0 * t) +
           p.A * x;
  const double r = 1.0 - x;
  return s0 / 2.0 + p.B - p.C * r * r - p.E * t;
}

double barrier_rate(const CounterexampleParams& p, double t, std::size_t i) {
  if (i <= p.split()) {
    const double x = static_cast<double>(i) / static_cast<double>(p.n);
    const double l0 = p.window.lambda0;
    return -l0 * p.window.sigma0 / 2.0 * std::sin(std::numbers::pi / 2.0 * x) *
           std::exp(-l0 * t);
  }
  return -p.E;
}

GridFunction barrier_state(const CounterexampleParams& p, double t) {
  std::vector<double> v(p.n);
  for (std::size_t i = 1; i <= p.n; ++i) v[i - 1] = barrier(p, t, i);
  return GridFunction(std::move(v));
}

bool CheckReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const MarginCheck& c) { return c.passed(); });
}

const MarginCheck* CheckReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

class CheckCollector {
 public:
  explicit CheckCollector(CheckReport& report) : report_(report) {}

  MarginCheck& get(const std::string& name, bool strict) {
    for (auto& c : report_.checks)
      if (c.name == name) return c;
    MarginCheck c;
    c.name = name;
    c.strict = strict;
    c.min_margin = std::numeric_limits<double>::infinity();
    report_.checks.push_back(c);
    return report_.checks.back();
  }

  void add(const std::string& name, bool strict, double margin, double t, std::size_t i) {
    MarginCheck& c = get(name, strict);
    ++c.evaluations;
    if (margin < c.min_margin || std::isnan(margin)) {
      c.min_margin = margin;
      c.t_at_min = t;
      c.i_at_min = i;
    }
    const bool bad = strict ? !(margin > 0.0) : !(margin >= 0.0);
    if (bad && report_.failures.size() < 1000) report_.failures.push_back({name, t, i, margin});
  }

  void finish() {
    for (auto& c : report_.checks) c.degenerate = c.strict && c.passed() && c.min_margin < kDegenerateMargin;
  }

 private:
  CheckReport& report_;
};

}  // namespace

CheckReport check_lemma_hypotheses(const Trajectory& traj, const CounterexampleParams& p,
                                   const NonlinearityModel& model) {
  if (!p.admissible) throw ConfigError("check_lemma_hypotheses: inadmissible parameters");
  if (traj.n != p.n) throw ConfigError("check_lemma_hypotheses: grid size mismatch");
  const BoundaryCondition bc = BoundaryCondition::DirichletNeumann;
  const std::size_t n = p.n, m = p.split();
  const double nh = static_cast<double>(n) * p.h;
  CheckReport report;
  CheckCollector col(report);

  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double t = traj.times[k];
    const GridFunction& u = traj.states[k];
    const GridFunction v = barrier_state(p, t);
    const auto du = forward_diff(u, bc);
    const auto dv = forward_diff(v, bc);

    for (std::size_t i = 1; i < n; ++i) {
      col.add("space_monotonicity_u", false, u(i + 1) - u(i), t, i);
      col.add("space_monotonicity_v", false, v(i + 1) - v(i), t, i);
    }
    if (k == 0) {
      for (std::size_t i = 1; i <= n; ++i) {
        if (i <= m) col.add("initial_order_below", true, v(i) - u(i), t, i);
        else col.add("initial_order_above", true, u(i) - v(i), t, i);
      }
    }
    for (std::size_t i = 1; i <= n; ++i) {
      if (i == m) continue;
      col.add("subcritical_u", false, model.sigma1() - du[i], t, i);
      col.add("subcritical_v", false, p.window.sigma0 - dv[i], t, i);
    }
    col.add("supercritical_jump", false, dv[m] - nh, t, m);
    col.add("jump_threshold", false, nh - model.sigma1(), t, m);

    const auto flow = rhs(v, model, bc);
    for (std::size_t i = 1; i <= n; ++i) {
      const double residual = barrier_rate(p, t, i) - flow[i - 1];
      if (i <= m) col.add("supersolution", true, residual, t, i);
      else col.add("subsolution", true, -residual, t, i);
    }
    col.add("supersolution_split_slack", false, model.dphi(nh) - model.dphi(dv[m]), t, m);
  }
  const double nd = static_cast<double>(n);
  col.add("subsolution_edge_slack", true, p.E - nd * model.dphi(p.C / nd), 0.0, n);
  col.finish();
  return report;
}

OrderingReport check_lemma_conclusion(const Trajectory& traj, const CounterexampleParams& p) {
  if (traj.n != p.n) throw ConfigError("check_lemma_conclusion: grid size mismatch");
  OrderingReport r;
  r.min_separation = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double t = traj.times[k];
    const GridFunction& u = traj.states[k];
    for (std::size_t i = 1; i <= p.n; ++i) {
      const double v = barrier(p, t, i);
      const double sep = i <= p.split() ? v - u(i) : u(i) - v;
      if (sep < r.min_separation) {
        r.min_separation = sep;
        r.t_at_min = t;
        r.i_at_min = i;
      }
      if (!(sep > 0.0) && !r.crossed) {
        r.crossed = true;
        r.first_crossing_t = t;
        r.first_crossing_i = i;
      }
    }
  }
  r.holds = !r.crossed;
  return r;
}

KeyBoundsReport key_bounds_report(const Trajectory& traj, const CounterexampleParams& p,
                                  const std::vector<double>& x_probes) {
  if (traj.n != p.n) throw ConfigError("key_bounds_report: grid size mismatch");
  KeyBoundsReport rep;
  rep.min_upper_margin = std::numeric_limits<double>::infinity();
  rep.min_lower_margin = std::numeric_limits<double>::infinity();
  for (double x : x_probes) {
    if (!(x > 0.0 && x < 1.0)) throw ConfigError("key_bounds_report: probe outside (0, 1)");
    if (cell_index(p.n, x) > p.split())
      throw ConfigError("key_bounds_report: probe beyond the split index");
  }
  const double s0 = p.window.sigma0;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double t = traj.times[k];
    const GridFunction& u = traj.states[k];
    const double edge = u(p.n);
    const double lower = s0 / 2.0 + p.B - p.E * t;
    for (double x : x_probes) {
      KeyBoundRow row;
      row.t = t;
      row.x = x;
      row.i = cell_index(p.n, x);
      row.u = u(row.i);
      row.upper = barrier(p, t, row.i);
      row.upper_margin = row.upper - row.u;
      row.u_edge = edge;
      row.lower = lower;
      row.lower_margin = edge - lower;
      rep.min_upper_margin = std::min(rep.min_upper_margin, row.upper_margin);
      rep.min_lower_margin = std::min(rep.min_lower_margin, row.lower_margin);
      rep.rows.push_back(row);
    }
  }
  return rep;
}

OddReflectionReport odd_reflection_report(const Trajectory& traj, const CounterexampleParams& p) {
  if (traj.n != 2 * p.n) throw ConfigError("odd_reflection_report: expected a doubled grid");
  OddReflectionReport r;
  r.sigma0 = p.window.sigma0;
  r.min_edge_margin = std::numeric_limits<double>::infinity();
  const std::size_t N = traj.n;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const GridFunction& w = traj.states[k];
    for (std::size_t i = 1; i <= p.n; ++i)
      r.max_odd_defect = std::max(r.max_odd_defect, std::abs(w(i) + w(N + 1 - i)));
    const double lower = p.window.sigma0 / 2.0 + p.B - p.E * traj.times[k];
    r.min_edge_margin = std::min(r.min_edge_margin, w(N) - lower);
  }
  if (!traj.states.empty()) r.edge_at_end = traj.states.back()(N);
  return r;
}

}  // namespace pmflow
