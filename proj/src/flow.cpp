#include "pmflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "pmflow/errors.hpp"
#include "semi_discrete_system.hpp"

namespace pmflow {

std::vector<double> rhs(const GridFunction& u, const NonlinearityModel& model, BoundaryCondition bc,
                        double length) {
  SemiDiscreteSystem sys(model, bc, u.size(), length);
  std::vector<double> out(u.size());
  sys.eval(u.values(), out);
  return out;
}

double dpm_energy(const GridFunction& u, const NonlinearityModel& model, BoundaryCondition bc,
                  double length) {
  const auto d = forward_diff(u, bc, length);
  const double h = length / static_cast<double>(u.size());
  // d[n] is the Neumann ghost jump and contributes phi(0) = 0.
  const std::size_t first = bc == BoundaryCondition::DirichletNeumann ? 0 : 1;
  double s = 0.0;
  for (std::size_t i = first; i < d.size(); ++i) s += model.phi(d[i]);
  return h * s;
}

std::string_view to_string(Integrator method) {
  return method == Integrator::DormandPrince54 ? "dopri54" : "ros3p";
}

Integrator parse_integrator(std::string_view text) {
  if (text == "dopri54" || text == "rk45") return Integrator::DormandPrince54;
  if (text == "ros3p" || text == "rosenbrock") return Integrator::Rosenbrock32;
  throw std::invalid_argument("unknown integrator '" + std::string(text) + "'");
}

DiagnosticsTable run_diagnostics(const Trajectory& traj, const NonlinearityModel& model,
                                 double tol) {
  DiagnosticsTable table;
  const bool dirichlet = traj.bc == BoundaryCondition::DirichletNeumann;
  const double s1 = model.sigma1();

  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const GridFunction& u = traj.states[k];
    DiagnosticRecord r;
    r.t = traj.times[k];
    const auto v = u.values();
    r.max = *std::max_element(v.begin(), v.end());
    r.min = *std::min_element(v.begin(), v.end());
    if (dirichlet) {
      r.max = std::max(r.max, 0.0);
      r.min = std::min(r.min, 0.0);
    }
    const auto pm = tv_pm(u, traj.bc);
    r.tv = tv(u, traj.bc);
    r.tv_plus = pm.plus;
    r.tv_minus = pm.minus;
    r.energy = dpm_energy(u, model, traj.bc, traj.length);
    const auto d = forward_diff(u, traj.bc, traj.length);
    r.subcritical.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      r.subcritical[i] = d[i] <= s1 ? 1 : 0;
      r.subcritical_count += r.subcritical[i];
    }
    table.records.push_back(std::move(r));
  }
  if (table.records.empty()) return table;

  struct Running {
    const char* name;
    double DiagnosticRecord::*field;
    double sign;  // +1: nonincreasing, -1: nondecreasing
    double best;
  };
  const DiagnosticRecord& first = table.records.front();
  Running tracked[] = {
      {"max", &DiagnosticRecord::max, 1.0, first.max},
      {"min", &DiagnosticRecord::min, -1.0, -first.min},
      {"tv", &DiagnosticRecord::tv, 1.0, first.tv},
      {"tv_plus", &DiagnosticRecord::tv_plus, 1.0, first.tv_plus},
      {"tv_minus", &DiagnosticRecord::tv_minus, 1.0, first.tv_minus},
      {"energy", &DiagnosticRecord::energy, 1.0, first.energy},
  };

  const auto v0 = traj.states.front().values();
  const bool monotone_datum = std::is_sorted(v0.begin(), v0.end());

  for (std::size_t k = 1; k < table.records.size(); ++k) {
    const DiagnosticRecord& r = table.records[k];
    for (auto& q : tracked) {
      const double value = q.sign * (r.*q.field);
      if (value > q.best + tol) table.violations.push_back({q.name, r.t, value - q.best});
      q.best = std::min(q.best, value);
    }
    const DiagnosticRecord& prev = table.records[k - 1];
    const auto d = forward_diff(traj.states[k], traj.bc, traj.length);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (prev.subcritical[i] && d[i] > s1 + tol) {
        table.violations.push_back({"subcritical_region", r.t, d[i] - s1});
        break;
      }
    }
    if (monotone_datum) {
      const auto v = traj.states[k].values();
      for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] - v[i - 1] < -tol) {
          table.violations.push_back({"space_monotonicity", r.t, v[i - 1] - v[i]});
          break;
        }
      }
    }
  }
  return table;
}

}  // namespace pmflow
