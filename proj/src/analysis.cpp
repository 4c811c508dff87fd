#include "pmflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include "pmflow/errors.hpp"

namespace pmflow {

std::vector<double> v_field_with_ghosts(const GridFunction& u, const NonlinearityModel& model,
                                        BoundaryCondition bc, double length) {
  const auto d = forward_diff(u, bc, length);
  std::vector<double> v(d.size());
  model.dphi(d, v);
  return v;
}

std::vector<double> v_field(const GridFunction& u, const NonlinearityModel& model,
                            BoundaryCondition bc, double length) {
  auto v = v_field_with_ghosts(u, model, bc, length);
  return {v.begin() + 1, v.end()};
}

std::vector<double> sign_measure(const GridFunction& u, const NonlinearityModel& model,
                                 BoundaryCondition bc, double length) {
  const auto d = forward_diff(u, bc, length);
  std::vector<double> out(u.size());
  for (std::size_t i = 1; i <= u.size(); ++i) out[i - 1] = d[i] * model.dphi(d[i]);
  return out;
}

bool sign_condition_holds(const Trajectory& traj, const NonlinearityModel& model) {
  for (const auto& u : traj.states)
    for (double s : sign_measure(u, model, traj.bc, traj.length))
      if (!(s >= 0.0)) return false;
  return true;
}

Trajectory reference_solution(std::size_t n_ref, const SubcriticalWindow& window,
                              const NonlinearityModel& model, double t_end, BoundaryCondition bc,
                              std::optional<IntegrateOptions> opts) {
  IntegrateOptions o;
  if (opts) {
    o = *opts;
  } else {
    o.method = Integrator::Rosenbrock32;
    o.rtol = 1e-7;
    o.atol = 1e-10;
  }
  return integrate(smooth_datum(n_ref, window), model, bc, t_end, o);
}

GapReport tabulate_gaps(const std::vector<Trajectory>& runs, const Trajectory& reference) {
  GapReport rep;
  const auto& times = reference.times;
  rep.times = times;
  for (const auto& traj : runs) {
    if (traj.times.size() != times.size())
      throw ConfigError("tabulate_gaps: sample times differ from the reference run");
    for (std::size_t j = 0; j < times.size(); ++j)
      if (std::abs(traj.times[j] - times[j]) > 1e-12 * (1.0 + times[j]))
        throw ConfigError("tabulate_gaps: sample times differ from the reference run");
  }
  for (std::size_t j = 0; j < times.size(); ++j)
    rep.ref.push_back({sup_norm(reference.states[j]), tv(reference.states[j], reference.bc)});

  for (const auto& traj : runs) {
    rep.ns.push_back(traj.n);
    std::vector<double> l2;
    std::vector<SupTv> st;
    for (std::size_t j = 0; j < times.size(); ++j) {
      l2.push_back(lp_distance(traj.states[j], reference.states[j], 2.0));
      st.push_back({sup_norm(traj.states[j]), tv(traj.states[j], traj.bc)});
    }
    rep.l2_to_ref.push_back(std::move(l2));
    rep.sup_tv.push_back(std::move(st));
  }

  const std::size_t count = rep.ns.size();
  for (std::size_t j = 0; j < times.size() && count > 0; ++j) {
    SupTv g{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (std::size_t k = count >= 2 ? count - 2 : 0; k < count; ++k) {
      g.sup = std::min(g.sup, rep.sup_tv[k][j].sup - rep.ref[j].sup);
      g.tv = std::min(g.tv, rep.sup_tv[k][j].tv - rep.ref[j].tv);
    }
    rep.gaps.push_back(g);
    if (count >= 2) {
      const double nm = static_cast<double>(rep.ns[count - 2]);
      const double nn = static_cast<double>(rep.ns[count - 1]);
      const double a = rep.sup_tv[count - 2][j].tv, b = rep.sup_tv[count - 1][j].tv;
      rep.richardson_tv.push_back(b + (b - a) * nm / (nn - nm));
    }
  }
  return rep;
}

GapReport convergence_study(const StudyConfig& config, const DatumBuilder& datum,
                            const NonlinearityModel& model, const Trajectory& reference,
                            std::vector<Trajectory>* runs) {
  if (config.ns.empty()) throw ConfigError("convergence_study: no grid sizes");
  if (!std::is_sorted(config.ns.begin(), config.ns.end()))
    throw ConfigError("convergence_study: grid sizes must be increasing");

  auto job = [&](std::size_t n) {
    return integrate(datum(n), model, config.bc, config.t_end, config.options);
  };
  std::vector<std::future<Trajectory>> futures;
  const auto policy = config.parallel ? std::launch::async : std::launch::deferred;
  for (std::size_t n : config.ns) futures.push_back(std::async(policy, job, n));

  std::vector<Trajectory> done;
  GapReport rep;
  for (std::size_t k = 0; k < futures.size(); ++k) {
    try {
      done.push_back(futures[k].get());
    } catch (const std::exception& e) {
      rep.failed_ns.push_back(config.ns[k]);
      if (rep.failure.empty()) rep.failure = e.what();
      // Drain the remaining futures so no worker outlives the call.
      for (std::size_t r = k + 1; r < futures.size(); ++r) {
        try {
          futures[r].get();
        } catch (...) {
        }
      }
      break;
    }
  }

  GapReport table = tabulate_gaps(done, reference);
  table.failed_ns = std::move(rep.failed_ns);
  table.failure = std::move(rep.failure);
  if (runs) *runs = std::move(done);
  return table;
}

GapCheck check_gap_invariants(const GapReport& report, double initial_tolerance,
                              double positive_threshold) {
  GapCheck out;
  if (!report.failed_ns.empty()) {
    out.ok = false;
    out.messages.push_back("integration failed: " + report.failure);
  }
  for (std::size_t j = 0; j < report.gaps.size(); ++j) {
    const auto& g = report.gaps[j];
    const double t = report.times[j];
    if (t == 0.0) {
      if (std::abs(g.sup) > initial_tolerance || std::abs(g.tv) > initial_tolerance) {
        out.ok = false;
        out.messages.push_back("initial gap exceeds tolerance at t=0");
      }
    } else if (g.sup < positive_threshold || g.tv < positive_threshold) {
      out.ok = false;
      out.messages.push_back("gap below threshold at t=" + std::to_string(t));
    }
  }
  return out;
}

double derived_gap_threshold(const SubcriticalWindow& window, const GapReport& report,
                             double safety) {
  if (report.ref.empty()) throw ConfigError("derived_gap_threshold: empty report");
  return window.sigma0 / 2.0 - report.ref.back().tv - safety;
}

std::vector<UvResidualRow> uv_residual(const Trajectory& traj, const NonlinearityModel& model) {
  std::vector<UvResidualRow> rows;
  const double inv_h = static_cast<double>(traj.n) / traj.length;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const auto& u = traj.states[k];
    const auto v = v_field_with_ghosts(u, model, traj.bc, traj.length);
    const auto f = rhs(u, model, traj.bc, traj.length);
    UvResidualRow row;
    row.t = traj.times[k];
    row.ghost_left = v.front();
    row.ghost_right = v.back();
    for (std::size_t i = 1; i <= traj.n; ++i) {
      const double dv = inv_h * (v[i] - v[i - 1]);
      const double r = std::abs(f[i - 1] - dv);
      row.max_abs_residual = std::max(row.max_abs_residual, r);
      row.max_rel_residual = std::max(row.max_rel_residual, r / std::max(std::abs(dv), 1e-300));
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace pmflow
