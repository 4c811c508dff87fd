#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pmflow/counterexample.hpp"
#include "pmflow/flow.hpp"
#include "pmflow/grid.hpp"
#include "pmflow/phi.hpp"

namespace pmflow {

/// v(i) = dphi(D+u(i)), i = 1..n.
std::vector<double> v_field(const GridFunction& u, const NonlinearityModel& model,
                            BoundaryCondition bc = BoundaryCondition::NeumannNeumann,
                            double length = 1.0);

/// v on the extended index range 0..n, ghost entries included.
std::vector<double> v_field_with_ghosts(const GridFunction& u, const NonlinearityModel& model,
                                        BoundaryCondition bc, double length = 1.0);

/// Per-cell products D+u(i) * dphi(D+u(i)), i = 1..n. Nonnegative by
/// construction of the odd flux.
std::vector<double> sign_measure(const GridFunction& u, const NonlinearityModel& model,
                                 BoundaryCondition bc = BoundaryCondition::NeumannNeumann,
                                 double length = 1.0);

/// True iff every component of sign_measure is >= 0 on every state.
bool sign_condition_holds(const Trajectory& traj, const NonlinearityModel& model);

/// Fine-grid run of the smooth datum standing in for the classical
/// solution. Uses the Rosenbrock integrator unless `opts` says otherwise.
Trajectory reference_solution(std::size_t n_ref, const SubcriticalWindow& window,
                              const NonlinearityModel& model, double t_end,
                              BoundaryCondition bc = BoundaryCondition::DirichletNeumann,
                              std::optional<IntegrateOptions> opts = std::nullopt);

struct SupTv {
  double sup = 0.0;
  double tv = 0.0;
};

struct GapReport {
  std::vector<std::size_t> ns;
  std::vector<double> times;
  /// l2_to_ref[k][j]: L2 distance of u_{ns[k]}(times[j]) to the reference.
  std::vector<std::vector<double>> l2_to_ref;
  std::vector<std::vector<SupTv>> sup_tv;
  std::vector<SupTv> ref;
  /// Per time: min over the largest (up to two) grids of value - reference.
  std::vector<SupTv> gaps;
  /// First-order Richardson extrapolation of tv from the two largest grids.
  std::vector<double> richardson_tv;
  /// Grids whose integration failed (study aborted after the first failure).
  std::vector<std::size_t> failed_ns;
  std::string failure;
};

using DatumBuilder = std::function<GridFunction(std::size_t n)>;

struct StudyConfig {
  std::vector<std::size_t> ns;
  BoundaryCondition bc = BoundaryCondition::DirichletNeumann;
  double t_end = 1.0;
  IntegrateOptions options;
  /// Run the grids concurrently.
  bool parallel = true;
};

/// Tabulates sup / tv / L2 of each run against the reference at the shared
/// sample times and computes the gaps. Runs must be ordered by increasing n.
GapReport tabulate_gaps(const std::vector<Trajectory>& runs, const Trajectory& reference);

/// Integrates every grid size, compares sup / tv / L2 against the reference
/// trajectory at the shared sample times. Variation uses tv(u, bc).
/// An integration failure stops the study and returns the partial report
/// with `failed_ns` / `failure` set.
GapReport convergence_study(const StudyConfig& config, const DatumBuilder& datum,
                            const NonlinearityModel& model, const Trajectory& reference,
                            std::vector<Trajectory>* runs = nullptr);

struct GapCheck {
  bool ok = true;
  std::vector<std::string> messages;
};

/// t = 0: both gaps within `initial_tolerance`; t > 0: both gaps at least
/// `positive_threshold`.
GapCheck check_gap_invariants(const GapReport& report, double initial_tolerance,
                              double positive_threshold);

/// Gap threshold derived from the window: sigma0/2 - reference tv at the
/// final sample time - safety.
double derived_gap_threshold(const SubcriticalWindow& window, const GapReport& report,
                             double safety = 0.01);

struct UvResidualRow {
  double t = 0.0;
  double max_abs_residual = 0.0;   // |rhs(u) - D-(v)| over i
  double max_rel_residual = 0.0;
  double ghost_left = 0.0;
  double ghost_right = 0.0;
};

/// rhs(u) == D-(v_field(u)) at every sample time, and the ghost entries of v.
std::vector<UvResidualRow> uv_residual(const Trajectory& traj, const NonlinearityModel& model);

}  // namespace pmflow
