#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pmflow/grid.hpp"
#include "pmflow/phi.hpp"

namespace pmflow {

/// Time derivative of the semi-discrete equation,
///   u'(i) = (dphi(D+u(i)) - dphi(D+u(i-1))) / h,  i = 1..n,  h = length / n.
std::vector<double> rhs(const GridFunction& u, const NonlinearityModel& model,
                        BoundaryCondition bc, double length = 1.0);

/// Discrete functional h * Sum phi(D+u(i)) whose gradient flow is the
/// semi-discrete equation. Under NeumannNeumann the sum runs over
/// i = 1..n; under DirichletNeumann the boundary jump D+u(0) is included.
double dpm_energy(const GridFunction& u, const NonlinearityModel& model,
                  BoundaryCondition bc = BoundaryCondition::NeumannNeumann, double length = 1.0);

enum class Integrator {
  /// Embedded explicit Runge-Kutta 5(4), Dormand-Prince coefficients.
  DormandPrince54,
  /// Linearly implicit Rosenbrock 3(2) (ROS3P) with the exact tridiagonal
  /// Jacobian. Suited to fine subcritical runs where the explicit step is
  /// stability-bound.
  Rosenbrock32,
};

std::string_view to_string(Integrator method);
Integrator parse_integrator(std::string_view text);

struct IntegrateOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  /// Output times; empty means `samples` uniform times on [0, t_end].
  std::vector<double> sample_times;
  int samples = 101;
  double max_step = std::numeric_limits<double>::infinity();
  /// Explicit steps are additionally capped at c_step / (n_eff^2 * phi2_sup),
  /// n_eff = n / length.
  double c_step = 2.0;
  double min_step = 1e-15;
  double length = 1.0;
  Integrator method = Integrator::DormandPrince54;
  /// Slack for the monotone-in-time diagnostics.
  double monotonicity_tol = 1e-6;
};

struct IntegratorStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
};

/// Per-sample diagnostics. Under DirichletNeumann max/min include the
/// boundary value 0 and the variations include the boundary jump, which
/// makes all of them monotone in time for that regime as well.
struct DiagnosticRecord {
  double t = 0.0;
  double max = 0.0;
  double min = 0.0;
  double tv = 0.0;
  double tv_plus = 0.0;
  double tv_minus = 0.0;
  double energy = 0.0;
  /// Indices i = 0..n with D+u(i) <= sigma1.
  std::vector<std::uint8_t> subcritical;
  std::size_t subcritical_count = 0;
};

struct Violation {
  std::string quantity;
  double t = 0.0;
  double amount = 0.0;
};

struct DiagnosticsTable {
  std::vector<DiagnosticRecord> records;
  std::vector<Violation> violations;

  bool clean() const noexcept { return violations.empty(); }
};

struct Trajectory {
  std::string model;
  BoundaryCondition bc = BoundaryCondition::NeumannNeumann;
  std::size_t n = 0;
  double length = 1.0;
  std::vector<double> times;
  std::vector<GridFunction> states;
  /// Integral of h * Sum |u'(t,i)|^2 over [0, times.back()].
  double dissipation = 0.0;
  /// The same integral up to each sample time.
  std::vector<double> dissipation_at;
  IntegratorStats stats;
  DiagnosticsTable diagnostics;
};

/// Integrates the semi-discrete equation from u0 up to t_end, recording the
/// state at every sample time (sample times are hit exactly) and filling in
/// the diagnostics table.
///
/// Throws StiffnessError when the step falls below opts.min_step and
/// DivergenceError when the state cannot be kept finite.
Trajectory integrate(const GridFunction& u0, const NonlinearityModel& model, BoundaryCondition bc,
                     double t_end, const IntegrateOptions& opts = {});

/// Diagnostics for an existing trajectory. Monotone quantities (max, -min,
/// tv, tv+, tv-, energy) are compared with their running best; increases
/// beyond `tol` are reported. Shrinking of the subcritical index set and
/// loss of monotonicity in i (for nondecreasing initial data) are reported
/// too.
DiagnosticsTable run_diagnostics(const Trajectory& traj, const NonlinearityModel& model,
                                 double tol = 1e-6);

}  // namespace pmflow
