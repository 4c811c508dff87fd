#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pmflow/flow.hpp"
#include "pmflow/grid.hpp"
#include "pmflow/phi.hpp"

namespace pmflow {

/// Parameter ladder for the staircase counterexample on a grid of n cells:
///   h = 1/sqrt(n),  mu = ceil(n sqrt(g(n h))) + 2,  m = n - mu,
///   A = dphi(n h) + sigma0 lambda0 / (2n),  C = n g(n h) / (2 mu - 3),
///   E = 2 Lambda0 C + 1/n,  B = A + C + h + sqrt(E),  J = B + 1/n,
/// with g the conjugate slope. `admissible` records whether 0 < m < n and
///   (1) (pi/2)(sigma0/2) + A <= sigma0
///   (2) 2 C <= sigma0
///   (3) n h >= sigma1
///   (4) sqrt(E) - E T >= 0
/// all hold.
struct CounterexampleParams {
  std::size_t n = 0;
  SubcriticalWindow window;
  double T = 1.0;
  double h = 0.0;
  double g = 0.0;  // g(n h)
  long mu = 0;
  long m = 0;
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double E = 0.0;
  double J = 0.0;
  bool admissible = false;
  /// Names of the failed conditions, in the order listed above
  /// ("slope_bound", "quadratic_bound", "supercritical_jump", "time_horizon",
  /// "split_index").
  std::vector<std::string> failed;

  std::size_t split() const { return static_cast<std::size_t>(m); }
};

CounterexampleParams params_for(std::size_t n, const NonlinearityModel& model,
                                const SubcriticalWindow& window, double T);

/// Smallest n in [n_min, n_max] whose ladder is admissible, or 0 if none.
std::size_t find_admissible_n(const NonlinearityModel& model, const SubcriticalWindow& window,
                              double T, std::size_t n_min = 2, std::size_t n_max = 1 << 20);

/// u0(i) = (sigma0/2) sin((pi/2)(i/n)) for i <= m and sigma0/2 + J beyond.
/// Throws ConfigError for inadmissible parameters.
GridFunction staircase_datum(const CounterexampleParams& params, const NonlinearityModel& model);

/// Samples (sigma0/2) sin((pi/2) x) at x = i/n.
GridFunction smooth_datum(std::size_t n, const SubcriticalWindow& window);

/// The barrier v_n(t, i), i in 1..n:
///   (sigma0/2) sin((pi/2)(i/n)) exp(-lambda0 t) + A i/n        for i <= m,
///   sigma0/2 + B - C (1 - i/n)^2 - E t                          for i > m.
double barrier(const CounterexampleParams& params, double t, std::size_t i);
/// Analytic time derivative of the barrier.
double barrier_rate(const CounterexampleParams& params, double t, std::size_t i);
/// Barrier on the whole grid.
GridFunction barrier_state(const CounterexampleParams& params, double t);

/// One verified inequality. margin >= 0 means it holds; for strict
/// inequalities a margin below `kDegenerateMargin` is a degenerate pass.
struct MarginCheck {
  std::string name;
  bool strict = true;
  double min_margin = 0.0;
  double t_at_min = 0.0;
  std::size_t i_at_min = 0;
  std::size_t evaluations = 0;
  bool degenerate = false;

  bool passed() const { return strict ? min_margin > 0.0 : min_margin >= 0.0; }
};

inline constexpr double kDegenerateMargin = 1e-10;

struct CheckFailure {
  std::string check;
  double t = 0.0;
  std::size_t i = 0;
  double margin = 0.0;
};

struct CheckReport {
  std::vector<MarginCheck> checks;
  /// Every violated evaluation (capped at 1000 entries).
  std::vector<CheckFailure> failures;

  bool passed() const;
  const MarginCheck* find(const std::string& name) const;
};

/// Hypotheses of the discrete comparison principle for the pair
/// (u = traj, v = barrier), at every sample time:
///   space_monotonicity_u / space_monotonicity_v     nondecreasing in i
///   initial_order_below / initial_order_above       u(0,i) < v(0,i), i <= m;  u(0,i) > v(0,i), i > m
///   subcritical_u                                   D+u(i) <= sigma1, i != m
///   subcritical_v                                   D+v(i) <= sigma0, i != m
///   supercritical_jump                              D+v(m) >= n h
///   jump_threshold                                  n h >= sigma1
///   supersolution                                   v' - D-(dphi(D+v)) > 0, i <= m
///   subsolution                                     D-(dphi(D+v)) - v' > 0, i > m
/// plus the two slack reports
///   supersolution_split_slack     dphi(n h) - dphi(D+v(m))     (bound used at i = m)
///   subsolution_edge_slack        E - n dphi(C/n)              (reduction at i = n)
CheckReport check_lemma_hypotheses(const Trajectory& traj, const CounterexampleParams& params,
                                   const NonlinearityModel& model);

struct OrderingReport {
  bool holds = true;
  double min_separation = 0.0;   // min over samples of the signed gaps
  double t_at_min = 0.0;
  std::size_t i_at_min = 0;
  bool crossed = false;
  double first_crossing_t = 0.0;
  std::size_t first_crossing_i = 0;
};

/// u(t,i) < v(t,i) for i <= m and u(t,i) > v(t,i) for i > m at every sample.
OrderingReport check_lemma_conclusion(const Trajectory& traj, const CounterexampleParams& params);

struct KeyBoundRow {
  double t = 0.0;
  double x = 0.0;
  std::size_t i = 0;          // ceil(n x)
  double u = 0.0;
  double upper = 0.0;         // barrier readback at i
  double upper_margin = 0.0;  // upper - u
  double u_edge = 0.0;        // u(t, n)
  double lower = 0.0;         // sigma0/2 + B - E t
  double lower_margin = 0.0;  // u_edge - lower
};

struct KeyBoundsReport {
  std::vector<KeyBoundRow> rows;
  double min_upper_margin = 0.0;
  double min_lower_margin = 0.0;
  bool holds() const { return min_upper_margin >= 0.0 && min_lower_margin >= 0.0; }
};

/// Throws ConfigError if a probe falls beyond the split index.
KeyBoundsReport key_bounds_report(const Trajectory& traj, const CounterexampleParams& params,
                                  const std::vector<double>& x_probes);

struct OddReflectionReport {
  /// max over samples and i of |w(i) + w(2n+1-i)|.
  double max_odd_defect = 0.0;
  /// min over samples of w(t, 2n) - (sigma0/2 + B - E t).
  double min_edge_margin = 0.0;
  /// w(t_end, 2n).
  double edge_at_end = 0.0;
  double sigma0 = 0.0;

  bool holds(double odd_tolerance = 1e-9) const {
    return max_odd_defect <= odd_tolerance && min_edge_margin >= 0.0 && edge_at_end >= sigma0 / 2.0;
  }
};

/// Checks a run of odd_reflection(staircase_datum) on the doubled grid
/// (2n cells, NeumannNeumann): oddness about the centre and the right-edge
/// lower bound of the half-grid problem.
OddReflectionReport odd_reflection_report(const Trajectory& traj, const CounterexampleParams& params);

}  // namespace pmflow
