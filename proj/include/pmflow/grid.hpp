#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pmflow {

/// Ghost-cell rule at the two ends of the grid.
///   NeumannNeumann    u(0) = u(1),  u(n+1) = u(n)
///   DirichletNeumann  u(0) = 0,     u(n+1) = u(n)
enum class BoundaryCondition { NeumannNeumann, DirichletNeumann };

std::string_view to_string(BoundaryCondition bc);
/// Accepts "nn"/"neumann" and "dn"/"dirichlet-neumann".
BoundaryCondition parse_boundary_condition(std::string_view text);

/// Real function on {1, ..., n}, identified with the piecewise-constant
/// function x -> u(ceil(n x)) on (0, L) with cells of width L / n.
///
/// `operator()` uses the 1-based indices of the difference calculus;
/// `values()` exposes the 0-based storage.
class GridFunction {
 public:
  GridFunction() = default;
  /// Throws std::invalid_argument on an empty vector or non-finite entries.
  explicit GridFunction(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator()(std::size_t i) const { return values_[i - 1]; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& mutable_values() noexcept { return values_; }

  GridFunction operator-() const;

  friend bool operator==(const GridFunction&, const GridFunction&) = default;

 private:
  std::vector<double> values_;
};

/// D+u(i) = (u(i+1) - u(i)) / h for i = 0..n with h = length / n and ghosts
/// per `bc`. Element k of the result is D+u(k).
std::vector<double> forward_diff(const GridFunction& u, BoundaryCondition bc, double length = 1.0);

/// D-u(i) = D+u(i-1) for i = 1..n+1. Element k of the result is D-u(k+1).
std::vector<double> backward_diff(const GridFunction& u, BoundaryCondition bc,
                                  double length = 1.0);

double sup_norm(const GridFunction& u);

/// Sum_{i=1}^{n-1} |u(i+1) - u(i)|.
double tv(const GridFunction& u);

/// Total variation including the ghost jumps, h * Sum_{i=0}^{n} |D+u(i)|.
/// Equal to tv(u) under NeumannNeumann; under DirichletNeumann it adds the
/// jump |u(1)| from the boundary value 0.
double tv(const GridFunction& u, BoundaryCondition bc);

struct SignedVariation {
  double plus = 0.0;
  double minus = 0.0;
};

/// Positive and negative parts of tv(u).
SignedVariation tv_pm(const GridFunction& u);
/// Ghost-aware variant matching tv(u, bc).
SignedVariation tv_pm(const GridFunction& u, BoundaryCondition bc);

/// Positive m-variation: the maximum over 1 <= i_1 <= ... <= i_2m <= n of
/// Sum_k (-1)^k u(i_k), by dynamic programming over (position, stage).
double tv_m_plus(const GridFunction& u, int m);

/// Piecewise-constant function on (0, 1] with breakpoints k / n, left
/// continuous: value(x) = u(ceil(n x)).
class PiecewiseConstant {
 public:
  explicit PiecewiseConstant(std::vector<double> cells);

  std::size_t cells() const noexcept { return values_.size(); }
  std::span<const double> cell_values() const noexcept { return values_; }
  /// Breakpoint k / n, k = 0..n.
  double breakpoint(std::size_t k) const { return static_cast<double>(k) / values_.size(); }
  /// Index of the cell containing x (1-based); x must lie in (0, 1].
  std::size_t cell_of(double x) const;
  double operator()(double x) const { return values_[cell_of(x) - 1]; }

  double sup_norm() const;
  double total_variation() const;

 private:
  std::vector<double> values_;
};

PiecewiseConstant embed(const GridFunction& u);

/// ceil(n x) for x in (0, 1], with breakpoints k / n mapped to cell k.
std::size_t cell_index(std::size_t n, double x);

/// L^p(0,1) distance between the embeddings of two grid functions on
/// possibly different grids; p = infinity gives the sup distance.
double lp_distance(const GridFunction& u, const GridFunction& w, double p);

/// Odd extension to 2n cells: w(n+i) = u(i), w(n+1-i) = -u(i).
GridFunction odd_reflection(const GridFunction& u);

/// CSV with header `i,value`, 17 significant digits.
std::string to_csv(const GridFunction& u);
GridFunction grid_from_csv(std::string_view text);
/// JSON array of values.
std::string to_json(const GridFunction& u);
GridFunction grid_from_json(std::string_view text);

}  // namespace pmflow
