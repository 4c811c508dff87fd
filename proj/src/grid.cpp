#include "pmflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pmflow {

std::string_view to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::NeumannNeumann ? "neumann-neumann" : "dirichlet-neumann";
}

BoundaryCondition parse_boundary_condition(std::string_view text) {
  if (text == "nn" || text == "neumann" || text == "neumann-neumann")
    return BoundaryCondition::NeumannNeumann;
  if (text == "dn" || text == "dirichlet-neumann") return BoundaryCondition::DirichletNeumann;
  throw std::invalid_argument("unknown boundary condition '" + std::string(text) + "'");
}

GridFunction::GridFunction(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("GridFunction: n must be positive");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("GridFunction: non-finite value");
}

GridFunction GridFunction::operator-() const {
  GridFunction out = *this;
  for (double& v : out.values_) v = -v;
  return out;
}

std::vector<double> forward_diff(const GridFunction& u, BoundaryCondition bc, double length) {
  const std::size_t n = u.size();
  const double inv_h = static_cast<double>(n) / length;
  const auto v = u.values();
  std::vector<double> d(n + 1);
  const double ghost_left = bc == BoundaryCondition::NeumannNeumann ? v[0] : 0.0;
  d[0] = inv_h * (v[0] - ghost_left);
  for (std::size_t i = 1; i < n; ++i) d[i] = inv_h * (v[i] - v[i - 1]);
  d[n] = 0.0;
  return d;
}

std::vector<double> backward_diff(const GridFunction& u, BoundaryCondition bc, double length) {
  // D-u(i) = D+u(i-1): same numbers, shifted label.
  return forward_diff(u, bc, length);
}

double sup_norm(const GridFunction& u) {
  double m = 0.0;
  for (double v : u.values()) m = std::max(m, std::abs(v));
  return m;
}

double tv(const GridFunction& u) {
  const auto v = u.values();
  double s = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) s += std::abs(v[i] - v[i - 1]);
  return s;
}

double tv(const GridFunction& u, BoundaryCondition bc) {
  const double interior = tv(u);
  return bc == BoundaryCondition::DirichletNeumann ? std::abs(u(1)) + interior : interior;
}

SignedVariation tv_pm(const GridFunction& u) {
  const auto v = u.values();
  SignedVariation out;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = v[i] - v[i - 1];
    if (d > 0.0) out.plus += d;
    else out.minus -= d;
  }
  return out;
}

SignedVariation tv_pm(const GridFunction& u, BoundaryCondition bc) {
  SignedVariation out = tv_pm(u);
  if (bc == BoundaryCondition::DirichletNeumann) {
    const double d = u(1);
    if (d > 0.0) out.plus += d;
    else out.minus -= d;
  }
  return out;
}

double tv_m_plus(const GridFunction& u, int m) {
  if (m < 1) throw std::invalid_argument("tv_m_plus: m must be positive");
  const std::size_t stages = 2 * static_cast<std::size_t>(m);
  // best[k]: largest partial sum using stages 1..k on the scanned prefix.
  // Stage k carries sign (-1)^k; repeated indices are admissible.
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<double> best(stages + 1, neg_inf);
  best[0] = 0.0;
  for (double value : u.values()) {
    for (std::size_t k = 1; k <= stages; ++k) {
      if (best[k - 1] == neg_inf) continue;
      const double cand = best[k - 1] + ((k % 2 == 1) ? -value : value);
      best[k] = std::max(best[k], cand);
    }
  }
  return best[stages];
}

PiecewiseConstant::PiecewiseConstant(std::vector<double> cells) : values_(std::move(cells)) {
  if (values_.empty()) throw std::invalid_argument("PiecewiseConstant: no cells");
}

std::size_t cell_index(std::size_t n, double x) {
  if (!(x > 0.0) || !(x <= 1.0)) throw std::out_of_range("cell_index: x outside (0, 1]");
  const double nd = static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(nd * x));
  k = std::clamp<std::size_t>(k, 1, n);
  // n*x may round above an exact breakpoint k/n; left continuity wins.
  if (k > 1 && x <= static_cast<double>(k - 1) / nd) --k;
  if (k < n && x > static_cast<double>(k) / nd) ++k;
  return k;
}

std::size_t PiecewiseConstant::cell_of(double x) const { return cell_index(values_.size(), x); }

double PiecewiseConstant::sup_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double PiecewiseConstant::total_variation() const {
  double s = 0.0;
  for (std::size_t k = 1; k < values_.size(); ++k) s += std::abs(values_[k] - values_[k - 1]);
  return s;
}

PiecewiseConstant embed(const GridFunction& u) {
  return PiecewiseConstant(std::vector<double>(u.values().begin(), u.values().end()));
}

double lp_distance(const GridFunction& u, const GridFunction& w, double p) {
  const bool sup = std::isinf(p);
  if (!sup && !(p >= 1.0)) throw std::invalid_argument("lp_distance: p must be >= 1");
  const std::size_t n1 = u.size(), n2 = w.size();
  const auto a = u.values(), b = w.values();
  // Walk the merged breakpoint set {i/n1} U {j/n2}; compare i*n2 with j*n1
  // in integers so coincident breakpoints are detected exactly.
  std::size_t i = 1, j = 1;
  double left = 0.0, acc = 0.0;
  while (i <= n1 && j <= n2) {
    const auto ri = static_cast<unsigned long long>(i) * n2;
    const auto rj = static_cast<unsigned long long>(j) * n1;
    double right;
    const double diff = std::abs(a[i - 1] - b[j - 1]);
    if (ri < rj) right = static_cast<double>(i) / n1;
    else right = static_cast<double>(j) / n2;
    if (sup) acc = std::max(acc, diff);
    else acc += std::pow(diff, p) * (right - left);
    left = right;
    if (ri <= rj) ++i;
    if (rj <= ri) ++j;
  }
  return sup ? acc : std::pow(acc, 1.0 / p);
}

GridFunction odd_reflection(const GridFunction& u) {
  const std::size_t n = u.size();
  std::vector<double> w(2 * n);
  for (std::size_t i = 1; i <= n; ++i) {
    w[n + i - 1] = u(i);
    w[n - i] = -u(i);
  }
  return GridFunction(std::move(w));
}

std::string to_csv(const GridFunction& u) {
  std::string out = "i,value\n";
  char buf[64];
  for (std::size_t i = 1; i <= u.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, u(i));
    out += buf;
  }
  return out;
}

GridFunction grid_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("i,value", 0) != 0)
    throw std::invalid_argument("grid CSV: missing `i,value` header");
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("grid CSV: malformed row");
    const auto idx = std::stoull(line.substr(0, comma));
    if (idx != values.size() + 1) throw std::invalid_argument("grid CSV: indices must be 1..n in order");
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  return GridFunction(std::move(values));
}

std::string to_json(const GridFunction& u) {
  return nlohmann::json(std::vector<double>(u.values().begin(), u.values().end())).dump();
}

GridFunction grid_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_array()) throw std::invalid_argument("grid JSON: expected an array");
  return GridFunction(j.get<std::vector<double>>());
}

}  // namespace pmflow
