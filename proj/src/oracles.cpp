#include "pmflow/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pmflow::oracle {

namespace {

void derivative(const std::vector<double>& u, const NonlinearityModel& model, BoundaryCondition bc,
                double n_over_len, std::vector<double>& out) {
  const std::size_t n = u.size();
  std::vector<double> flux(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    double left, right;
    if (i == 0) {
      left = bc == BoundaryCondition::DirichletNeumann ? 0.0 : u[0];
      right = u[0];
    } else if (i == n) {
      left = u[n - 1];
      right = u[n - 1];
    } else {
      left = u[i - 1];
      right = u[i];
    }
    flux[i] = model.dphi(n_over_len * (right - left));
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = n_over_len * (flux[i + 1] - flux[i]);
}

}  // namespace

GridFunction rk4(const GridFunction& u0, const NonlinearityModel& model, BoundaryCondition bc,
                 double t_end, double dt, double length) {
  if (!(dt > 0.0) || !(t_end >= 0.0)) throw std::invalid_argument("rk4: bad step or horizon");
  const double r = static_cast<double>(u0.size()) / length;
  std::vector<double> y(u0.values().begin(), u0.values().end());
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  const auto steps = static_cast<long long>(std::ceil(t_end / dt - 1e-9));
  double t = 0.0;
  for (long long s = 0; s < steps; ++s) {
    const double h = std::min(dt, t_end - t);
    derivative(y, model, bc, r, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    derivative(tmp, model, bc, r, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    derivative(tmp, model, bc, r, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    derivative(tmp, model, bc, r, k4);
    for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    t = (s + 1 == steps) ? t_end : t + h;
  }
  return GridFunction(std::move(y));
}

namespace {

void enumerate(const std::vector<double>& u, std::size_t stages, std::size_t k, std::size_t from,
               double acc, double& best) {
  if (k > stages) {
    best = std::max(best, acc);
    return;
  }
  for (std::size_t j = from; j < u.size(); ++j)
    enumerate(u, stages, k + 1, j, acc + ((k % 2 == 1) ? -u[j] : u[j]), best);
}

}  // namespace

double tv_m_plus_brute(const GridFunction& u, int m) {
  if (m < 1) throw std::invalid_argument("tv_m_plus_brute: m must be positive");
  std::vector<double> v(u.values().begin(), u.values().end());
  double best = -std::numeric_limits<double>::infinity();
  enumerate(v, 2 * static_cast<std::size_t>(m), 1, 0, 0.0, best);
  return best;
}

}  // namespace pmflow::oracle
