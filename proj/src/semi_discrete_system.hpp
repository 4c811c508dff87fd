#pragma once

#include <span>
#include <vector>

#include "pmflow/grid.hpp"
#include "pmflow/phi.hpp"

namespace pmflow {

/// The ODE system u' = F(u) with preallocated work arrays. Not thread safe;
/// each integration owns its own instance.
class SemiDiscreteSystem {
 public:
  SemiDiscreteSystem(const NonlinearityModel& model, BoundaryCondition bc, std::size_t n,
                     double length)
      : model_(model),
        bc_(bc),
        n_(n),
        inv_h_(static_cast<double>(n) / length),
        slopes_(n + 1),
        flux_(n + 1) {}

  std::size_t size() const noexcept { return n_; }
  double inv_h() const noexcept { return inv_h_; }

  void eval(std::span<const double> u, std::span<double> du) {
    fill_slopes(u);
    model_.dphi(slopes_, flux_);
    for (std::size_t i = 0; i < n_; ++i) du[i] = inv_h_ * (flux_[i + 1] - flux_[i]);
  }

  /// Tridiagonal Jacobian dF/du: lower[i] = dF_i/du_{i-1} (i >= 1),
  /// diag[i] = dF_i/du_i, upper[i] = dF_i/du_{i+1} (i <= n-2); 0-based.
  void jacobian(std::span<const double> u, std::span<double> lower, std::span<double> diag,
                std::span<double> upper) {
    fill_slopes(u);
    const double s = inv_h_ * inv_h_;
    // w[k] = d flux_k / d u_{k+1} * inv_h for the interface between cells k and k+1.
    for (std::size_t k = 0; k <= n_; ++k) flux_[k] = s * model_.d2phi(slopes_[k]);
    flux_[n_] = 0.0;
    if (bc_ == BoundaryCondition::NeumannNeumann) flux_[0] = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double right = i + 1 < n_ ? flux_[i + 1] : 0.0;
      diag[i] = -right - flux_[i];
      if (i + 1 < n_) upper[i] = right;
      if (i >= 1) lower[i] = flux_[i];
    }
  }

 private:
  void fill_slopes(std::span<const double> u) {
    slopes_[0] = bc_ == BoundaryCondition::NeumannNeumann ? 0.0 : inv_h_ * u[0];
    for (std::size_t i = 1; i < n_; ++i) slopes_[i] = inv_h_ * (u[i] - u[i - 1]);
    slopes_[n_] = 0.0;
  }

  const NonlinearityModel& model_;
  BoundaryCondition bc_;
  std::size_t n_;
  double inv_h_;
  std::vector<double> slopes_;
  std::vector<double> flux_;
};

}  // namespace pmflow
