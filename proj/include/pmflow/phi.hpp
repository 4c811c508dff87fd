#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pmflow {

enum class ModelKind { LogQuadratic, ArctanSquare, QuarticRoot, Custom };

/// User-supplied Lagrangian. Only values for sigma >= 0 are used by the
/// model once accepted; negative arguments are consulted by the validation
/// pass to confirm evenness.
struct CustomLagrangian {
  std::string name = "custom";
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
  std::function<double(double)> d2phi;
  double sigma1 = 0.0;
  double phi2_sup = 0.0;
};

/// Convex-concave Lagrangian with sublinear growth.
///
/// Built-in models:
///   LogQuadratic  phi(s) = 1/2 log(1 + s^2)
///   ArctanSquare  phi(s) = arctan(s^2)
///   QuarticRoot   phi(s) = (1 + s^2)^(1/4) - 1
///
/// The first derivative is evaluated on |s| and the sign re-applied, so that
/// dphi(-s) == -dphi(s) and s * dphi(s) >= 0 hold exactly in floating point.
/// Instances are immutable and cheap to copy.
class NonlinearityModel {
 public:
  static NonlinearityModel log_quadratic();
  static NonlinearityModel arctan_square();
  static NonlinearityModel quartic_root();

  /// Builds a model from user evaluators. With `validate` set the sampled
  /// structural checks run first and a ModelError lists every violation.
  static NonlinearityModel custom(CustomLagrangian lagrangian, bool validate = true);

  /// "log", "atan2" or "quartic".
  static NonlinearityModel from_name(std::string_view name);

  ModelKind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  double sigma1() const noexcept { return sigma1_; }
  double phi2_sup() const noexcept { return phi2_sup_; }

  // Unchecked evaluators for inner loops.
  double phi(double s) const;
  double dphi(double s) const;
  double d2phi(double s) const;

  /// out[k] = dphi(slopes[k]); the model switch is hoisted out of the loop.
  void dphi(std::span<const double> slopes, std::span<double> out) const;

 private:
  NonlinearityModel() = default;

  double dphi_abs(double a) const;

  ModelKind kind_ = ModelKind::LogQuadratic;
  std::string name_;
  double sigma1_ = 1.0;
  double phi2_sup_ = 1.0;
  std::shared_ptr<const CustomLagrangian> custom_;
};

/// Runs the sampled structural checks on a candidate Lagrangian and returns
/// a human-readable line per violation (empty when the candidate passes).
std::vector<std::string> lagrangian_violations(const CustomLagrangian& lagrangian);

/// Same checks on an existing model.
std::vector<std::string> model_violations(const NonlinearityModel& model);

double phi_eval(const NonlinearityModel& model, double sigma);
double phi_prime(const NonlinearityModel& model, double sigma);
double phi_second(const NonlinearityModel& model, double sigma);

/// Subcritical slope g(sigma) in [0, sigma1] carrying the same flux,
/// dphi(g) == dphi(sigma). Bisection on [0, sigma1]; where dphi is flat the
/// preimage is not unique and the bisection limit is returned.
double conjugate_slope(const NonlinearityModel& model, double sigma);

/// Bi-Lipschitz constants of dphi on [0, sigma0]:
///   lambda0 (b - a) <= dphi(b) - dphi(a) <= Lambda0 (b - a),  0 <= a <= b <= sigma0.
struct SubcriticalWindow {
  double sigma0 = 0.0;
  double lambda0 = 0.0;
  double Lambda0 = 0.0;
};

/// lambda0 / Lambda0 from the extrema of d2phi sampled on [0, sigma0]
/// (`samples` points including both ends), deflated / inflated by 1e-9.
/// Throws WindowError when d2phi is not positive on the window.
SubcriticalWindow bilipschitz_window(const NonlinearityModel& model, double sigma0,
                                     int samples = 10001);

}  // namespace pmflow
