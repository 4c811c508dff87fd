#include "pmflow/phi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "pmflow/errors.hpp"

namespace pmflow {
namespace {

// Above this magnitude the closed forms overflow in their intermediate
// powers; the asymptotic expressions below are exact to double precision.
constexpr double kHuge = 1e70;

double log_phi(double a) { return 0.5 * std::log1p(a * a); }
double log_dphi(double a) { return a > kHuge ? 1.0 / a : a / (1.0 + a * a); }
double log_d2phi(double a) {
  if (a > kHuge) return -1.0 / (a * a);
  const double q = 1.0 + a * a;
  return (1.0 - a * a) / (q * q);
}

double atan_phi(double a) { return std::atan(a * a); }
double atan_dphi(double a) {
  if (a > kHuge) return 0.0;
  const double a2 = a * a;
  return 2.0 * a / (1.0 + a2 * a2);
}
double atan_d2phi(double a) {
  if (a > kHuge) return 0.0;
  const double a4 = a * a * a * a;
  const double q = 1.0 + a4;
  return (2.0 - 6.0 * a4) / (q * q);
}

double quartic_phi(double a) { return std::expm1(0.25 * std::log1p(a * a)); }
double quartic_dphi(double a) {
  if (a > kHuge) return 0.5 / std::sqrt(a);
  return 0.5 * a * std::pow(1.0 + a * a, -0.75);
}
double quartic_d2phi(double a) {
  if (a > kHuge) return -0.25 * std::pow(a, -1.5);
  const double q = 1.0 + a * a;
  return (0.5 - 0.25 * a * a) * std::pow(q, -1.75);
}

// Smallest positive zero of a function that is positive at 0 and changes
// sign once.
double first_sign_change(const std::function<double(double)>& f) {
  double lo = 0.0;
  double hi = 1.0;
  while (f(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw ModelError("d2phi never changes sign: no convex-concave threshold");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return lo + 0.5 * (hi - lo);
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void require_finite(double sigma, const char* what) {
  if (!std::isfinite(sigma)) throw DomainError(std::string(what) + ": non-finite argument");
}

struct Evaluators {
  std::function<double(double)> phi, dphi, d2phi;
  double sigma1;
  double phi2_sup;
};

std::vector<std::string> sampled_violations(const Evaluators& ev) {
  std::vector<std::string> out;
  const double s1 = ev.sigma1;
  if (!(s1 > 0.0) || !std::isfinite(s1)) {
    out.push_back("sigma1 must be positive and finite");
    return out;
  }
  if (!(ev.phi2_sup > 0.0) || !std::isfinite(ev.phi2_sup)) {
    out.push_back("phi2_sup must be positive and finite");
    return out;
  }

  // 1000 points on [0, sigma1] and 1000 log-spaced points on [sigma1, 1e6 sigma1].
  std::vector<double> sub, super;
  for (int k = 0; k <= 1000; ++k) sub.push_back(s1 * k / 1000.0);
  for (int k = 0; k <= 1000; ++k) super.push_back(s1 * std::pow(10.0, 6.0 * k / 1000.0));

  if (std::abs(ev.phi(0.0)) > 1e-14) out.push_back("phi(0) != 0");
  if (std::abs(ev.dphi(0.0)) > 1e-14) out.push_back("dphi(0) != 0");
  if (!(ev.d2phi(0.0) > 0.0)) out.push_back("d2phi(0) must be positive");

  auto check_all = [&](const std::vector<double>& grid) {
    for (double s : grid) {
      const double p = ev.phi(s), m = ev.phi(-s);
      if (std::abs(p - m) > 1e-12 * (1.0 + std::abs(p))) {
        out.push_back("phi not even at sigma=" + fmt_double(s));
        return;
      }
      if (s * ev.dphi(s) < 0.0 || (-s) * ev.dphi(-s) < 0.0) {
        out.push_back("sigma*dphi(sigma) < 0 at sigma=" + fmt_double(s));
        return;
      }
      if (std::abs(ev.d2phi(s)) > ev.phi2_sup * (1.0 + 1e-12)) {
        out.push_back("|d2phi| exceeds phi2_sup at sigma=" + fmt_double(s));
        return;
      }
    }
  };
  check_all(sub);
  check_all(super);

  for (std::size_t k = 1; k < sub.size(); ++k) {
    const double prev = ev.dphi(sub[k - 1]), cur = ev.dphi(sub[k]);
    if (cur < prev - 1e-12 * std::abs(prev)) {
      out.push_back("dphi decreases inside [0, sigma1] near sigma=" + fmt_double(sub[k]));
      break;
    }
  }
  for (std::size_t k = 1; k < super.size(); ++k) {
    const double prev = ev.dphi(super[k - 1]), cur = ev.dphi(super[k]);
    if (cur > prev + 1e-12 * std::abs(prev)) {
      out.push_back("dphi increases beyond sigma1 near sigma=" + fmt_double(super[k]));
      break;
    }
  }
  // Sublinear growth. The probe sits at 1e8 sigma1 so that slowly decaying
  // fluxes such as the quartic root (dphi ~ s^-1/2) are accepted.
  if (!(ev.dphi(1e8 * s1) < 1e-3 * ev.dphi(s1))) out.push_back("dphi does not decay at infinity");
  return out;
}

Evaluators evaluators_of(const NonlinearityModel& m) {
  return {[&m](double s) { return m.phi(s); }, [&m](double s) { return m.dphi(s); },
          [&m](double s) { return m.d2phi(s); }, m.sigma1(), m.phi2_sup()};
}

}  // namespace

NonlinearityModel NonlinearityModel::log_quadratic() {
  NonlinearityModel m;
  m.kind_ = ModelKind::LogQuadratic;
  m.name_ = "log";
  m.sigma1_ = 1.0;
  m.phi2_sup_ = 1.0;
  return m;
}

NonlinearityModel NonlinearityModel::arctan_square() {
  NonlinearityModel m;
  m.kind_ = ModelKind::ArctanSquare;
  m.name_ = "atan2";
  static const double s1 = first_sign_change(atan_d2phi);
  m.sigma1_ = s1;
  m.phi2_sup_ = 2.0;  // |d2phi| peaks at the origin; the negative minimum is -9/8
  return m;
}

NonlinearityModel NonlinearityModel::quartic_root() {
  NonlinearityModel m;
  m.kind_ = ModelKind::QuarticRoot;
  m.name_ = "quartic";
  static const double s1 = first_sign_change(quartic_d2phi);
  m.sigma1_ = s1;
  m.phi2_sup_ = 0.5;  // d2phi(0) = 1/2; the negative minimum is -7^(-7/4)
  return m;
}

NonlinearityModel NonlinearityModel::custom(CustomLagrangian lagrangian, bool validate) {
  if (!lagrangian.phi || !lagrangian.dphi || !lagrangian.d2phi)
    throw ModelError("custom model needs phi, dphi and d2phi evaluators");
  if (validate) {
    const auto bad = lagrangian_violations(lagrangian);
    if (!bad.empty()) {
      std::string msg = "custom model '" + lagrangian.name + "' rejected:";
      for (const auto& line : bad) msg += "\n  " + line;
      throw ModelError(msg);
    }
  }
  NonlinearityModel m;
  m.kind_ = ModelKind::Custom;
  m.name_ = lagrangian.name;
  m.sigma1_ = lagrangian.sigma1;
  m.phi2_sup_ = lagrangian.phi2_sup;
  m.custom_ = std::make_shared<const CustomLagrangian>(std::move(lagrangian));
  return m;
}

NonlinearityModel NonlinearityModel::from_name(std::string_view name) {
  if (name == "log") return log_quadratic();
  if (name == "atan2") return arctan_square();
  if (name == "quartic") return quartic_root();
  throw ConfigError("unknown model '" + std::string(name) + "' (expected log, atan2 or quartic)");
}

double NonlinearityModel::phi(double s) const {
  const double a = std::fabs(s);
  switch (kind_) {
    case ModelKind::LogQuadratic: return log_phi(a);
    case ModelKind::ArctanSquare: return atan_phi(a);
    case ModelKind::QuarticRoot: return quartic_phi(a);
    case ModelKind::Custom: return custom_->phi(a);
  }
  return 0.0;
}

double NonlinearityModel::dphi_abs(double a) const {
  switch (kind_) {
    case ModelKind::LogQuadratic: return log_dphi(a);
    case ModelKind::ArctanSquare: return atan_dphi(a);
    case ModelKind::QuarticRoot: return quartic_dphi(a);
    case ModelKind::Custom: return custom_->dphi(a);
  }
  return 0.0;
}

// A user evaluator is trusted for the magnitude only if it is nonnegative on
// [0, inf); the odd extension multiplies by sign(s) so a wrong sign is kept
// visible instead of being masked by copysign.
double NonlinearityModel::dphi(double s) const {
  if (kind_ == ModelKind::Custom) return std::copysign(1.0, s) * custom_->dphi(std::fabs(s));
  return std::copysign(dphi_abs(std::fabs(s)), s);
}

double NonlinearityModel::d2phi(double s) const {
  const double a = std::fabs(s);
  switch (kind_) {
    case ModelKind::LogQuadratic: return log_d2phi(a);
    case ModelKind::ArctanSquare: return atan_d2phi(a);
    case ModelKind::QuarticRoot: return quartic_d2phi(a);
    case ModelKind::Custom: return custom_->d2phi(a);
  }
  return 0.0;
}

void NonlinearityModel::dphi(std::span<const double> slopes, std::span<double> out) const {
  const std::size_t n = slopes.size();
  auto apply = [&](auto&& f) {
    for (std::size_t k = 0; k < n; ++k) out[k] = std::copysign(f(std::fabs(slopes[k])), slopes[k]);
  };
  switch (kind_) {
    case ModelKind::LogQuadratic: apply(log_dphi); break;
    case ModelKind::ArctanSquare: apply(atan_dphi); break;
    case ModelKind::QuarticRoot: apply(quartic_dphi); break;
    case ModelKind::Custom:
      for (std::size_t k = 0; k < n; ++k) out[k] = dphi(slopes[k]);
      break;
  }
}

std::vector<std::string> lagrangian_violations(const CustomLagrangian& l) {
  if (!l.phi || !l.dphi || !l.d2phi) return {"missing evaluator"};
  return sampled_violations({l.phi, l.dphi, l.d2phi, l.sigma1, l.phi2_sup});
}

std::vector<std::string> model_violations(const NonlinearityModel& model) {
  return sampled_violations(evaluators_of(model));
}

double phi_eval(const NonlinearityModel& model, double sigma) {
  require_finite(sigma, "phi_eval");
  return model.phi(sigma);
}

double phi_prime(const NonlinearityModel& model, double sigma) {
  require_finite(sigma, "phi_prime");
  return model.dphi(sigma);
}

double phi_second(const NonlinearityModel& model, double sigma) {
  require_finite(sigma, "phi_second");
  return model.d2phi(sigma);
}

double conjugate_slope(const NonlinearityModel& model, double sigma) {
  require_finite(sigma, "conjugate_slope");
  const double s1 = model.sigma1();
  if (sigma < s1) throw DomainError("conjugate_slope: sigma below the threshold sigma1");
  if (sigma == s1) return s1;
  const double target = model.dphi(sigma);
  double lo = 0.0, hi = s1;
  for (int it = 0; it < 2000; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    (model.dphi(mid) < target ? lo : hi) = mid;
  }
  return std::abs(model.dphi(lo) - target) < std::abs(model.dphi(hi) - target) ? lo : hi;
}

SubcriticalWindow bilipschitz_window(const NonlinearityModel& model, double sigma0, int samples) {
  if (!std::isfinite(sigma0) || !(sigma0 > 0.0) || !(sigma0 < model.sigma1()))
    throw DomainError("bilipschitz_window: sigma0 must lie in (0, sigma1)");
  samples = std::max(samples, 2);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int k = 0; k < samples; ++k) {
    const double s = sigma0 * static_cast<double>(k) / (samples - 1);
    const double c = model.d2phi(s);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  if (!(lo > 0.0))
    throw WindowError("bilipschitz_window: d2phi is not positive on [0, " + fmt_double(sigma0) +
                      "]; shrink sigma0");
  return {sigma0, lo * (1.0 - 1e-9), hi * (1.0 + 1e-9)};
}

}  // namespace pmflow
