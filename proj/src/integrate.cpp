#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "pmflow/errors.hpp"
#include "pmflow/flow.hpp"
#include "semi_discrete_system.hpp"

namespace pmflow {
namespace {

// Dormand-Prince 5(4).
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - b* (fifth minus embedded fourth order weights).
constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                 e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                 e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

// ROS3P (Lang & Verwer), transformed form:
//   (I/(h gamma) - J) U_i = F(y + sum a_ij U_j) + sum (c_ij / h) U_j.
constexpr double rg = 7.886751345948129e-01;
constexpr double ra21 = 1.267949192431123, ra31 = 1.267949192431123, ra32 = 0.0;
constexpr double rc21 = -1.607695154586736, rc31 = -3.464101615137755, rc32 = -1.732050807568877;
constexpr double rm1 = 2.0, rm2 = 5.773502691896258e-01, rm3 = 4.226497308103742e-01;
constexpr double re1 = 2.0 - 2.113248654051871, re2 = 5.773502691896258e-01 - 1.0, re3 = 0.0;

std::vector<double> schedule(double t_end, const IntegrateOptions& opts) {
  std::vector<double> times = opts.sample_times;
  if (times.empty()) {
    const int m = std::max(opts.samples, 2);
    times.resize(m);
    for (int k = 0; k < m; ++k) times[k] = t_end * static_cast<double>(k) / (m - 1);
    times.back() = t_end;
  }
  if (times.front() != 0.0) throw ConfigError("sample times must start at 0");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw ConfigError("sample times must be strictly increasing");
  return times;
}

class Stepper {
 public:
  Stepper(SemiDiscreteSystem& sys, const IntegrateOptions& opts, Trajectory& out)
      : sys_(sys), opts_(opts), out_(out), n_(sys.size()), cell_(opts.length / sys.size()) {}

  double weighted_error(std::span<const double> err, std::span<const double> y0,
                        std::span<const double> y1) const {
    double e = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      // std::max would silently drop a NaN.
      if (!std::isfinite(err[i]) || !std::isfinite(y1[i])) return std::numeric_limits<double>::infinity();
      const double scale = opts_.atol + opts_.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      e = std::max(e, std::abs(err[i]) / scale);
    }
    return e;
  }

  double rate(std::span<const double> f) const {
    double s = 0.0;
    for (double v : f) s += v * v;
    return cell_ * s;
  }

  // Simpson's rule for the dissipation on [t, t+h]; the midpoint derivative
  // comes from the cubic Hermite interpolant of the step.
  double dissipation_increment(double h, std::span<const double> y0, std::span<const double> y1,
                               std::span<const double> f0, std::span<const double> f1) {
    mid_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i)
      mid_[i] = 1.5 * (y1[i] - y0[i]) / h - 0.25 * (f0[i] + f1[i]);
    return h / 6.0 * (rate(f0) + 4.0 * rate(mid_) + rate(f1));
  }

  [[noreturn]] void underflow(double t, double h, double err, std::span<const double> y) const {
    double sup = 0.0;
    for (double v : y) sup = std::max(sup, std::abs(v));
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "step size underflow: t=%.17g h=%.3e err=%.3e n=%zu |u|_inf=%.17g rtol=%.3e "
                  "atol=%.3e accepted=%zu rejected=%zu",
                  t, h, err, n_, sup, opts_.rtol, opts_.atol, out_.stats.accepted,
                  out_.stats.rejected);
    throw StiffnessError(buf);
  }

  void record(double t, std::span<const double> y, double dissipation) {
    out_.times.push_back(t);
    out_.states.emplace_back(std::vector<double>(y.begin(), y.end()));
    out_.dissipation_at.push_back(dissipation);
  }

 protected:
  SemiDiscreteSystem& sys_;
  const IntegrateOptions& opts_;
  Trajectory& out_;
  std::size_t n_;
  double cell_;
  std::vector<double> mid_;
};

class DormandPrince : public Stepper {
 public:
  using Stepper::Stepper;

  void run(std::span<const double> u0, const std::vector<double>& times, double step_cap) {
    std::vector<double> y(u0.begin(), u0.end()), ynew(n_), tmp(n_), err(n_);
    std::vector<double> k1(n_), k2(n_), k3(n_), k4(n_), k5(n_), k6(n_), k7(n_);
    auto F = [&](std::span<const double> in, std::span<double> outv) {
      sys_.eval(in, outv);
      ++out_.stats.rhs_evaluations;
    };

    double t = 0.0, diss = 0.0;
    record(t, y, diss);
    F(y, k1);

    const double hmax = std::min(opts_.max_step, step_cap);
    double h = std::min(hmax, 1e-3 * times.back());
    {
      // Keep the first step modest relative to the initial rate of change.
      double d0 = 0.0, d1 = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        const double sc = opts_.atol + opts_.rtol * std::abs(y[i]);
        d0 = std::max(d0, std::abs(y[i]) / sc);
        d1 = std::max(d1, std::abs(k1[i]) / sc);
      }
      if (d1 > 1e-5 && d0 > 1e-5) h = std::min(h, 0.01 * d0 / d1);
      if (d1 > 0.0 && d0 <= 1e-5) h = std::min(h, 1e-6);
    }
    double err_old = 1e-4;
    bool rejected_last = false;
    int nonfinite = 0;

    for (std::size_t next = 1; next < times.size();) {
      const double target = times[next];
      double step = std::min(h, hmax);
      bool hits = false;
      if (t + step * (1.0 + 1e-9) >= target) {
        step = target - t;
        hits = true;
      }

      for (std::size_t i = 0; i < n_; ++i) tmp[i] = y[i] + step * a21 * k1[i];
      F(tmp, k2);
      for (std::size_t i = 0; i < n_; ++i) tmp[i] = y[i] + step * (a31 * k1[i] + a32 * k2[i]);
      F(tmp, k3);
      for (std::size_t i = 0; i < n_; ++i)
        tmp[i] = y[i] + step * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      F(tmp, k4);
      for (std::size_t i = 0; i < n_; ++i)
        tmp[i] = y[i] + step * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      F(tmp, k5);
      for (std::size_t i = 0; i < n_; ++i)
        tmp[i] = y[i] + step * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                a65 * k5[i]);
      F(tmp, k6);
      for (std::size_t i = 0; i < n_; ++i)
        ynew[i] = y[i] + step * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
      F(ynew, k7);
      for (std::size_t i = 0; i < n_; ++i)
        err[i] = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                         e7 * k7[i]);
      const double e = weighted_error(err, y, ynew);

      if (!std::isfinite(e)) {
        ++out_.stats.rejected;
        if (++nonfinite > 60) throw DivergenceError("state became non-finite at t=" + std::to_string(t));
        h = 0.1 * step;
        rejected_last = true;
        if (h < opts_.min_step) underflow(t, h, e, y);
        continue;
      }
      nonfinite = 0;

      if (e <= 1.0) {
        ++out_.stats.accepted;
        diss += dissipation_increment(step, y, ynew, k1, k7);
        t = hits ? target : t + step;
        y.swap(ynew);
        k1.swap(k7);
        if (hits) {
          record(t, y, diss);
          ++next;
        }
        // Gustafsson PI control (Hairer's DOPRI5 exponents).
        double fac = std::pow(e, 0.17) * std::pow(err_old, -0.04) / 0.9;
        fac = std::clamp(fac, 0.2, 10.0);
        double hnew = step / fac;
        if (rejected_last) hnew = std::min(hnew, step);
        // Truncation at a sample time should not shrink the next step.
        h = hits ? std::max(hnew, h) : hnew;
        err_old = std::max(e, 1e-4);
        rejected_last = false;
      } else {
        ++out_.stats.rejected;
        h = step / std::min(10.0, std::pow(e, 0.2) / 0.9);
        rejected_last = true;
        if (h < opts_.min_step) underflow(t, h, e, y);
      }
    }
  }
};

class Rosenbrock : public Stepper {
 public:
  using Stepper::Stepper;

  void run(std::span<const double> u0, const std::vector<double>& times) {
    std::vector<double> y(u0.begin(), u0.end()), ynew(n_), tmp(n_), err(n_);
    std::vector<double> f0(n_), f1(n_), U1(n_), U2(n_), U3(n_), rhs(n_);
    lower_.resize(n_);
    diag_.resize(n_);
    upper_.resize(n_);
    auto F = [&](std::span<const double> in, std::span<double> outv) {
      sys_.eval(in, outv);
      ++out_.stats.rhs_evaluations;
    };

    double t = 0.0, diss = 0.0;
    record(t, y, diss);
    F(y, f0);
    double h = std::min(opts_.max_step, 1e-4 * times.back());
    bool rejected_last = false;

    for (std::size_t next = 1; next < times.size();) {
      const double target = times[next];
      double step = std::min(h, opts_.max_step);
      bool hits = false;
      if (t + step * (1.0 + 1e-9) >= target) {
        step = target - t;
        hits = true;
      }

      sys_.jacobian(y, lower_, diag_, upper_);
      bool ok = factor(1.0 / (step * rg));
      if (ok) {
        solve(f0, U1);
        for (std::size_t i = 0; i < n_; ++i) tmp[i] = y[i] + ra21 * U1[i];
        F(tmp, rhs);
        for (std::size_t i = 0; i < n_; ++i) rhs[i] += rc21 / step * U1[i];
        solve(rhs, U2);
        for (std::size_t i = 0; i < n_; ++i) tmp[i] = y[i] + ra31 * U1[i] + ra32 * U2[i];
        F(tmp, rhs);
        for (std::size_t i = 0; i < n_; ++i) rhs[i] += (rc31 * U1[i] + rc32 * U2[i]) / step;
        solve(rhs, U3);
        for (std::size_t i = 0; i < n_; ++i) {
          ynew[i] = y[i] + rm1 * U1[i] + rm2 * U2[i] + rm3 * U3[i];
          err[i] = re1 * U1[i] + re2 * U2[i] + re3 * U3[i];
        }
      }
      const double e = ok ? weighted_error(err, y, ynew) : INFINITY;

      if (std::isfinite(e) && e <= 1.0) {
        F(ynew, f1);
        ++out_.stats.accepted;
        diss += dissipation_increment(step, y, ynew, f0, f1);
        t = hits ? target : t + step;
        y.swap(ynew);
        f0.swap(f1);
        if (hits) {
          record(t, y, diss);
          ++next;
        }
        double hnew = step * std::clamp(0.9 * std::pow(std::max(e, 1e-10), -1.0 / 3.0), 0.2, 5.0);
        if (rejected_last) hnew = std::min(hnew, step);
        h = hits ? std::max(hnew, h) : hnew;
        rejected_last = false;
      } else {
        ++out_.stats.rejected;
        const double shrink = std::isfinite(e) ? std::max(0.1, 0.9 * std::pow(e, -1.0 / 3.0)) : 0.1;
        h = step * shrink;
        rejected_last = true;
        if (h < opts_.min_step) underflow(t, h, e, y);
      }
    }
  }

 private:
  // LU factorisation of (shift I - J) without pivoting (Thomas algorithm).
  bool factor(double shift) {
    piv_.resize(n_);
    mul_.resize(n_);
    piv_[0] = shift - diag_[0];
    if (!std::isfinite(piv_[0]) || std::abs(piv_[0]) < 1e-300) return false;
    for (std::size_t i = 1; i < n_; ++i) {
      mul_[i] = -lower_[i] / piv_[i - 1];
      piv_[i] = shift - diag_[i] - mul_[i] * (-upper_[i - 1]);
      if (!std::isfinite(piv_[i]) || std::abs(piv_[i]) < 1e-300) return false;
    }
    return true;
  }

  void solve(std::span<const double> b, std::span<double> x) {
    x[0] = b[0];
    for (std::size_t i = 1; i < n_; ++i) x[i] = b[i] - mul_[i] * x[i - 1];
    x[n_ - 1] /= piv_[n_ - 1];
    for (std::size_t i = n_ - 1; i-- > 0;) x[i] = (x[i] + upper_[i] * x[i + 1]) / piv_[i];
  }

  std::vector<double> lower_, diag_, upper_, piv_, mul_;
};

}  // namespace

Trajectory integrate(const GridFunction& u0, const NonlinearityModel& model, BoundaryCondition bc,
                     double t_end, const IntegrateOptions& opts) {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be positive");
  if (!(opts.rtol >= 0.0) || !(opts.atol >= 0.0) || opts.rtol + opts.atol <= 0.0)
    throw ConfigError("tolerances must be nonnegative and not both zero");
  if (!(opts.length > 0.0)) throw ConfigError("domain length must be positive");
  auto times = schedule(t_end, opts);
  if (opts.sample_times.empty()) times.back() = t_end;

  Trajectory traj;
  traj.model = model.name();
  traj.bc = bc;
  traj.n = u0.size();
  traj.length = opts.length;
  traj.times.reserve(times.size());
  traj.states.reserve(times.size());

  SemiDiscreteSystem sys(model, bc, u0.size(), opts.length);
  if (opts.method == Integrator::DormandPrince54) {
    const double n_eff = u0.size() / opts.length;
    const double cap = opts.c_step / (n_eff * n_eff * model.phi2_sup());
    DormandPrince(sys, opts, traj).run(u0.values(), times, cap);
  } else {
    Rosenbrock(sys, opts, traj).run(u0.values(), times);
  }
  traj.dissipation = traj.dissipation_at.back();
  traj.diagnostics = run_diagnostics(traj, model, opts.monotonicity_tol);
  return traj;
}

}  // namespace pmflow
