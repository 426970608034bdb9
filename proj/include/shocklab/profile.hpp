#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "shocklab/error.hpp"
#include "shocklab/flux.hpp"

namespace shocklab {

/// Sampled traveling wave U(xi) on a uniform grid in the moving coordinate.
struct ShockProfile {
  ShockData shock;
  std::vector<double> xi;
  std::vector<double> values;
  std::vector<double> slopes;
  double clamp_tol = 0.0;

  double half_length() const { return xi.back(); }
  double step() const { return xi[1] - xi[0]; }
};

/// Right-hand side of the first-order traveling-wave equation,
/// U' = f_1(U) - s U - (f_1(u_plus) - s u_plus).
inline double profile_rhs(const ShockData& shock, double u) {
  const auto& f = shock.flux;
  return f.f(0, u) - shock.speed * u - (f.f(0, shock.u_plus) - shock.speed * shock.u_plus);
}

/// Integrates the traveling-wave equation from U(0) = (u_minus + u_plus)/2
/// with classical RK4 out to +-half_length.
inline ShockProfile solve_profile(const ShockData& shock, double half_length, double step,
                                  double clamp_tol) {
  if (!shock.admissible) throw Error(ErrorCode::NotAdmissible, "shock fails the Lax entropy condition");
  if (!(half_length > 0.0)) throw Error(ErrorCode::InvalidArgument, "half_length must be positive");
  if (!(step > 0.0) || step > half_length / 100.0)
    throw Error(ErrorCode::StepTooLarge, "profile step must lie in (0, half_length/100]");

  const auto steps = static_cast<std::size_t>(std::ceil(half_length / step - 1e-9));
  const double h = half_length / static_cast<double>(steps);
  const std::size_t count = 2 * steps + 1;

  ShockProfile profile;
  profile.shock = shock;
  profile.clamp_tol = clamp_tol;
  profile.xi.resize(count);
  profile.values.resize(count);
  profile.slopes.resize(count);

  const double mid = 0.5 * (shock.u_minus + shock.u_plus);
  profile.values[steps] = mid;

  auto rk4 = [&](double u, double dxi) {
    const double k1 = profile_rhs(shock, u);
    const double k2 = profile_rhs(shock, u + 0.5 * dxi * k1);
    const double k3 = profile_rhs(shock, u + 0.5 * dxi * k2);
    const double k4 = profile_rhs(shock, u + dxi * k3);
    return u + dxi / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };

  // March toward `target`. Values must move monotonically toward it; once
  // within clamp_tol (or stalled by rounding) they are held inside the open
  // interval for the rest of the tail.
  auto march = [&](double dxi, double target, long long direction) {
    const double dir = target > mid ? 1.0 : -1.0;
    const double limit = target - dir * clamp_tol;
    double u = mid;
    bool held = false;
    for (std::size_t k = 1; k <= steps; ++k) {
      const auto j = static_cast<std::size_t>(static_cast<long long>(steps) + direction * static_cast<long long>(k));
      if (!held) {
        const double next = rk4(u, dxi);
        if (!std::isfinite(next)) throw Error(ErrorCode::StepTooLarge, "profile integration diverged");
        if ((next - limit) * dir >= 0.0) {
          held = true;
          u = (u - limit) * dir >= 0.0 ? u : limit;
        } else if ((next - u) * dir < 0.0) {
          throw Error(ErrorCode::StepTooLarge, "profile lost monotonicity during integration");
        } else if (next == u) {
          held = true;
        } else {
          u = next;
        }
      }
      profile.values[j] = u;
    }
  };
  march(h, shock.u_plus, 1);
  march(-h, shock.u_minus, -1);

  for (std::size_t j = 0; j < count; ++j) {
    profile.xi[j] = (static_cast<double>(j) - static_cast<double>(steps)) * h;
    profile.slopes[j] = profile_rhs(shock, profile.values[j]);
  }
  return profile;
}

/// Default clamp tolerance 1e-14 delta.
inline ShockProfile solve_profile(const ShockData& shock, double half_length, double step) {
  return solve_profile(shock, half_length, step, 1e-14 * std::abs(shock.u_minus - shock.u_plus));
}

/// Closed-form Burgers wave U = s - (delta/2) tanh(delta xi / 4).
/// Written for the admissible orientation u_minus > u_plus.
inline std::pair<double, double> burgers_profile(const ShockData& shock, double xi) {
  if (!is_burgers(shock.flux)) throw Error(ErrorCode::WrongFlux, "burgers_profile needs f = u^2/2");
  const double d = shock.strength;
  const double arg = d * xi / 4.0;
  const double sech = 1.0 / std::cosh(arg);
  return {shock.speed - 0.5 * d * std::tanh(arg), -(d * d / 8.0) * sech * sech};
}

enum class Extension { Throw, EndStates };

/// Monotone cubic Hermite interpolation of U; U' is recomputed from the
/// traveling-wave equation at the interpolated value.
inline std::pair<double, double> eval_profile(const ShockProfile& profile, double xi,
                                              Extension ext = Extension::Throw) {
  const double lo = profile.xi.front();
  const double hi = profile.xi.back();
  if (!(xi >= lo && xi <= hi)) {
    if (ext == Extension::EndStates && !std::isnan(xi))
      return {xi < lo ? profile.shock.u_minus : profile.shock.u_plus, 0.0};
    throw Error(ErrorCode::OutOfRange, "eval_profile: xi outside the sampled range");
  }
  const double h = profile.step();
  const std::size_t last = profile.xi.size() - 1;
  auto j = static_cast<std::size_t>(std::floor((xi - lo) / h));
  j = std::min(j, last - 1);
  // guard against rounding in the index computation
  while (j > 0 && xi < profile.xi[j]) --j;
  while (j + 1 < last && xi > profile.xi[j + 1]) ++j;

  const double u0 = profile.values[j];
  const double u1 = profile.values[j + 1];
  double m0 = profile.slopes[j] * h;
  double m1 = profile.slopes[j + 1] * h;
  const double secant = u1 - u0;
  if (secant == 0.0) {
    m0 = m1 = 0.0;
  } else {
    // Fritsch-Carlson limiter
    double a = m0 / secant;
    double b = m1 / secant;
    if (a < 0.0) { a = 0.0; m0 = 0.0; }
    if (b < 0.0) { b = 0.0; m1 = 0.0; }
    const double r = a * a + b * b;
    if (r > 9.0) {
      const double tau = 3.0 / std::sqrt(r);
      m0 = tau * a * secant;
      m1 = tau * b * secant;
    }
  }
  const double t = (xi - profile.xi[j]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double u = (2 * t3 - 3 * t2 + 1) * u0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * u1 + (t3 - t2) * m1;
  return {u, profile_rhs(profile.shock, u)};
}

struct TailReport {
  double rate_left = 0.0;
  double rate_right = 0.0;
  double residual_left = 0.0;
  double residual_right = 0.0;
  std::size_t samples_left = 0;
  std::size_t samples_right = 0;
  double onset_left = 0.0;
  double onset_right = 0.0;
  /// Fitted rates divided by delta; the lower and upper tail constants.
  double c_lower = 0.0;
  double c_upper = 0.0;
  /// Smallest K with |U''| <= K |U'| over the samples.
  double k_bound = 0.0;
  bool pass = false;
};

namespace detail {
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) { mx += x[i]; my += y[i]; }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss += r * r;
  }
  fit.rms = std::sqrt(ss / n);
  return fit;
}
}  // namespace detail

/// Fits the exponential decay of |U'| on each tail and measures the smallest
/// K with |U''| <= K |U'|. Tails start where |U - u_pm| < delta/10 and stop
/// where the deviation drops below 1e-12 delta (round-off regime).
inline TailReport verify_profile_bounds(const ShockProfile& profile) {
  const auto& shock = profile.shock;
  const double delta = shock.strength;
  const double onset = delta / 10.0;
  const double floor = 1e-12 * delta;
  const std::size_t n = profile.xi.size();
  if (std::abs(profile.values.front() - shock.u_minus) > 1e-6 * delta ||
      std::abs(profile.values.back() - shock.u_plus) > 1e-6 * delta)
    throw Error(ErrorCode::TailTooShort, "profile tails do not reach within 1e-6 delta of the end states");

  TailReport report;
  std::vector<double> xl, yl, xr, yr;
  for (std::size_t j = 0; j < n; ++j) {
    const double xi = profile.xi[j];
    const double u = profile.values[j];
    const double slope = std::abs(profile.slopes[j]);
    if (xi < 0.0) {
      const double dev = std::abs(u - shock.u_minus);
      if (dev < onset && dev > floor && slope > 0.0) {
        report.onset_left = -xi;
        xl.push_back(-xi);
        yl.push_back(std::log(slope));
      }
    } else if (xi > 0.0) {
      const double dev = std::abs(u - shock.u_plus);
      if (dev < onset && dev > floor && slope > 0.0) {
        if (xr.empty()) report.onset_right = xi;
        xr.push_back(xi);
        yr.push_back(std::log(slope));
      }
    }
    const double k = std::abs(shock.flux.df(0, u) - shock.speed);
    report.k_bound = std::max(report.k_bound, k);
  }
  report.samples_left = xl.size();
  report.samples_right = xr.size();
  if (xl.size() < 20 || xr.size() < 20)
    throw Error(ErrorCode::TailTooShort, "fewer than 20 samples past the tail onset");

  const auto fl = detail::least_squares(xl, yl);
  const auto fr = detail::least_squares(xr, yr);
  report.rate_left = -fl.slope;
  report.rate_right = -fr.slope;
  report.residual_left = fl.rms;
  report.residual_right = fr.rms;
  report.c_lower = std::min(report.rate_left, report.rate_right) / delta;
  report.c_upper = std::max(report.rate_left, report.rate_right) / delta;
  report.pass = report.c_lower > 0.0 && std::isfinite(report.c_upper);
  return report;
}

/// Two-column text export (xi, U).
inline void write_profile_text(std::ostream& out, const ShockProfile& profile) {
  const auto old_precision = out.precision(17);
  out << "# xi U\n";
  for (std::size_t j = 0; j < profile.xi.size(); ++j) out << profile.xi[j] << ' ' << profile.values[j] << '\n';
  out.precision(old_precision);
}

}  // namespace shocklab
