#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "shocklab/error.hpp"
#include "shocklab/polynomial.hpp"

namespace shocklab {

/// Flux vector f = (f_1, ..., f_n) on a validity range [u_lo, u_hi].
///
/// Component 0 is the longitudinal flux f_1 and must be strictly convex for
/// a viscous shock to exist; the transverse components only need to be
/// smooth. All components are polynomials.
struct FluxSpec {
  std::string name;
  int dimension = 1;
  std::vector<Polynomial> components;
  double convexity_floor = 0.0;
  double u_lo = -1.0;
  double u_hi = 1.0;

  const Polynomial& component(int i) const { return components.at(static_cast<std::size_t>(i)); }
  double f(int i, double u) const { return component(i)(u); }
  double df(int i, double u) const { return component(i).derivative(u, 1); }
  double d2f(int i, double u) const { return component(i).derivative(u, 2); }

  bool in_range(double u) const noexcept { return u >= u_lo && u <= u_hi; }

  friend bool operator==(const FluxSpec&, const FluxSpec&) = default;
};

/// Minimum of f_1'' over `samples` uniformly spaced points of the validity
/// range. The caller compares the result against the convexity floor.
inline double check_convexity(const FluxSpec& flux, int samples) {
  if (samples < 2) throw Error(ErrorCode::InvalidArgument, "check_convexity needs at least 2 samples");
  double lowest = std::numeric_limits<double>::infinity();
  const double span = flux.u_hi - flux.u_lo;
  for (int k = 0; k < samples; ++k) {
    const double u = flux.u_lo + span * static_cast<double>(k) / static_cast<double>(samples - 1);
    lowest = std::min(lowest, flux.d2f(0, u));
  }
  return lowest;
}

/// Builds a flux from one coefficient list per direction. A single list is
/// reused for every direction.
inline FluxSpec polynomial_flux(std::string name, int dimension,
                                const std::vector<std::vector<double>>& coefficients,
                                double u_lo, double u_hi) {
  if (dimension < 1 || dimension > 3)
    throw Error(ErrorCode::InvalidArgument, "flux dimension must be 1..3");
  if (coefficients.empty()) throw Error(ErrorCode::InvalidArgument, "flux needs coefficients");
  if (coefficients.size() != 1 && coefficients.size() != static_cast<std::size_t>(dimension))
    throw Error(ErrorCode::InvalidArgument, "flux needs one coefficient list or one per direction");
  if (!(u_lo < u_hi)) throw Error(ErrorCode::InvalidArgument, "flux validity range is empty");
  FluxSpec flux;
  flux.name = std::move(name);
  flux.dimension = dimension;
  for (int i = 0; i < dimension; ++i) {
    const auto& c = coefficients.size() == 1 ? coefficients.front() : coefficients[static_cast<std::size_t>(i)];
    flux.components.emplace_back(c);
  }
  flux.u_lo = u_lo;
  flux.u_hi = u_hi;
  flux.convexity_floor = check_convexity(flux, 1001);
  return flux;
}

/// f_i(u) = u^2/2 in every direction.
inline FluxSpec burgers_flux(int dimension, double u_lo = -2.0, double u_hi = 2.0) {
  return polynomial_flux("burgers", dimension, {{0.0, 0.0, 0.5}}, u_lo, u_hi);
}

/// f_i(u) = u^2/2 + u^4/12 in every direction; f'' = 1 + u^2.
inline FluxSpec convex_quartic_flux(int dimension, double u_lo = -2.0, double u_hi = 2.0) {
  return polynomial_flux("convex-quartic", dimension, {{0.0, 0.0, 0.5, 0.0, 1.0 / 12.0}}, u_lo, u_hi);
}

inline bool is_burgers(const FluxSpec& flux) {
  const Polynomial burgers({0.0, 0.0, 0.5});
  return std::all_of(flux.components.begin(), flux.components.end(),
                     [&](const Polynomial& p) { return p == burgers; });
}

/// Rankine-Hugoniot speed s = (f_1(u+) - f_1(u-)) / (u+ - u-).
inline double shock_speed(const FluxSpec& flux, double u_minus, double u_plus) {
  if (u_minus == u_plus) throw Error(ErrorCode::EqualStates, "u_minus equals u_plus");
  return (flux.f(0, u_plus) - flux.f(0, u_minus)) / (u_plus - u_minus);
}

/// End states, speed and strength of a planar shock.
///
/// The admissible orientation for convex f_1 is u_minus > u_plus, so the
/// viscous profile decreases in the moving coordinate.
struct ShockData {
  FluxSpec flux;
  double u_minus = 0.0;
  double u_plus = 0.0;
  double speed = 0.0;
  double strength = 0.0;
  bool admissible = false;

  double lower() const noexcept { return std::min(u_minus, u_plus); }
  double upper() const noexcept { return std::max(u_minus, u_plus); }
  double rh_residual() const {
    return std::abs(-speed * (u_plus - u_minus) + flux.f(0, u_plus) - flux.f(0, u_minus));
  }
};

/// Lax entropy condition: f_1'(u_minus) - s > 0 > f_1'(u_plus) - s.
inline bool check_lax(const ShockData& shock) {
  return shock.flux.df(0, shock.u_minus) - shock.speed > 0.0 &&
         shock.flux.df(0, shock.u_plus) - shock.speed < 0.0;
}

inline ShockData make_shock(FluxSpec flux, double u_minus, double u_plus) {
  ShockData shock;
  shock.speed = shock_speed(flux, u_minus, u_plus);
  shock.flux = std::move(flux);
  shock.u_minus = u_minus;
  shock.u_plus = u_plus;
  shock.strength = std::abs(u_minus - u_plus);
  shock.admissible = check_lax(shock);
  return shock;
}

namespace detail {
inline void require_between(const ShockData& shock, double u, const char* what) {
  if (!(u >= shock.lower() && u <= shock.upper()))
    throw Error(ErrorCode::OutOfRange, std::string(what) + ": u=" + std::to_string(u) +
                                           " outside the interval between the end states");
}
}  // namespace detail

/// h(u) = f_1(u) - f_1(u_plus) - s (u - u_plus).
inline double h_function(const ShockData& shock, double u) {
  detail::require_between(shock, u, "h_function");
  const auto& f = shock.flux;
  const double from_plus = f.f(0, u) - f.f(0, shock.u_plus) - shock.speed * (u - shock.u_plus);
  const double from_minus = f.f(0, u) - f.f(0, shock.u_minus) - shock.speed * (u - shock.u_minus);
  const double scale = 1.0 + std::abs(f.f(0, shock.u_minus)) + std::abs(f.f(0, shock.u_plus)) +
                       std::abs(shock.speed) * (std::abs(shock.u_minus) + std::abs(shock.u_plus));
  if (std::abs(from_plus - from_minus) > 1e-10 * scale)
    throw Error(ErrorCode::InvalidArgument, "h_function: endpoint forms disagree, speed violates Rankine-Hugoniot");
  return from_plus;
}

/// Positive weight with h(u) w(u) = (u - u_minus)(u - u_plus).
///
/// For convex f_1 between the end states h < 0 and the quadratic is < 0, so
/// w > 0 and (h w)'' = +2. End states use the limit (u_pm - u_mp)/h'(u_pm).
inline double weight_w(const ShockData& shock, double u) {
  detail::require_between(shock, u, "weight_w");
  const auto& f = shock.flux;
  if (u == shock.u_plus)
    return (shock.u_plus - shock.u_minus) / (f.df(0, shock.u_plus) - shock.speed);
  if (u == shock.u_minus)
    return (shock.u_minus - shock.u_plus) / (f.df(0, shock.u_minus) - shock.speed);
  return (u - shock.u_minus) * (u - shock.u_plus) / h_function(shock, u);
}

}  // namespace shocklab
