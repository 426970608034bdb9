#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "shocklab/error.hpp"
#include "shocklab/flux.hpp"
#include "shocklab/grid.hpp"
#include "shocklab/profile.hpp"

namespace shocklab {

/// Transverse average at each x_1 (the zero mode). Identity when n = 1.
inline std::vector<double> zero_mode(const Field& field) {
  const auto& g = field.grid;
  const double inv = 1.0 / static_cast<double>(g.row_size());
  std::vector<double> out(static_cast<std::size_t>(g.n1));
  for (int j = 0; j < g.n1; ++j) {
    double acc = 0.0;
    for (double v : field.row(j)) acc += v;
    out[static_cast<std::size_t>(j)] = acc * inv;
  }
  return out;
}

/// Extends an x_1 line to a field that is constant in x'.
inline Field broadcast(std::span<const double> line, const ChannelGrid& grid, double time = 0.0,
                       Frame frame = Frame::Moving) {
  Field out(grid, 0.0, time, frame);
  for (int j = 0; j < grid.n1; ++j)
    for (double& v : out.row(j)) v = line[static_cast<std::size_t>(j)];
  return out;
}

/// Field minus its broadcast zero mode.
inline Field nonzero_mode(const Field& field) {
  const auto mean = zero_mode(field);
  Field out = field;
  for (int j = 0; j < field.grid.n1; ++j)
    for (double& v : out.row(j)) v -= mean[static_cast<std::size_t>(j)];
  return out;
}

struct ModeSplit {
  std::vector<double> zero;
  Field nonzero;
  double time = 0.0;
};

inline ModeSplit split_modes(const Field& field) {
  return {zero_mode(field), nonzero_mode(field), field.time};
}

/// Cumulative x_1 integral of the zero-mode perturbation, started at -L.
struct AntiDerivative {
  std::vector<double> values;
  double h1 = 0.0;
  double time = 0.0;
  /// Phi(+L), the residual mass on the truncated domain.
  double total_mass = 0.0;
  /// Set when the input exceeds 1e-8 at either x_1 boundary.
  bool boundary_leak = false;
};

inline constexpr double kAntiderivativeLeakTol = 1e-8;

inline AntiDerivative antiderivative(std::span<const double> zero_pert, const ChannelGrid& grid, double time = 0.0) {
  if (zero_pert.size() != static_cast<std::size_t>(grid.n1))
    throw Error(ErrorCode::InvalidArgument, "antiderivative: line length does not match the grid");
  AntiDerivative phi;
  phi.h1 = grid.h1();
  phi.time = time;
  phi.values.resize(zero_pert.size());
  phi.values[0] = 0.0;
  for (std::size_t j = 1; j < zero_pert.size(); ++j)
    phi.values[j] = phi.values[j - 1] + 0.5 * phi.h1 * (zero_pert[j - 1] + zero_pert[j]);
  phi.total_mass = phi.values.back();
  phi.boundary_leak = std::abs(zero_pert.front()) > kAntiderivativeLeakTol ||
                      std::abs(zero_pert.back()) > kAntiderivativeLeakTol;
  return phi;
}

/// Background profile sampled on the grid rows at xi = x_1 + shift, moving frame.
inline std::vector<double> sample_profile(const ShockProfile& profile, const ChannelGrid& grid, double shift = 0.0) {
  std::vector<double> u(static_cast<std::size_t>(grid.n1));
  for (int j = 0; j < grid.n1; ++j)
    u[static_cast<std::size_t>(j)] = eval_profile(profile, grid.x1(j) + shift, Extension::EndStates).first;
  return u;
}

/// Shift a with M = integral of (u0 - U) and a = M / (u_plus - u_minus), so
/// that the background U(xi + a) carries the same mass as u0.
inline double shift_normalize(const Field& u0, const ShockProfile& profile, const ShockData& shock) {
  if (shock.u_plus == shock.u_minus) throw Error(ErrorCode::DegenerateShock, "u_plus equals u_minus");
  const auto& g = u0.grid;
  // lab-frame input is brought to the moving coordinate xi = x_1 - s t
  const double offset = u0.frame == Frame::Lab ? -shock.speed * u0.time : 0.0;
  const auto background = sample_profile(profile, g, offset);
  const auto mean = zero_mode(u0);
  std::vector<double> diff(mean.size());
  for (std::size_t j = 0; j < mean.size(); ++j) diff[j] = mean[j] - background[j];
  const double mass = integrate_line(diff, g.h1());
  return mass / (shock.u_plus - shock.u_minus);
}

/// (t, x_1, Phi) rows for a sequence of anti-derivatives on one grid.
inline void write_antiderivative_table(std::ostream& out, const ChannelGrid& grid,
                                       std::span<const AntiDerivative> series) {
  const auto old = out.precision(17);
  out << "# t x1 Phi\n";
  for (const auto& phi : series)
    for (int j = 0; j < grid.n1; ++j)
      out << phi.time << ' ' << grid.x1(j) << ' ' << phi.values[static_cast<std::size_t>(j)] << '\n';
  out.precision(old);
}

}  // namespace shocklab
