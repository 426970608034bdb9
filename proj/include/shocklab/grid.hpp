#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "shocklab/error.hpp"

namespace shocklab {

/// Channel R x T^(n-1) truncated to |x_1| <= L; the torus has unit length
/// and unit measure.
struct ChannelGrid {
  int dimension = 1;
  double half_length = 30.0;
  int n1 = 1024;
  int nt = 1;

  ChannelGrid() = default;
  ChannelGrid(int dim, double length, int points, int transverse)
      : dimension(dim), half_length(length), n1(points), nt(dim == 1 ? 1 : transverse) {
    if (dim < 1 || dim > 3) throw Error(ErrorCode::InvalidArgument, "grid dimension must be 1..3");
    if (!(length > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid half-length must be positive");
    if (points < 16) throw Error(ErrorCode::InvalidArgument, "grid needs N1 >= 16");
    if (dim >= 2 && transverse < 4) throw Error(ErrorCode::InvalidArgument, "grid needs N' >= 4 when n >= 2");
  }

  double h1() const noexcept { return 2.0 * half_length / static_cast<double>(n1 - 1); }
  double ht() const noexcept { return 1.0 / static_cast<double>(nt); }
  double h_min() const noexcept { return dimension == 1 ? h1() : std::min(h1(), ht()); }
  double x1(int j) const noexcept { return -half_length + h1() * static_cast<double>(j); }
  /// Number of transverse points per x_1 row, nt^(n-1).
  std::size_t row_size() const noexcept {
    std::size_t t = 1;
    for (int d = 1; d < dimension; ++d) t *= static_cast<std::size_t>(nt);
    return t;
  }
  std::size_t size() const noexcept { return static_cast<std::size_t>(n1) * row_size(); }
  /// Trapezoid weight of row j.
  double weight1(int j) const noexcept { return (j == 0 || j == n1 - 1) ? 0.5 * h1() : h1(); }

  friend bool operator==(const ChannelGrid&, const ChannelGrid&) = default;
};

enum class Frame { Lab, Moving };

inline std::string to_string(Frame frame) { return frame == Frame::Lab ? "lab" : "moving"; }

/// Solution samples laid out row-major: index = j * row_size + k, with k the
/// flattened transverse index (k = k2 for n = 2, k = k2 * nt + k3 for n = 3).
struct Field {
  ChannelGrid grid;
  std::vector<double> values;
  double time = 0.0;
  Frame frame = Frame::Moving;

  Field() = default;
  explicit Field(const ChannelGrid& g, double fill = 0.0, double t = 0.0, Frame f = Frame::Moving)
      : grid(g), values(g.size(), fill), time(t), frame(f) {}

  double& at(int j, std::size_t k) { return values[static_cast<std::size_t>(j) * grid.row_size() + k]; }
  double at(int j, std::size_t k) const { return values[static_cast<std::size_t>(j) * grid.row_size() + k]; }
  std::span<double> row(int j) { return {values.data() + static_cast<std::size_t>(j) * grid.row_size(), grid.row_size()}; }
  std::span<const double> row(int j) const {
    return {values.data() + static_cast<std::size_t>(j) * grid.row_size(), grid.row_size()};
  }
  bool finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
};

/// Transverse coordinate of flattened index k along transverse axis `axis`
/// (0 for x_2, 1 for x_3).
inline double transverse_coordinate(const ChannelGrid& grid, std::size_t k, int axis) {
  const auto nt = static_cast<std::size_t>(grid.nt);
  const std::size_t idx = grid.dimension == 3 ? (axis == 0 ? k / nt : k % nt) : k;
  return static_cast<double>(idx) * grid.ht();
}

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

namespace detail {
inline void check_exponent(double p) {
  if (!(p >= 1.0)) throw Error(ErrorCode::BadExponent, "norm exponent must be >= 1");
}
}  // namespace detail

/// Trapezoid L^p norm of samples on a uniform x_1 line with spacing h.
template <class Real>
Real lp_norm_line(std::span<const Real> values, double h, double p) {
  detail::check_exponent(p);
  if (std::isinf(p)) {
    Real m = 0;
    for (Real v : values) m = std::max(m, std::abs(v));
    return m;
  }
  const std::size_t n = values.size();
  Real acc = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const Real w = (j == 0 || j + 1 == n) ? Real(0.5) : Real(1);
    acc += w * (p == 2.0 ? values[j] * values[j] : std::pow(std::abs(values[j]), static_cast<Real>(p)));
  }
  acc *= static_cast<Real>(h);
  return p == 2.0 ? std::sqrt(acc) : std::pow(acc, static_cast<Real>(1.0 / p));
}

inline double lp_norm_line(const std::vector<double>& values, double h, double p) {
  return lp_norm_line<double>(std::span<const double>(values), h, p);
}

/// L^p norm over the unit torus using the uniform periodic rule.
inline double lp_norm_torus(std::span<const double> values, double p) {
  detail::check_exponent(p);
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  double acc = 0.0;
  for (double v : values) acc += std::pow(std::abs(v), p);
  return std::pow(acc / static_cast<double>(values.size()), 1.0 / p);
}

/// Full-domain L^p norm: trapezoid in x_1, uniform periodic rule in x'.
inline double lp_norm(const Field& field, double p) {
  detail::check_exponent(p);
  const auto& g = field.grid;
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : field.values) m = std::max(m, std::abs(v));
    return m;
  }
  const double torus_weight = 1.0 / static_cast<double>(g.row_size());
  double acc = 0.0;
  for (int j = 0; j < g.n1; ++j) {
    double row = 0.0;
    for (double v : field.row(j)) row += (p == 2.0 ? v * v : std::pow(std::abs(v), p));
    acc += g.weight1(j) * torus_weight * row;
  }
  return p == 2.0 ? std::sqrt(acc) : std::pow(acc, 1.0 / p);
}

/// Signed integral with the same quadrature as lp_norm.
inline double integrate(const Field& field) {
  const auto& g = field.grid;
  const double torus_weight = 1.0 / static_cast<double>(g.row_size());
  double acc = 0.0;
  for (int j = 0; j < g.n1; ++j) {
    double row = 0.0;
    for (double v : field.row(j)) row += v;
    acc += g.weight1(j) * torus_weight * row;
  }
  return acc;
}

inline double integrate_line(std::span<const double> values, double h) {
  const std::size_t n = values.size();
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) acc += ((j == 0 || j + 1 == n) ? 0.5 : 1.0) * values[j];
  return acc * h;
}

/// d/dx_1 on a uniform line: central in the interior, second-order one-sided
/// at the two ends.
template <class Real>
std::vector<Real> derivative_line(std::span<const Real> v, double h) {
  const std::size_t n = v.size();
  std::vector<Real> d(n);
  const Real inv = Real(1) / static_cast<Real>(h);
  for (std::size_t j = 1; j + 1 < n; ++j) d[j] = (v[j + 1] - v[j - 1]) * Real(0.5) * inv;
  d[0] = (Real(-3) * v[0] + Real(4) * v[1] - v[2]) * Real(0.5) * inv;
  d[n - 1] = (Real(3) * v[n - 1] - Real(4) * v[n - 2] + v[n - 3]) * Real(0.5) * inv;
  return d;
}

inline std::vector<double> derivative_line(const std::vector<double>& v, double h) {
  return derivative_line<double>(std::span<const double>(v), h);
}

/// Euclidean magnitude of the central-difference gradient at every point,
/// one-sided at the x_1 ends and periodic in x'.
template <class Real>
std::vector<Real> gradient_magnitude(const ChannelGrid& g, std::span<const Real> values) {
  const std::size_t t = g.row_size();
  const auto nt = static_cast<std::size_t>(g.nt);
  std::vector<Real> out(values.size());
  const Real inv1 = Real(0.5) / static_cast<Real>(g.h1());
  const Real invt = Real(0.5) / static_cast<Real>(g.ht());
  for (int j = 0; j < g.n1; ++j) {
    const std::size_t row = static_cast<std::size_t>(j) * t;
    for (std::size_t k = 0; k < t; ++k) {
      Real d1;
      if (j == 0) d1 = (Real(-3) * values[k] + Real(4) * values[t + k] - values[2 * t + k]) * inv1;
      else if (j == g.n1 - 1)
        d1 = (Real(3) * values[row + k] - Real(4) * values[row - t + k] + values[row - 2 * t + k]) * inv1;
      else d1 = (values[row + t + k] - values[row - t + k]) * inv1;
      Real sq = d1 * d1;
      if (g.dimension >= 2) {
        // axis of x_2 has stride nt in n = 3 and stride 1 in n = 2
        const std::size_t stride2 = g.dimension == 3 ? nt : 1;
        const std::size_t i2 = g.dimension == 3 ? k / nt : k;
        const std::size_t up2 = (i2 + 1) % nt, dn2 = (i2 + nt - 1) % nt;
        const std::size_t base2 = k - i2 * stride2;
        const Real d2 = (values[row + base2 + up2 * stride2] - values[row + base2 + dn2 * stride2]) * invt;
        sq += d2 * d2;
        if (g.dimension == 3) {
          const std::size_t i3 = k % nt;
          const std::size_t base3 = k - i3;
          const Real d3 = (values[row + base3 + (i3 + 1) % nt] - values[row + base3 + (i3 + nt - 1) % nt]) * invt;
          sq += d3 * d3;
        }
      }
      out[row + k] = std::sqrt(sq);
    }
  }
  return out;
}

/// L^2 norm of the discrete gradient.
inline double h1_seminorm(const Field& field) {
  Field grad(field.grid, 0.0, field.time, field.frame);
  grad.values = gradient_magnitude<double>(field.grid, field.values);
  return lp_norm(grad, 2.0);
}

// Snapshot I/O. Text: one header line "# shocklab-field n N1 Nt L t frame"
// followed by one x_1 row per line. Binary: magic "SHKF", int32 n, N1, Nt,
// float64 L, t, uint8 frame, then the float64 values in layout order.

inline void write_field_text(std::ostream& out, const Field& f) {
  const auto old = out.precision(17);
  out << "# shocklab-field " << f.grid.dimension << ' ' << f.grid.n1 << ' ' << f.grid.nt << ' '
      << f.grid.half_length << ' ' << f.time << ' ' << to_string(f.frame) << '\n';
  for (int j = 0; j < f.grid.n1; ++j) {
    const auto row = f.row(j);
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << row[k];
    out << '\n';
  }
  out.precision(old);
}

inline Field read_field_text(std::istream& in) {
  std::string hash, tag, frame;
  int n = 0, n1 = 0, nt = 0;
  double length = 0.0, t = 0.0;
  in >> hash >> tag >> n >> n1 >> nt >> length >> t >> frame;
  if (!in || hash != "#" || tag != "shocklab-field") throw Error(ErrorCode::ParseError, "bad field text header");
  Field f(ChannelGrid(n, length, n1, nt), 0.0, t, frame == "lab" ? Frame::Lab : Frame::Moving);
  for (double& v : f.values)
    if (!(in >> v)) throw Error(ErrorCode::ParseError, "truncated field text");
  return f;
}

inline void write_field_binary(std::ostream& out, const Field& f) {
  out.write("SHKF", 4);
  const std::int32_t header[3] = {f.grid.dimension, f.grid.n1, f.grid.nt};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  const double reals[2] = {f.grid.half_length, f.time};
  out.write(reinterpret_cast<const char*>(reals), sizeof(reals));
  const std::uint8_t frame = f.frame == Frame::Lab ? 0 : 1;
  out.write(reinterpret_cast<const char*>(&frame), 1);
  out.write(reinterpret_cast<const char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

inline Field read_field_binary(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "SHKF") throw Error(ErrorCode::ParseError, "bad field binary magic");
  std::int32_t header[3] = {};
  double reals[2] = {};
  std::uint8_t frame = 0;
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  in.read(reinterpret_cast<char*>(reals), sizeof(reals));
  in.read(reinterpret_cast<char*>(&frame), 1);
  if (!in) throw Error(ErrorCode::ParseError, "truncated field binary header");
  Field f(ChannelGrid(header[0], reals[0], header[1], header[2]), 0.0, reals[1],
          frame == 0 ? Frame::Lab : Frame::Moving);
  in.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!in) throw Error(ErrorCode::ParseError, "truncated field binary data");
  return f;
}

}  // namespace shocklab
