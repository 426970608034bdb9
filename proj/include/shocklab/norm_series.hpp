#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "shocklab/error.hpp"

namespace shocklab {

/// Time series of named norms.
///
/// Values are long double: the non-zero mode decays like exp(-4 pi^2 t) and
/// leaves the double exponent range within t ~ 18.
struct NormSeries {
  std::vector<double> times;
  std::vector<std::string> names;
  std::vector<std::vector<long double>> channels;
  std::vector<double> p_list;
  std::string grid;
  std::string config_hash;

  std::size_t size() const noexcept { return times.size(); }
  bool empty() const noexcept { return times.empty(); }

  bool has(std::string_view name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }

  std::span<const long double> channel(std::string_view name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(ErrorCode::MissingChannel, "no channel named " + std::string(name));
    return channels[static_cast<std::size_t>(it - names.begin())];
  }

  /// Appends one sample; the first call fixes the channel set and order.
  void append(double t, const std::vector<std::pair<std::string, long double>>& sample) {
    if (!times.empty() && !(t > times.back()))
      throw Error(ErrorCode::InvalidArgument, "norm series times must be strictly increasing");
    if (names.empty()) {
      for (const auto& [name, value] : sample) {
        names.push_back(name);
        channels.emplace_back();
      }
    }
    if (sample.size() != names.size()) throw Error(ErrorCode::InvalidArgument, "norm sample has the wrong channel count");
    for (std::size_t c = 0; c < sample.size(); ++c) {
      if (sample[c].first != names[c]) throw Error(ErrorCode::InvalidArgument, "norm sample channel order changed");
      const long double v = sample[c].second;
      if (!std::isfinite(v) || v < 0) throw Error(ErrorCode::InvalidArgument, "norm values must be finite and >= 0");
      channels[c].push_back(v);
    }
    times.push_back(t);
  }
};

inline std::string format_real(long double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17Lg", v);
  return buf;
}

/// CSV: header "t,<channel>..." then 17-significant-digit rows.
inline void write_norms_csv(std::ostream& out, const NormSeries& series) {
  out << 't';
  for (const auto& n : series.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_real(series.times[i]);
    for (const auto& ch : series.channels) out << ',' << format_real(ch[i]);
    out << '\n';
  }
}

inline NormSeries read_norms_csv(std::istream& in) {
  NormSeries series;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty norms csv");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header.front() != "t") throw Error(ErrorCode::ParseError, "norms csv must start with column t");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::pair<std::string, long double>> sample;
    double t = 0.0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (!std::getline(ss, cell, ',')) throw Error(ErrorCode::ParseError, "short csv row");
      try {
        if (c == 0) t = std::stod(cell);
        else sample.emplace_back(header[c], std::stold(cell));
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::ParseError, "bad number in csv: " + cell);
      }
    }
    series.append(t, sample);
  }
  return series;
}

}  // namespace shocklab
