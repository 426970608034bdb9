#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "shocklab/error.hpp"
#include "shocklab/flux.hpp"
#include "shocklab/grid.hpp"
#include "shocklab/solver.hpp"

namespace shocklab {

enum class PerturbationKind { GaussianBump, OddBump, RandomNonzeroMode };

inline std::string to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::GaussianBump: return "gaussian-bump";
    case PerturbationKind::OddBump: return "odd-bump";
    case PerturbationKind::RandomNonzeroMode: return "random-nonzero-mode";
  }
  return "?";
}

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::GaussianBump;
  /// Peak |phi_0|; 0 gives the unperturbed profile.
  double amplitude = 0.0;
  double width = 1.0;
  double center = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const PerturbationSpec&, const PerturbationSpec&) = default;
};

struct GridSpec {
  double half_length = 30.0;
  int n1 = 1024;
  int nt = 16;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct AnalysisSpec {
  /// Empty means the default window (last half of the run).
  std::vector<double> fit_window;

  friend bool operator==(const AnalysisSpec&, const AnalysisSpec&) = default;
};

struct ExperimentConfig {
  std::string flux = "burgers";
  /// Only for flux = "polynomial": one list (all directions) or one per direction.
  std::vector<std::vector<double>> flux_coefficients;
  double u_minus = 1.0;
  double u_plus = -1.0;
  int dimension = 2;
  double u_lo = -2.0;
  double u_hi = 2.0;
  GridSpec grid;
  StepperConfig stepper;
  PerturbationSpec perturbation;
  std::vector<double> p_list{4.0, 6.0};
  double profile_step = 1e-3;
  std::string output_dir = "out";
  AnalysisSpec analysis;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline double strength(const ExperimentConfig& c) { return std::abs(c.u_minus - c.u_plus); }

inline FluxSpec make_flux(const ExperimentConfig& c) {
  if (c.flux == "burgers") return burgers_flux(c.dimension, c.u_lo, c.u_hi);
  if (c.flux == "convex-quartic") return convex_quartic_flux(c.dimension, c.u_lo, c.u_hi);
  if (c.flux == "polynomial") return polynomial_flux("polynomial", c.dimension, c.flux_coefficients, c.u_lo, c.u_hi);
  throw Error(ErrorCode::ValidationError, "flux: unknown flux '" + c.flux + "'");
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["flux"] = c.flux;
  if (!c.flux_coefficients.empty()) j["flux_coefficients"] = c.flux_coefficients;
  j["u_minus"] = c.u_minus;
  j["u_plus"] = c.u_plus;
  j["n"] = c.dimension;
  j["u_range"] = {c.u_lo, c.u_hi};
  j["grid"] = {{"L", c.grid.half_length}, {"N1", c.grid.n1}, {"Nt", c.grid.nt}};
  j["stepper"] = {{"safety", c.stepper.safety},
                  {"T", c.stepper.final_time},
                  {"output_dt", c.stepper.output_interval},
                  {"snapshot_dt", c.stepper.snapshot_interval},
                  {"frame", to_string(c.stepper.frame)},
                  {"scheme", to_string(c.stepper.scheme)}};
  j["perturbation"] = {{"kind", to_string(c.perturbation.kind)},
                       {"amplitude", c.perturbation.amplitude},
                       {"width", c.perturbation.width},
                       {"center", c.perturbation.center},
                       {"seed", c.perturbation.seed}};
  j["p_list"] = c.p_list;
  j["profile_step"] = c.profile_step;
  j["output_dir"] = c.output_dir;
  j["analysis"] = {{"fit_window", c.analysis.fit_window}};
  return j;
}

inline std::string emit_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(to_json(c).dump()));
  return buf;
}

/// Builds a validated config from JSON. Missing fields take defaults; the
/// domain half-length defaults to max(30/delta, 30) and the amplitude to
/// 0.01 delta. Every problem found is reported in one ValidationError.
/// Non-fatal notes (amplitude above 0.1 delta) go to `warnings`.
inline ExperimentConfig config_from_json(const nlohmann::json& j, std::vector<std::string>* warnings = nullptr) {
  if (!j.is_object()) throw Error(ErrorCode::ValidationError, "config must be a JSON object");
  std::vector<std::string> bad;
  ExperimentConfig c;

  auto read = [&](const nlohmann::json& obj, const char* key, const std::string& path, auto& dst) {
    if (!obj.contains(key)) return false;
    try {
      obj.at(key).get_to(dst);
      return true;
    } catch (const nlohmann::json::exception&) {
      bad.push_back(path + ": wrong type");
      return false;
    }
  };
  auto unknown = [&](const nlohmann::json& obj, std::initializer_list<const char*> keys, const std::string& prefix) {
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items())
      if (!known.count(k)) bad.push_back(prefix + k + ": unknown field");
  };

  unknown(j, {"flux", "flux_coefficients", "u_minus", "u_plus", "n", "u_range", "grid", "stepper", "perturbation",
              "p_list", "profile_step", "output_dir", "analysis"},
          "");
  read(j, "flux", "flux", c.flux);
  read(j, "flux_coefficients", "flux_coefficients", c.flux_coefficients);
  const bool has_minus = read(j, "u_minus", "u_minus", c.u_minus);
  const bool has_plus = read(j, "u_plus", "u_plus", c.u_plus);
  if (!has_minus && !j.contains("u_minus")) bad.emplace_back("u_minus: required");
  if (!has_plus && !j.contains("u_plus")) bad.emplace_back("u_plus: required");
  read(j, "n", "n", c.dimension);
  const double delta = std::abs(c.u_minus - c.u_plus);

  c.grid.half_length = std::max(30.0 / (delta > 0.0 ? delta : 1.0), 30.0);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (!g.is_object()) bad.emplace_back("grid: expected an object");
    else {
      unknown(g, {"L", "N1", "Nt"}, "grid.");
      read(g, "L", "grid.L", c.grid.half_length);
      read(g, "N1", "grid.N1", c.grid.n1);
      read(g, "Nt", "grid.Nt", c.grid.nt);
    }
  }

  if (j.contains("stepper")) {
    const auto& s = j.at("stepper");
    if (!s.is_object()) bad.emplace_back("stepper: expected an object");
    else {
      unknown(s, {"safety", "T", "output_dt", "snapshot_dt", "frame", "scheme"}, "stepper.");
      read(s, "safety", "stepper.safety", c.stepper.safety);
      read(s, "T", "stepper.T", c.stepper.final_time);
      read(s, "output_dt", "stepper.output_dt", c.stepper.output_interval);
      read(s, "snapshot_dt", "stepper.snapshot_dt", c.stepper.snapshot_interval);
      std::string frame, scheme;
      if (read(s, "frame", "stepper.frame", frame)) {
        if (frame == "moving") c.stepper.frame = Frame::Moving;
        else if (frame == "lab") bad.emplace_back("stepper.frame: experiments run in the moving frame");
        else bad.emplace_back("stepper.frame: expected 'moving'");
      }
      if (read(s, "scheme", "stepper.scheme", scheme)) {
        if (scheme == "central") c.stepper.scheme = FluxScheme::Central;
        else if (scheme == "llf") c.stepper.scheme = FluxScheme::LocalLaxFriedrichs;
        else bad.emplace_back("stepper.scheme: expected 'central' or 'llf'");
      }
    }
  }

  c.perturbation.amplitude = 0.01 * delta;
  if (j.contains("perturbation")) {
    const auto& p = j.at("perturbation");
    if (!p.is_object()) bad.emplace_back("perturbation: expected an object");
    else {
      unknown(p, {"kind", "amplitude", "width", "center", "seed"}, "perturbation.");
      std::string kind;
      if (read(p, "kind", "perturbation.kind", kind)) {
        if (kind == "gaussian-bump") c.perturbation.kind = PerturbationKind::GaussianBump;
        else if (kind == "odd-bump") c.perturbation.kind = PerturbationKind::OddBump;
        else if (kind == "random-nonzero-mode") c.perturbation.kind = PerturbationKind::RandomNonzeroMode;
        else bad.push_back("perturbation.kind: unknown kind '" + kind + "'");
      }
      read(p, "amplitude", "perturbation.amplitude", c.perturbation.amplitude);
      read(p, "width", "perturbation.width", c.perturbation.width);
      read(p, "center", "perturbation.center", c.perturbation.center);
      read(p, "seed", "perturbation.seed", c.perturbation.seed);
    }
  }
  // validity range: default pads the shock interval by 1 plus the amplitude
  const double pad = 1.0 + std::max(0.0, c.perturbation.amplitude);
  c.u_lo = std::min(c.u_minus, c.u_plus) - pad;
  c.u_hi = std::max(c.u_minus, c.u_plus) + pad;
  if (j.contains("u_range")) {
    std::vector<double> r;
    if (read(j, "u_range", "u_range", r)) {
      if (r.size() != 2) bad.emplace_back("u_range: expected [lo, hi]");
      else {
        c.u_lo = r[0];
        c.u_hi = r[1];
      }
    }
  }
  read(j, "p_list", "p_list", c.p_list);
  read(j, "profile_step", "profile_step", c.profile_step);
  read(j, "output_dir", "output_dir", c.output_dir);
  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    if (!a.is_object()) bad.emplace_back("analysis: expected an object");
    else {
      unknown(a, {"fit_window"}, "analysis.");
      read(a, "fit_window", "analysis.fit_window", c.analysis.fit_window);
    }
  }

  // semantic checks
  if (c.dimension < 1 || c.dimension > 3) bad.emplace_back("n: must be 1, 2 or 3");
  if (c.flux != "burgers" && c.flux != "convex-quartic" && c.flux != "polynomial")
    bad.push_back("flux: unknown flux '" + c.flux + "'");
  if (c.flux == "polynomial" && c.flux_coefficients.empty())
    bad.emplace_back("flux_coefficients: required for flux 'polynomial'");
  if (c.flux != "polynomial" && !c.flux_coefficients.empty())
    bad.emplace_back("flux_coefficients: only allowed for flux 'polynomial'");
  if (!(c.u_lo < c.u_hi)) bad.emplace_back("u_range: lo must be below hi");
  if (!std::isfinite(c.u_minus)) bad.emplace_back("u_minus: must be finite");
  if (!std::isfinite(c.u_plus)) bad.emplace_back("u_plus: must be finite");
  if (c.u_minus == c.u_plus) bad.emplace_back("u_plus: must differ from u_minus (degenerate shock)");

  const bool flux_ok = bad.empty();
  if (flux_ok) {
    try {
      const FluxSpec flux = make_flux(c);
      if (!flux.in_range(c.u_minus)) bad.emplace_back("u_minus: outside u_range");
      if (!flux.in_range(c.u_plus)) bad.emplace_back("u_plus: outside u_range");
      if (!(flux.convexity_floor > 0.0)) bad.emplace_back("flux: f_1 must be strictly convex on u_range");
      const ShockData shock = make_shock(flux, c.u_minus, c.u_plus);
      if (!shock.admissible)
        bad.push_back("u_plus: Lax check fails, need f_1'(u_minus) > s > f_1'(u_plus) (s = " + format_real(shock.speed) +
                      ")");
    } catch (const Error& e) {
      bad.push_back(std::string("flux: ") + e.what());
    }
  }

  if (!(c.grid.half_length > 0.0)) bad.emplace_back("grid.L: must be positive");
  if (c.grid.n1 < 16) bad.emplace_back("grid.N1: must be >= 16");
  if (c.dimension >= 2 && c.grid.nt < 4) bad.emplace_back("grid.Nt: must be >= 4 when n >= 2");
  if (c.dimension == 1) c.grid.nt = std::max(c.grid.nt, 1);
  try {
    c.stepper.validate();
  } catch (const Error& e) {
    bad.push_back(std::string("stepper: ") + e.what());
  }
  if (!(c.perturbation.amplitude >= 0.0)) bad.emplace_back("perturbation.amplitude: must be >= 0");
  if (!(c.perturbation.width > 0.0)) bad.emplace_back("perturbation.width: must be positive");
  if (c.perturbation.kind == PerturbationKind::RandomNonzeroMode && c.dimension < 2)
    bad.emplace_back("perturbation.kind: random-nonzero-mode needs n >= 2");
  if (c.p_list.empty()) bad.emplace_back("p_list: must not be empty");
  for (double p : c.p_list)
    if (!(p >= 1.0) || !std::isfinite(p)) bad.emplace_back("p_list: every p must be finite and >= 1");
  if (!(c.profile_step > 0.0)) bad.emplace_back("profile_step: must be positive");
  else if (c.grid.half_length > 0.0 && c.profile_step > c.grid.half_length / 100.0)
    bad.emplace_back("profile_step: must be <= L/100");
  if (!c.analysis.fit_window.empty() &&
      (c.analysis.fit_window.size() != 2 || !(c.analysis.fit_window[0] < c.analysis.fit_window[1])))
    bad.emplace_back("analysis.fit_window: expected [start, end] with start < end");
  if (c.output_dir.empty()) bad.emplace_back("output_dir: must not be empty");

  if (!bad.empty()) {
    std::string msg = "invalid config:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw Error(ErrorCode::ValidationError, msg);
  }
  if (warnings && delta > 0.0 && c.perturbation.amplitude > 0.1 * delta)
    warnings->push_back("perturbation.amplitude " + format_real(c.perturbation.amplitude) +
                        " exceeds 0.1 delta; the small-perturbation regime may not apply");
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text, std::vector<std::string>* warnings = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j, warnings);
}

inline ExperimentConfig parse_config(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), warnings);
}

// ---------------------------------------------------------------------------
// Initial perturbations phi_0 on the grid.

/// Gaussian bump: x'-independent, eps exp(-((x1-c)/w)^2).
/// Odd bump: zero-mass, peak eps. Random non-zero mode: seeded Fourier
/// modes |k| <= Nt/4 in x' under a Gaussian x_1 envelope, mean-free in x'.
inline Field build_perturbation(const PerturbationSpec& spec, const ChannelGrid& g) {
  Field out(g, 0.0, 0.0, Frame::Moving);
  if (spec.amplitude == 0.0) return out;
  const std::size_t t = g.row_size();
  auto envelope = [&](int j) {
    const double z = (g.x1(j) - spec.center) / spec.width;
    return std::exp(-z * z);
  };
  switch (spec.kind) {
    case PerturbationKind::GaussianBump:
      for (int j = 0; j < g.n1; ++j)
        for (double& v : out.row(j)) v = spec.amplitude * envelope(j);
      break;
    case PerturbationKind::OddBump: {
      const double norm = std::sqrt(2.0 * std::exp(1.0));
      for (int j = 0; j < g.n1; ++j) {
        const double z = (g.x1(j) - spec.center) / spec.width;
        for (double& v : out.row(j)) v = spec.amplitude * norm * z * envelope(j);
      }
      break;
    }
    case PerturbationKind::RandomNonzeroMode: {
      if (g.dimension < 2) throw Error(ErrorCode::InvalidArgument, "random-nonzero-mode needs n >= 2");
      std::mt19937_64 rng(spec.seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      const int kmax = std::max(1, g.nt / 4);
      struct Mode {
        int k2, k3;
        double a, b;
      };
      std::vector<Mode> modes;
      const int k3max = g.dimension == 3 ? kmax : 0;
      for (int k2 = 0; k2 <= kmax; ++k2)
        for (int k3 = -k3max; k3 <= k3max; ++k3) {
          if (k2 == 0 && k3 <= 0) continue;  // one of each +-k pair, skip k = 0
          const double a = normal(rng);
          const double b = normal(rng);
          modes.push_back({k2, k3, a, b});
        }
      std::vector<double> pattern(t, 0.0);
      for (std::size_t k = 0; k < t; ++k) {
        const double y2 = transverse_coordinate(g, k, 0);
        const double y3 = g.dimension == 3 ? transverse_coordinate(g, k, 1) : 0.0;
        double acc = 0.0;
        for (const auto& m : modes) {
          const double arg = 2.0 * M_PI * (m.k2 * y2 + m.k3 * y3);
          acc += m.a * std::cos(arg) + m.b * std::sin(arg);
        }
        pattern[k] = acc;
      }
      double mean = 0.0;
      for (double v : pattern) mean += v;
      mean /= static_cast<double>(t);
      double peak = 0.0;
      for (double& v : pattern) {
        v -= mean;
        peak = std::max(peak, std::abs(v));
      }
      for (int j = 0; j < g.n1; ++j) {
        const double e = spec.amplitude * envelope(j) / peak;
        auto row = out.row(j);
        for (std::size_t k = 0; k < t; ++k) row[k] = e * pattern[k];
      }
      break;
    }
  }
  return out;
}

}  // namespace shocklab
