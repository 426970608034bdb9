#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "shocklab/error.hpp"
#include "shocklab/norm_series.hpp"

namespace shocklab {

struct FitWindow {
  double start = 0.0;
  double end = 0.0;
};

/// Last half of the run.
inline FitWindow default_window(std::span<const double> times) {
  if (times.empty()) throw Error(ErrorCode::TooFewSamples, "empty series");
  const double t_end = times.back();
  return {0.5 * t_end, t_end};
}

enum class FitKind { Algebraic, Exponential };

struct RateFit {
  FitKind kind = FitKind::Algebraic;
  /// Algebraic: slope of log v against log(1 + t). Exponential: the decay
  /// rate c in v ~ A exp(-c t).
  double exponent = 0.0;
  double prefactor = 0.0;
  FitWindow window;
  /// Root-mean-square residual in log space.
  double residual = 0.0;
  std::size_t samples = 0;
};

namespace detail {

inline RateFit fit_log_linear(std::span<const double> times, std::span<const long double> values, FitWindow w,
                              FitKind kind) {
  if (times.size() != values.size()) throw Error(ErrorCode::InvalidArgument, "times and values differ in length");
  if (!(w.start < w.end)) throw Error(ErrorCode::InvalidArgument, "fit window must satisfy start < end");
  std::vector<long double> x, y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < w.start || times[i] > w.end) continue;
    if (!(values[i] > 0)) throw Error(ErrorCode::NonPositiveValue, "fit needs positive values inside the window");
    x.push_back(kind == FitKind::Algebraic ? std::log1p(static_cast<long double>(times[i]))
                                           : static_cast<long double>(times[i]));
    y.push_back(std::log(values[i]));
  }
  if (x.size() < 10) throw Error(ErrorCode::TooFewSamples, "fit needs at least 10 samples in the window");
  const auto n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) { mx += x[i]; my += y[i]; }
  mx /= n;
  my /= n;
  long double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const long double slope = sxx > 0 ? sxy / sxx : 0;
  const long double intercept = my - slope * mx;
  long double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double r = y[i] - (intercept + slope * x[i]);
    ss += r * r;
  }
  RateFit fit;
  fit.kind = kind;
  fit.exponent = static_cast<double>(kind == FitKind::Algebraic ? slope : -slope);
  fit.prefactor = static_cast<double>(std::exp(intercept));
  fit.window = w;
  fit.residual = static_cast<double>(std::sqrt(ss / n));
  fit.samples = x.size();
  return fit;
}

}  // namespace detail

/// Least squares of log v against log(1 + t); negative exponent = decay.
inline RateFit fit_algebraic_rate(std::span<const double> times, std::span<const long double> values, FitWindow w) {
  return detail::fit_log_linear(times, values, w, FitKind::Algebraic);
}

/// Least squares of log v against t; returns the rate c of exp(-c t).
inline RateFit fit_exponential_rate(std::span<const double> times, std::span<const long double> values, FitWindow w) {
  return detail::fit_log_linear(times, values, w, FitKind::Exponential);
}

inline RateFit fit_algebraic_rate(const NormSeries& s, std::string_view channel, std::optional<FitWindow> w = {}) {
  return fit_algebraic_rate(s.times, s.channel(channel), w.value_or(default_window(s.times)));
}

inline RateFit fit_exponential_rate(const NormSeries& s, std::string_view channel, std::optional<FitWindow> w = {}) {
  return fit_exponential_rate(s.times, s.channel(channel), w.value_or(default_window(s.times)));
}

// ---------------------------------------------------------------------------
// Area inequality: if f >= 0 is Lipschitz with f' <= C0 (1+t)^-alpha and
// int_0^t f <= C1 (1+t)^beta ln^gamma(1+t), then
// f(t) <= 2 sqrt(C0 C1) (1+t)^((beta-alpha)/2) ln^(gamma/2)(1+t) for large t.

struct AreaParameters {
  double c0 = 1.0;
  double c1 = 1.0;
  double alpha = 2.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// Empty when the parameters satisfy the hypotheses.
inline std::vector<std::string> area_parameter_violations(const AreaParameters& a) {
  std::vector<std::string> v;
  if (!(a.c0 > 0.0)) v.emplace_back("C0 must be positive");
  if (!(a.c1 > 0.0)) v.emplace_back("C1 must be positive");
  if (!(a.beta >= 0.0 && a.beta < a.alpha)) v.emplace_back("need 0 <= beta < alpha");
  if (!(a.alpha + a.beta <= 2.0)) v.emplace_back("need alpha + beta <= 2");
  if (!(a.gamma >= 0.0)) v.emplace_back("need gamma >= 0");
  return v;
}

inline double area_bound(const AreaParameters& a, double t) {
  const auto bad = area_parameter_violations(a);
  if (!bad.empty()) throw Error(ErrorCode::HypothesisViolated, bad.front());
  if (!(t >= 0.0)) throw Error(ErrorCode::HypothesisViolated, "need t >= 0");
  const double log_term = a.gamma == 0.0 ? 1.0 : std::pow(std::log1p(t), 0.5 * a.gamma);
  return 2.0 * std::sqrt(a.c0 * a.c1) * std::pow(1.0 + t, 0.5 * (a.beta - a.alpha)) * log_term;
}

inline double area_bound(double c0, double c1, double alpha, double beta, double gamma, double t) {
  return area_bound(AreaParameters{c0, c1, alpha, beta, gamma}, t);
}

struct AreaReport {
  bool hypotheses_ok = true;
  bool conclusion_ok = true;
  bool pass = true;
  /// max over t >= t_min of f(t) / bound(t); <= 1 means the bound holds.
  double worst_margin = 0.0;
  double worst_time = 0.0;
  std::vector<std::string> violations;
};

/// Hypothesis slack for sampled data: difference quotients and trapezoid
/// integrals may exceed their bounds by 1%.
inline constexpr double kAreaSlack = 1.01;

inline AreaReport verify_area_inequality(std::span<const double> t, std::span<const double> f,
                                         const AreaParameters& a, double t_min) {
  AreaReport rep;
  if (t.size() != f.size() || t.size() < 2) {
    rep.violations.emplace_back("need at least two (t, f) samples of equal length");
    rep.hypotheses_ok = rep.pass = false;
    return rep;
  }
  for (auto& msg : area_parameter_violations(a)) rep.violations.push_back("parameters: " + msg);
  if (!rep.violations.empty()) {
    rep.hypotheses_ok = rep.conclusion_ok = rep.pass = false;
    return rep;
  }
  auto note = [&](const std::string& what, double time) {
    rep.hypotheses_ok = false;
    if (rep.violations.size() < 20) rep.violations.push_back(what + " at t=" + format_real(time));
  };
  double integral = 0.0;
  bool derivative_reported = false, integral_reported = false;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (f[k] < 0.0) note("f must be nonnegative", t[k]);
    if (k + 1 < t.size()) {
      const double dt = t[k + 1] - t[k];
      if (!(dt > 0.0)) {
        note("times must increase", t[k]);
        continue;
      }
      const double q = (f[k + 1] - f[k]) / dt;
      const double bound = a.c0 * std::pow(1.0 + t[k], -a.alpha);
      if (q > kAreaSlack * bound && !derivative_reported) {
        note("derivative bound f' <= C0 (1+t)^-alpha fails", t[k]);
        derivative_reported = true;
      }
    }
    if (k > 0) integral += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
    const double lg = a.gamma == 0.0 ? 1.0 : std::pow(std::log1p(t[k]), a.gamma);
    const double ibound = a.c1 * std::pow(1.0 + t[k], a.beta) * lg;
    if (integral > kAreaSlack * ibound + 1e-300 && !integral_reported) {
      note("integral bound int_0^t f <= C1 (1+t)^beta ln^gamma(1+t) fails", t[k]);
      integral_reported = true;
    }
    if (t[k] >= t_min) {
      const double b = area_bound(a, t[k]);
      const double margin = b > 0.0 ? f[k] / b : (f[k] > 0.0 ? HUGE_VAL : 0.0);
      if (margin > rep.worst_margin) {
        rep.worst_margin = margin;
        rep.worst_time = t[k];
      }
    }
  }
  rep.conclusion_ok = rep.worst_margin <= 1.0;
  if (!rep.conclusion_ok) rep.violations.push_back("conclusion f <= bound fails, worst at t=" + format_real(rep.worst_time));
  rep.pass = rep.hypotheses_ok && rep.conclusion_ok;
  return rep;
}

// ---------------------------------------------------------------------------
// Normalized-ratio checks of the algebraic and exponential decay bounds.

enum class BoundKind { PhiLp, PertL2, PertLinf, NonzeroExp };

inline BoundKind parse_bound_kind(std::string_view s) {
  if (s == "phi-Lp") return BoundKind::PhiLp;
  if (s == "pert-L2") return BoundKind::PertL2;
  if (s == "pert-Linf") return BoundKind::PertLinf;
  if (s == "nonzero-exp") return BoundKind::NonzeroExp;
  throw Error(ErrorCode::BadKind, "unknown bound kind " + std::string(s));
}

inline std::string to_string(BoundKind k) {
  switch (k) {
    case BoundKind::PhiLp: return "phi-Lp";
    case BoundKind::PertL2: return "pert-L2";
    case BoundKind::PertLinf: return "pert-Linf";
    case BoundKind::NonzeroExp: return "nonzero-exp";
  }
  return "?";
}

/// Decay exponent of the bound for each algebraic kind:
/// (p-2)/(4p), (p-2)/(8p) and (p-2)(2p+1)/(4p(3p+2)).
inline double theorem_exponent(BoundKind kind, double p) {
  if (kind == BoundKind::NonzeroExp) throw Error(ErrorCode::BadKind, "nonzero-exp has no algebraic exponent");
  if (!(p > 2.0)) throw Error(ErrorCode::BadExponent, "algebraic bounds need p > 2");
  switch (kind) {
    case BoundKind::PhiLp: return (p - 2.0) / (4.0 * p);
    case BoundKind::PertL2: return (p - 2.0) / (8.0 * p);
    case BoundKind::PertLinf: return (p - 2.0) * (2.0 * p + 1.0) / (4.0 * p * (3.0 * p + 2.0));
    default: break;
  }
  throw Error(ErrorCode::BadKind, "bad kind");
}

inline constexpr double kBoundSlack = 1.05;

struct BoundReport {
  BoundKind kind = BoundKind::PhiLp;
  std::string channel;
  double p = 0.0;
  /// theta for algebraic kinds, the fitted rate for nonzero-exp.
  double exponent = 0.0;
  long double sup_ratio = 0;
  double t_sup = 0.0;
  long double early_sup = 0;
  long double late_sup = 0;
  FitWindow window;
  bool consistent = false;
  /// late_sup / (1.05 early_sup); <= 1 is consistent.
  double worst_margin = 0.0;
};

/// Forms r(t) = v(t) (1+t)^theta (or v(t) exp(c t) with c fitted) and checks
/// that its supremum over [T/2, T] does not exceed 1.05 times its supremum
/// over [t_1, T/2].
inline BoundReport theorem_bound_check(const NormSeries& s, std::string_view channel, double p, BoundKind kind,
                                       std::optional<FitWindow> fit_window = {}) {
  if (s.empty()) throw Error(ErrorCode::TooFewSamples, "empty series");
  const auto v = s.channel(channel);
  BoundReport rep;
  rep.kind = kind;
  rep.channel = std::string(channel);
  rep.p = p;
  if (kind == BoundKind::NonzeroExp) rep.exponent = fit_exponential_rate(s, channel, fit_window).exponent;
  else rep.exponent = theorem_exponent(kind, p);

  const double t1 = s.times.front();
  const double t_end = s.times.back();
  const double mid = 0.5 * t_end;
  rep.window = {t1, t_end};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const long double t = s.times[i];
    const long double weight = kind == BoundKind::NonzeroExp ? std::exp(static_cast<long double>(rep.exponent) * t)
                                                             : std::pow(1.0L + t, static_cast<long double>(rep.exponent));
    const long double r = v[i] * weight;
    if (i == 0 || r > rep.sup_ratio) {
      rep.sup_ratio = r;
      rep.t_sup = s.times[i];
    }
    if (s.times[i] <= mid) rep.early_sup = std::max(rep.early_sup, r);
    if (s.times[i] >= mid) rep.late_sup = std::max(rep.late_sup, r);
  }
  rep.consistent = rep.late_sup <= kBoundSlack * rep.early_sup;
  rep.worst_margin = rep.early_sup > 0 ? static_cast<double>(rep.late_sup / (kBoundSlack * rep.early_sup))
                                       : (rep.late_sup > 0 ? HUGE_VAL : 0.0);
  return rep;
}

// ---------------------------------------------------------------------------
// Gagliardo-Nirenberg ratio monitor:
// |zero|_inf^2 / (|d1 zero|_2^(4(p+1)/(3p+2)) |Phi|_p^(2p/(3p+2))).

inline long double gn_ratio(long double zero_linf, long double dx_l2, long double phi_lp, double p) {
  const long double a = 4.0L * (p + 1.0L) / (3.0L * p + 2.0L);
  const long double b = 2.0L * p / (3.0L * p + 2.0L);
  const long double den = std::pow(dx_l2, a) * std::pow(phi_lp, b);
  if (!(den > 0)) throw Error(ErrorCode::ZeroDenominator, "G-N denominator vanishes");
  return zero_linf * zero_linf / den;
}

struct GnReport {
  double p = 0.0;
  long double max_ratio = 0;
  double t_at_max = 0.0;
  std::size_t samples = 0;
  bool finite = false;
};

inline GnReport gn_ratio_monitor(const NormSeries& s, double p) {
  char label[32];
  std::snprintf(label, sizeof label, "Phi_L%g", p);
  const auto zinf = s.channel("zero_Linf");
  const auto dx = s.channel("zero_dx_L2");
  const auto phi = s.channel(label);
  GnReport rep;
  rep.p = p;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const long double r = gn_ratio(zinf[i], dx[i], phi[i], p);
    if (r > rep.max_ratio || i == 0) {
      rep.max_ratio = r;
      rep.t_at_max = s.times[i];
    }
  }
  rep.samples = s.size();
  rep.finite = std::isfinite(rep.max_ratio);
  return rep;
}

// ---------------------------------------------------------------------------
// JSON reports: {kind, exponent, prefactor, window, residual, verdict, worst_margin}

inline nlohmann::json to_json(const RateFit& f, std::string_view channel) {
  return {{"kind", f.kind == FitKind::Algebraic ? "algebraic" : "exponential"},
          {"channel", channel},
          {"exponent", f.exponent},
          {"prefactor", f.prefactor},
          {"window", {f.window.start, f.window.end}},
          {"residual", f.residual},
          {"samples", f.samples},
          {"verdict", "fitted"},
          {"worst_margin", nullptr}};
}

inline nlohmann::json to_json(const BoundReport& r) {
  return {{"kind", to_string(r.kind)},
          {"channel", r.channel},
          {"p", r.p},
          {"exponent", r.exponent},
          {"prefactor", static_cast<double>(r.sup_ratio)},
          {"t_sup", r.t_sup},
          {"early_sup", static_cast<double>(r.early_sup)},
          {"late_sup", static_cast<double>(r.late_sup)},
          {"window", {r.window.start, r.window.end}},
          {"residual", nullptr},
          {"verdict", r.consistent ? "consistent" : "inconsistent"},
          {"worst_margin", r.worst_margin}};
}

inline nlohmann::json to_json(const AreaReport& r) {
  return {{"kind", "area-inequality"},
          {"exponent", nullptr},
          {"prefactor", nullptr},
          {"window", nullptr},
          {"residual", nullptr},
          {"hypotheses_ok", r.hypotheses_ok},
          {"conclusion_ok", r.conclusion_ok},
          {"violations", r.violations},
          {"verdict", r.pass ? "pass" : "fail"},
          {"worst_margin", r.worst_margin},
          {"worst_time", r.worst_time}};
}

inline nlohmann::json to_json(const GnReport& r) {
  return {{"kind", "gn-ratio"},
          {"p", r.p},
          {"exponent", nullptr},
          {"prefactor", static_cast<double>(r.max_ratio)},
          {"t_at_max", r.t_at_max},
          {"window", nullptr},
          {"residual", nullptr},
          {"verdict", r.finite ? "finite" : "unbounded"},
          {"worst_margin", nullptr}};
}

}  // namespace shocklab
