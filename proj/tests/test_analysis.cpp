#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "shocklab/analysis.hpp"
#include "shocklab/grid.hpp"

using namespace shocklab;

namespace {

struct Series {
  std::vector<double> t;
  std::vector<long double> v;
};

template <class F>
Series sample(double t0, double t1, double dt, F&& f) {
  Series s;
  for (double t = t0; t <= t1 + 1e-9; t += dt) {
    s.t.push_back(t);
    s.v.push_back(f(t));
  }
  return s;
}

template <class F>
NormSeries norm_series(double t_end, F&& f) {
  NormSeries s;
  for (int i = 0; i <= static_cast<int>(t_end); ++i) s.append(i, {{"x", f(static_cast<double>(i))}});
  return s;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;  // unreachable in the tests below
}

double sech(double x) { return 1.0 / std::cosh(x); }

}  // namespace

TEST(FitAlgebraic, ExactPowerLaw) {
  const auto s = sample(1.0, 100.0, 1.0, [](double t) { return 3.0L * std::pow(1.0L + t, -0.5L); });
  const auto fit = fit_algebraic_rate(s.t, s.v, {1.0, 100.0});
  EXPECT_NEAR(fit.exponent, -0.5, 1e-3);
  EXPECT_NEAR(fit.prefactor, 3.0, 0.03);
  EXPECT_LT(fit.residual, 1e-10);
  EXPECT_EQ(fit.samples, 100u);
  EXPECT_EQ(fit.kind, FitKind::Algebraic);
}

TEST(FitAlgebraic, ConstantAndOscillating) {
  const auto c = sample(0.0, 50.0, 0.5, [](double) { return 0.7L; });
  EXPECT_NEAR(fit_algebraic_rate(c.t, c.v, {0.0, 50.0}).exponent, 0.0, 1e-10);
  const auto o = sample(10.0, 1000.0, 1.0, [](double t) { return std::pow(1.0L + t, -0.25L) * (2.0L + std::sin(t)); });
  EXPECT_NEAR(fit_algebraic_rate(o.t, o.v, {10.0, 1000.0}).exponent, -0.25, 0.05);
}

TEST(FitExponential, Examples) {
  const auto e = sample(0.0, 40.0, 0.5, [](double t) { return 2.0L * std::exp(-0.3L * t); });
  const auto fit = fit_exponential_rate(e.t, e.v, {0.0, 40.0});
  EXPECT_NEAR(fit.exponent, 0.3, 1e-6);
  EXPECT_NEAR(fit.prefactor, 2.0, 1e-9);
  EXPECT_LT(fit.residual, 1e-10);
  const auto c = sample(0.0, 10.0, 0.5, [](double) { return 5.0L; });
  EXPECT_NEAR(fit_exponential_rate(c.t, c.v, {0.0, 10.0}).exponent, 0.0, 1e-12);

  // a noise floor at 1e-14 is crossed near t = 100
  const auto floored = sample(0.0, 150.0, 0.5, [](double t) { return 2.0L * std::exp(-0.3L * t) + 1e-14L; });
  EXPECT_NEAR(fit_exponential_rate(floored.t, floored.v, {0.0, 60.0}).exponent, 0.3, 1e-3);
  EXPECT_LT(fit_exponential_rate(floored.t, floored.v, {0.0, 150.0}).exponent, 0.25);
}

TEST(Fit, Errors) {
  const auto s = sample(0.0, 4.0, 1.0, [](double t) { return 1.0L + t; });
  EXPECT_EQ(code_of([&] { fit_algebraic_rate(s.t, s.v, {0.0, 4.0}); }), ErrorCode::TooFewSamples);
  auto z = sample(0.0, 20.0, 1.0, [](double t) { return 1.0L + t; });
  z.v[5] = 0.0L;
  EXPECT_EQ(code_of([&] { fit_exponential_rate(z.t, z.v, {0.0, 20.0}); }), ErrorCode::NonPositiveValue);
  EXPECT_EQ(code_of([&] { fit_exponential_rate(z.t, z.v, {10.0, 10.0}); }), ErrorCode::InvalidArgument);
}

TEST(Fit, DefaultWindowIsLastHalf) {
  const auto s = norm_series(100.0, [](double t) { return std::pow(1.0L + t, -0.125L); });
  const auto fit = fit_algebraic_rate(s, "x");
  EXPECT_EQ(fit.window.start, 50.0);
  EXPECT_EQ(fit.window.end, 100.0);
  EXPECT_EQ(fit.samples, 51u);
  EXPECT_NEAR(fit.exponent, -0.125, 1e-12);
  EXPECT_THROW(fit_algebraic_rate(s, "missing"), Error);
}

TEST(AreaBound, Examples) {
  EXPECT_NEAR(area_bound(1.0, 1.0, 2.0, 0.0, 1.0, std::exp(1.0) - 1.0), 0.7357589, 1e-7);
  EXPECT_DOUBLE_EQ(area_bound(2.0, 8.0, 1.5, 0.2, 0.0, 0.0), 2.0 * std::sqrt(16.0));
  EXPECT_DOUBLE_EQ(area_bound(4.0, 9.0, 1.0, 0.0, 0.0, 3.0), 6.0);
}

TEST(AreaBound, HypothesisViolations) {
  EXPECT_EQ(code_of([] { area_bound(1.0, 1.0, 1.0, 1.0, 0.0, 1.0); }), ErrorCode::HypothesisViolated);
  EXPECT_EQ(code_of([] { area_bound(1.0, 1.0, 1.5, 1.0, 0.0, 1.0); }), ErrorCode::HypothesisViolated);
  EXPECT_EQ(code_of([] { area_bound(-1.0, 1.0, 1.0, 0.0, 0.0, 1.0); }), ErrorCode::HypothesisViolated);
  EXPECT_EQ(code_of([] { area_bound(1.0, 1.0, 1.0, 0.0, -1.0, 1.0); }), ErrorCode::HypothesisViolated);
}

TEST(AreaBound, DecreasingWithoutLogFactor) {
  for (auto [alpha, beta] : {std::pair{1.0, 0.0}, {1.5, 0.4}, {0.6, 0.1}}) {
    double prev = HUGE_VAL;
    for (double t = 0.0; t < 500.0; t += 0.37) {
      const double b = area_bound(1.3, 0.7, alpha, beta, 0.0, t);
      EXPECT_LT(b, prev);
      prev = b;
    }
  }
}

TEST(VerifyArea, Examples) {
  const AreaParameters params{1.0, 1.0, 2.0, 0.0, 1.0};
  std::vector<double> t, f, g, zero;
  for (double s = 0.0; s <= 200.0; s += 0.01) {
    t.push_back(s);
    f.push_back(1.0 / (1.0 + s));
    g.push_back(3.0 / (1.0 + s));
    zero.push_back(0.0);
  }
  const auto ok = verify_area_inequality(t, f, params, 2.0);
  EXPECT_TRUE(ok.pass) << (ok.violations.empty() ? "" : ok.violations.front());
  EXPECT_TRUE(ok.hypotheses_ok);
  // worst case at t_min: 1 / (2 sqrt(ln 3))
  EXPECT_NEAR(ok.worst_margin, 0.5 / std::sqrt(std::log(3.0)), 1e-3);

  const auto bad = verify_area_inequality(t, g, params, 2.0);
  EXPECT_FALSE(bad.pass);
  EXPECT_FALSE(bad.hypotheses_ok);
  bool integral_flagged = false;
  for (const auto& v : bad.violations) integral_flagged |= v.find("integral") != std::string::npos;
  EXPECT_TRUE(integral_flagged);

  const auto trivial = verify_area_inequality(t, zero, params, 2.0);
  EXPECT_TRUE(trivial.pass);
  EXPECT_EQ(trivial.worst_margin, 0.0);
}

TEST(VerifyArea, ReportsBadParametersAndSamples) {
  const std::vector<double> t{0.0, 1.0, 2.0}, f{1.0, 0.5, 0.3};
  EXPECT_FALSE(verify_area_inequality(t, f, {1.0, 1.0, 1.0, 2.0, 0.0}, 0.0).pass);
  EXPECT_FALSE(verify_area_inequality(std::vector<double>{0.0}, std::vector<double>{1.0}, {}, 0.0).pass);
  const auto rising = verify_area_inequality(t, std::vector<double>{0.0, 2.0, 4.0}, {1.0, 10.0, 1.0, 0.0, 1.0}, 5.0);
  EXPECT_FALSE(rising.hypotheses_ok);
}

TEST(TheoremBound, Examples) {
  const double p = 4.0;
  const double theta = theorem_exponent(BoundKind::PhiLp, p);
  EXPECT_DOUBLE_EQ(theta, 0.125);
  const auto sat = theorem_bound_check(norm_series(200.0, [&](double t) { return std::pow(1.0L + t, -theta); }), "x", p,
                                       BoundKind::PhiLp);
  EXPECT_TRUE(sat.consistent);
  EXPECT_NEAR(static_cast<double>(sat.sup_ratio), 1.0, 1e-12);
  const auto fast = theorem_bound_check(norm_series(200.0, [&](double t) { return std::pow(1.0L + t, -2 * theta); }), "x",
                                        p, BoundKind::PhiLp);
  EXPECT_TRUE(fast.consistent);
  EXPECT_EQ(fast.t_sup, 0.0);
  // at p = 4 the gap (201/101)^(1/16) = 1.044 sits inside the 5% slack; p = 10 gives 1.071
  const double theta10 = theorem_exponent(BoundKind::PhiLp, 10.0);
  const auto slow = theorem_bound_check(norm_series(200.0, [&](double t) { return std::pow(1.0L + t, -theta10 / 2); }),
                                        "x", 10.0, BoundKind::PhiLp);
  EXPECT_FALSE(slow.consistent);
  EXPECT_EQ(slow.t_sup, 200.0);
  EXPECT_GT(slow.worst_margin, 1.0);
}

TEST(TheoremBound, Exponents) {
  EXPECT_DOUBLE_EQ(theorem_exponent(BoundKind::PertL2, 6.0), 4.0 / 48.0);
  EXPECT_DOUBLE_EQ(theorem_exponent(BoundKind::PertLinf, 4.0), 2.0 * 9.0 / (16.0 * 14.0));
  EXPECT_EQ(code_of([] { theorem_exponent(BoundKind::PhiLp, 2.0); }), ErrorCode::BadExponent);
  EXPECT_EQ(code_of([] { parse_bound_kind("phi-L9"); }), ErrorCode::BadKind);
  for (auto k : {BoundKind::PhiLp, BoundKind::PertL2, BoundKind::PertLinf, BoundKind::NonzeroExp})
    EXPECT_EQ(parse_bound_kind(to_string(k)), k);
}

TEST(TheoremBound, ScaleCovariance) {
  for (double q : {0.05, 0.1, 0.2}) {
    const auto base = norm_series(100.0, [&](double t) { return std::pow(1.0L + t, -q) * (1.0L + 0.1L * std::sin(t)); });
    auto scaled = base;
    for (auto& v : scaled.channels[0]) v *= 37.5L;
    for (auto kind : {BoundKind::PhiLp, BoundKind::PertL2, BoundKind::PertLinf}) {
      const auto a = theorem_bound_check(base, "x", 6.0, kind), b = theorem_bound_check(scaled, "x", 6.0, kind);
      EXPECT_EQ(a.consistent, b.consistent);
      EXPECT_NEAR(static_cast<double>(b.sup_ratio / a.sup_ratio), 37.5, 1e-12);
    }
  }
}

TEST(TheoremBound, NonzeroExponentialUsesFittedRate) {
  auto s = norm_series(20.0, [](double t) { return 0.01L * std::exp(-0.7L * t); });
  const auto r = theorem_bound_check(s, "x", 4.0, BoundKind::NonzeroExp, FitWindow{1.0, 20.0});
  EXPECT_NEAR(r.exponent, 0.7, 1e-9);
  EXPECT_TRUE(r.consistent);
  EXPECT_NEAR(static_cast<double>(r.sup_ratio), 0.01, 1e-9);
}

namespace {

// Phi = sech, zero-mode perturbation = Phi' = -sech tanh
NormSeries gn_series(int n, double amplitude) {
  const double L = 25.0;
  const double h = 2.0 * L / (n - 1);
  std::vector<double> phi(static_cast<std::size_t>(n)), zero(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double x = -L + h * j;
    phi[static_cast<std::size_t>(j)] = amplitude * sech(x);
    zero[static_cast<std::size_t>(j)] = -amplitude * sech(x) * std::tanh(x);
  }
  NormSeries s;
  for (int k = 0; k < 12; ++k)
    s.append(k, {{"zero_Linf", lp_norm_line(zero, h, kInfinity)},
                 {"zero_dx_L2", lp_norm_line(derivative_line(zero, h), h, 2.0)},
                 {"Phi_L4", lp_norm_line(phi, h, 4.0)}});
  return s;
}

}  // namespace

TEST(GnRatio, ClosedFormValue) {
  // |zero|_inf = 1/2, |d1 zero|_2^2 = 14/15, |Phi|_4^4 = 4/3
  const double expected = 0.25 / (std::pow(14.0 / 15.0, 5.0 / 7.0) * std::pow(4.0 / 3.0, 1.0 / 7.0));
  const auto r = gn_ratio_monitor(gn_series(8001, 1.0), 4.0);
  EXPECT_NEAR(static_cast<double>(r.max_ratio), expected, 1e-4);
  EXPECT_TRUE(r.finite);
  EXPECT_EQ(r.samples, 12u);
}

TEST(GnRatio, AmplitudeInvariantAndRefinementStable) {
  const auto base = gn_ratio_monitor(gn_series(2001, 1.0), 4.0).max_ratio;
  for (double lam : {1e-6, 0.01, 3.0})
    EXPECT_NEAR(static_cast<double>(gn_ratio_monitor(gn_series(2001, lam), 4.0).max_ratio / base), 1.0, 1e-12);
  const auto fine = gn_ratio_monitor(gn_series(4001, 1.0), 4.0).max_ratio;
  EXPECT_LT(std::abs(static_cast<double>(fine / base) - 1.0), 0.01);
}

TEST(GnRatio, Errors) {
  EXPECT_EQ(code_of([] { gn_ratio(1.0L, 0.0L, 1.0L, 4.0); }), ErrorCode::ZeroDenominator);
  NormSeries s;
  s.append(0.0, {{"zero_Linf", 1.0L}});
  EXPECT_EQ(code_of([&] { gn_ratio_monitor(s, 4.0); }), ErrorCode::MissingChannel);
}

TEST(Reports, JsonFields) {
  const auto s = sample(0.0, 20.0, 1.0, [](double t) { return std::exp(-0.5L * t); });
  const auto fit = to_json(fit_exponential_rate(s.t, s.v, {0.0, 20.0}), "nonzero_L2");
  for (const char* key : {"kind", "exponent", "prefactor", "window", "residual", "verdict", "worst_margin"})
    EXPECT_TRUE(fit.contains(key)) << key;
  EXPECT_EQ(fit["kind"], "exponential");
  EXPECT_EQ(fit["channel"], "nonzero_L2");

  const auto bound = to_json(theorem_bound_check(norm_series(50.0, [](double t) { return 1.0L / (1.0L + t); }), "x", 4.0,
                                                 BoundKind::PertL2));
  EXPECT_EQ(bound["verdict"], "consistent");
  EXPECT_EQ(bound["kind"], "pert-L2");
  const auto area = to_json(AreaReport{});
  EXPECT_EQ(area["verdict"], "pass");
  EXPECT_TRUE(to_json(GnReport{}).contains("worst_margin"));
}

TEST(NormSeriesCsv, RoundTrip) {
  NormSeries s;
  s.append(0.0, {{"a", 1.0L / 3.0L}, {"b", 1e-300L}});
  s.append(0.5, {{"a", 0.25L}, {"b", 0.0L}});
  std::stringstream io;
  write_norms_csv(io, s);
  const auto back = read_norms_csv(io);
  EXPECT_EQ(back.names, s.names);
  EXPECT_EQ(back.times, s.times);
  for (std::size_t c = 0; c < s.channels.size(); ++c)
    for (std::size_t i = 0; i < s.size(); ++i)
      EXPECT_NEAR(static_cast<double>(back.channels[c][i]), static_cast<double>(s.channels[c][i]),
                  1e-16 * static_cast<double>(s.channels[c][i]));
  std::stringstream bad("x,a\n0,1\n");
  EXPECT_THROW(read_norms_csv(bad), Error);
  NormSeries decreasing;
  decreasing.append(1.0, {{"a", 1.0L}});
  EXPECT_THROW(decreasing.append(0.5, {{"a", 1.0L}}), Error);
  EXPECT_THROW(decreasing.append(2.0, {{"a", -1.0L}}), Error);
}
