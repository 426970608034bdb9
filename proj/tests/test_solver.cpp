#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "shocklab/config.hpp"
#include "shocklab/solver.hpp"

using namespace shocklab;

namespace {

Field profile_field(const ShockData& shock, const ChannelGrid& g, double offset = 0.0, Frame frame = Frame::Moving) {
  std::vector<double> line(static_cast<std::size_t>(g.n1));
  for (int j = 0; j < g.n1; ++j) line[static_cast<std::size_t>(j)] = burgers_profile(shock, g.x1(j) + offset).first;
  auto f = broadcast(line, g, 0.0, frame);
  for (double& v : f.row(0)) v = shock.u_minus;
  for (double& v : f.row(g.n1 - 1)) v = shock.u_plus;
  return f;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

SimulationSetup small_setup(int dim, double amplitude, PerturbationKind kind = PerturbationKind::GaussianBump,
                            int n1 = 257, double T = 2.0) {
  const auto shock = make_shock(burgers_flux(dim), 1.0, -1.0);
  const auto profile = solve_profile(shock, 30.0, 1e-3);
  const ChannelGrid g(dim, 30.0, n1, dim == 1 ? 1 : 8);
  PerturbationSpec ps;
  ps.kind = kind;
  ps.amplitude = amplitude;
  ps.seed = 5;
  StepperConfig sc;
  sc.final_time = T;
  sc.output_interval = 0.25;
  return {shock, profile, g, sc, build_perturbation(ps, g), {4.0, 6.0}, "test"};
}

}  // namespace

TEST(Rhs, ConstantFieldIsSteady) {
  const ChannelGrid g(2, 5.0, 41, 8);
  const Problem pb{burgers_flux(2), 0.3, 0.3, 0.0, 0.0, FluxScheme::LocalLaxFriedrichs};
  for (double v : rhs(Field(g, 0.3, 0.0, Frame::Lab), pb)) EXPECT_EQ(v, 0.0);
}

TEST(Rhs, PlateauIsSteady) {
  const auto shock = make_shock(burgers_flux(2), 1.0, -1.0);
  const ChannelGrid g(2, 10.0, 101, 4);
  Field f(g);
  for (int j = 0; j < g.n1; ++j)
    for (double& v : f.row(j)) v = j < 50 ? 1.0 : -1.0;
  const auto r = rhs(f, make_problem(shock, Frame::Moving));
  for (int j = 0; j < 48; ++j) EXPECT_EQ(r[static_cast<std::size_t>(j) * 4], 0.0);
  for (int j = 52; j < g.n1; ++j) EXPECT_EQ(r[static_cast<std::size_t>(j) * 4], 0.0);
}

TEST(Rhs, SteadyResidualIsSecondOrder) {
  const auto shock = make_shock(burgers_flux(1), 1.0, -1.0);
  std::vector<double> res;
  for (double h : {0.1, 0.05, 0.025}) {
    const int n1 = static_cast<int>(std::lround(40.0 / h)) + 1;
    const ChannelGrid g(1, 20.0, n1, 1);
    res.push_back(max_abs(rhs(profile_field(shock, g), make_problem(shock, Frame::Moving))));
  }
  EXPECT_GT(res[0] / res[1], 3.5);
  EXPECT_LT(res[0] / res[1], 4.5);
  EXPECT_GT(res[1] / res[2], 3.5);
  EXPECT_LT(res[1] / res[2], 4.5);
}

TEST(Rhs, RangeExceeded) {
  const auto shock = make_shock(burgers_flux(1, -2.0, 2.0), 1.0, -1.0);
  const ChannelGrid g(1, 5.0, 32, 1);
  Field f(g, 0.0);
  f.values[10] = 2.5;
  try {
    rhs(f, make_problem(shock, Frame::Moving));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RangeExceeded);
  }
}

TEST(Rhs, InteriorMassChangeIsBoundaryFlux) {
  const auto flux = convex_quartic_flux(2);
  const ChannelGrid g(2, 6.0, 61, 8);
  Field f(g);
  for (int j = 0; j < g.n1; ++j)
    for (std::size_t k = 0; k < g.row_size(); ++k)
      f.at(j, k) = 0.8 * std::tanh(-g.x1(j)) + 0.1 * std::sin(g.x1(j)) * std::cos(2 * M_PI * transverse_coordinate(g, k, 0));
  for (auto scheme : {FluxScheme::Central, FluxScheme::LocalLaxFriedrichs}) {
    const Problem pb{flux, f.at(0, 0), f.at(g.n1 - 1, 0), 0.4, 0.4, scheme};
    const auto r = rhs(f, pb);
    const auto mean = zero_mode(f);
    // independent interface flux on the zero mode; transverse parts telescope
    auto iface = [&](int j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < g.row_size(); ++k) {
        const double a = f.at(j, k), b = f.at(j + 1, k);
        double alpha = 0.0;
        if (scheme == FluxScheme::LocalLaxFriedrichs)
          alpha = std::max(std::abs(flux.df(0, mean[static_cast<std::size_t>(j)]) - 0.4),
                           std::abs(flux.df(0, mean[static_cast<std::size_t>(j) + 1]) - 0.4));
        acc += 0.5 * (flux.f(0, a) - 0.4 * a + flux.f(0, b) - 0.4 * b) - 0.5 * alpha * (b - a) - (b - a) / g.h1();
      }
      return acc / static_cast<double>(g.row_size());
    };
    double total = 0.0;
    for (int j = 1; j + 1 < g.n1; ++j)
      for (std::size_t k = 0; k < g.row_size(); ++k) total += g.h1() * r[static_cast<std::size_t>(j) * g.row_size() + k];
    total /= static_cast<double>(g.row_size());
    EXPECT_NEAR(total, -(iface(g.n1 - 2) - iface(0)), 1e-12);
  }
}

TEST(CflDt, Examples) {
  EXPECT_DOUBLE_EQ(cfl_dt(0.05, 2, 1.0, 0.0, 1.0), 0.000625);
  EXPECT_DOUBLE_EQ(cfl_dt(0.05, 2, 1.0, 0.0, 0.5), 0.0003125);
  EXPECT_DOUBLE_EQ(cfl_dt(0.05, 2, 0.0, 0.0, 0.7), 0.7 * 0.000625);
  EXPECT_THROW(cfl_dt(0.05, 2, 1.0, 0.0, 1.5), Error);
}

TEST(Advance, ZeroStepIsIdentity) {
  const auto shock = make_shock(burgers_flux(1), 1.0, -1.0);
  const ChannelGrid g(1, 10.0, 101, 1);
  const auto f = profile_field(shock, g);
  const auto out = advance(f, 0.0, make_problem(shock, Frame::Moving));
  EXPECT_EQ(out.values, f.values);
  EXPECT_EQ(out.time, f.time);
}

TEST(Advance, SteadyProfileMovesLikeResidual) {
  const auto shock = make_shock(burgers_flux(1), 1.0, -1.0);
  const ChannelGrid g(1, 10.0, 201, 1);
  const auto f = profile_field(shock, g);
  const auto pb = make_problem(shock, Frame::Moving);
  const double dt = cfl_dt(f, pb, 0.5);
  const auto out = advance(f, dt, pb);
  double change = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) change = std::max(change, std::abs(out.values[i] - f.values[i]));
  // O(dt h^2): bounded by the residual, stiff diffusion damps it within the step
  EXPECT_GT(change, 0.5 * dt * max_abs(rhs(f, pb)));
  EXPECT_LE(change, 1.01 * dt * max_abs(rhs(f, pb)));
  EXPECT_EQ(out.values.front(), 1.0);
  EXPECT_EQ(out.values.back(), -1.0);
}

TEST(Advance, PureDiffusionDecaysLikeHeatKernel) {
  const auto zero_flux = polynomial_flux("zero", 2, {{0.0}}, -2.0, 2.0);
  const ChannelGrid g(2, 1.0, 17, 64);
  Field f(g);
  for (int j = 0; j < g.n1; ++j)
    for (std::size_t k = 0; k < g.row_size(); ++k) f.at(j, k) = std::sin(2.0 * M_PI * transverse_coordinate(g, k, 0));
  const Problem pb{zero_flux, 0.0, 0.0, 0.0, 0.0, FluxScheme::Central};
  // rows 0 and N-1 are pinned; the centre row sees only transverse diffusion for one step
  Field u = f;
  for (double& v : u.row(0)) v = 0.0;
  for (double& v : u.row(g.n1 - 1)) v = 0.0;
  const double dt = 5e-5;
  const auto out = advance(u, dt, pb);
  const std::size_t k = 3;
  const double ratio = out.at(8, k) / u.at(8, k);
  EXPECT_NEAR(ratio, std::exp(-4.0 * M_PI * M_PI * dt), 1e-5);
  const double lam_h = 4.0 / (g.ht() * g.ht()) * std::pow(std::sin(M_PI * g.ht()), 2);
  EXPECT_NEAR(ratio, std::exp(-lam_h * dt), 1e-12);
}

TEST(Advance, BlowupDetected) {
  const ChannelGrid g(1, 2.0, 41, 1);
  const Problem pb{polynomial_flux("zero", 1, {{0.0}}, -1e9, 1e9), 0.0, 0.0, 0.0, 0.0, FluxScheme::Central};
  Field u(g);
  for (int j = 1; j + 1 < g.n1; ++j) u.values[static_cast<std::size_t>(j)] = (j % 2 ? 1.0 : -1.0);
  try {
    for (int i = 0; i < 50; ++i) u = advance(u, 100.0 * cfl_dt(u, pb, 1.0), pb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Blowup);
  }
}

TEST(Advance, MaximumPrincipleWithLaxFriedrichs) {
  const auto shock = make_shock(burgers_flux(2), 1.0, -1.0);
  const ChannelGrid g(2, 10.0, 101, 8);
  auto u = profile_field(shock, g);
  for (int j = 0; j < g.n1; ++j)
    for (std::size_t k = 0; k < g.row_size(); ++k)
      u.at(j, k) += 0.3 * std::exp(-std::pow(g.x1(j) + 3.0, 2)) * std::cos(2 * M_PI * transverse_coordinate(g, k, 0));
  double lo = 1e9, hi = -1e9;
  for (double v : u.values) lo = std::min(lo, v), hi = std::max(hi, v);
  const auto pb = make_problem(shock, Frame::Moving, FluxScheme::LocalLaxFriedrichs);
  for (int step = 0; step < 400; ++step) {
    u = advance(u, cfl_dt(u, pb, 0.5), pb);
    for (double v : u.values) {
      ASSERT_GE(v, lo - 1e-8);
      ASSERT_LE(v, hi + 1e-8);
    }
  }
}

TEST(Advance, FrameEquivalence) {
  // s = 1: after t = 0.5 the lab solution at x equals the moving one at x - 0.5
  const auto shock = make_shock(burgers_flux(1, -3.0, 3.0), 2.0, 0.0);
  std::vector<double> errs;
  for (int n1 : {401, 801}) {
    const ChannelGrid g(1, 20.0, n1, 1);
    const int cells = static_cast<int>(std::lround(0.5 / g.h1()));
    auto start = [&](Frame frame) {
      auto f = profile_field(shock, g, 0.0, frame);
      for (int j = 1; j + 1 < g.n1; ++j) f.values[static_cast<std::size_t>(j)] += 0.2 * std::exp(-std::pow(g.x1(j) - 1.0, 2));
      return f;
    };
    auto lab = start(Frame::Lab), mov = start(Frame::Moving);
    const auto plab = make_problem(shock, Frame::Lab), pmov = make_problem(shock, Frame::Moving);
    const double dt = 0.5 / std::ceil(0.5 / cfl_dt(lab, plab, 0.5));
    for (double t = 0.0; t < 0.5 - 1e-12; t += dt) {
      lab = advance(lab, dt, plab);
      mov = advance(mov, dt, pmov);
    }
    double err = 0.0;
    for (int j = n1 / 4; j < 3 * n1 / 4; ++j)
      err = std::max(err, std::abs(lab.values[static_cast<std::size_t>(j + cells)] - mov.values[static_cast<std::size_t>(j)]));
    errs.push_back(err);
  }
  EXPECT_LT(errs[1], 1e-3);
  EXPECT_GT(errs[0] / errs[1], 3.0);
}

TEST(DiscreteWave, IsSteadyWithMatchedMass) {
  for (auto scheme : {FluxScheme::Central, FluxScheme::LocalLaxFriedrichs}) {
    const auto shock = make_shock(convex_quartic_flux(1, -3.0, 3.0), 1.5, -0.5);
    const auto profile = solve_profile(shock, 30.0, 1e-3);
    const ChannelGrid g(1, 30.0, 301, 1);
    const auto pb = make_problem(shock, Frame::Moving, scheme);
    auto guess = sample_profile(profile, g, 0.3);
    guess.front() = 1.5;
    guess.back() = -0.5;
    const double target = integrate_line(guess, g.h1());
    const auto w = discrete_traveling_wave(pb, g.n1, g.h1(), target, guess);
    EXPECT_NEAR(integrate_line(w, g.h1()), target, 1e-11);
    Field f(g);
    f.values = w;
    EXPECT_LT(max_abs(rhs(f, pb)), 1e-11);
    // it sits O(h^2) from the continuum profile
    double gap = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) gap = std::max(gap, std::abs(w[j] - guess[j]));
    EXPECT_LT(gap, 0.05);
  }
}

TEST(PerturbationStepper, MatchesUFormAdvance) {
  for (auto scheme : {FluxScheme::Central, FluxScheme::LocalLaxFriedrichs}) {
    const auto shock = make_shock(convex_quartic_flux(2, -3.0, 3.0), 1.0, -1.0);
    const ChannelGrid g(2, 8.0, 65, 8);
    const auto pb = make_problem(shock, Frame::Moving, scheme);
    const auto profile = solve_profile(shock, 8.0, 1e-3);
    auto bg = sample_profile(profile, g);
    bg.front() = 1.0;
    bg.back() = -1.0;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    Field phi(g);
    for (int j = 1; j + 1 < g.n1; ++j) {
      const double env = 0.05 * std::exp(-g.x1(j) * g.x1(j) / 4.0);
      for (double& v : phi.row(j)) v = env * (1.0 + normal(rng));
    }
    const auto split = split_modes(phi);
    PerturbationStepper st(g, pb, bg);
    st.set_state(split.zero, split.nonzero.values);
    Field u = broadcast(bg, g);
    for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] += phi.values[i];
    const double dt = 0.5 * st.stable_dt(1.0);
    for (int s = 0; s < 20; ++s) {
      st.step(dt);
      u = advance(u, dt, pb);
    }
    const auto v = st.solution();
    for (std::size_t i = 0; i < u.values.size(); ++i) ASSERT_NEAR(v.values[i], u.values[i], 1e-13);
  }
}

TEST(RunSimulation, UnperturbedStaysAtFloor) {
  const auto rec = run_simulation(small_setup(2, 0.0));
  for (const char* ch : {"zero_L2", "nonzero_L2", "pert_Linf", "Phi_L4"})
    for (long double v : rec.norms.channel(ch)) EXPECT_LE(v, 1e-10L) << ch;
  EXPECT_TRUE(rec.mass_residual_ok);
  EXPECT_TRUE(rec.mass_conserved);
}

TEST(RunSimulation, XIndependentPerturbationMatchesOneD) {
  const auto setup = small_setup(2, 0.01);
  const auto rec = run_simulation(setup);
  const auto ref = run_1d_reference(setup);
  ASSERT_EQ(rec.norms.size(), ref.norms.size());
  EXPECT_EQ(rec.norms.size(), 9u);
  for (const char* name : {"zero_L2", "zero_dx_L2", "zero_Linf", "Phi_L4", "Phi_L6", "pert_L2"}) {
    const auto a = rec.norms.channel(name), b = ref.norms.channel(name);
    // the 2-d run steps with the smaller transverse spacing, so only the time error differs
    for (std::size_t i = 0; i < a.size(); ++i)
      EXPECT_NEAR(static_cast<double>(a[i]), static_cast<double>(b[i]), 1e-6 * static_cast<double>(b[0])) << name;
  }
  for (long double v : rec.norms.channel("nonzero_L2")) EXPECT_LE(v, 1e-10L);
}

TEST(RunSimulation, ReferenceRejectsNonzeroMode) {
  try {
    run_1d_reference(small_setup(2, 0.01, PerturbationKind::RandomNonzeroMode));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonzeroModePresent);
  }
}

TEST(RunSimulation, MassDriftAndDeterminism) {
  const auto setup = small_setup(2, 0.02, PerturbationKind::RandomNonzeroMode);
  const auto a = run_simulation(setup);
  const auto b = run_simulation(setup);
  for (std::size_t i = 0; i < a.mass_drift.size(); ++i)
    EXPECT_LE(std::abs(a.mass_drift[i]), 1e-8 * (1.0 + a.norms.times[i]));
  EXPECT_EQ(a.norms.channels, b.norms.channels);
  EXPECT_LE(std::abs(a.initial_mass_residual), a.mass_tolerance);
  EXPECT_TRUE(a.norms.has("nonzero_W1_4"));
}

TEST(RunSimulation, BoundaryLeakOnSmallDomain) {
  auto setup = small_setup(1, 0.01);
  setup.grid = ChannelGrid(1, 5.0, 101, 1);
  PerturbationSpec wide;
  wide.amplitude = 0.01;
  wide.width = 3.0;
  setup.initial_perturbation = build_perturbation(wide, setup.grid);
  try {
    run_simulation(setup);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BoundaryLeak);
  }
}

TEST(RunSimulation, SnapshotsAndOutputTimes) {
  auto setup = small_setup(1, 0.01);
  setup.stepper.snapshot_interval = 0.5;
  const auto rec = run_simulation(setup);
  EXPECT_EQ(rec.snapshots.size(), 5u);
  EXPECT_EQ(rec.antiderivatives.size(), 5u);
  for (std::size_t i = 0; i < rec.norms.size(); ++i) EXPECT_EQ(rec.norms.times[i], 0.25 * static_cast<double>(i));
  EXPECT_DOUBLE_EQ(rec.snapshots.back().time, 2.0);
}

TEST(RunSimulation, RefinementConvergesSecondOrder) {
  std::vector<double> finals;
  for (int n1 : {161, 321, 641, 1281}) {
    auto setup = small_setup(1, 0.01, PerturbationKind::GaussianBump, n1, 1.0);
    finals.push_back(static_cast<double>(run_simulation(setup).norms.channel("zero_L2").back()));
  }
  const double r = (finals[1] - finals[2]) / (finals[2] - finals[3]);
  EXPECT_GT(r, 3.0);
  EXPECT_LT(r, 5.0);
}

TEST(RunSimulation, OddBumpZeroModeDecays) {
  auto setup = small_setup(1, 0.01, PerturbationKind::OddBump, 513, 10.0);
  const auto rec = run_simulation(setup);
  const auto z = rec.norms.channel("zero_L2");
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (rec.norms.times[i] >= 1.0) {
      EXPECT_LT(z[i], z[i - 1]);
    }
  }
}
