#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "shocklab/analysis.hpp"
#include "shocklab/config.hpp"
#include "shocklab/error.hpp"
#include "shocklab/profile.hpp"
#include "shocklab/solver.hpp"

namespace shocklab {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitSimulation = 2, kExitAnalysis = 3 };

/// Writes via a sibling temp file and rename so readers never see a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp);
    out << contents;
    if (!out.flush()) throw Error(ErrorCode::IoError, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp + ": " + ec.message());
}

enum class Stage { Profile, Simulate, Run };

struct RunOptions {
  Stage stage = Stage::Run;
  /// Overrides config.output_dir when set.
  std::optional<std::string> out_dir;
  bool quiet = false;
  std::ostream* log = &std::cerr;
};

struct ExperimentResult {
  int exit_code = kExitOk;
  std::string message;
  std::optional<SimulationRecord> record;
  nlohmann::json rates;
};

/// Shock, profile and grid for a validated config.
struct Prepared {
  ShockData shock;
  ShockProfile profile;
  ChannelGrid grid;
};

inline Prepared prepare(const ExperimentConfig& c) {
  Prepared p{make_shock(make_flux(c), c.u_minus, c.u_plus), {}, {}};
  p.profile = solve_profile(p.shock, c.grid.half_length, c.profile_step);
  p.grid = ChannelGrid(c.dimension, c.grid.half_length, c.grid.n1, c.dimension == 1 ? 1 : c.grid.nt);
  return p;
}

inline SimulationSetup make_setup(const ExperimentConfig& c, const Prepared& p) {
  SimulationSetup s{p.shock, p.profile, p.grid, c.stepper, build_perturbation(c.perturbation, p.grid), c.p_list,
                    config_hash(c)};
  return s;
}

namespace detail {

template <class F>
nlohmann::json guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    return {{"verdict", "skipped"}, {"reason", std::string(e.what())}};
  }
}

}  // namespace detail

/// Rate fits, bound checks and hypothesis checks for one run. Fits that
/// cannot be formed (e.g. every value is zero) are reported as skipped.
inline nlohmann::json analyze(const SimulationRecord& rec, const ExperimentConfig& c) {
  const auto& s = rec.norms;
  std::optional<FitWindow> window;
  if (c.analysis.fit_window.size() == 2) window = FitWindow{c.analysis.fit_window[0], c.analysis.fit_window[1]};

  nlohmann::json fits = nlohmann::json::array();
  auto algebraic = [&](const std::string& ch) {
    fits.push_back(detail::guarded([&] { return to_json(fit_algebraic_rate(s, ch, window), ch); }));
    if (fits.back().contains("reason")) fits.back()["channel"] = ch;
  };
  for (double p : c.p_list) algebraic("Phi_L" + p_label(p));
  for (const char* ch : {"zero_L2", "pert_L2", "pert_Linf"}) algebraic(ch);
  if (c.dimension >= 2) {
    fits.push_back(detail::guarded([&] { return to_json(fit_exponential_rate(s, "nonzero_L2", window), "nonzero_L2"); }));
    if (fits.back().contains("reason")) fits.back()["channel"] = "nonzero_L2";
  }

  nlohmann::json bounds = nlohmann::json::array();
  auto bound = [&](const std::string& ch, double p, BoundKind kind) {
    bounds.push_back(detail::guarded([&] { return to_json(theorem_bound_check(s, ch, p, kind, window)); }));
    if (bounds.back().contains("reason")) {
      bounds.back()["channel"] = ch;
      bounds.back()["kind"] = to_string(kind);
    }
  };
  for (double p : c.p_list) {
    if (!(p > 2.0)) continue;
    bound("Phi_L" + p_label(p), p, BoundKind::PhiLp);
    bound("pert_L2", p, BoundKind::PertL2);
    bound("pert_Linf", p, BoundKind::PertLinf);
  }
  if (c.dimension >= 2) bound("nonzero_L2", 0.0, BoundKind::NonzeroExp);

  nlohmann::json gn = nlohmann::json::array();
  for (double p : c.p_list) gn.push_back(detail::guarded([&] { return to_json(gn_ratio_monitor(s, p)); }));

  double max_drift = 0.0, max_leak = 0.0;
  for (double d : rec.mass_drift) max_drift = std::max(max_drift, std::abs(d));
  for (double l : rec.boundary_leak) max_leak = std::max(max_leak, l);
  nlohmann::json hyp = {{"shift", rec.shift},
                        {"initial_mass_residual", rec.initial_mass_residual},
                        {"mass_tolerance", rec.mass_tolerance},
                        {"mass_residual_ok", rec.mass_residual_ok},
                        {"max_mass_drift", max_drift},
                        {"mass_conserved", rec.mass_conserved},
                        {"antiderivative_boundary_leak", rec.antiderivative_leak},
                        {"max_boundary_leak", max_leak},
                        {"steps", rec.steps}};
  return {{"config_hash", s.config_hash}, {"grid", s.grid},   {"fits", fits},
          {"bounds", bounds},             {"gn_ratio", gn}, {"hypotheses", hyp}};
}

inline bool hypotheses_hold(const SimulationRecord& rec) { return rec.mass_residual_ok && rec.mass_conserved; }

/// profile -> simulate -> analyze, writing artifacts into the output directory:
/// profile.txt and config-echo.json always; norms.csv after simulation;
/// rates.json for the full run; snapshots/ when snapshot_dt > 0.
/// Exit codes: 0 ok, 2 simulation failure (Blowup, BoundaryLeak, ...),
/// 3 hypothesis-level analysis failure.
inline ExperimentResult run_experiment(const ExperimentConfig& c, const RunOptions& opt = {}) {
  namespace fs = std::filesystem;
  ExperimentResult res;
  const fs::path out = opt.out_dir.value_or(c.output_dir);
  auto say = [&](const std::string& m) {
    if (!opt.quiet && opt.log) *opt.log << m << '\n';
  };
  try {
    fs::create_directories(out);
    write_atomic(out / "config-echo.json", emit_config(c));
  } catch (const std::exception& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
    return res;
  }

  std::optional<Prepared> prep;
  try {
    prep = prepare(c);
    std::ostringstream prof;
    write_profile_text(prof, prep->profile);
    write_atomic(out / "profile.txt", prof.str());
    if (opt.stage == Stage::Profile) {
      const auto tails = verify_profile_bounds(prep->profile);
      nlohmann::json j = {{"speed", prep->shock.speed},
                          {"strength", prep->shock.strength},
                          {"rate_left", tails.rate_left},
                          {"rate_right", tails.rate_right},
                          {"residual_left", tails.residual_left},
                          {"residual_right", tails.residual_right},
                          {"k_bound", tails.k_bound},
                          {"pass", tails.pass}};
      write_atomic(out / "profile-bounds.json", j.dump(2) + "\n");
      say("profile: s = " + format_real(prep->shock.speed) + ", tail rates " + format_real(tails.rate_left) + " / " +
          format_real(tails.rate_right) + ", K = " + format_real(tails.k_bound));
      return res;
    }
  } catch (const Error& e) {
    res.exit_code = kExitSimulation;
    res.message = std::string(e.what());
    return res;
  }

  try {
    const auto setup = make_setup(c, *prep);
    res.record = run_simulation(setup);
  } catch (const Error& e) {
    res.exit_code = kExitSimulation;
    res.message = std::string(e.what());
    return res;
  }
  const auto& rec = *res.record;
  std::ostringstream csv;
  write_norms_csv(csv, rec.norms);
  write_atomic(out / "norms.csv", csv.str());
  if (!rec.snapshots.empty()) {
    fs::create_directories(out / "snapshots");
    for (std::size_t i = 0; i < rec.snapshots.size(); ++i) {
      std::ostringstream bin(std::ios::binary);
      write_field_binary(bin, rec.snapshots[i]);
      char name[32];
      std::snprintf(name, sizeof name, "u_%04zu.bin", i);
      write_atomic(out / "snapshots" / name, bin.str());
    }
    std::ostringstream tab;
    write_antiderivative_table(tab, prep->grid, rec.antiderivatives);
    write_atomic(out / "snapshots" / "antiderivative.txt", tab.str());
  }
  say("simulate: " + std::to_string(rec.steps) + " steps to t = " + format_real(rec.norms.times.back()));

  if (opt.stage == Stage::Run) {
    res.rates = analyze(rec, c);
    write_atomic(out / "rates.json", res.rates.dump(2) + "\n");
  }
  if (!hypotheses_hold(rec)) {
    res.exit_code = kExitAnalysis;
    res.message = rec.mass_residual_ok ? "mass drift exceeds 1e-8 (1 + t)"
                                       : "initial zero-mode mass residual exceeds 1e-10 delta L";
  }
  return res;
}

}  // namespace shocklab
