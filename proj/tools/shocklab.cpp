// shocklab: viscous shock stability experiments.
//
//   shocklab profile    --config cfg.json [--out dir]
//   shocklab simulate   --config cfg.json [--out dir] [--seed N] [--repeat K]
//   shocklab run        --config cfg.json [--out dir] [--seed N] [--repeat K]
//   shocklab check-area --csv f.csv --c0 .. --c1 .. --alpha .. [--beta ..] [--gamma ..] [--t-min ..]

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shocklab/shocklab.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace shocklab;

void apply_thread_cap() {
#ifdef _OPENMP
  if (const char* env = std::getenv("SHOCKLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

int run_pipeline(Stage stage, const std::string& config_path, const std::string& out, bool has_seed,
                 std::uint64_t seed, int repeat, bool quiet) {
  ExperimentConfig cfg;
  try {
    std::vector<std::string> warnings;
    cfg = parse_config(config_path, &warnings);
    if (!quiet)
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (has_seed) cfg.perturbation.seed = seed;
  const std::string base = out.empty() ? cfg.output_dir : out;

  int worst = kExitOk;
  for (int r = 0; r < repeat; ++r) {
    RunOptions opt;
    opt.stage = stage;
    opt.quiet = quiet;
    opt.out_dir = repeat > 1 ? base + "/run_" + std::to_string(r) : base;
    const auto res = run_experiment(cfg, opt);
    if (res.exit_code != kExitOk) std::cerr << "error: " << res.message << '\n';
    worst = std::max(worst, res.exit_code);
  }
  return worst;
}

int check_area(const std::string& csv, const std::string& column, const AreaParameters& a, double t_min) {
  std::ifstream in(csv);
  if (!in) {
    std::cerr << "error: cannot open " << csv << '\n';
    return kExitConfig;
  }
  NormSeries series;
  try {
    series = read_norms_csv(in);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (series.names.empty()) {
    std::cerr << "error: csv has no value column\n";
    return kExitConfig;
  }
  const std::string name = column.empty() ? series.names.front() : column;
  std::vector<double> f;
  try {
    for (long double v : series.channel(name)) f.push_back(static_cast<double>(v));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto rep = verify_area_inequality(series.times, f, a, t_min);
  auto j = to_json(rep);
  j["channel"] = name;
  std::cout << j.dump(2) << '\n';
  return rep.pass ? kExitOk : kExitAnalysis;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();
  CLI::App app{"viscous shock stability experiments"};
  app.require_subcommand(1);

  std::string config, out;
  std::uint64_t seed = 0;
  int repeat = 1;
  bool quiet = false;
  app.add_flag("--quiet,-q", quiet, "suppress progress output");

  auto add_pipeline = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out,-o", out, "output directory (overrides output_dir)");
    sub->add_flag("--quiet,-q", quiet, "suppress progress output");
    return sub;
  };
  auto* profile = add_pipeline("profile", "solve the traveling-wave profile only");
  auto* simulate = add_pipeline("simulate", "profile and time integration, no analysis");
  auto* run = add_pipeline("run", "full pipeline: profile, simulation, analysis");
  for (auto* sub : {simulate, run}) {
    sub->add_option("--seed", seed, "perturbation seed (overrides config)");
    sub->add_option("--repeat", repeat, "run the experiment K times into run_<k>/")->check(CLI::PositiveNumber);
  }

  auto* area = app.add_subcommand("check-area", "verify the area inequality on a (t, f) csv");
  std::string csv, column;
  AreaParameters a;
  double t_min = 1.0;
  area->add_option("--csv", csv, "csv with header t,<column>...")->required()->check(CLI::ExistingFile);
  area->add_option("--column", column, "value column (default: first after t)");
  area->add_option("--c0", a.c0, "derivative bound constant")->required();
  area->add_option("--c1", a.c1, "integral bound constant")->required();
  area->add_option("--alpha", a.alpha, "derivative bound exponent")->required();
  area->add_option("--beta", a.beta, "integral bound exponent");
  area->add_option("--gamma", a.gamma, "integral bound log power");
  area->add_option("--t-min", t_min, "check the conclusion for t >= t_min");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  const bool has_seed = (simulate->parsed() && simulate->count("--seed") > 0) || (run->parsed() && run->count("--seed") > 0);
  if (profile->parsed()) return run_pipeline(Stage::Profile, config, out, false, 0, 1, quiet);
  if (simulate->parsed()) return run_pipeline(Stage::Simulate, config, out, has_seed, seed, repeat, quiet);
  if (run->parsed()) return run_pipeline(Stage::Run, config, out, has_seed, seed, repeat, quiet);
  return check_area(csv, column, a, t_min);
}
