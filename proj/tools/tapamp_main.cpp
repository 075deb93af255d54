// Command-line front end: ensemble simulation, phase-diagram sweeps,
// error-scaling studies, and the built-in verification suite.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tapamp/acceptance.hpp"
#include "tapamp/disorder.hpp"
#include "tapamp/dynamics.hpp"
#include "tapamp/ensemble.hpp"
#include "tapamp/errors.hpp"
#include "tapamp/report_io.hpp"
#include "tapamp/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitResourceGuard = 3;
constexpr int kExitInternal = 4;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw tapamp::ConfigError("cannot read config file " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool force = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, CommonArgs& args, bool needs_config = true) {
  auto* cfg = sub->add_option("--config", args.config_path, "JSON config file");
  if (needs_config) cfg->required();
  sub->add_option("--out", args.out_dir, "output directory");
  sub->add_option("--seed", args.seed, "override the base seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  sub->add_option("--threads", args.threads, "worker pool size (0 = hardware)")
      ->envname("TAPAMP_THREADS");
  sub->add_flag("--force", args.force, "overwrite existing output files");
  sub->add_option("overrides", args.overrides, "dotted.path=value config overrides");
}

int cmd_simulate(const CommonArgs& args, bool snapshot) {
  std::string text = read_file(args.config_path);
  if (!args.overrides.empty()) text = tapamp::apply_overrides(text, args.overrides);
  tapamp::EnsembleConfig cfg = tapamp::parse_ensemble_config(text);
  if (args.seed_set) cfg.base_seed = args.seed;
  if (args.threads != 0) cfg.threads = args.threads;

  tapamp::EnsembleReport report = tapamp::run_ensemble(cfg);
  const tapamp::QuadratureRule rule = tapamp::gauss_hermite(cfg.quadrature_order);
  const tapamp::LimitSolution limit = tapamp::solve_limit(cfg.params, rule);
  try {
    report.clt = tapamp::clt_check(report, limit);
  } catch (const tapamp::ConfigError&) {
    // Too few pooled samples for field diagnostics; the report stays valid.
  }
  tapamp::write_report_files(report, args.out_dir, args.force);

  if (snapshot) {
    const int n = cfg.n_list.front();
    const tapamp::DisorderMatrix g = tapamp::sample_disorder(n, cfg.base_seed);
    tapamp::TrajectoryOptions opt;
    opt.steps = cfg.k_max;
    opt.with_tensors = cfg.track_derivatives;
    const auto tr = tapamp::run_trajectory(g, cfg.init.start_vector(n, cfg.params),
                                           cfg.params, cfg.choice, opt);
    tapamp::write_text_file(
        (std::filesystem::path(args.out_dir) / "snapshot.json").string(),
        tapamp::snapshot_json(tr.state, cfg.params, cfg.base_seed) + "\n", args.force);
  }
  std::cout << "wrote report.json and CSV tables to " << args.out_dir << "\n";
  return kExitOk;
}

int cmd_phase(const CommonArgs& args) {
  std::string text = read_file(args.config_path);
  if (!args.overrides.empty()) text = tapamp::apply_overrides(text, args.overrides);
  const tapamp::PhaseConfig cfg = tapamp::parse_phase_config(text);
  const std::string csv = tapamp::phase_csv(cfg);
  const std::string path = (std::filesystem::path(args.out_dir) / "phase.csv").string();
  std::filesystem::create_directories(args.out_dir);
  tapamp::write_text_file(path, csv, args.force);
  std::cout << "wrote " << cfg.betas.size() * cfg.hs.size() << " grid rows to " << path
            << "\n";
  return kExitOk;
}

int cmd_scaling(const CommonArgs& args) {
  std::string text = read_file(args.config_path);
  if (!args.overrides.empty()) text = tapamp::apply_overrides(text, args.overrides);
  tapamp::ScalingConfig cfg = tapamp::parse_scaling_config(text);
  if (args.seed_set) cfg.ensemble.base_seed = args.seed;
  if (args.threads != 0) cfg.ensemble.threads = args.threads;

  const std::vector<tapamp::SlopeFit> fits =
      tapamp::scaling_study_all(cfg.ensemble, cfg.quantities);
  std::filesystem::create_directories(args.out_dir);
  const std::filesystem::path base(args.out_dir);
  tapamp::write_text_file((base / "scaling.json").string(),
                          tapamp::serialize_scaling(fits, cfg.ensemble), args.force);
  tapamp::write_text_file((base / "scaling.csv").string(), tapamp::scaling_csv(fits),
                          args.force);
  for (const auto& f : fits) {
    if (f.degenerate)
      std::cout << to_string(f.quantity) << ": degenerate (zero means), fit skipped\n";
    else
      std::printf("%s: slope %.4f +/- %.4f\n", to_string(f.quantity).c_str(), f.slope,
                  f.half_width);
  }
  return kExitOk;
}

int cmd_verify(int threads, bool list_only, bool inject_fault,
               const std::vector<std::string>& only) {
  if (list_only) {
    for (const std::string& id : tapamp::acceptance::criterion_ids())
      std::cout << id << "\n";
    return kExitOk;
  }
  tapamp::acceptance::Options opt;
  opt.threads = threads;
  opt.flip_onsager_sign = inject_fault;
  opt.only = only;
  const auto results = tapamp::acceptance::run(opt);
  bool all_pass = true;
  for (const auto& r : results) {
    all_pass = all_pass && r.pass;
    std::printf("%-4s %-32s %7.1fs  %s\n", r.pass ? "PASS" : "FAIL", r.id.c_str(),
                r.seconds, r.detail.c_str());
  }
  std::printf("%zu/%zu criteria passed\n",
              static_cast<std::size_t>(std::count_if(results.begin(), results.end(),
                                                     [](const auto& r) { return r.pass; })),
              results.size());
  return all_pass ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TAP/AMP iteration for the SK model with state-evolution verification"};
  app.require_subcommand(1);

  CommonArgs sim_args;
  bool snapshot = false;
  CLI::App* sim = app.add_subcommand("simulate", "run a disorder ensemble and write reports");
  add_common(sim, sim_args);
  sim->add_flag("--snapshot", snapshot, "also write a final-state snapshot for replica 0");

  CommonArgs phase_args;
  CLI::App* phase = app.add_subcommand("phase", "sweep (beta, h) and write the phase CSV");
  add_common(phase, phase_args);

  CommonArgs scaling_args;
  CLI::App* scaling =
      app.add_subcommand("scaling", "fit error-functional decay rates across sizes");
  add_common(scaling, scaling_args);

  int verify_threads = 0;
  bool verify_list = false;
  bool inject_fault = false;
  std::vector<std::string> verify_only;
  CLI::App* verify = app.add_subcommand("verify", "run the built-in verification suite");
  verify->add_flag("--list", verify_list, "print criterion identifiers without running");
  verify->add_option("--threads", verify_threads, "worker pool size (0 = hardware)")
      ->envname("TAPAMP_THREADS");
  verify->add_option("--only", verify_only, "run only these criteria");
  verify
      ->add_flag("--inject-onsager-sign-flip", inject_fault,
                 "fault-injection hook: flip the reaction-term sign")
      ->group("");  // hidden; mutation checks only

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return cmd_simulate(sim_args, snapshot);
    if (phase->parsed()) return cmd_phase(phase_args);
    if (scaling->parsed()) return cmd_scaling(scaling_args);
    if (verify->parsed())
      return cmd_verify(verify_threads, verify_list, inject_fault, verify_only);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  } catch (const tapamp::ResourceGuardError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitResourceGuard;
  } catch (const tapamp::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitConfig;
}
