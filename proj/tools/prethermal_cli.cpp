#include "prethermal/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace prethermal;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "experiment YAML")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "override the seed");
  sub->add_option("--out", c.out, "output directory (overrides the config)");
  sub->add_option("--mode", c.mode, "rigorous | adaptive");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.seeds.clear();
  }
  if (!c.out.empty()) cfg.output = c.out;
  if (!c.mode.empty()) cfg.mode = parse_mode(c.mode);
  validate_config(cfg);
  return cfg;
}

int run_stage(const Common& c, RunStage stage) {
  const ExperimentConfig cfg = resolve(c);
  const ResultBundle bundle = run_experiment(cfg, stage);
  const auto manifest = write_results(bundle, cfg.output);
  std::cout << bundle.summary_csv();
  bool ok = true;
  for (const auto& p : bundle.points) {
    if (p.bound_checked && !p.bound_holds) {
      std::cerr << p.point.id() << ": conservation bound violated\n";
      ok = false;
    }
    if (p.leakage_checked && !p.leakage_holds) {
      std::cerr << p.point.id() << ": sector leakage exceeds its bound\n";
      ok = false;
    }
  }
  std::cerr << "wrote " << manifest.string() << "\n";
  return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prethermal renormalization and dynamics toolkit"};
  app.require_subcommand(1);

  double kappa0 = 1.0, nu_ratio = 1e5;
  auto* constants = app.add_subcommand("constants", "rigorous-schedule constants for κ₀ and ν/ν₀");
  constants->add_option("--kappa0", kappa0, "decay rate κ₀")->check(CLI::PositiveNumber);
  constants->add_option("--nu-ratio", nu_ratio, "ν/ν₀")->check(CLI::PositiveNumber);

  Common renorm_opts, evolve_opts, sweep_opts, pre_opts;
  auto* renorm = app.add_subcommand("renorm", "renormalization ledgers for every sweep point");
  add_common(renorm, renorm_opts);
  auto* evolve = app.add_subcommand("evolve", "bare dynamics for every sweep point");
  add_common(evolve, evolve_opts);
  auto* sweep = app.add_subcommand("sweep", "renormalization, dynamics and lifetimes");
  add_common(sweep, sweep_opts);

  std::uint64_t verify_seed = 42;
  int samples = 100;
  auto* verify = app.add_subcommand("verify", "randomized bound checks");
  verify->add_option("--seed", verify_seed, "random seed");
  verify->add_option("--samples", samples, "instances per bound")->check(CLI::PositiveNumber);

  std::string strategy = "reparameterize";
  auto* pre = app.add_subcommand("preprocess", "remove a time-dependent amplitude and certify the result");
  add_common(pre, pre_opts);
  pre->add_option("--strategy", strategy, "reparameterize | rotating-frame");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*constants) {
      const RenormConstants c = compute_constants(kappa0, nu_ratio, 1.0);
      std::printf("kappa0      %.6g\nnu/nu0      %.6g\nA           %.12e\nx_closed    %.12e\nx_root      %.12e\n"
                  "x_lemma     %.12e\nx           %.12e\nB           %.12e\nC           %.12e\nn_star      %d\n"
                  "admissible  %s\n",
                  c.kappa0, nu_ratio, c.A, c.x_closed, c.x_root, c.x_lemma, c.x, c.B, c.C, c.n_star,
                  c.admissible ? "yes" : "no");
      return 0;
    }
    if (*renorm) return run_stage(renorm_opts, RunStage::renorm);
    if (*evolve) return run_stage(evolve_opts, RunStage::evolve);
    if (*sweep) return run_stage(sweep_opts, RunStage::full);
    if (*verify) {
      const LemmaReport r = verify_lemma_bounds(samples, verify_seed);
      for (const auto& l : r.lemmas) {
        std::printf("%-12s instances %d violations %d max_ratio %.6f\n", l.name.c_str(), l.instances, l.violations,
                    l.max_ratio);
        if (!l.counterexample.empty()) std::printf("  counterexample: %s\n", l.counterexample.c_str());
      }
      return r.ok() ? 0 : 1;
    }
    if (*pre) {
      const ExperimentConfig cfg = resolve(pre_opts);
      const auto points = sweep_points(cfg);
      if (points.empty()) throw ValidationError("preprocess needs at least one sweep point");
      ModelInstance m = build_model(cfg, points[0].sites, points[0].seed);
      m.spec.nu = points[0].nu_ratio * m.spec.nu0;
      const PreprocessResult r = preprocess_drive(m.spec, parse_strategy(strategy));
      const double T = m.spec.period();
      const PreprocessCertificate cert = certify_preprocess(r, {0.3 * T, 1.1 * T, 2.7 * T});
      std::filesystem::create_directories(cfg.output);
      std::ofstream pot(std::filesystem::path(cfg.output) / "preprocessed_potential.csv");
      r.spec.H.write_csv(pot);
      std::printf("strategy %s fft %d terms %zu\n", to_string(r.strategy).c_str(), r.fft_size, r.spec.H.terms().size());
      for (std::size_t i = 0; i < cert.times.size(); ++i)
        std::printf("t %.6e deviation %.3e\n", cert.times[i], cert.deviations[i]);
      std::printf("period_shift %.3e\n", cert.period_shift);
      return cert.max_deviation() < 1e-7 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
