#pragma once

#include "prethermal/dynamics.hpp"
#include "prethermal/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace prethermal {

enum class Theorem { u1_floquet, zn_quasi };

Theorem parse_theorem(const std::string& s);
std::string to_string(Theorem t);

/// Fully resolved experiment description. `load_config` fills every field
/// from the preset defaults, so `emit_config` followed by `parse_config`
/// reproduces the same value.
struct ExperimentConfig {
  std::string preset;
  Theorem theorem = Theorem::u1_floquet;
  RenormMode mode = RenormMode::adaptive;
  std::uint64_t seed = 0;

  // model
  int sites = 1;
  std::map<std::string, double> params; ///< preset parameters (complete set)

  // drive
  double kappa0 = 1.0;
  double omega = 0.0;       ///< absolute slow frequency; used when omega_ratio ≤ 0
  double omega_ratio = 0.0; ///< ω = ratio·2‖H‖_{κ₀} when positive
  int n = 1;
  Angles theta0{0.0, 0.0};
  AmplitudeProfile profile;
  std::string preprocess = "reparameterize"; ///< strategy for non-constant profiles

  // renormalization
  RenormOptions renorm;

  // dynamics
  double horizon = 1e6;    ///< periods (Floquet) or time in units of 1/ν₀ (quasi)
  int per_octave = 4;
  int sub_octaves = 6;
  int samples = 32;        ///< linear samples for quasi runs
  double dt = 0.0;         ///< 0: automatic
  double threshold = 0.1;  ///< lifetime threshold per site
  std::vector<std::string> initial_states;

  // sweep
  std::vector<double> nu_ratios{10.0};
  std::vector<int> sweep_sites; ///< empty: {sites}
  std::vector<std::uint64_t> seeds; ///< empty: {seed}
  int budget = 64;
  long long dimension_cap = 256;

  std::string output = "results";

  bool operator==(const ExperimentConfig&) const;
};

/// Preset names: ising-domain-wall, rydberg-chain, single-site-zeeman,
/// zn-twist-demo, number-chain.
std::vector<std::string> preset_names();

/// Default configuration of a preset (throws ValidationError if unknown).
ExperimentConfig preset_config(const std::string& name);

/// YAML text → resolved config. Unknown keys, missing presets, and budget
/// overruns throw ValidationError naming the offending item.
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Complete YAML echo of a resolved config.
std::string emit_config(const ExperimentConfig& cfg);
/// Budget and consistency checks (called by parse_config).
void validate_config(const ExperimentConfig& cfg);

/// The drive of one sweep point (ν not yet set; ν₀ finalized).
struct ModelInstance {
  DriveSpec spec;
  std::map<std::string, Vector> initial_states;
  std::string observable; ///< state-resolved observable: magnetization | leakage | charge
};

ModelInstance build_model(const ExperimentConfig& cfg, int sites, std::uint64_t seed);

struct SweepPoint {
  int index = 0;
  int sites = 0;
  std::uint64_t seed = 0;
  double nu_ratio = 0.0;
  std::string id() const;
};

std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg);

struct PointResult {
  SweepPoint point;
  double nu = 0.0;
  double nu0 = 0.0;
  int n_reached = 0;
  double v_final = 0.0;
  double tau_bare = kNeverCrossed;
  double tau_dressed = kNeverCrossed;
  double max_diag_ratio = 0.0; ///< max_n [D_n, N] residual
  std::string stop_reason;
  std::string ledger_csv;
  std::vector<ObservableSeries> series;
  /// Rigorous runs: pointwise comparison with 2tν₀n₀d^R2^{−n*}.
  bool bound_checked = false;
  bool bound_holds = true;
  /// Sector-leakage runs: leakage ≤ 2max_θ‖N − Ñ(θ)‖ + t·max_θ‖[V(θ), N]‖ (gap 1).
  bool leakage_checked = false;
  bool leakage_holds = true;
};

/// Bound on ‖U(t)†NU(t) − N‖ from a decomposition: the effective generator
/// commutes with N up to the residual V, so
/// ‖U†NU − N‖ ≤ 2 max_θ‖N − Ñ(θ)‖ + t·max_θ‖[V(θ), N]‖.
struct LeakageBound {
  double dressing = 0.0;   ///< max_θ ‖N − Ñ(θ)‖
  double commutator = 0.0; ///< max_θ ‖[V(θ), N]‖
  double operator()(double t) const { return 2.0 * dressing + t * commutator; }
};
LeakageBound leakage_bound(const ChargeOperator& charge, const EffectiveDecomposition& dec, int samples = 64);

struct ResultBundle {
  ExperimentConfig config;
  std::vector<PointResult> points;
  /// Summary table (ν/ν₀, n_reached, ‖V_final‖, τ_bare, τ_dressed, ...).
  std::string summary_csv() const;
};

enum class RunStage { renorm, evolve, full };

/// Runs every sweep point. Errors are rethrown with the point coordinates.
ResultBundle run_experiment(const ExperimentConfig& cfg, RunStage stage = RunStage::full);

/// Writes config echo, summary, per-point ledgers and series, and a
/// manifest with SHA-256 hashes. Returns the manifest path.
std::filesystem::path write_results(const ResultBundle& bundle, const std::filesystem::path& dir);

std::string sha256_hex(const std::string& bytes);

/// Least-squares line y = a + b x with its R².
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

} // namespace prethermal
