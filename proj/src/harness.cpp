#include "prethermal/harness.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>

namespace prethermal {

Theorem parse_theorem(const std::string& s) {
  if (s == "U1-floquet") return Theorem::u1_floquet;
  if (s == "Zn-quasi") return Theorem::zn_quasi;
  throw ValidationError("unknown theorem '" + s + "' (U1-floquet | Zn-quasi)");
}

std::string to_string(Theorem t) { return t == Theorem::u1_floquet ? "U1-floquet" : "Zn-quasi"; }

bool ExperimentConfig::operator==(const ExperimentConfig& o) const { return emit_config(*this) == emit_config(o); }

// ---------------------------------------------------------------------------
// Presets

std::vector<std::string> preset_names() {
  return {"ising-domain-wall", "rydberg-chain", "single-site-zeeman", "zn-twist-demo", "number-chain"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  c.omega_ratio = 1.0;
  c.renorm.max_steps = 12;
  c.renorm.grid = 32;
  if (name == "single-site-zeeman") {
    c.seed = 1;
    c.sites = 1;
    c.params = {{"hx", 0.5}, {"hz", 0.3}};
    c.nu_ratios = {10.0};
    c.horizon = 1e4;
    c.initial_states = {"all-up"};
  } else if (name == "ising-domain-wall") {
    c.seed = 3;
    c.sites = 6;
    c.params = {{"h0", 0.3}, {"h1", 0.4}, {"g", 0.2}, {"disorder", 0.1}};
    c.nu_ratios = {8.0};
    c.horizon = 1e5;
    c.initial_states = {"all-up", "neel"};
  } else if (name == "rydberg-chain") {
    c.seed = 5;
    c.sites = 6;
    c.params = {{"Omega0", 0.4}, {"Omega1", 0.3}, {"Delta0", 0.0}, {"Delta1", 0.3}, {"disorder", 0.05}};
    c.nu_ratios = {8.0};
    c.horizon = 1e5;
    c.initial_states = {"all-up"};
  } else if (name == "zn-twist-demo") {
    c.theorem = Theorem::zn_quasi;
    c.seed = 2;
    c.sites = 4;
    c.n = 2;
    c.omega_ratio = 0.7;
    c.params = {{"hx", 0.25}, {"hz", 0.15}, {"J", 0.2}, {"disorder", 0.0}};
    c.nu_ratios = {20.0};
    c.renorm.max_steps = 4;
    c.renorm.grid = 8;
    c.horizon = 200.0;
    c.samples = 16;
  } else if (name == "number-chain") {
    // Poisson-kernel pulse: harmonics hx·e^{−λ|m|} for |m| ≤ cutoff/λ.
    c.seed = 7;
    c.sites = 8;
    c.kappa0 = 0.1;
    c.params = {{"hx", 0.5}, {"lambda", 0.4}, {"cutoff", 18.0}, {"W", 1.0}, {"J", 0.5}, {"Jxy", 0.5}};
    c.nu_ratios = {4.0, 6.0, 8.0, 12.0, 16.0, 20.0};
    c.renorm.max_steps = 40;
    c.renorm.grid = 128;
    c.renorm.max_grid = 256;
    c.renorm.eps_alias = 1e-7;
    c.renorm.keep_step_families = false;
    c.horizon = std::ldexp(1.0, 40);
    c.sub_octaves = 4;
    c.threshold = 1e-3;
  } else {
    throw ValidationError("unknown preset '" + name + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// YAML

namespace {

void check_keys(const YAML::Node& node, const std::string& section, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ValidationError("config section '" + section + "' must be a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key))
      throw ValidationError("unknown key '" + (section.empty() ? key : section + "." + key) + "' in config");
  }
}

template <class T> T scalar(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ValidationError("config key '" + key + "' has an invalid value");
  }
}

template <class T> std::vector<T> sequence(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) throw ValidationError("config key '" + key + "' must be a list");
  std::vector<T> out;
  for (const auto& e : n) out.push_back(scalar<T>(e, key));
  return out;
}

template <class T> void read(const YAML::Node& sec, const std::string& section, const char* key, T& dst) {
  if (sec[key]) dst = scalar<T>(sec[key], section + "." + key);
}

} // namespace

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  if (!root.IsMap()) throw ValidationError("config must be a mapping");
  check_keys(root, "", {"preset", "theorem", "mode", "seed", "model", "drive", "renorm", "dynamics", "sweep", "output"});
  if (!root["preset"]) throw ValidationError("config needs a 'preset' key");
  ExperimentConfig c = preset_config(scalar<std::string>(root["preset"], "preset"));

  if (root["theorem"]) {
    const Theorem t = parse_theorem(scalar<std::string>(root["theorem"], "theorem"));
    if (t != c.theorem)
      throw ValidationError("preset '" + c.preset + "' is a " + to_string(c.theorem) + " model, not " + to_string(t));
  }
  if (root["mode"]) c.mode = parse_mode(scalar<std::string>(root["mode"], "mode"));
  read(root, "", "seed", c.seed);
  if (root["output"]) c.output = scalar<std::string>(root["output"], "output");

  if (const YAML::Node m = root["model"]) {
    check_keys(m, "model", {"sites", "params"});
    read(m, "model", "sites", c.sites);
    if (const YAML::Node p = m["params"]) {
      std::set<std::string> allowed;
      for (const auto& [k, v] : c.params) allowed.insert(k);
      check_keys(p, "model.params", allowed);
      for (const auto& kv : p) {
        const std::string k = kv.first.as<std::string>();
        c.params[k] = scalar<double>(kv.second, "model.params." + k);
      }
    }
  }

  if (const YAML::Node d = root["drive"]) {
    check_keys(d, "drive", {"kappa0", "omega", "omega_ratio", "n", "theta0", "profile", "preprocess"});
    read(d, "drive", "kappa0", c.kappa0);
    if (d["omega"] && d["omega_ratio"]) throw ValidationError("drive.omega and drive.omega_ratio are exclusive");
    if (d["omega"]) {
      if (d["omega"].as<std::string>() == "nu0") {
        c.omega_ratio = 1.0;
      } else {
        c.omega = scalar<double>(d["omega"], "drive.omega");
        c.omega_ratio = 0.0;
      }
    }
    if (d["omega_ratio"]) c.omega_ratio = scalar<double>(d["omega_ratio"], "drive.omega_ratio");
    read(d, "drive", "n", c.n);
    if (d["theta0"]) {
      const auto v = sequence<double>(d["theta0"], "drive.theta0");
      if (v.empty() || v.size() > 2) throw ValidationError("drive.theta0 needs one or two angles");
      c.theta0 = {v[0], v.size() > 1 ? v[1] : 0.0};
    }
    if (const YAML::Node p = d["profile"]) {
      check_keys(p, "drive.profile", {"mean", "amplitude", "frequency", "phase"});
      read(p, "drive.profile", "mean", c.profile.mean);
      read(p, "drive.profile", "amplitude", c.profile.a);
      read(p, "drive.profile", "frequency", c.profile.omega);
      read(p, "drive.profile", "phase", c.profile.phase);
    }
    if (d["preprocess"]) c.preprocess = scalar<std::string>(d["preprocess"], "drive.preprocess");
  }

  if (const YAML::Node r = root["renorm"]) {
    check_keys(r, "renorm",
               {"max_steps", "adaptive_factor", "grid", "max_grid", "eps_alias", "prune_rel", "keep_step_families"});
    read(r, "renorm", "max_steps", c.renorm.max_steps);
    read(r, "renorm", "adaptive_factor", c.renorm.adaptive_factor);
    read(r, "renorm", "grid", c.renorm.grid);
    read(r, "renorm", "max_grid", c.renorm.max_grid);
    read(r, "renorm", "eps_alias", c.renorm.eps_alias);
    read(r, "renorm", "prune_rel", c.renorm.prune_rel);
    read(r, "renorm", "keep_step_families", c.renorm.keep_step_families);
  }

  if (const YAML::Node d = root["dynamics"]) {
    check_keys(d, "dynamics",
               {"horizon", "per_octave", "sub_octaves", "samples", "dt", "threshold", "initial_states"});
    read(d, "dynamics", "horizon", c.horizon);
    read(d, "dynamics", "per_octave", c.per_octave);
    read(d, "dynamics", "sub_octaves", c.sub_octaves);
    read(d, "dynamics", "samples", c.samples);
    read(d, "dynamics", "dt", c.dt);
    read(d, "dynamics", "threshold", c.threshold);
    if (d["initial_states"]) c.initial_states = sequence<std::string>(d["initial_states"], "dynamics.initial_states");
  }

  if (const YAML::Node s = root["sweep"]) {
    check_keys(s, "sweep", {"nu_ratios", "sites", "seeds", "budget", "dimension_cap"});
    if (s["nu_ratios"]) c.nu_ratios = sequence<double>(s["nu_ratios"], "sweep.nu_ratios");
    if (s["sites"]) c.sweep_sites = sequence<int>(s["sites"], "sweep.sites");
    if (s["seeds"]) c.seeds = sequence<std::uint64_t>(s["seeds"], "sweep.seeds");
    read(s, "sweep", "budget", c.budget);
    read(s, "sweep", "dimension_cap", c.dimension_cap);
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const ExperimentConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "preset" << YAML::Value << c.preset;
  e << YAML::Key << "theorem" << YAML::Value << to_string(c.theorem);
  e << YAML::Key << "mode" << YAML::Value << to_string(c.mode);
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "sites" << YAML::Value << c.sites;
  e << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, v] : c.params) e << YAML::Key << k << YAML::Value << v;
  e << YAML::EndMap << YAML::EndMap;

  e << YAML::Key << "drive" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kappa0" << YAML::Value << c.kappa0;
  if (c.omega_ratio > 0.0)
    e << YAML::Key << "omega_ratio" << YAML::Value << c.omega_ratio;
  else
    e << YAML::Key << "omega" << YAML::Value << c.omega;
  e << YAML::Key << "n" << YAML::Value << c.n;
  e << YAML::Key << "theta0" << YAML::Value << YAML::Flow << YAML::BeginSeq << c.theta0[0] << c.theta0[1]
    << YAML::EndSeq;
  e << YAML::Key << "profile" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "mean" << YAML::Value << c.profile.mean;
  e << YAML::Key << "amplitude" << YAML::Value << c.profile.a;
  e << YAML::Key << "frequency" << YAML::Value << c.profile.omega;
  e << YAML::Key << "phase" << YAML::Value << c.profile.phase;
  e << YAML::EndMap;
  e << YAML::Key << "preprocess" << YAML::Value << c.preprocess;
  e << YAML::EndMap;

  e << YAML::Key << "renorm" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "max_steps" << YAML::Value << c.renorm.max_steps;
  e << YAML::Key << "adaptive_factor" << YAML::Value << c.renorm.adaptive_factor;
  e << YAML::Key << "grid" << YAML::Value << c.renorm.grid;
  e << YAML::Key << "max_grid" << YAML::Value << c.renorm.max_grid;
  e << YAML::Key << "eps_alias" << YAML::Value << c.renorm.eps_alias;
  e << YAML::Key << "prune_rel" << YAML::Value << c.renorm.prune_rel;
  e << YAML::Key << "keep_step_families" << YAML::Value << c.renorm.keep_step_families;
  e << YAML::EndMap;

  e << YAML::Key << "dynamics" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "horizon" << YAML::Value << c.horizon;
  e << YAML::Key << "per_octave" << YAML::Value << c.per_octave;
  e << YAML::Key << "sub_octaves" << YAML::Value << c.sub_octaves;
  e << YAML::Key << "samples" << YAML::Value << c.samples;
  e << YAML::Key << "dt" << YAML::Value << c.dt;
  e << YAML::Key << "threshold" << YAML::Value << c.threshold;
  e << YAML::Key << "initial_states" << YAML::Value << YAML::Flow << c.initial_states;
  e << YAML::EndMap;

  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "nu_ratios" << YAML::Value << YAML::Flow << c.nu_ratios;
  e << YAML::Key << "sites" << YAML::Value << YAML::Flow << c.sweep_sites;
  e << YAML::Key << "seeds" << YAML::Value << YAML::Flow << c.seeds;
  e << YAML::Key << "budget" << YAML::Value << c.budget;
  e << YAML::Key << "dimension_cap" << YAML::Value << c.dimension_cap;
  e << YAML::EndMap;

  e << YAML::Key << "output" << YAML::Value << c.output;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

namespace {

const std::set<std::string> kStates{"all-up", "all-down", "neel"};

std::vector<int> point_sites(const ExperimentConfig& c) {
  return c.sweep_sites.empty() ? std::vector<int>{c.sites} : c.sweep_sites;
}

std::vector<std::uint64_t> point_seeds(const ExperimentConfig& c) {
  return c.seeds.empty() ? std::vector<std::uint64_t>{c.seed} : c.seeds;
}

} // namespace

void validate_config(const ExperimentConfig& c) {
  const std::size_t points = c.nu_ratios.size() * point_sites(c).size() * point_seeds(c).size();
  if (c.budget < 0) throw ValidationError("sweep.budget must be non-negative");
  if (points > static_cast<std::size_t>(c.budget))
    throw ValidationError("sweep has " + std::to_string(points) + " points, over the budget of " +
                          std::to_string(c.budget));
  for (const int l : point_sites(c)) {
    if (l < 1 || l > 30) throw ValidationError("site count " + std::to_string(l) + " out of range");
    if (c.preset == "single-site-zeeman" && l != 1) throw ValidationError("single-site-zeeman has exactly one site");
    if ((1LL << l) > c.dimension_cap)
      throw ValidationError("Hilbert dimension 2^" + std::to_string(l) + " exceeds sweep.dimension_cap " +
                            std::to_string(c.dimension_cap));
  }
  for (const double r : c.nu_ratios)
    if (!(r > 0.0)) throw ValidationError("sweep.nu_ratios must be positive");
  if (!(c.kappa0 > 0.0)) throw ValidationError("drive.kappa0 must be positive");
  if (!(c.omega_ratio > 0.0) && !(c.omega > 0.0)) throw ValidationError("drive needs omega > 0 or omega_ratio > 0");
  if (c.theorem == Theorem::zn_quasi && c.n < 2) throw ValidationError("Zn-quasi runs need drive.n >= 2");
  if (c.theorem == Theorem::u1_floquet && c.n != 1) throw ValidationError("drive.n applies to Zn-quasi runs");
  c.profile.validate();
  parse_strategy(c.preprocess);
  if (c.renorm.max_steps < 0 || c.renorm.grid < 2 || c.renorm.max_grid < c.renorm.grid)
    throw ValidationError("renorm grid settings are inconsistent");
  if (!(c.horizon >= 1.0) || c.per_octave < 1 || c.sub_octaves < 0 || c.samples < 1)
    throw ValidationError("dynamics sampling settings are invalid");
  if (!(c.threshold > 0.0)) throw ValidationError("dynamics.threshold must be positive");
  for (const auto& s : c.initial_states)
    if (!kStates.count(s)) throw ValidationError("unknown initial state '" + s + "' (all-up | all-down | neel)");
}

// ---------------------------------------------------------------------------
// Models

namespace {

LocalOperator op(int i, const char* label) { return pauli_string({i}, label); }
LocalOperator op2(int i, const char* labels) { return pauli_string({i, i + 1}, labels); }
SiteMask site(int i) { return SiteMask{1} << i; }
SiteMask bond(int i) { return SiteMask{3} << i; }

// c0 + c1·cos θ on a one-angle potential.
void add_cos(ColoredPotential& h, SiteMask zone, const LocalOperator& o, double c0, double c1) {
  if (c0 != 0.0) h.add(zone, {0, 0}, Complex(c0) * o);
  if (c1 != 0.0) {
    h.add(zone, {1, 0}, Complex(0.5 * c1) * o);
    h.add(zone, {-1, 0}, Complex(0.5 * c1) * o);
  }
}

Vector product_state(int sites, const std::function<int(int)>& digit) {
  long long index = 0;
  for (int i = 0; i < sites; ++i) index = 2 * index + digit(i);
  Vector v = Vector::Zero(1LL << sites);
  v(index) = 1.0;
  return v;
}

} // namespace

ModelInstance build_model(const ExperimentConfig& c, int sites, std::uint64_t seed) {
  const auto graph = std::make_shared<const SiteGraph>(
      SiteGraph::chain(sites, 2, false, static_cast<std::size_t>(std::max<long long>(c.dimension_cap, 2))));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto& p = c.params;
  ModelInstance m;
  DriveSpec& s = m.spec;
  std::string charge = "number";
  ColoredPotential h(graph, c.theorem == Theorem::zn_quasi ? 2 : 1);
  m.observable = "charge";

  if (c.preset == "single-site-zeeman") {
    add_cos(h, site(0), op(0, "X"), 0.0, 2.0 * p.at("hx"));
    h.add(site(0), {0, 0}, Complex(p.at("hz")) * op(0, "Z"));
  } else if (c.preset == "ising-domain-wall") {
    charge = "domain-wall";
    m.observable = "magnetization";
    for (int i = 0; i < sites; ++i) {
      add_cos(h, site(i), op(i, "Z"), p.at("h0") + p.at("disorder") * unit(rng), p.at("h1"));
      h.add(site(i), {0, 0}, Complex(p.at("g")) * op(i, "X"));
    }
  } else if (c.preset == "rydberg-chain") {
    charge = "rydberg-bond";
    m.observable = "leakage";
    for (int i = 0; i < sites; ++i) {
      add_cos(h, site(i), op(i, "X"), 0.5 * p.at("Omega0"), 0.5 * p.at("Omega1"));
      const LocalOperator ni({i}, pauli('n'));
      add_cos(h, site(i), ni, p.at("Delta0") + p.at("disorder") * unit(rng), p.at("Delta1"));
    }
  } else if (c.preset == "zn-twist-demo") {
    for (int i = 0; i < sites; ++i) {
      const double hx = p.at("hx"), hz = p.at("hz") * (1.0 + p.at("disorder") * unit(rng));
      h.add(site(i), {1, 0}, Complex(hx) * op(i, "X"));
      h.add(site(i), {-1, 0}, Complex(hx) * op(i, "X"));
      h.add(site(i), {0, 1}, Complex(hz) * op(i, "Z"));
      h.add(site(i), {0, -1}, Complex(hz) * op(i, "Z"));
    }
    for (int i = 0; i + 1 < sites; ++i) h.add(bond(i), {0, 0}, Complex(p.at("J")) * op2(i, "ZZ"));
  } else if (c.preset == "number-chain") {
    const double lambda = p.at("lambda");
    if (!(lambda > 0.0)) throw ValidationError("number-chain needs lambda > 0");
    const int harmonics = static_cast<int>(std::ceil(p.at("cutoff") / lambda));
    for (int i = 0; i < sites; ++i) {
      for (int k = -harmonics; k <= harmonics; ++k)
        h.add(site(i), {k, 0}, Complex(p.at("hx") * std::exp(-lambda * std::abs(k))) * op(i, "X"));
      h.add(site(i), {0, 0}, Complex(p.at("W") * unit(rng)) * op(i, "Z"));
    }
    for (int i = 0; i + 1 < sites; ++i) {
      h.add(bond(i), {0, 0}, Complex(p.at("J")) * op2(i, "ZZ"));
      h.add(bond(i), {0, 0}, Complex(p.at("Jxy")) * (op2(i, "XX") + op2(i, "YY")));
    }
  } else {
    throw ValidationError("unknown preset '" + c.preset + "'");
  }

  s.charge = std::make_shared<const ChargeOperator>(charge_preset(charge, graph));
  s.H = std::move(h);
  s.kappa0 = c.kappa0;
  s.n = c.n;
  s.theta0 = c.theta0;
  s.profile = c.profile;
  s.nu = 1.0;
  if (c.omega_ratio > 0.0) {
    // ν₀ = max{2‖H‖_{κ₀}, ω}: measure 2‖H‖ with a negligible ω first.
    s.omega = 1e-12;
    s.profile = AmplitudeProfile{};
    finalize_drive(s);
    s.omega = c.omega_ratio * s.nu0;
    s.profile = c.profile;
  } else {
    s.omega = c.omega;
  }
  if (s.profile.a != 0.0 && c.profile.omega <= 0.0) throw ValidationError("drive.profile.frequency must be positive");
  finalize_drive(s);

  for (const auto& name : c.initial_states) {
    if (name == "all-up")
      m.initial_states[name] = product_state(sites, [](int) { return 0; });
    else if (name == "all-down")
      m.initial_states[name] = product_state(sites, [](int) { return 1; });
    else if (name == "neel")
      m.initial_states[name] = product_state(sites, [](int i) { return i % 2; });
    else
      throw ValidationError("unknown initial state '" + name + "'");
  }
  return m;
}

std::string SweepPoint::id() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "p%03d", index);
  return buf;
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& c) {
  std::vector<SweepPoint> out;
  for (const int l : point_sites(c))
    for (const std::uint64_t seed : point_seeds(c))
      for (const double r : c.nu_ratios) out.push_back({static_cast<int>(out.size()), l, seed, r});
  return out;
}

// ---------------------------------------------------------------------------
// Runs

LeakageBound leakage_bound(const ChargeOperator& charge, const EffectiveDecomposition& dec, int samples) {
  const Matrix& n = charge.full_matrix();
  LeakageBound b;
  for (int j = 0; j < samples; ++j) {
    const Angles theta{kTwoPi * j / samples, 0.0};
    const Matrix nd = dressed_charge(charge, dec, theta);
    b.dressing = std::max(b.dressing, spectral_norm(n - nd));
    if (!dec.V.empty()) {
      const Matrix v = dec.V.at(theta);
      b.commutator = std::max(b.commutator, spectral_norm(v * n - n * v));
    }
  }
  // Sampling of smooth families: pad by the coarse-grid spacing error.
  b.dressing *= 1.0 + 1e-6;
  b.commutator *= 1.0 + 1e-6;
  return b;
}

namespace {

struct SectorInfo {
  Matrix projector; ///< onto the lowest charge eigenspace
  double gap = 1.0;
};

SectorInfo lowest_sector(const Matrix& n) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(n);
  const RealVector ev = es.eigenvalues();
  SectorInfo s;
  const double lo = ev(0);
  Matrix cols(n.rows(), 0);
  double next = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) - lo < 1e-9)
      keep.push_back(i);
    else
      next = std::min(next, ev(i));
  }
  Matrix v(n.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) v.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
  s.projector = v * v.adjoint();
  s.gap = std::isfinite(next) ? next - lo : 1.0;
  return s;
}

Matrix magnetization(const SiteGraph& g) {
  const Eigen::Index dim = static_cast<Eigen::Index>(g.hilbert_dim());
  Matrix m = Matrix::Zero(dim, dim);
  const int l = g.num_sites();
  for (Eigen::Index s = 0; s < dim; ++s) {
    double z = 0.0;
    for (int i = 0; i < l; ++i) z += ((s >> (l - 1 - i)) & 1) ? -1.0 : 1.0;
    m(s, s) = z / l;
  }
  return m;
}

double expectation(const Matrix& o, const Vector& psi) { return (psi.adjoint() * o * psi)(0, 0).real(); }

void max_diag(PointResult& r, const std::vector<RenormStep>& trace) {
  for (const auto& s : trace) r.max_diag_ratio = std::max(r.max_diag_ratio, s.diag_residual);
}

double time_step(const ExperimentConfig& c, const DriveSpec& s) { return c.dt > 0.0 ? c.dt : default_dt(s); }

void run_floquet_point(const ExperimentConfig& c, const ModelInstance& model, RunStage stage, PointResult& r) {
  DriveSpec spec = model.spec;
  if (!spec.profile.constant()) {
    const PreprocessResult pre = preprocess_drive(spec, parse_strategy(c.preprocess));
    spec = pre.spec;
  }
  EffectiveDecomposition dec;
  const bool renorm = stage != RunStage::evolve;
  if (renorm) {
    RenormOptions opt = c.renorm;
    opt.mode = c.mode;
    dec = run_floquet_renorm(floquet_problem(spec), opt);
    r.n_reached = dec.steps();
    r.v_final = dec.trace.back().norm_V;
    r.stop_reason = dec.stop_reason;
    max_diag(r, dec.trace);
    std::ostringstream ledger;
    write_ledger_csv(dec, ledger);
    r.ledger_csv = ledger.str();
  }
  if (stage == RunStage::renorm) return;

  const double T = spec.period();
  const LogSampling ls = log_sampling(T, c.horizon, c.per_octave, c.sub_octaves);
  const Eigen::Index dim = static_cast<Eigen::Index>(spec.charge->graph()->hilbert_dim());
  const FloquetOperator f(drive_generator(spec), dim, T, time_step(c, spec), ls.offsets);
  const EffectiveDecomposition* d = renorm ? &dec : nullptr;

  ObservableSeries bare = measure_charge_conservation_at(spec, f, d, ls.times, false);
  r.tau_bare = extract_lifetime(bare, c.threshold);
  if (renorm) {
    ObservableSeries dressed = measure_charge_conservation_at(spec, f, d, ls.times, true);
    r.tau_dressed = extract_lifetime(dressed, c.threshold);
    r.series.push_back(std::move(dressed));
  }
  if (renorm && c.mode == RenormMode::rigorous) {
    ObservableSeries bound;
    bound.observable = "conservation_bound";
    r.bound_checked = true;
    const int n_star = dec.schedule.constants.n_star;
    for (std::size_t i = 0; i < bare.times.size(); ++i) {
      const double t = bare.times[i];
      const double k = t / T;
      if (std::abs(k - std::round(k)) > 1e-9) continue;
      const double b = conservation_bound(spec, n_star, t);
      bound.times.push_back(t);
      bound.values.push_back(b);
      // Absolute floor for roundoff in the measured deviation (b = 0 at t = 0).
      if (!(bare.values[i] <= b + 1e-12)) r.bound_holds = false;
    }
    r.series.push_back(std::move(bound));
  }
  r.series.insert(r.series.begin(), std::move(bare));

  const Matrix& n = spec.charge->full_matrix();
  const SectorInfo sector = lowest_sector(n);
  const Matrix mag = magnetization(*spec.charge->graph());
  const LeakageBound lb = renorm && model.observable == "leakage" ? leakage_bound(*spec.charge, dec) : LeakageBound{};
  for (const auto& [name, psi0] : model.initial_states) {
    ObservableSeries s;
    s.observable = model.observable + ":" + name;
    ObservableSeries bs;
    bs.observable = "leakage_bound:" + name;
    for (const double t : ls.times) {
      const Vector psi = f.at(t) * psi0;
      double v = 0.0;
      if (model.observable == "magnetization")
        v = expectation(mag, psi);
      else if (model.observable == "leakage")
        v = 1.0 - expectation(sector.projector, psi);
      else
        v = expectation(n, psi);
      s.times.push_back(t);
      s.values.push_back(v);
      if (renorm && model.observable == "leakage" && expectation(sector.projector, psi0) > 1.0 - 1e-12) {
        const double b = lb(t) / sector.gap;
        bs.times.push_back(t);
        bs.values.push_back(b);
        r.leakage_checked = true;
        if (!(v <= b + 1e-12)) r.leakage_holds = false;
      }
    }
    r.series.push_back(std::move(s));
    if (!bs.times.empty()) r.series.push_back(std::move(bs));
  }
}

void run_quasi_point(const ExperimentConfig& c, const ModelInstance& model, RunStage stage, PointResult& r) {
  const DriveSpec& spec = model.spec;
  QuasiDecomposition dec;
  const bool renorm = stage != RunStage::evolve;
  if (renorm) {
    RenormOptions opt = c.renorm;
    opt.mode = c.mode;
    dec = run_quasi_renorm(quasi_problem(spec), opt);
    assemble_lab_frame(dec, std::max(8, 2 * c.renorm.grid));
    r.n_reached = dec.rotating.steps();
    r.v_final = dec.rotating.trace.back().norm_V;
    r.stop_reason = dec.rotating.stop_reason;
    for (const auto& s : dec.rotating.trace) r.max_diag_ratio = std::max(r.max_diag_ratio, s.g_commutator_residual);
    std::ostringstream ledger;
    write_ledger_csv(dec.rotating, ledger, true);
    ledger << "# periodicity_residual," << std::setprecision(12) << std::scientific << dec.periodicity_residual << "\n";
    r.ledger_csv = ledger.str();
  }
  if (stage == RunStage::renorm) return;

  std::vector<double> times;
  const double t_max = c.horizon / spec.nu0;
  for (int j = 0; j <= c.samples; ++j) times.push_back(t_max * j / c.samples);
  const double dt = time_step(c, spec);
  const auto us = propagate(spec, times, dt);
  const Matrix& n = spec.charge->full_matrix();
  const double sites = spec.charge->graph()->num_sites();
  ObservableSeries bare, dressed;
  bare.observable = "bare_charge_deviation";
  dressed.observable = "dressed_charge_deviation";
  const Matrix nd0 = renorm ? Matrix(dec.lab_frame(spec.angles(0.0)) * n * dec.lab_frame(spec.angles(0.0)).adjoint()) : n;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Matrix& u = us[i];
    bare.times.push_back(times[i]);
    bare.values.push_back(spectral_norm(n - u.adjoint() * n * u) / sites);
    if (renorm) {
      const Matrix f = dec.lab_frame(spec.angles(times[i]));
      dressed.times.push_back(times[i]);
      dressed.values.push_back(spectral_norm(nd0 - u.adjoint() * f * n * f.adjoint() * u) / sites);
    }
  }
  r.tau_bare = extract_lifetime(bare, c.threshold);
  r.series.push_back(std::move(bare));
  if (renorm) {
    r.tau_dressed = extract_lifetime(dressed, c.threshold);
    r.series.push_back(std::move(dressed));
    TruncationSeries tr = compare_truncated_dynamics(spec, dec, n, times, dt);
    tr.deviation.observable = "truncation_deviation";
    tr.symmetry.observable = "twisted_symmetry_defect";
    r.series.push_back(std::move(tr.deviation));
    r.series.push_back(std::move(tr.symmetry));
  }
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

} // namespace

ResultBundle run_experiment(const ExperimentConfig& cfg, RunStage stage) {
  validate_config(cfg);
  ResultBundle bundle;
  bundle.config = cfg;
  for (const SweepPoint& pt : sweep_points(cfg)) {
    std::ostringstream where;
    where << "sweep point " << pt.id() << " (sites=" << pt.sites << ", seed=" << pt.seed
          << ", nu/nu0=" << pt.nu_ratio << "): ";
    try {
      ModelInstance model = build_model(cfg, pt.sites, pt.seed);
      model.spec.nu = pt.nu_ratio * model.spec.nu0;
      PointResult r;
      r.point = pt;
      r.nu = model.spec.nu;
      r.nu0 = model.spec.nu0;
      if (cfg.theorem == Theorem::u1_floquet)
        run_floquet_point(cfg, model, stage, r);
      else
        run_quasi_point(cfg, model, stage, r);
      bundle.points.push_back(std::move(r));
    } catch (const ValidationError& e) {
      throw ValidationError(where.str() + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError(where.str() + e.what());
    }
  }
  return bundle;
}

std::string ResultBundle::summary_csv() const {
  std::ostringstream os;
  os << "point,sites,seed,nu_ratio,nu,nu0,n_reached,v_final,tau_bare,tau_dressed,max_diag_residual,stop_reason\n";
  for (const auto& p : points)
    os << p.point.id() << "," << p.point.sites << "," << p.point.seed << "," << fmt(p.point.nu_ratio) << ","
       << fmt(p.nu) << "," << fmt(p.nu0) << "," << p.n_reached << "," << fmt(p.v_final) << "," << fmt(p.tau_bare)
       << "," << fmt(p.tau_dressed) << "," << fmt(p.max_diag_ratio) << "," << p.stop_reason << "\n";
  return os.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::filesystem::path write_results(const ResultBundle& bundle, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["config"] = emit_config(bundle.config);
  manifest["files"] = nlohmann::json::array();
  auto put = [&](const std::string& rel, const std::string& content) {
    const fs::path p = dir / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + p.string());
    out << content;
    manifest["files"].push_back({{"path", rel}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
  };
  if (!bundle.points.empty()) {
    put("config.yaml", emit_config(bundle.config));
    put("summary.csv", bundle.summary_csv());
    for (const auto& p : bundle.points) {
      if (!p.ledger_csv.empty()) put(p.point.id() + "/ledger.csv", p.ledger_csv);
      std::ostringstream series;
      bool header = true;
      for (const auto& s : p.series) {
        s.write_csv(series, p.point.id(), header);
        header = false;
      }
      if (!p.series.empty()) put(p.point.id() + "/series.csv", series.str());
    }
  }
  const fs::path mpath = dir / "manifest.json";
  std::ofstream out(mpath, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + mpath.string());
  out << manifest.dump(2) << "\n";
  return mpath;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("line fit needs at least two matching points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double vx = n * sxx - sx * sx, vy = n * syy - sy * sy, cxy = n * sxy - sx * sy;
  if (!(vx > 0.0)) throw ValidationError("line fit needs distinct x values");
  LinearFit f;
  f.slope = cxy / vx;
  f.intercept = (sy - f.slope * sx) / n;
  f.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  return f;
}

} // namespace prethermal
