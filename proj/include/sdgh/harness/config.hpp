#pragma once

// Experiment configuration: one JSON document per run. Physics parameters
// (c0, gamma, b, a, theta) have no defaults; numerical knobs do.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sdgh/dynamics.hpp"
#include "sdgh/integrator.hpp"
#include "sdgh/noise.hpp"
#include "sdgh/harness/json_fields.hpp"

namespace sdgh::harness {

enum class Experiment {
  conservation,
  girsanov_consistency,
  decay,
  sign_global,
  breaking_prob,
  breaking_rate,
  strong_noise,
  exit_time,
  operator_oracles,
};

inline constexpr std::array<std::pair<Experiment, const char*>, 9> kExperimentNames{{
    {Experiment::conservation, "conservation"},
    {Experiment::girsanov_consistency, "girsanov-consistency"},
    {Experiment::decay, "decay"},
    {Experiment::sign_global, "sign-global"},
    {Experiment::breaking_prob, "breaking-prob"},
    {Experiment::breaking_rate, "breaking-rate"},
    {Experiment::strong_noise, "strong-noise"},
    {Experiment::exit_time, "exit-time"},
    {Experiment::operator_oracles, "operator-oracles"},
}};

inline const char* to_string(Experiment e) {
  for (const auto& [k, name] : kExperimentNames) {
    if (k == e) return name;
  }
  return "unknown";
}

inline Experiment parse_experiment(const std::string& s) {
  for (const auto& [k, name] : kExperimentNames) {
    if (s == name) return k;
  }
  std::string all;
  for (const auto& [k, name] : kExperimentNames) all += std::string(all.empty() ? "" : ", ") + name;
  throw ConfigError("experiment", "unknown experiment '" + s + "' (expected one of " + all + ")");
}

/// One (a, theta) case of the strong-noise experiment.
struct NoiseCase {
  double a = 0.0;
  bool a_auto = false;  ///< a = 2 sqrt(2 Q^) with Q^ sampled
  double theta = 0.0;
  std::string expect;   ///< "breaks", "survives" or "record"
};

struct NoiseConfig {
  enum class Kind { linear, nonlinear } kind = Kind::linear;
  std::optional<BCoefficient> b;
  bool deterministic = false;  ///< linear with b == 0: beta == 1
  std::vector<NoiseCase> cases;
  json echo;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::conservation;
  json raw;

  int n = 256;
  double dt = 1e-4;
  double horizon = 1.0;
  std::size_t ensemble = 1;
  std::uint64_t base_seed = 1;

  std::optional<ModelParams> model;
  NoiseConfig noise;
  json initial;  ///< validated by the initial-data builder
  IntegrateOptions integrator;
  json analysis = json::object();

  std::string output_dir;
  int frame_stride = 1;

};

namespace detail {

inline BCoefficient parse_b(const Fields& f) {
  if (f.raw().is_array()) throw ConfigError(f.path(), "tabulated b(t) is not accepted; use a closed-form preset");
  const std::string preset = f.text("preset");
  if (preset == "constant") {
    const double v = f.number("value");
    if (!(v >= 0.0)) throw ConfigError(f.field("value"), "must be >= 0");
    return BCoefficient::constant(v);
  }
  if (preset == "sinusoidal") {
    const double lo = f.number("lower_sq");
    const double hi = f.number("upper_sq");
    if (!(lo > 0.0)) throw ConfigError(f.field("lower_sq"), "b_* must be positive");
    if (!(hi >= lo)) throw ConfigError(f.field("upper_sq"), "b^* must be >= b_*");
    return BCoefficient::sinusoidal(lo, hi);
  }
  throw ConfigError(f.field("preset"), "unknown preset '" + preset + "' (constant or sinusoidal)");
}

inline NoiseConfig parse_noise(const Fields& f, double horizon) {
  NoiseConfig nc;
  nc.echo = f.raw();
  const std::string type = f.text("type");
  if (type == "linear") {
    nc.kind = NoiseConfig::Kind::linear;
    if (f.has("b") && f.raw()["b"].is_array()) {
      throw ConfigError(f.field("b"), "tabulated b(t) is not accepted; use a closed-form preset");
    }
    nc.b = parse_b(f.object("b"));
    nc.deterministic = nc.b->kind() == BCoefficient::Kind::constant && nc.b->constant_value() == 0.0;
    if (!nc.deterministic && !nc.b->satisfies_bounds(horizon)) {
      throw ConfigError(f.field("b"), "b^2 violates 0 < b_* <= b^2 <= b^* on [0, horizon]");
    }
  } else if (type == "nonlinear") {
    nc.kind = NoiseConfig::Kind::nonlinear;
    for (const Fields& c : f.objects("cases")) {
      NoiseCase nc1;
      if (c.has("a") && c.raw()["a"].is_string()) {
        if (c.text("a") != "auto") throw ConfigError(c.field("a"), "expected a number or \"auto\"");
        nc1.a_auto = true;
      } else {
        nc1.a = c.number("a");
      }
      nc1.theta = c.number("theta");
      if (!(nc1.theta >= 0.0)) throw ConfigError(c.field("theta"), "theta must be >= 0");
      if (nc1.a_auto && nc1.theta != 0.5) throw ConfigError(c.field("a"), "\"auto\" is only defined for theta = 1/2");
      nc1.expect = c.text("expect", "record");
      if (nc1.expect != "breaks" && nc1.expect != "survives" && nc1.expect != "record") {
        throw ConfigError(c.field("expect"), "expected breaks, survives or record");
      }
      nc.cases.push_back(nc1);
    }
  } else {
    throw ConfigError(f.field("type"), "unknown noise type '" + type + "' (linear or nonlinear)");
  }
  return nc;
}

inline bool needs_pde(Experiment e) { return e != Experiment::exit_time; }
inline bool needs_model(Experiment e) { return e != Experiment::exit_time && e != Experiment::operator_oracles; }
inline bool needs_initial(Experiment e) {
  return e != Experiment::exit_time && e != Experiment::operator_oracles;
}
inline bool needs_balance(Experiment e) {
  switch (e) {
    case Experiment::conservation:
    case Experiment::decay:
    case Experiment::sign_global:
    case Experiment::breaking_prob:
    case Experiment::breaking_rate: return true;
    default: return false;
  }
}
inline bool needs_noise(Experiment e) { return e != Experiment::operator_oracles; }

}  // namespace detail

/// Parses and validates a configuration document. Throws ConfigError naming the field.
inline ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  const Fields root(doc, "");
  cfg.raw = doc;
  cfg.experiment = parse_experiment(root.text("experiment"));
  const Experiment e = cfg.experiment;

  const Fields ens = root.object("ensemble");
  const auto size = ens.integer("size");
  if (size < 1) throw ConfigError("ensemble.size", "must be >= 1");
  cfg.ensemble = static_cast<std::size_t>(size);
  const auto seed = ens.integer("base_seed");
  if (seed < 0) throw ConfigError("ensemble.base_seed", "must be >= 0");
  cfg.base_seed = static_cast<std::uint64_t>(seed);

  if (e != Experiment::operator_oracles) {
    const Fields time = root.object("time");
    cfg.dt = time.positive("dt");
    cfg.horizon = time.positive("horizon");
    if (cfg.horizon < cfg.dt) throw ConfigError("time.horizon", "must be >= dt");
  }

  if (detail::needs_pde(e)) {
    const Fields grid = root.object("grid");
    const auto n = grid.integer("n");
    if (n < 16 || (n & (n - 1)) != 0) throw ConfigError("grid.n", "must be a power of two >= 16");
    cfg.n = static_cast<int>(n);
  }

  if (detail::needs_model(e)) {
    const Fields model = root.object("model");
    ModelParams p;
    p.c0 = model.number("c0");
    p.gamma = model.number("gamma");
    if (detail::needs_balance(e) && !p.balanced(1e-12)) {
      throw ConfigError("model", "this experiment requires c0 + gamma = 0");
    }
    cfg.model = p;
  }

  if (detail::needs_noise(e)) {
    cfg.noise = detail::parse_noise(root.object("noise"), cfg.horizon);
    const bool want_nonlinear = e == Experiment::strong_noise;
    if (want_nonlinear != (cfg.noise.kind == NoiseConfig::Kind::nonlinear)) {
      throw ConfigError("noise.type", want_nonlinear ? "strong-noise needs nonlinear noise"
                                                     : "this experiment needs linear noise");
    }
    if (cfg.noise.deterministic && e != Experiment::breaking_rate) {
      throw ConfigError("noise.b", "b == 0 is only accepted for breaking-rate reference runs");
    }
  }

  if (detail::needs_initial(e)) {
    const Fields init = root.object("initial");
    (void)init.text("type");
    cfg.initial = init.raw();
  }

  IntegrateOptions& io = cfg.integrator;
  io.dt = cfg.dt;
  io.horizon = cfg.horizon;
  if (auto th = root.optional_object("thresholds")) {
    io.thresholds.hs_cap = th->positive("hs_cap", io.thresholds.hs_cap);
    io.thresholds.w1inf_cap = th->positive("w1inf_cap", io.thresholds.w1inf_cap);
    io.thresholds.s = th->number("s", io.thresholds.s);
    if (!(io.thresholds.s > 1.5)) throw ConfigError("thresholds.s", "must exceed 3/2");
  }
  if (auto in = root.optional_object("integrator")) {
    io.record_stride = static_cast<int>(in->integer("record_stride", io.record_stride));
    if (io.record_stride < 1) throw ConfigError("integrator.record_stride", "must be >= 1");
    io.snapshot_stride = static_cast<int>(in->integer("snapshot_stride", io.snapshot_stride));
    if (io.snapshot_stride < 0) throw ConfigError("integrator.snapshot_stride", "must be >= 0");
    io.resolution_tail = in->positive("resolution_tail", io.resolution_tail);
    io.cfl = in->positive("cfl", io.cfl);
    io.enforce_cfl = in->boolean("enforce_cfl", io.enforce_cfl);
    io.adaptive_substeps = in->boolean("adaptive_substeps", io.adaptive_substeps);
    io.record_both_caps = in->boolean("record_both_caps", io.record_both_caps);
    io.w1inf_refine = static_cast<int>(in->integer("w1inf_refine", io.w1inf_refine));
    if (io.w1inf_refine < 1) throw ConfigError("integrator.w1inf_refine", "must be >= 1");
  }
  if (root.has("analysis")) cfg.analysis = root.object("analysis").raw();

  const Fields out = root.object("output");
  cfg.output_dir = out.text("dir");
  if (cfg.output_dir.empty()) throw ConfigError("output.dir", "must not be empty");
  cfg.frame_stride = static_cast<int>(out.integer("frame_stride", 1));
  if (cfg.frame_stride < 0) throw ConfigError("output.frame_stride", "must be >= 0 (0 disables frames)");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& err) {
    throw ConfigError("config", std::string("parse error: ") + err.what());
  }
  return parse_config(doc);
}

}  // namespace sdgh::harness
