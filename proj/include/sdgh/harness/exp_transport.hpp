#pragma once

// Experiments built on the transformed (pathwise) solver: H^1 conservation,
// EM-vs-transform consistency, sign persistence and small-data decay.

#include <cmath>
#include <mutex>
#include <string>
#include <vector>

#include "sdgh/breaking.hpp"
#include "sdgh/girsanov_transform.hpp"
#include "sdgh/integrator.hpp"
#include "sdgh/harness/common.hpp"
#include "sdgh/harness/initial_data.hpp"

namespace sdgh::harness {

/// lambda is needed by several experiments; computed once per process.
inline const LambdaEstimate& cached_lambda() {
  static const LambdaEstimate est = embedding_lambda();
  return est;
}

// ---------------------------------------------------------------------------

inline ExperimentResult run_conservation(const RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Fields an = analysis_fields(cfg);
  const auto per_datum = an.integer("paths_per_datum", 5);
  if (per_datum < 1) throw ConfigError("analysis.paths_per_datum", "must be >= 1");
  const double tol = an.positive("tolerance", 1e-6);
  const TorusGrid grid(cfg.n);
  const std::size_t P = static_cast<std::size_t>(per_datum);
  const std::size_t runs = cfg.ensemble * P;

  auto records = run_members(runs, ctx.jobs, [&](std::size_t r) {
    const std::size_t datum = r / P;
    const std::uint64_t dseed = cfg.base_seed + datum;
    const std::uint64_t seed = cfg.base_seed + r;
    const auto init = make_initial(cfg.initial, grid, dseed, datum, cfg.ensemble, cfg.integrator.thresholds.s);
    const auto g = beta_process(cfg, seed, cfg.dt);
    const auto traj = solve_transformed(init.u0, g, *cfg.model, cfg.integrator);
    const auto& h = traj.frame_h1_state;
    double drift = 0.0;
    for (double x : h) drift = std::max(drift, std::abs(x / h.front() - 1.0));
    return json{{"index", r},
                {"seed", seed},
                {"datum_seed", dseed},
                {"stop", to_json(traj.stop)},
                {"extrema", extrema(traj.tracks)},
                {"h1_v0", num(h.front())},
                {"h1_drift", num(drift)},
                {"frames", frames_ref(ctx, run_stem(r), traj.tracks)}};
  });

  SummaryBuilder sb("conservation");
  double worst = 0.0;
  std::size_t full = 0;
  Table t{"h1_drift", {"run", "datum", "max_relative_drift"}, {}, "max over frames of | ||v(t)||_H1 / ||v0||_H1 - 1 |"};
  for (const auto& rec : records) {
    if (!ok(rec)) continue;
    const double d = rec["h1_drift"].is_null() ? INFINITY : rec["h1_drift"].get<double>();
    worst = std::max(worst, d);
    full += rec["stop"]["kind"] == "horizon_reached" ? 1 : 0;
    t.rows.push_back({rec["index"].get<double>(), rec["datum_seed"].get<double>() - double(cfg.base_seed), d});
  }
  sb.count("runs", runs);
  sb.count("failed", failed_count(records));
  sb.count("horizon_reached", full);
  sb.value("max_h1_drift", num(worst));
  sb.table(t);
  sb.criterion("C2", "relative H1 drift of v below tolerance on every run over [0,T]",
               failed_count(records) == 0 && full == runs && worst < tol,
               json{{"max_drift", num(worst)}, {"runs_complete", full}, {"runs", runs}}, json{{"tolerance", tol}});
  return {std::move(records), sb.finish()};
}

// ---------------------------------------------------------------------------

inline ExperimentResult run_girsanov_consistency(const RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Fields an = analysis_fields(cfg);
  std::vector<double> levels = an.numbers("dt_levels");
  const double min_ratio = an.positive("min_ratio", 1.3);
  const double dt_ref = cfg.dt;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double r = levels[i] / dt_ref;
    if (!(levels[i] > 0.0) || std::abs(r - std::round(r)) > 1e-9 || std::round(r) < 1.0) {
      throw ConfigError("analysis.dt_levels[" + std::to_string(i) + "]", "must be a multiple of time.dt");
    }
  }
  std::sort(levels.begin(), levels.end(), std::greater<>());
  const TorusGrid grid(cfg.n);
  const LinearNoise noise{linear_b(cfg)};

  auto records = run_members(cfg.ensemble, ctx.jobs, [&](std::size_t i) {
    const std::uint64_t seed = cfg.base_seed + i;
    const auto init = make_initial(cfg.initial, grid, seed, i, cfg.ensemble, cfg.integrator.thresholds.s);
    const BrownianPath path = sample_path(cfg.horizon, dt_ref, 1, seed);
    const auto g = girsanov(path, noise.b);
    IntegrateOptions ref_opts = cfg.integrator;
    ref_opts.dt = dt_ref;
    const auto ref = solve_transformed(init.u0, g, *cfg.model, ref_opts);
    if (ref.stop.kind != StopKind::horizon_reached) {
      throw std::runtime_error(std::string("reference run stopped early: ") + to_string(ref.stop.kind));
    }
    const SpectralField u_ref = ref.final_state();
    const double ref_h1 = h1_norm(u_ref);
    json errs = json::array(), rel = json::array();
    for (double dt : levels) {
      IntegrateOptions o = cfg.integrator;
      o.dt = dt;
      const auto em = integrate(init.u0, NoiseSpec{noise}, *cfg.model, path, o);
      if (em.stop.kind != StopKind::horizon_reached) {
        throw std::runtime_error(std::string("EM run stopped early: ") + to_string(em.stop.kind));
      }
      const double e = h1_norm(em.final_state() - u_ref);
      errs.push_back(num(e));
      rel.push_back(num(e / ref_h1));
    }
    return json{{"index", i}, {"seed", seed}, {"stop", to_json(ref.stop)}, {"extrema", extrema(ref.tracks)},
                {"beta_T", num(g.beta.back())}, {"h1_error", errs}, {"h1_rel_error", rel},
                {"h1_u_ref", num(ref_h1)},
                {"frames", frames_ref(ctx, run_stem(i), ref.tracks)}};
  });

  SummaryBuilder sb("girsanov-consistency");
  // The criterion uses the per-path error relative to ||u_ref||_H1: the
  // absolute RMS is dominated by the few paths where beta(T) is large.
  std::vector<double> sq(levels.size(), 0.0), sq_rel(levels.size(), 0.0);
  std::size_t used = 0;
  for (const auto& rec : records) {
    if (!ok(rec)) continue;
    ++used;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const double e = rec["h1_error"][l].get<double>();
      const double r = rec["h1_rel_error"][l].get<double>();
      sq[l] += e * e;
      sq_rel[l] += r * r;
    }
  }
  Table t{"strong_error", {"dt", "rms_h1_error", "rms_relative_error"}, {},
          "RMS over paths of ||u_EM - beta v_RK4||_H1 at T, absolute and relative to ||beta v_RK4||_H1"};
  std::vector<double> rms(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const double abs_rms = used ? std::sqrt(sq[l] / double(used)) : NAN;
    rms[l] = used ? std::sqrt(sq_rel[l] / double(used)) : NAN;
    t.rows.push_back({levels[l], abs_rms, rms[l]});
  }
  json ratios = json::array();
  bool pass = used > 0 && failed_count(records) == 0 && levels.size() >= 2;
  for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
    const double r = rms[l] / rms[l + 1];
    ratios.push_back(num(r));
    pass = pass && r >= min_ratio;
  }
  sb.count("paths", cfg.ensemble);
  sb.count("failed", failed_count(records));
  sb.value("reference_dt", dt_ref);
  sb.value("error_ratios", ratios);
  sb.table(t);
  sb.criterion("C3", "EM strong error against the transformed reference shrinks per dt halving",
               pass, json{{"ratios", ratios}}, json{{"min_ratio", min_ratio}});
  return {std::move(records), sb.finish()};
}

// ---------------------------------------------------------------------------

inline ExperimentResult run_sign_global(const RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Fields an = analysis_fields(cfg);
  const double min_global = an.number("min_global_fraction", 0.98);
  const double rel_tol = an.positive("sign_tolerance", 1e-8);
  if (Fields(cfg.initial, "initial").text("type") != "signed_momentum") {
    throw ConfigError("initial.type", "sign-global needs signed_momentum data");
  }
  IntegrateOptions opts = cfg.integrator;
  if (opts.snapshot_stride == 0) opts.snapshot_stride = opts.record_stride;
  const TorusGrid grid(cfg.n);

  auto records = run_members(cfg.ensemble, ctx.jobs, [&](std::size_t i) {
    const std::uint64_t seed = cfg.base_seed + i;
    const auto init = make_initial(cfg.initial, grid, seed, i, cfg.ensemble, opts.thresholds.s);
    const auto g = beta_process(cfg, seed, cfg.dt);
    auto traj = solve_transformed(init.u0, g, *cfg.model, opts);
    const SignReport sr = sign_fields(traj, rel_tol);
    double worst = -INFINITY;
    for (double x : sr.worst_slope_excess) worst = std::max(worst, x);
    const bool global = traj.stop.kind == StopKind::horizon_reached;
    json rec{{"index", i},
             {"seed", seed},
             {"family", init.family},
             {"stop", to_json(traj.stop)},
             {"extrema", extrema(traj.tracks)},
             {"global", global},
             {"sign",
              {{"initial", to_string(sr.initial)},
               {"asserted", sr.asserted()},
               {"snapshots", sr.times.size()},
               {"holds", sr.asserted() ? json(sr.all_hold()) : json(nullptr)},
               {"worst_slope_excess", sr.asserted() ? num(worst) : json(nullptr)}}},
             {"frames", frames_ref(ctx, run_stem(i), traj.tracks)}};
    return rec;
  });

  SummaryBuilder sb("sign-global");
  std::size_t signed_runs = 0, signed_global = 0, signed_hold = 0, all_global = 0, mixed = 0, mixed_global = 0;
  for (const auto& rec : records) {
    if (!ok(rec)) continue;
    const bool g = rec["global"].get<bool>();
    all_global += g;
    if (rec["family"] == "mixed") {
      ++mixed;
      mixed_global += g;
      continue;
    }
    ++signed_runs;
    signed_global += g;
    if (g && rec["sign"]["holds"].is_boolean() && rec["sign"]["holds"].get<bool>()) ++signed_hold;
  }
  const double p = double(signed_runs) / double(cfg.ensemble);
  const auto w_all = wilson_interval(all_global, cfg.ensemble);
  const auto w_signed = wilson_interval(signed_global, signed_runs);
  sb.count("runs", cfg.ensemble);
  sb.count("failed", failed_count(records));
  sb.count("signed", signed_runs);
  sb.count("signed_global", signed_global);
  sb.count("signed_sign_checks_hold", signed_hold);
  sb.count("mixed", mixed);
  sb.count("mixed_global", mixed_global);
  sb.probability("global", w_all);
  sb.probability("global_signed", w_signed);
  sb.bound("global_lower_bound", p, json{{"p_signed_fraction", p}, {"q", 0.0}});
  sb.note(truncation_note(cfg.horizon));
  sb.table(Table{"global_vs_bound", {"empirical", "lower", "upper", "bound_p"},
                 {{w_all.estimate, w_all.lower, w_all.upper, p}}, "global = no cap or breaking before T"});
  sb.criterion("sign-global", "global frequency at least the signed fraction p minus CI",
               w_all.estimate >= p - w_all.half_width(), json{{"frequency", w_all.estimate}},
               json{{"p", p}, {"ci", w_all.half_width()}});
  if (signed_runs > 0) {
    const double frac = w_signed.estimate;
    sb.criterion("C9", "signed momentum runs reach T without a cap and keep |v_x| <= |v|",
                 failed_count(records) == 0 && frac >= min_global && signed_hold == signed_global,
                 json{{"global_fraction", frac}, {"sign_checks_hold", signed_hold}, {"global_runs", signed_global}},
                 json{{"min_global_fraction", min_global}});
  }
  return {std::move(records), sb.finish()};
}

// ---------------------------------------------------------------------------

inline ExperimentResult run_decay(const RunContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Fields an = analysis_fields(cfg);
  const std::vector<double> Cs = an.numbers("C");
  const double assert_C = an.number("assert_C", Cs.back());
  const double R = an.number("R");
  const double l1 = an.number("lambda1");
  const double l2 = an.number("lambda2");
  const double rho = an.number("rho", 0.9);
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("analysis.rho", "must lie in (0,1)");
  const double c_break = an.number("c", 0.5);
  const double s = cfg.integrator.thresholds.s;
  const BCoefficient& b = linear_b(cfg);
  const double K = embedding_K(s);
  std::vector<DecayConstants> consts;
  for (std::size_t i = 0; i < Cs.size(); ++i) {
    DecayConstants dc{Cs[i], K, R, l1, l2, b.lower_sq()};
    if (!dc.valid()) {
      throw ConfigError("analysis", "need C > 1, R > 1, lambda1 > 2, lambda2 > 2 lambda1/(lambda1-2) (C=" +
                                        fmt(Cs[i]) + ")");
    }
    consts.push_back(dc);
  }
  const double lambda = cached_lambda().value;
  const double b_up = std::sqrt(b.upper_sq());
  const TorusGrid grid(cfg.n);
  const std::size_t N = cfg.ensemble;

  auto records = run_members(Cs.size() * N, ctx.jobs, [&](std::size_t r) {
    const std::size_t ci = r / N, j = r % N;
    const DecayConstants& dc = consts[ci];
    const std::uint64_t seed = cfg.base_seed + j;
    auto init = make_initial(cfg.initial, grid, seed, j, N, s);
    const double size = rho * dc.initial_bound();
    const SpectralField u0 = (size / hs_norm(init.u0, {s})) * init.u0;
    const bool small = hs_norm(u0, {s}) < dc.initial_bound();
    const double thr = breaking_threshold(b_up, c_break, lambda, h1_norm(u0));
    const bool steep = refined_min_slope(u0).value < thr;
    const auto g = beta_process(cfg, seed, cfg.dt);
    const auto traj = solve_transformed(u0, g, *cfg.model, cfg.integrator);
    bool held = traj.stop.kind == StopKind::horizon_reached;
    double worst = 0.0;
    const auto& tr = traj.tracks;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const double ratio = tr.hs[k] / dc.envelope(b.integrated_square(tr.time[k]));
      worst = std::max(worst, ratio);
      held = held && ratio < 1.0;
    }
    return json{{"index", r},
                {"seed", seed},
                {"C", dc.C},
                {"stop", to_json(traj.stop)},
                {"extrema", extrema(tr)},
                {"hs_u0", num(hs_norm(u0, {s}))},
                {"envelope_held", held},
                {"worst_envelope_ratio", num(worst)},
                {"dichotomy", {{"decay_condition", small}, {"breaking_condition", steep}}},
                {"frames", frames_ref(ctx, run_stem(r), tr)}};
  });

  SummaryBuilder sb("decay");
  Table t{"decay_vs_C", {"C", "frequency", "lower", "upper", "bound"}, {}, truncation_note(cfg.horizon)};
  std::size_t both = 0;
  for (const auto& rec : records) {
    if (ok(rec) && rec["dichotomy"]["decay_condition"].get<bool>() && rec["dichotomy"]["breaking_condition"].get<bool>()) ++both;
  }
  bool asserted = false;
  for (std::size_t ci = 0; ci < Cs.size(); ++ci) {
    std::size_t held = 0;
    for (std::size_t j = 0; j < N; ++j) {
      const auto& rec = records[ci * N + j];
      if (ok(rec) && rec["envelope_held"].get<bool>()) ++held;
    }
    const auto w = wilson_interval(held, N);
    const DecayConstants& dc = consts[ci];
    const std::string key = "C=" + fmt(dc.C);
    sb.probability("envelope_" + key, w);
    sb.bound("decay_" + key, dc.probability_bound(),
             json{{"C", dc.C}, {"K", dc.K}, {"R", dc.R}, {"lambda1", dc.lambda1}, {"lambda2", dc.lambda2},
                  {"b_lower_sq", dc.b_lower_sq}, {"rate", dc.rate()}, {"initial_bound", dc.initial_bound()},
                  {"rho", rho}});
    t.rows.push_back({dc.C, w.estimate, w.lower, w.upper, dc.probability_bound()});
    if (dc.C == assert_C) {
      asserted = true;
      const double thr = dc.probability_bound() - 2.0 * w.half_width();
      sb.criterion("C12", "decay envelope frequency at the asserted C exceeds the bound minus 2 CI",
                   failed_count(records) == 0 && w.estimate > thr,
                   json{{"C", dc.C}, {"frequency", w.estimate}, {"ci", w.half_width()}},
                   json{{"bound", dc.probability_bound()}, {"bound_minus_2ci", thr}});
    }
  }
  if (!asserted) throw ConfigError("analysis.assert_C", "must be one of analysis.C");
  sb.count("runs", records.size());
  sb.count("failed", failed_count(records));
  sb.count("dichotomy_both", both);
  sb.value("lambda", lambda);
  sb.value("K", K);
  sb.table(t);
  sb.note(truncation_note(cfg.horizon));
  sb.criterion("dichotomy", "no datum meets both the small-data and the breaking condition", both == 0,
               json{{"both", both}}, json{{"max", 0}});
  return {std::move(records), sb.finish()};
}

}  // namespace sdgh::harness
