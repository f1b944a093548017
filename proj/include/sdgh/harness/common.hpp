#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sdgh/girsanov_transform.hpp"
#include "sdgh/noise.hpp"
#include "sdgh/parallel.hpp"
#include "sdgh/harness/config.hpp"
#include "sdgh/harness/records.hpp"

namespace sdgh::harness {

struct RunContext {
  const ExperimentConfig& cfg;
  unsigned jobs = 1;
  std::filesystem::path out_dir;
};

struct ExperimentResult {
  std::vector<json> records;
  json summary;
};

/// Runs fn(i) for every ensemble member. An exception inside one member is
/// recorded as a failed run; the rest of the ensemble continues.
inline std::vector<json> run_members(std::size_t count, unsigned jobs, const std::function<json(std::size_t)>& fn) {
  std::vector<json> out(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    try {
      out[i] = fn(i);
      out[i]["status"] = "ok";
    } catch (const std::exception& err) {
      out[i] = json{{"index", i}, {"status", "failed"}, {"error", err.what()}};
    }
  });
  return out;
}

inline bool ok(const json& rec) { return rec.value("status", "") == "ok"; }

inline std::size_t failed_count(const std::vector<json>& recs) {
  std::size_t n = 0;
  for (const auto& r : recs) n += ok(r) ? 0 : 1;
  return n;
}

/// Writes the frame CSV of run `index` (if frames are enabled) and returns its relative path.
inline json frames_ref(const RunContext& ctx, const std::string& stem, const FrameTracks& tr) {
  if (ctx.cfg.frame_stride == 0) return nullptr;
  char name[64];
  std::snprintf(name, sizeof name, "%s.csv", stem.c_str());
  const auto rel = std::filesystem::path("frames") / name;
  std::filesystem::create_directories(ctx.out_dir / "frames");
  write_frames(ctx.out_dir / rel, tr, ctx.cfg.frame_stride);
  return rel.generic_string();
}

inline std::string run_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%05zu", index);
  return buf;
}

/// beta on the path grid for linear noise (beta == 1 when b == 0).
inline GirsanovProcesses beta_process(const ExperimentConfig& cfg, std::uint64_t seed, double dt) {
  if (cfg.noise.deterministic) return unit_girsanov(cfg.horizon, dt);
  const BrownianPath path = sample_path(cfg.horizon, dt, 1, seed);
  return girsanov(path, *cfg.noise.b);
}

inline const BCoefficient& linear_b(const ExperimentConfig& cfg) { return *cfg.noise.b; }

/// b_* and b^* as JSON, for bound provenance.
inline json b_inputs(const BCoefficient& b) {
  return json{{"b_lower_sq", b.lower_sq()}, {"b_upper_sq", b.upper_sq()}, {"b_upper", std::sqrt(b.upper_sq())}};
}

inline Fields analysis_fields(const ExperimentConfig& cfg) { return Fields(cfg.analysis, "analysis"); }

inline std::string truncation_note(double horizon) {
  return "statements for all t > 0 are checked only on [0, " + fmt(horizon) + "]";
}

}  // namespace sdgh::harness
