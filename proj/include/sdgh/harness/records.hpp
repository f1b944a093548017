#pragma once

// Serialisation of run records, frame tables and the ensemble summary.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "sdgh/breaking.hpp"
#include "sdgh/integrator.hpp"
#include "sdgh/stats.hpp"
#include "sdgh/harness/json_fields.hpp"

namespace sdgh::harness {

/// Non-finite doubles become null so every record is valid JSON.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const StopInfo& s) {
  json j = json::object();
  j["kind"] = to_string(s.kind);
  j["tau"] = num(s.tau_estimate);
  j["tau_uncertainty"] = num(s.tau_uncertainty);
  j["steps"] = s.steps;
  j["hs_cap"] = num(s.hs_cap);
  j["w1inf_cap"] = num(s.w1inf_cap);
  j["tau_hs"] = s.tau_hs ? num(*s.tau_hs) : json(nullptr);
  j["tau_w1inf"] = s.tau_w1inf ? num(*s.tau_w1inf) : json(nullptr);
  return j;
}

inline json to_json(const WilsonInterval& w) {
  return json{{"estimate", num(w.estimate)}, {"lower", num(w.lower)}, {"upper", num(w.upper)},
              {"half_width", num(w.half_width())}, {"successes", w.successes}, {"trials", w.trials}};
}

/// Largest Hs and W^{1,inf} and the smallest slope over the recorded frames.
inline json extrema(const FrameTracks& tr) {
  double hs = 0.0, w1 = 0.0, m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tr.size(); ++i) {
    hs = std::max(hs, tr.hs[i]);
    w1 = std::max(w1, tr.w1inf[i]);
    m = std::min(m, tr.min_slope[i]);
  }
  return json{{"max_hs", num(hs)}, {"max_w1inf", num(w1)}, {"min_M", num(m)}, {"frames", tr.size()}};
}

inline bool is_breaking_stop(StopKind k) {
  return k == StopKind::hs_threshold || k == StopKind::w1inf_threshold || k == StopKind::resolution_exhausted ||
         k == StopKind::nonfinite;
}

inline json to_json(const RateEstimate& r) {
  json j{{"resolved", r.resolved},
         {"reason", r.reason},
         {"tau_star", num(r.tau_star)},
         {"B_star", num(r.B_star)},
         {"beta_tau", num(r.beta_tau)},
         {"target", num(r.target)},
         {"terminal", num(r.terminal)},
         {"terminal_ratio", num(r.terminal_ratio)},
         {"last_resolved_time", num(r.last_resolved_time)},
         {"last_resolved_M", num(r.last_resolved_M)},
         {"max_series_deviation", num(r.max_series_deviation)},
         {"decade_span", num(r.decade_span)}};
  j["tau_resolution_offset"] = r.tau_resolution_offset ? num(*r.tau_resolution_offset) : json(nullptr);
  j["tau_cap_offset"] = r.tau_cap_offset ? num(*r.tau_cap_offset) : json(nullptr);
  json gap = json::array(), series = json::array();
  for (std::size_t i = 0; i < r.gap.size(); ++i) {
    gap.push_back(num(r.gap[i]));
    series.push_back(num(r.series[i]));
  }
  j["gap"] = gap;
  j["series"] = series;
  return j;
}

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// t, Hs, H1, W1inf, M, z, beta for every `stride`-th frame (and the last).
inline void write_frames(const std::filesystem::path& file, const FrameTracks& tr, int stride) {
  std::ofstream out(file);
  out << "t,Hs,H1,W1inf,M,z,beta\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (stride > 1 && i % static_cast<std::size_t>(stride) != 0 && i + 1 != tr.size()) continue;
    out << fmt(tr.time[i]) << ',' << fmt(tr.hs[i]) << ',' << fmt(tr.h1[i]) << ',' << fmt(tr.w1inf[i]) << ','
        << fmt(tr.min_slope[i]) << ',' << fmt(tr.argmin[i]) << ',' << fmt(tr.beta[i]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Summary assembly

/// Columnar table: `columns` names and row-major numeric data.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::string note;

  json to_json() const {
    json r = json::array();
    for (const auto& row : rows) {
      json jr = json::array();
      for (double x : row) jr.push_back(num(x));
      r.push_back(jr);
    }
    return json{{"columns", columns}, {"rows", r}, {"note", note}};
  }
};

class SummaryBuilder {
 public:
  explicit SummaryBuilder(std::string experiment) { doc_["experiment"] = std::move(experiment); }

  json& doc() { return doc_; }
  void count(const std::string& key, std::size_t v) { doc_["counts"][key] = v; }
  void value(const std::string& key, json v) { doc_["values"][key] = std::move(v); }

  void probability(const std::string& name, const WilsonInterval& w) { doc_["probabilities"][name] = to_json(w); }

  /// A theoretical bound with the inputs needed to recompute it.
  void bound(const std::string& name, double value, json inputs) {
    doc_["bounds"][name] = json{{"value", num(value)}, {"inputs", std::move(inputs)}};
  }

  /// Criterion entry; `measured` and `threshold` are the stored numbers behind `pass`.
  void criterion(const std::string& id, const std::string& description, bool pass, json measured, json threshold) {
    doc_["criteria"].push_back(json{{"id", id},
                                    {"description", description},
                                    {"pass", pass},
                                    {"measured", std::move(measured)},
                                    {"threshold", std::move(threshold)}});
  }

  void table(const Table& t) { doc_["tables"][t.name] = t.to_json(); }
  void note(const std::string& text) { doc_["notes"].push_back(text); }

  bool all_pass() const {
    if (!doc_.contains("criteria")) return true;
    for (const auto& c : doc_["criteria"]) {
      if (!c["pass"].get<bool>()) return false;
    }
    return true;
  }

  json finish() {
    if (!doc_.contains("criteria")) doc_["criteria"] = json::array();
    doc_["all_pass"] = all_pass();
    return doc_;
  }

 private:
  json doc_ = json::object();
};

}  // namespace sdgh::harness
