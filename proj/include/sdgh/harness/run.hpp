#pragma once

// Experiment dispatch, persistence (manifest, records, summary) and reports.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "sdgh/harness/common.hpp"
#include "sdgh/harness/config.hpp"
#include "sdgh/harness/exp_breaking.hpp"
#include "sdgh/harness/exp_scalar.hpp"
#include "sdgh/harness/exp_transport.hpp"

#ifndef SDGH_VERSION
#define SDGH_VERSION "0.1.0"
#endif

namespace sdgh::harness {

namespace fs = std::filesystem;

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline ExperimentResult dispatch(const RunContext& ctx) {
  switch (ctx.cfg.experiment) {
    case Experiment::conservation: return run_conservation(ctx);
    case Experiment::girsanov_consistency: return run_girsanov_consistency(ctx);
    case Experiment::decay: return run_decay(ctx);
    case Experiment::sign_global: return run_sign_global(ctx);
    case Experiment::breaking_prob: return run_breaking_prob(ctx);
    case Experiment::breaking_rate: return run_breaking_rate(ctx);
    case Experiment::strong_noise: return run_strong_noise(ctx);
    case Experiment::exit_time: return run_exit_time(ctx);
    case Experiment::operator_oracles: return run_operator_oracles(ctx);
  }
  throw ConfigError("experiment", "not dispatched");
}

struct RunOutcome {
  json summary;
  fs::path dir;
  bool all_pass = false;
};

/// Prepares the output directory: refuses a nonempty one unless `overwrite`.
inline void prepare_output(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ConfigError("output.dir", "'" + dir.string() + "' is not a directory");
    if (!fs::is_empty(dir)) {
      if (!overwrite) throw ConfigError("output.dir", "'" + dir.string() + "' is not empty (pass --overwrite)");
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path());
    }
  }
  fs::create_directories(dir);
}

/// Runs the experiment and writes manifest.json, records.jsonl, summary.json
/// (and frames/*.csv). `dir_override` replaces output.dir when non-empty.
inline RunOutcome run(const ExperimentConfig& cfg, unsigned jobs, bool overwrite, const std::string& dir_override = {}) {
  const fs::path dir = dir_override.empty() ? fs::path(cfg.output_dir) : fs::path(dir_override);
  prepare_output(dir, overwrite);
  json manifest{{"config", cfg.raw},
                {"experiment", to_string(cfg.experiment)},
                {"code_version", SDGH_VERSION},
                {"jobs", jobs},
                {"started_utc", utc_timestamp()}};
  {
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  }
  const RunContext ctx{cfg, jobs, dir};
  ExperimentResult res = dispatch(ctx);
  {
    std::ofstream out(dir / "records.jsonl");
    for (const auto& r : res.records) out << r.dump() << '\n';
  }
  res.summary["horizon"] = cfg.horizon;
  std::ofstream(dir / "summary.json") << res.summary.dump(2) << '\n';
  manifest["finished_utc"] = utc_timestamp();
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  return {res.summary, dir, res.summary.value("all_pass", false)};
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { text, delimited, structured };

inline ReportFormat parse_format(const std::string& s) {
  if (s == "text") return ReportFormat::text;
  if (s == "delimited" || s == "csv") return ReportFormat::delimited;
  if (s == "structured" || s == "json") return ReportFormat::structured;
  throw ConfigError("format", "unknown report format '" + s + "' (text, delimited, structured)");
}

inline json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("dir", "missing " + p.string());
  return json::parse(in);
}

inline std::string cell(const json& v) {
  if (v.is_null()) return "nan";
  if (v.is_number()) return fmt(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline std::string text_report(const json& manifest, const json& summary) {
  std::ostringstream os;
  os << "experiment: " << summary.value("experiment", "?") << "  (code " << manifest.value("code_version", "?")
     << ", started " << manifest.value("started_utc", "?") << ")\n";
  if (summary.contains("notes")) {
    for (const auto& n : summary["notes"]) os << "NOTE: " << n.get<std::string>() << '\n';
  }
  os << "\ncriteria\n";
  for (const auto& c : summary["criteria"]) {
    os << "  " << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["id"].get<std::string>() << "  "
       << c["description"].get<std::string>() << "\n      measured " << c["measured"].dump() << "\n      threshold "
       << c["threshold"].dump() << '\n';
  }
  if (summary.contains("counts")) {
    os << "\ncounts\n";
    for (const auto& [k, v] : summary["counts"].items()) os << "  " << k << " = " << cell(v) << '\n';
  }
  if (summary.contains("probabilities")) {
    os << "\nprobabilities (Wilson 95%)\n";
    for (const auto& [k, v] : summary["probabilities"].items()) {
      os << "  " << k << " = " << cell(v["estimate"]) << "  [" << cell(v["lower"]) << ", " << cell(v["upper"]) << "]  ("
         << cell(v["successes"]) << "/" << cell(v["trials"]) << ")\n";
    }
  }
  if (summary.contains("bounds")) {
    os << "\nbounds\n";
    for (const auto& [k, v] : summary["bounds"].items()) {
      os << "  " << k << " = " << cell(v["value"]) << "  inputs " << v["inputs"].dump() << '\n';
    }
  }
  if (summary.contains("tables")) {
    for (const auto& [name, t] : summary["tables"].items()) {
      os << "\ntable " << name;
      if (!t["note"].get<std::string>().empty()) os << "  (" << t["note"].get<std::string>() << ")";
      os << '\n';
      for (const auto& c : t["columns"]) os << ' ' << std::setw(17) << c.get<std::string>();
      os << '\n';
      for (const auto& row : t["rows"]) {
        for (const auto& v : row) os << ' ' << std::setw(17) << cell(v);
        os << '\n';
      }
    }
  }
  return os.str();
}

/// Writes the report next to the run outputs; returns the files written.
inline std::vector<fs::path> report(const fs::path& dir, ReportFormat format, std::ostream* echo = nullptr) {
  const json manifest = read_json(dir / "manifest.json");
  const json summary = read_json(dir / "summary.json");
  std::vector<fs::path> files;
  switch (format) {
    case ReportFormat::text: {
      const std::string txt = text_report(manifest, summary);
      std::ofstream(dir / "report.txt") << txt;
      if (echo) *echo << txt;
      files.push_back(dir / "report.txt");
      break;
    }
    case ReportFormat::delimited: {
      const fs::path tdir = dir / "report";
      fs::create_directories(tdir);
      if (summary.contains("tables")) {
        for (const auto& [name, t] : summary["tables"].items()) {
          std::ofstream out(tdir / (name + ".csv"));
          bool first = true;
          for (const auto& c : t["columns"]) {
            out << (first ? "" : ",") << c.get<std::string>();
            first = false;
          }
          out << '\n';
          for (const auto& row : t["rows"]) {
            first = true;
            for (const auto& v : row) {
              out << (first ? "" : ",") << cell(v);
              first = false;
            }
            out << '\n';
          }
          files.push_back(tdir / (name + ".csv"));
        }
      }
      std::ofstream out(tdir / "criteria.csv");
      out << "id,pass,description\n";
      for (const auto& c : summary["criteria"]) {
        out << c["id"].get<std::string>() << ',' << (c["pass"].get<bool>() ? 1 : 0) << ",\""
            << c["description"].get<std::string>() << "\"\n";
      }
      files.push_back(tdir / "criteria.csv");
      if (echo) {
        for (const auto& f : files) *echo << f.string() << '\n';
      }
      break;
    }
    case ReportFormat::structured: {
      json doc{{"manifest", manifest}, {"summary", summary}};
      json inventory = json::array();
      for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) inventory.push_back(fs::relative(e.path(), dir).generic_string());
      }
      std::sort(inventory.begin(), inventory.end());
      doc["files"] = inventory;
      std::ofstream(dir / "report.json") << doc.dump(2) << '\n';
      if (echo) *echo << (dir / "report.json").string() << '\n';
      files.push_back(dir / "report.json");
      break;
    }
  }
  return files;
}

}  // namespace sdgh::harness
