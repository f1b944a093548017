// Acceptance runner: executes the shipped configs and prints one PASS/FAIL
// line per criterion. Exit status 1 when any printed criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sdgh/harness/run.hpp"

namespace fs = std::filesystem;
namespace h = sdgh::harness;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string config_path(const std::string& name) { return std::string(SDGH_CONFIG_DIR) + "/" + name + ".json"; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Runs one config and folds its criteria into `out`; repeated ids are ANDed.
void run_config(const std::string& name, const fs::path& work, unsigned jobs, std::map<std::string, Verdict>& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = h::load_config(config_path(name));
  const auto res = h::run(cfg, jobs, true, (work / name).string());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "  %-30s %7.1f s\n", name.c_str(), secs);
  for (const auto& c : res.summary["criteria"]) {
    const std::string id = c["id"].get<std::string>();
    if (id.empty() || id[0] != 'C') continue;
    auto& v = out[id];
    v.pass = v.pass && c["pass"].get<bool>();
    if (!v.detail.empty()) v.detail += "; ";
    v.detail += name + " " + c["measured"].dump();
  }
}

Verdict determinism(const fs::path& work) {
  const auto cfg = h::load_config(config_path("sign_global_positive"));
  const fs::path a = work / "determinism_jobs1", b = work / "determinism_jobs2";
  h::run(cfg, 1, true, a.string());
  h::run(cfg, 2, true, b.string());
  const std::string ra = slurp(a / "records.jsonl"), rb = slurp(b / "records.jsonl");
  Verdict v;
  v.pass = !ra.empty() && ra == rb;
  v.detail = "records.jsonl " + std::to_string(ra.size()) + " vs " + std::to_string(rb.size()) + " bytes, " +
             (ra == rb ? "identical" : "different");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  bool fast = false, slow = false, verbose = false;
  std::string work = "acceptance_work";
  unsigned jobs = 1;
  app.add_flag("--fast", fast, "criteria that run in minutes");
  app.add_flag("--slow", slow, "breaking probability and strong-noise ensembles");
  app.add_option("--work", work, "scratch directory for run outputs");
  app.add_option("--jobs", jobs, "worker threads per run");
  app.add_flag("-v,--verbose", verbose, "print measured values");
  CLI11_PARSE(app, argc, argv);
  if (!fast && !slow) fast = slow = true;

  const std::vector<std::string> fast_cfgs{"operator_oracles",
                                           "conservation",
                                           "girsanov_consistency",
                                           "exit_time",
                                           "breaking_rate_deterministic",
                                           "breaking_rate_stochastic",
                                           "sign_global_positive",
                                           "sign_global_negative",
                                           "sign_global_mixed",
                                           "decay"};
  const std::vector<std::string> slow_cfgs{"breaking_prob", "strong_noise"};

  std::map<std::string, Verdict> verdicts;
  try {
    fs::create_directories(work);
    if (fast) {
      for (const auto& c : fast_cfgs) run_config(c, work, jobs, verdicts);
      verdicts["C14"] = determinism(work);
    }
    if (slow) {
      for (const auto& c : slow_cfgs) run_config(c, work, jobs, verdicts);
    }
  } catch (const sdgh::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  bool all = true;
  for (int i = 1; i <= 14; ++i) {
    const std::string id = "C" + std::to_string(i);
    const auto it = verdicts.find(id);
    if (it == verdicts.end()) continue;
    all = all && it->second.pass;
    std::printf("%s %s", it->second.pass ? "PASS" : "FAIL", id.c_str());
    if (verbose || !it->second.pass) std::printf("  %s", it->second.detail.c_str());
    std::printf("\n");
  }
  return all ? 0 : 1;
}
