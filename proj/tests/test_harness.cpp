#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sdgh/harness/run.hpp"

namespace fs = std::filesystem;
namespace h = sdgh::harness;
using sdgh::ConfigError;
using json = nlohmann::json;

namespace {

json load(const std::string& name) {
  std::ifstream in(std::string(SDGH_CONFIG_DIR) + "/" + name);
  return json::parse(in);
}

std::string field_of(const json& doc) {
  try {
    (void)h::parse_config(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Small but complete conservation run: a few paths on a coarse grid.
json tiny_conservation() {
  json c = load("conservation.json");
  c["ensemble"]["size"] = 2;
  c["grid"]["n"] = 32;
  c["time"]["dt"] = 1e-3;
  c["time"]["horizon"] = 0.05;
  c["initial"]["band"] = 4;
  c["analysis"]["paths_per_datum"] = 2;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sdgh_harness_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, ShippedConfigsParse) {
  for (const auto& e : fs::directory_iterator(SDGH_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(h::load_config(e.path().string())) << e.path();
  }
}

TEST(Config, ErrorsNameTheField) {
  json c = load("conservation.json");
  c["grid"]["n"] = 100;
  EXPECT_EQ(field_of(c), "grid.n");

  c = load("conservation.json");
  c["time"]["dt"] = -1.0;
  EXPECT_EQ(field_of(c), "time.dt");

  c = load("conservation.json");
  c["model"]["gamma"] = 0.1;  // conservation needs c0 + gamma = 0
  EXPECT_EQ(field_of(c), "model");

  c = load("conservation.json");
  c["ensemble"].erase("size");
  EXPECT_EQ(field_of(c), "ensemble.size");

  c = load("conservation.json");
  c["experiment"] = "nope";
  EXPECT_EQ(field_of(c), "experiment");

  c = load("strong_noise.json");
  c["noise"]["type"] = "linear";
  EXPECT_EQ(field_of(c).rfind("noise", 0), 0u);

  c = load("conservation.json");
  c["integrator"]["adaptive_substeps"] = "yes";
  EXPECT_EQ(field_of(c), "integrator.adaptive_substeps");

  c = load("conservation.json");
  c["thresholds"] = {{"s", 1.0}};
  EXPECT_EQ(field_of(c), "thresholds.s");

  EXPECT_EQ(field_of(tiny_conservation()), "<accepted>");
}

TEST(Config, MissingFileAndBadJson) {
  EXPECT_THROW(h::load_config("/nonexistent/x.json"), ConfigError);
  const fs::path p = scratch("bad.json");
  std::ofstream(p) << "{ \"experiment\": ";
  EXPECT_THROW(h::load_config(p.string()), ConfigError);
  fs::remove(p);
}

TEST(Run, RefusesNonEmptyOutputUnlessOverwrite) {
  const fs::path dir = scratch("overwrite");
  fs::create_directories(dir);
  std::ofstream(dir / "keep.txt") << "x";
  const auto cfg = h::parse_config(tiny_conservation());
  EXPECT_THROW(h::run(cfg, 1, false, dir.string()), ConfigError);
  EXPECT_TRUE(fs::exists(dir / "keep.txt"));
  EXPECT_NO_THROW(h::run(cfg, 1, true, dir.string()));
  EXPECT_FALSE(fs::exists(dir / "keep.txt"));
  for (const char* f : {"manifest.json", "records.jsonl", "summary.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  fs::remove_all(dir);
}

TEST(Run, RecordsIndependentOfJobCount) {
  const auto cfg = h::parse_config(tiny_conservation());
  const fs::path a = scratch("jobs1"), b = scratch("jobs2");
  h::run(cfg, 1, false, a.string());
  h::run(cfg, 2, false, b.string());
  const std::string ra = slurp(a / "records.jsonl");
  EXPECT_FALSE(ra.empty());
  EXPECT_EQ(ra, slurp(b / "records.jsonl"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Run, SummaryCarriesCriteriaAndManifestEchoesConfig) {
  const json doc = tiny_conservation();
  const fs::path dir = scratch("summary");
  const auto out = h::run(h::parse_config(doc), 1, false, dir.string());
  ASSERT_TRUE(out.summary.contains("criteria"));
  EXPECT_FALSE(out.summary["criteria"].empty());
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["config"], doc);
  EXPECT_EQ(manifest["experiment"], "conservation");
  EXPECT_TRUE(manifest.contains("finished_utc"));
  // one JSON object per line
  std::istringstream lines(slurp(dir / "records.jsonl"));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    EXPECT_TRUE(json::parse(line).is_object());
    ++count;
  }
  EXPECT_GT(count, 0);
  fs::remove_all(dir);
}

TEST(Report, AllFormats) {
  const fs::path dir = scratch("report");
  h::run(h::parse_config(tiny_conservation()), 1, false, dir.string());

  std::ostringstream echo;
  const auto txt = h::report(dir, h::ReportFormat::text, &echo);
  ASSERT_EQ(txt.size(), 1u);
  EXPECT_NE(echo.str().find("criteria"), std::string::npos);
  EXPECT_NE(echo.str().find("C2"), std::string::npos);

  const auto csv = h::report(dir, h::ReportFormat::delimited);
  ASSERT_FALSE(csv.empty());
  const std::string crit = slurp(dir / "report" / "criteria.csv");
  EXPECT_EQ(crit.rfind("id,pass,description\n", 0), 0u);

  h::report(dir, h::ReportFormat::structured);
  const json doc = json::parse(slurp(dir / "report.json"));
  EXPECT_TRUE(doc.contains("manifest"));
  EXPECT_TRUE(doc.contains("summary"));
  EXPECT_FALSE(doc["files"].empty());

  EXPECT_EQ(h::parse_format("csv"), h::ReportFormat::delimited);
  EXPECT_EQ(h::parse_format("json"), h::ReportFormat::structured);
  EXPECT_THROW(h::parse_format("xml"), ConfigError);
  EXPECT_THROW(h::report(scratch("empty"), h::ReportFormat::text), ConfigError);
  fs::remove_all(dir);
}

TEST(InitialData, BuildersValidate) {
  const sdgh::TorusGrid g(32);
  EXPECT_THROW(h::make_initial(json{{"type", "fourier"}, {"modes", json::array({{{"k", 40}, {"cos", 1.0}}})}}, g, 1, 0, 1),
               ConfigError);
  EXPECT_THROW(h::make_initial(json{{"type", "what"}}, g, 1, 0, 1), ConfigError);
  const auto a = h::make_initial(json{{"type", "random_band"}, {"band", 4}, {"hs_norm", 0.5}}, g, 9, 0, 1);
  const auto b = h::make_initial(json{{"type", "random_band"}, {"band", 4}, {"hs_norm", 0.5}}, g, 9, 0, 1);
  EXPECT_NEAR(sdgh::hs_norm(a.u0, {2.0}), 0.5, 1e-12);
  EXPECT_EQ(sdgh::linf_norm(a.u0 - b.u0), 0.0);
}
