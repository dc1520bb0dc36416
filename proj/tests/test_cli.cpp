#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fkmc/config.hpp"
#include "fkmc/errors.hpp"
#include "fkmc/paths.hpp"
#include "fkmc/runner.hpp"
#include "json.hpp"

using namespace fkmc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal_semigroup_config() {
  return json::parse(R"({
    "schema_version": 1,
    "space_dim": 1,
    "fiber_dim": 1,
    "time": 0.5,
    "steps": 8,
    "n_paths": 64,
    "seed": 3,
    "scheme": "exp_midpoint",
    "gauge": {"preset": "zero"},
    "potential": {"preset": "zero"},
    "output": "out/r.json",
    "semigroup": {
      "f": {"preset": "gaussian_bump", "center": [0.0], "width": 1.0,
            "direction": [[1.0, 0.0]]},
      "x": [0.0]
    }
  })");
}

std::string cli_path() {
  return std::string(FKMC_BINARY_DIR) + "/bin/fkmc";
}

std::string configs_dir() {
  return std::string(FKMC_SOURCE_DIR) + "/configs";
}

int run_cli(const std::string& args) {
  const int rc = std::system((cli_path() + " " + args + " 2>/dev/null").c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fkmc_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("config: happy path") {
  auto cfg = parse_config(minimal_semigroup_config(), Command::semigroup);
  CHECK(cfg.space_dim == 1);
  CHECK(cfg.n_paths == 64);
  CHECK(cfg.scheme.tag == SchemeTag::exp_midpoint);
  REQUIRE(cfg.semigroup.has_value());
  CHECK(cfg.semigroup->x == std::vector<double>{0.0});
}

TEST_CASE("config: required-field omission names the field path") {
  for (const char* key : {"space_dim", "steps", "seed", "gauge", "potential",
                          "output", "time", "scheme", "n_paths"}) {
    json doc = minimal_semigroup_config();
    doc.erase(key);
    try {
      parse_config(doc, Command::semigroup);
      FAIL("expected ConfigError for missing ", key);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(key) != std::string::npos);
    }
  }
}

TEST_CASE("config: unknown keys are rejected with their path") {
  {
    json doc = minimal_semigroup_config();
    doc["surprise"] = 1;
    CHECK_THROWS_WITH_AS(parse_config(doc, Command::semigroup),
                         "config.surprise: unknown key", ConfigError);
  }
  {
    json doc = minimal_semigroup_config();
    doc["gauge"]["extra"] = true;
    CHECK_THROWS_WITH_AS(parse_config(doc, Command::semigroup),
                         "config.gauge.extra: unknown key", ConfigError);
  }
  {
    json doc = minimal_semigroup_config();
    doc["semigroup"]["typo"] = 1;
    CHECK_THROWS_WITH_AS(parse_config(doc, Command::semigroup),
                         "config.semigroup.typo: unknown key", ConfigError);
  }
}

TEST_CASE("config: dimension mismatches are rejected") {
  {
    // f direction has 2 entries but fiber_dim is 1.
    json doc = minimal_semigroup_config();
    doc["semigroup"]["f"]["direction"] = {{1.0, 0.0}, {0.0, 0.0}};
    CHECK_THROWS_AS(parse_config(doc, Command::semigroup), ConfigError);
  }
  {
    json doc = minimal_semigroup_config();
    doc["semigroup"]["x"] = {0.0, 1.0};
    CHECK_THROWS_AS(parse_config(doc, Command::semigroup), ConfigError);
  }
  {
    // scalar_magnetic demands d = 1.
    json doc = minimal_semigroup_config();
    doc["fiber_dim"] = 2;
    doc["gauge"] = {{"preset", "scalar_magnetic"}, {"b", {1.0}}};
    doc["semigroup"]["f"]["direction"] = {{1.0, 0.0}, {0.0, 0.0}};
    CHECK_THROWS_AS(parse_config(doc, Command::semigroup), ConfigError);
  }
  {
    // non-skew constant gauge matrix.
    json doc = minimal_semigroup_config();
    doc["gauge"] = {{"preset", "constant"},
                    {"matrices", {{{{1.0, 0.0}}}}}};
    CHECK_THROWS_AS(parse_config(doc, Command::semigroup), ConfigError);
  }
}

TEST_CASE("config: matrix literals parse as [re, im] row entries") {
  json doc = minimal_semigroup_config();
  doc["fiber_dim"] = 2;
  doc["gauge"] = {{"preset", "constant"},
                  {"matrices",
                   {{{{0.0, 0.3}, {0.5, 0.8}}, {{-0.5, 0.8}, {0.0, -0.3}}}}}};
  doc["potential"] = {{"preset", "diagonal_well"},
                      {"weights", {1.0, 0.5}},
                      {"offsets", {0.0, 0.25}}};
  doc["semigroup"]["f"]["direction"] = {{1.0, 0.0}, {0.0, 0.5}};
  auto cfg = parse_config(doc, Command::semigroup);
  auto alphas = evaluate_gauge(cfg.gauge, std::array{0.0});
  CHECK(alphas[0](0, 1) == cxd(0.5, 0.8));
  CHECK(alphas[0](1, 0) == cxd(-0.5, 0.8));
}

TEST_CASE("cli: semigroup run writes a record matching the closed form") {
  TempDir tmp;
  setenv("FKMC_OUTPUT_DIR", tmp.path.c_str(), 1);
  const int rc = run_cli("semigroup " + configs_dir() + "/semigroup_free.json");
  unsetenv("FKMC_OUTPUT_DIR");
  REQUIRE(rc == 0);
  json rec = json::parse(slurp(tmp.path / "semigroup_free.json"));
  CHECK(rec["schema_version"] == 1);
  CHECK(rec["command"] == "semigroup");
  const double value = rec["value"][0][0].get<double>();
  const double se = rec["std_error"][0][0].get<double>();
  // Closed form: heat convolution of the bump at x=0.2, t=0.5, w=0.8.
  const double s2 = 0.8 * 0.8 + 0.5;
  const double want = std::sqrt(0.64 / s2) * std::exp(-0.04 / (2.0 * s2));
  CHECK(std::abs(value - want) <= 3.0 * se);
  // Free transport is the identity: domination is saturated exactly.
  CHECK(rec["domination"]["lhs"] == rec["domination"]["rhs"]);
}

TEST_CASE("cli: heatmap free case equals the heat kernel to roundoff") {
  TempDir tmp;
  setenv("FKMC_OUTPUT_DIR", tmp.path.c_str(), 1);
  const int rc = run_cli("heatmap " + configs_dir() + "/heatmap_free.json");
  unsetenv("FKMC_OUTPUT_DIR");
  REQUIRE(rc == 0);
  std::istringstream is(slurp(tmp.path / "heatmap_free.txt"));
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double x, y, re, im, se_re, se_im;
    ls >> x >> y >> re >> im >> se_re >> se_im;
    const double want = heat_kernel({&x, 1}, {&y, 1}, 0.5);
    CHECK(std::abs(re - want) <= 1e-12 * want);
    CHECK(im == 0.0);
    ++rows;
  }
  CHECK(rows == 21 * 21);
}

TEST_CASE("cli: exit codes for config errors") {
  TempDir tmp;
  // Write a config with a missing required field.
  json doc = minimal_semigroup_config();
  doc.erase("seed");
  const fs::path bad = tmp.path / "bad.json";
  std::ofstream(bad) << doc.dump();
  CHECK(run_cli("semigroup " + bad.string()) == 2);

  json unknown = minimal_semigroup_config();
  unknown["mystery"] = 1;
  const fs::path bad2 = tmp.path / "bad2.json";
  std::ofstream(bad2) << unknown.dump();
  CHECK(run_cli("semigroup " + bad2.string()) == 2);

  std::ofstream(tmp.path / "notjson.json") << "{ nope";
  CHECK(run_cli("semigroup " + (tmp.path / "notjson.json").string()) == 2);

  CHECK(run_cli("semigroup " + (tmp.path / "does_not_exist.json").string()) ==
        2);
}

TEST_CASE("cli: numeric errors exit with code 3") {
  TempDir tmp;
  json doc = minimal_semigroup_config();
  // A product-integral increment of norm >= 1 aborts with provenance.
  doc["scheme"] = "product_integral";
  doc["steps"] = 2;
  doc["gauge"] = {{"preset", "scalar_magnetic"}, {"b", {80.0}}};
  const fs::path p = tmp.path / "overflow.json";
  std::ofstream(p) << doc.dump();
  setenv("FKMC_OUTPUT_DIR", tmp.path.c_str(), 1);
  const int rc = run_cli("semigroup " + p.string());
  unsetenv("FKMC_OUTPUT_DIR");
  CHECK(rc == 3);
}

TEST_CASE("cli: byte-identical outputs across worker counts and reruns") {
  TempDir tmp;
  const std::string cfg = configs_dir() + "/kernel_su2.json";
  setenv("FKMC_OUTPUT_DIR", tmp.path.c_str(), 1);
  REQUIRE(run_cli("kernel " + cfg + " --workers 1 --paths 2000") == 0);
  const std::string one = slurp(tmp.path / "kernel_su2.json");
  REQUIRE(run_cli("kernel " + cfg + " --workers 4 --paths 2000") == 0);
  const std::string four = slurp(tmp.path / "kernel_su2.json");
  unsetenv("FKMC_OUTPUT_DIR");
  CHECK(one == four);
  CHECK(!one.empty());
}

TEST_CASE("cli: selftest battery passes") {
  CHECK(run_cli("selftest --seed 2") == 0);
}

TEST_CASE("runner: kato command record") {
  TempDir tmp;
  RunConfig cfg = load_config_file(configs_dir() + "/kato_well.json",
                                   Command::kato);
  cfg.output = (tmp.path / "kato.json").string();
  cfg.n_paths = 400;
  std::ostringstream log;
  CHECK(run_command(cfg, log) == 0);
  json rec = json::parse(slurp(tmp.path / "kato.json"));
  CHECK(rec["by_time"].size() == 3);
  // Monotone in t (V >= 0): sup estimates ordered up to noise at this size.
  const double s02 = rec["by_time"][0]["sup_estimate"].get<double>();
  const double s005 = rec["by_time"][2]["sup_estimate"].get<double>();
  CHECK(s005 < s02);
}

TEST_CASE("runner: trace command reports the truncation caveat") {
  TempDir tmp;
  RunConfig cfg = load_config_file(configs_dir() + "/trace_harmonic.json",
                                   Command::trace);
  cfg.output = (tmp.path / "trace.json").string();
  cfg.n_paths = 200;
  cfg.steps = 32;
  std::ostringstream log;
  CHECK(run_command(cfg, log) == 0);
  json rec = json::parse(slurp(tmp.path / "trace.json"));
  CHECK(rec.contains("caveat"));
  const double mehler = 1.0 / (2.0 * std::sinh(0.5));
  CHECK(std::abs(rec["value"].get<double>() - mehler) < 0.15 * mehler);
}
