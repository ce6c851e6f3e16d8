// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "qkdsim/cli.hpp"
#include "qkdsim/config.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/keyrate.hpp"

namespace qkdsim {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "qkdsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            (std::string("qkdsim_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }

  std::string write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string config_error_field(const json& doc) {
  try {
    parse_config_json(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

// Config parsing -------------------------------------------------------------

TEST(Config, MinimalDocumentGetsDefaults) {
  const auto cfg = parse_config_json(json::parse(R"({"rounds": 10, "seed": 3, "eve": "ideal_bsm"})"));
  EXPECT_EQ(cfg.session.rounds, 10U);
  EXPECT_EQ(cfg.session.master_seed, 3U);
  EXPECT_TRUE(std::holds_alternative<IdealBsm>(cfg.session.eve));
  EXPECT_TRUE(cfg.session.channel_a.empty());
  EXPECT_TRUE(cfg.session.channel_b.empty());
  EXPECT_EQ(cfg.session.alice_mixture.size(), 1U);
  EXPECT_EQ(cfg.session.settings, SettingDistribution{});
  EXPECT_EQ(cfg.min_cell_count, kDefaultMinCellCount);
  EXPECT_EQ(cfg.echo["schema"], 1);
  EXPECT_TRUE(cfg.echo["channel_a"].empty());
}

TEST(Config, EchoReparsesToSameSession) {
  const auto doc = json::parse(R"({
    "rounds": 100, "seed": 9,
    "eve": {"kind": "classical_lhv", "preset": "z_intercept"},
    "alice_mixture": {"weights": [0.25, 0.75], "offsets": [0.0, 0.1]},
    "channel_a": [{"kind": "depolarizing", "p": 0.1}, {"kind": "loss", "eta": 0.9}],
    "channel_b": {"kind": "misalignment", "delta": 0.05}
  })");
  const auto cfg = parse_config_json(doc);
  const auto again = parse_config_json(json::parse(cfg.echo.dump()));
  EXPECT_EQ(again.echo, cfg.echo);
  EXPECT_EQ(again.session.channel_a, cfg.session.channel_a);
  EXPECT_EQ(again.session.eve, cfg.session.eve);
}

TEST(Config, ErrorsNameTheField) {
  const auto base = json::parse(R"({"rounds": 10, "seed": 1, "eve": "ideal_bsm"})");
  auto with = [&](const char* key, const json& value) {
    json d = base;
    d[key] = value;
    return d;
  };
  EXPECT_EQ(config_error_field(with("alice_mixture", json::parse(
                                                         R"({"weights": [0.5, 0.6], "offsets": [0, 0]})"))),
            "alice_mixture.weights");
  EXPECT_EQ(config_error_field(with("channel_a", json::parse(R"({"kind": "depolarizing", "p": 1.3})"))),
            "channel_a.p");
  EXPECT_EQ(config_error_field(with("channel_a", json::parse(
                                                     R"([{"kind": "identity"}, {"kind": "depolarizing", "p": -1}])"))),
            "channel_a[1].p");
  EXPECT_EQ(config_error_field(with("channel_b", json::parse(R"({"kind": "teleport"})"))),
            "channel_b.kind");
  EXPECT_EQ(config_error_field(with("rounds", 0)), "rounds");
  EXPECT_EQ(config_error_field(with("rounds", std::int64_t{25})), "<accepted>");
  EXPECT_EQ(config_error_field(with("rounds", -5)), "rounds");
  EXPECT_EQ(config_error_field(with("seed", "abc")), "seed");
  EXPECT_EQ(config_error_field(with("colour", 1)), "colour");
  EXPECT_EQ(config_error_field(with("schema", 2)), "schema");
  EXPECT_EQ(config_error_field(with("eve", "psychic")), "eve");
  EXPECT_EQ(config_error_field(with("eve", json::parse(R"({"kind": "classical_lhv", "preset": "nope"})"))),
            "eve.preset");
  EXPECT_EQ(config_error_field(with("setting_probabilities", json::parse("[[0.5, 0.5, 0.5], [0, 0, 0]]"))),
            "setting_probabilities");
  EXPECT_EQ(config_error_field(with("alice_mixture", json::parse(R"({"weights": [1], "extra": 1})"))),
            "alice_mixture.extra");

  json missing = base;
  missing.erase("eve");
  EXPECT_EQ(config_error_field(missing), "eve");
}

TEST(Config, CustomStrategies) {
  const auto cfg = parse_config_json(json::parse(R"({
    "rounds": 10, "seed": 1,
    "eve": {"kind": "dishonest_announce", "angle_a": 0, "angle_b": 0,
            "table": [[1,0,0],[0,1,0],[0,0,1],[0.5,0.5,0]]}
  })"));
  EXPECT_TRUE(std::holds_alternative<DishonestAnnounce>(cfg.session.eve));
  const auto lhv = parse_config_json(json::parse(R"({
    "rounds": 10, "seed": 1,
    "eve": {"kind": "classical_lhv", "bases": [{"angle_a": 0, "angle_b": 0}],
            "rule": ["fail", "psi_plus", "psi_plus", "fail"]}
  })"));
  EXPECT_TRUE(std::holds_alternative<ClassicalLhv>(lhv.session.eve));
}

TEST(Config, MissingFile) {
  EXPECT_THROW(parse_config("/nonexistent/qkdsim.json"), ConfigError);
}

TEST(Config, SetNumericParameter) {
  auto doc = json::parse(R"({
    "rounds": 10, "seed": 1, "eve": "ideal_bsm",
    "alice_mixture": {"weights": [0.5, 0.5], "offsets": [0.0, 0.1]},
    "channel_a": {"kind": "depolarizing", "p": 0.1},
    "channel_b": [{"kind": "misalignment", "delta": 0.0}]
  })");
  set_numeric_parameter(doc, "channel_a.p", 0.25);
  set_numeric_parameter(doc, "alice_mixture.offsets[1]", -0.3);
  set_numeric_parameter(doc, "channel_b[0].delta", 0.2);
  set_numeric_parameter(doc, "rounds", 50);
  EXPECT_EQ(doc["channel_a"]["p"], 0.25);
  EXPECT_EQ(doc["alice_mixture"]["offsets"][1], -0.3);
  EXPECT_EQ(doc["channel_b"][0]["delta"], 0.2);
  EXPECT_EQ(doc["rounds"], 50);
  EXPECT_THROW(set_numeric_parameter(doc, "channel_a.q", 1), ConfigError);
  EXPECT_THROW(set_numeric_parameter(doc, "channel_a.kind", 1), ConfigError);
  EXPECT_THROW(set_numeric_parameter(doc, "channel_b[3].delta", 1), ConfigError);
  EXPECT_THROW(set_numeric_parameter(doc, "channel_b[x].delta", 1), ConfigError);
}

// Commands -------------------------------------------------------------------

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"teleport"}).code, kExitUsage);
  EXPECT_EQ(run({"keyrate", "--g", "2.5"}).code, kExitUsage);
  EXPECT_EQ(run({"simulate"}).code, kExitUsage);
  EXPECT_EQ(run({"simulate", "--config", "/nonexistent.json"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitSuccess);
}

TEST(Cli, KeyrateCommand) {
  const auto r = run({"keyrate", "--g", "2.6", "--e", "0.05"});
  ASSERT_EQ(r.code, kExitSuccess) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["R"].get<double>(), key_rate({2.6, 0.05}), 1e-15);
  EXPECT_NEAR(j["f"].get<double>(), min_entropy_bound(2.6), 1e-15);
  EXPECT_EQ(run({"keyrate", "--g", "3.1", "--e", "0.0"}).code, kExitUsage);
  EXPECT_EQ(run({"keyrate", "--g", "2.5", "--e", "1.5"}).code, kExitUsage);
  const auto csv = run({"keyrate", "--g", "2.5", "--e", "0.0", "--format", "csv"});
  EXPECT_EQ(csv.out.substr(0, 10), "g,e,f,h,R\n");
}

TEST(Cli, ThresholdCommand) {
  const auto r = run({"threshold", "--g", "2.6"});
  ASSERT_EQ(r.code, kExitSuccess);
  EXPECT_NEAR(json::parse(r.out)["tolerable_qber"].get<double>(), tolerable_qber(2.6), 1e-15);
  EXPECT_EQ(run({"threshold", "--g", "1.0"}).code, kExitUsage);
}

TEST(Cli, SurfaceCommand) {
  TempDir dir;
  const auto out = dir.file("surface.csv");
  ASSERT_EQ(run({"surface", "--steps", "100", "--out", out}).code, kExitSuccess);
  std::ifstream in(out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "g,e,R");
  int rows = 0;
  bool corner = false;
  while (std::getline(in, line)) {
    ++rows;
    corner = corner || line == "2.82842712,0,1";
  }
  EXPECT_EQ(rows, 10000);
  EXPECT_TRUE(corner);

  EXPECT_EQ(run({"surface", "--g-min", "1.5"}).code, kExitUsage);
  EXPECT_EQ(run({"surface", "--e-max", "1.5"}).code, kExitUsage);
  EXPECT_EQ(run({"surface", "--steps", "0"}).code, kExitUsage);

  const auto j = run({"surface", "--steps", "3", "--format", "json"});
  ASSERT_EQ(j.code, kExitSuccess);
  EXPECT_EQ(json::parse(j.out).size(), 9U);
}

TEST(Cli, SimulateIdealSucceeds) {
  TempDir dir;
  const auto cfg = dir.write("c.json", R"({"rounds": 60000, "seed": 5, "eve": "ideal_bsm"})");
  const auto r = run({"simulate", "--config", cfg});
  ASSERT_EQ(r.code, kExitSuccess) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["e"], 0.0);
  EXPECT_TRUE(j["keys_match"].get<bool>());
  EXPECT_EQ(j["final_key_hex"].get<std::string>().size(),
            (j["final_key_length"].get<std::size_t>() + 3) / 4);
  // The reported rate is recomputable from the reported estimates.
  EXPECT_NEAR(j["r_paper"].get<double>(),
              key_rate({j["g_certified"].get<double>(), j["e"].get<double>()}), 1e-9);
}

TEST(Cli, SimulateRoundsZeroIsUsageError) {
  TempDir dir;
  const auto cfg = dir.write("c.json", R"({"rounds": 10, "seed": 5, "eve": "ideal_bsm"})");
  const auto r = run({"simulate", "--config", cfg, "--rounds", "0"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("rounds"), std::string::npos) << r.err;
}

TEST(Cli, SimulateBadWeightsNamesField) {
  TempDir dir;
  const auto cfg = dir.write(
      "c.json",
      R"({"rounds": 10, "seed": 5, "eve": "ideal_bsm", "alice_mixture": {"weights": [0.5, 0.6], "offsets": [0, 0]}})");
  const auto r = run({"simulate", "--config", cfg});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("alice_mixture.weights"), std::string::npos) << r.err;
}

TEST(Cli, SimulateClassicalAborts) {
  TempDir dir;
  const auto cfg = dir.write(
      "c.json", R"({"rounds": 50000, "seed": 5, "eve": {"kind": "classical_lhv", "preset": "z_intercept"}})");
  const auto r = run({"simulate", "--config", cfg});
  EXPECT_EQ(r.code, kExitAbort);
  EXPECT_NE(r.err.find("R <= 0"), std::string::npos) << r.err;
  EXPECT_EQ(json::parse(r.out)["abort_reason"], "R <= 0");
}

TEST(Cli, SimulateTooFewRoundsAborts) {
  TempDir dir;
  const auto cfg = dir.write("c.json", R"({"rounds": 100, "seed": 5, "eve": "ideal_bsm"})");
  const auto r = run({"simulate", "--config", cfg});
  EXPECT_EQ(r.code, kExitAbort);
  EXPECT_NE(r.err.find("insufficient data"), std::string::npos) << r.err;
}

TEST(Cli, SimulateDeterministicAcrossThreads) {
  TempDir dir;
  const auto cfg = dir.write(
      "c.json",
      R"({"rounds": 50000, "seed": 8, "eve": "ideal_bsm", "channel_a": {"kind": "depolarizing", "p": 0.03}})");
  const auto t1 = dir.file("t1.jsonl");
  const auto t2 = dir.file("t2.jsonl");
  const auto a = run({"simulate", "--config", cfg, "--threads", "1", "--omit-elapsed",
                      "--transcript", t1});
  const auto b = run({"simulate", "--config", cfg, "--threads", "3", "--omit-elapsed",
                      "--transcript", t2});
  ASSERT_EQ(a.code, kExitSuccess) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(slurp(t1), slurp(t2));
  EXPECT_FALSE(slurp(t1).empty());
  EXPECT_EQ(a.out.find("elapsed_seconds"), std::string::npos);

  const auto c = run({"simulate", "--config", cfg, "--seed", "9", "--omit-elapsed"});
  EXPECT_NE(a.out, c.out);
}

TEST(Cli, SimulateCsvReport) {
  TempDir dir;
  const auto cfg = dir.write("c.json", R"({"rounds": 30000, "seed": 5, "eve": "ideal_bsm"})");
  const auto r = run({"simulate", "--config", cfg, "--format", "csv"});
  ASSERT_EQ(r.code, kExitSuccess);
  EXPECT_EQ(r.out.substr(0, 12), "field,value\n");
  EXPECT_NE(r.out.find("\nstatus,ok\n"), std::string::npos);
}

TEST(Cli, SweepEmptyValuesGivesHeaderOnly) {
  TempDir dir;
  const auto cfg = dir.write(
      "c.json", R"({"rounds": 1000, "seed": 5, "eve": "ideal_bsm", "channel_a": {"kind": "depolarizing", "p": 0}})");
  const auto r = run({"sweep", "--config", cfg, "--param", "channel_a.p", "--values", ""});
  ASSERT_EQ(r.code, kExitSuccess) << r.err;
  EXPECT_EQ(r.out, "value,g,e,R\n");
}

TEST(Cli, SweepUnknownPathIsUsageError) {
  TempDir dir;
  const auto cfg = dir.write("c.json", R"({"rounds": 1000, "seed": 5, "eve": "ideal_bsm"})");
  EXPECT_EQ(run({"sweep", "--config", cfg, "--param", "channel_a.p", "--values", "0.1"}).code,
            kExitUsage);
  EXPECT_EQ(run({"sweep", "--config", cfg, "--param", "seed", "--values", "abc"}).code, kExitUsage);
}

TEST(Cli, SweepDepolarizingIsNonIncreasing) {
  TempDir dir;
  const auto cfg = dir.write("c.json", R"({"rounds": 200000, "seed": 5, "eve": "ideal_bsm",
      "channel_a": {"kind": "depolarizing", "p": 0},
      "channel_b": {"kind": "depolarizing", "p": 0}})");
  const auto r = run({"sweep", "--config", cfg, "--param", "channel_a.p,channel_b.p", "--values",
                      "0,0.05,0.1"});
  ASSERT_EQ(r.code, kExitSuccess) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  std::vector<double> gs;
  std::vector<std::string> values;
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    values.push_back(line.substr(0, c1));
    gs.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
  }
  ASSERT_EQ(gs.size(), 3U);
  EXPECT_EQ(values, (std::vector<std::string>{"0", "0.05", "0.1"}));
  EXPECT_GE(gs[0], gs[1]);
  EXPECT_GE(gs[1], gs[2]);
  for (std::size_t i = 0; i < 3; ++i) {
    const double p = std::stod(values[i]);
    EXPECT_NEAR(gs[i], kTsirelson * (1 - p) * (1 - p), 0.05);
  }
}

TEST(Cli, SweepMisalignmentReachesLocalBound) {
  TempDir dir;
  const auto cfg = dir.write("c.json", R"({"rounds": 400000, "seed": 5, "eve": "ideal_bsm",
      "channel_a": {"kind": "misalignment", "delta": 0}})");
  const auto pi8 = canonical_value_text(std::numbers::pi / 8);
  const auto r = run({"sweep", "--config", cfg, "--param", "channel_a.delta", "--values",
                      "0," + pi8, "--format", "json"});
  ASSERT_EQ(r.code, kExitSuccess) << r.err;
  const auto j = json::parse(r.out);
  ASSERT_EQ(j.size(), 2U);
  // sigma_g is about 0.0098 at this round count.
  EXPECT_NEAR(j[1]["g"].get<double>(), 2.0, 4 * 0.0098);
  EXPECT_EQ(j[1]["status"], "aborted");
}

TEST(Cli, SweepSeedDerivation) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(canonical_value_text(0.05), "0.05");
  EXPECT_EQ(canonical_value_text(-0.0), "0");
  EXPECT_EQ(sweep_seed(42, 0.05), 42ULL ^ fnv1a64("0.05"));
}

}  // namespace
}  // namespace qkdsim
