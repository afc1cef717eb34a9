#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ghzbayes/cli/commands.hpp"

using namespace ghzbayes::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ghzbayes_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GHZBAYES_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

ExperimentSpec spec(const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& kv) {
  ExperimentSpec s(command);
  for (const auto& [k, v] : kv) s.set(k, v);
  return s;
}

}  // namespace

TEST(Cli, PartitionsOfFour) {
  const fs::path dir = scratch("partitions");
  const RunOutcome r = run(spec("partitions", {{"n", "4"}}), RunOptions{dir});
  EXPECT_EQ(r.exit_code, kExitOk);
  const auto& rows = r.result["result"]["partitions"];
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0]["partition"], "1x4");
  EXPECT_EQ(rows[1]["partition"], "2x2");
  EXPECT_EQ(rows[2]["partition"], "1x2+2x1");
  EXPECT_EQ(rows[3]["partition"], "4x1");
  const std::string csv = slurp(dir / "partitions.csv");
  EXPECT_NE(csv.find("# n=4\r\n"), std::string::npos);
  EXPECT_NE(csv.find("# seed=1\r\n"), std::string::npos);
}

TEST(Cli, ReRunsAreByteIdentical) {
  const auto s = spec("scaling", {{"n", "9"}, {"scheme", "fixed-bayes"}, {"delta_phi", "0.7"},
                                  {"samples", "3000"}, {"seed", "42"}});
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  ASSERT_THROW(run(s, RunOptions{a}), ValidationError);  // 9 is not a fixed-block size
  const auto v = spec("scaling", {{"n", "2,9"}, {"scheme", "varying"}, {"delta_phi", "0.7"},
                                  {"samples", "3000"}, {"seed", "42"}});
  run(v, RunOptions{a});
  run(v, RunOptions{b});
  EXPECT_EQ(slurp(a / "scaling.csv"), slurp(b / "scaling.csv"));
  const auto o = spec("optimize", {{"n", "5"}, {"restarts", "2"}, {"phi_points", "21"}});
  run(o, RunOptions{a});
  run(o, RunOptions{b});
  EXPECT_EQ(slurp(a / "optimize_mse_curve.csv"), slurp(b / "optimize_mse_curve.csv"));
}

TEST(Cli, GainDbConsistent) {
  const RunOutcome r = run(spec("optimize", {{"n", "6"}, {"restarts", "1"}}), RunOptions{{}, false, false});
  const auto& res = r.result["result"];
  EXPECT_NEAR(res["gain_db"].get<double>(), 10 * std::log10(res["gain"].get<double>()), 1e-9);
  // One [exponent, copies] pair per distinct block size.
  const std::string text = res["partition"].get<std::string>();
  EXPECT_EQ(res["partition_blocks"].size(),
            static_cast<std::size_t>(std::count(text.begin(), text.end(), '+') + 1));
  EXPECT_TRUE(r.result.contains("wall_time_s"));
}

TEST(Cli, ValidationErrorsNameTheField) {
  try {
    run(spec("optimize", {{"n", "5"}, {"delta_phi", "-1"}}), RunOptions{{}, false, false});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "optimize.delta_phi");
  }
  try {
    run(spec("oqi", {{"n", "5"}, {"colour", "red"}}), RunOptions{{}, false, false});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "oqi.colour");
  }
  try {
    run(spec("oqi", {{"n", "five"}}), RunOptions{{}, false, false});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "oqi.n");
  }
  EXPECT_THROW(ExperimentSpec("dance"), ValidationError);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit");
  EXPECT_EQ(run_cli("--out " + dir.string() + " partitions --n 4"), kExitOk);
  EXPECT_EQ(run_cli("--out " + dir.string() + " partitions --n 0"), kExitValidation);
  EXPECT_EQ(run_cli("--out " + dir.string() + " partitions --n 30 --budget 5"), kExitBudget);
  EXPECT_EQ(run_cli("partitions --bogus 1"), kExitValidation);
}

TEST(Cli, ConfigFileAndOverrides) {
  const fs::path dir = scratch("config");
  {
    std::ofstream cfg(dir / "run.ini");
    cfg << "# comment\nseed = 7\n[common]\ndelta-phi = 0.5\n[plateau]\nn = 12\n[oqi]\nn = 3\n";
  }
  const auto kv = load_config((dir / "run.ini").string(), "plateau");
  EXPECT_EQ(kv.at("seed"), "7");
  EXPECT_EQ(kv.at("delta_phi"), "0.5");
  EXPECT_EQ(kv.at("n"), "12");
  EXPECT_EQ(run_cli("--config " + (dir / "run.ini").string() + " --out " + dir.string() +
                    " plateau --delta-phi 0.9"),
            kExitOk);
  const Json doc = read_json(dir / "plateau.json");
  EXPECT_EQ(doc["parameters"]["delta_phi"], "0.9");
  EXPECT_EQ(doc["parameters"]["n"], "12");
  EXPECT_THROW(load_config((dir / "missing.ini").string(), "oqi"), ValidationError);
}

TEST(Cli, SweepResumesFromManifest) {
  const fs::path dir = scratch("sweep");
  const auto s = spec("sweep-prior", {{"n", "6"}, {"delta_phi", "0.3,0.7"}, {"oqi", "false"}});
  run(s, RunOptions{dir});
  const fs::path shard = dir / "sweep-prior" / "shards" / "point_1.json";
  ASSERT_TRUE(fs::exists(shard));
  Json rec = read_json(shard);
  rec["bound"] = 0.125;
  write_json(shard, rec);
  const RunOutcome again = run(s, RunOptions{dir});
  EXPECT_EQ(again.result["result"]["records"][1]["bound"].get<double>(), 0.125);
  // A different parameter set ignores the old shards.
  const auto other = spec("sweep-prior", {{"n", "6"}, {"delta_phi", "0.3,0.7"}, {"oqi", "true"}});
  const RunOutcome fresh = run(other, RunOptions{dir});
  EXPECT_NE(fresh.result["result"]["records"][1]["bound"].get<double>(), 0.125);
}

TEST(Cli, Formatting) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  CsvTable t({"x", "label"});
  t.add_row({1.5, std::string("p,q")});
  EXPECT_EQ(t.render({{"k", "v"}}), "# k=v\r\nx,label\r\n1.5,\"p,q\"\r\n");
  EXPECT_THROW(t.add_row({1.0}), std::logic_error);
}

TEST(Cli, NumberLists) {
  EXPECT_EQ(parse_number_list("9, 26,63", "f"), (std::vector<double>{9, 26, 63}));
  const auto logs = parse_number_list("0.01:1:log3", "f");
  ASSERT_EQ(logs.size(), 3u);
  EXPECT_NEAR(logs[1], 0.1, 1e-15);
  EXPECT_EQ(parse_number_list("0:1:lin5", "f").size(), 5u);
  EXPECT_THROW(parse_number_list("1:2", "f"), ValidationError);
  EXPECT_THROW(parse_number_list("0:1:log3", "f"), ValidationError);
  EXPECT_THROW(parse_number_list("a,b", "f"), ValidationError);
}

TEST(Cli, RescaleCommand) {
  const RunOutcome r = run(spec("unwind", {{"mode", "rescale"},
                                           {"partition", "3x(1/8)+2x(1/4)+4x(1/2)+3x1+3x2+2x4"},
                                           {"delta_phi", "5.6"}}),
                           RunOptions{{}, false, false});
  EXPECT_EQ(r.result["result"]["rescaled_partition"], "2x32+3x16+3x8+4x4+2x2+3x1");
  EXPECT_EQ(r.result["result"]["n_prime"], 159);
}

TEST(Cli, ClockReportsEndSlopes) {
  RunOptions o;
  o.write_files = false;
  const RunOutcome r =
      run(spec("clock", {{"protocol", "uncorrelated"}, {"tau", "1e-3,1e-2,1e2,1e3"}}), o);
  ASSERT_EQ(r.exit_code, kExitOk);
  const auto& u = r.result["result"]["protocols"]["uncorrelated"];
  EXPECT_NEAR(u["short_slope"].get<double>(), -1.0, 0.05);
  EXPECT_NEAR(u["long_slope"].get<double>(), -0.5, 0.05);
}

TEST(Cli, ScalingVersusAddsAdvantage) {
  RunOptions o;
  o.write_files = false;
  const RunOutcome r = run(spec("scaling", {{"scheme", "css"},
                                            {"versus", "css"},
                                            {"n", "8,16"},
                                            {"delta_phi", "0.7"}}),
                           o);
  ASSERT_EQ(r.exit_code, kExitOk);
  for (const auto& row : r.result["result"]["rows"]) {
    EXPECT_NEAR(row["advantage"].get<double>(), 1.0, 1e-12);
  }
  EXPECT_NEAR(r.result["result"]["advantage"].get<double>(), 1.0, 1e-12);
}

TEST(Cli, SweepPriorCrossesQubitNumbers) {
  RunOptions o;
  o.write_files = false;
  const RunOutcome r = run(spec("sweep-prior", {{"n", "4,6"},
                                                {"delta_phi", "0.3,0.9"},
                                                {"optimize", "false"},
                                                {"oqi", "false"}}),
                           o);
  ASSERT_EQ(r.exit_code, kExitOk);
  const auto& recs = r.result["result"]["records"];
  ASSERT_EQ(recs.size(), 4u);
  EXPECT_EQ(recs[0]["n"], 4);
  EXPECT_EQ(recs[3]["n"], 6);
  EXPECT_DOUBLE_EQ(recs[3]["delta_phi"].get<double>(), 0.9);
}
