#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "slg/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("slg_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(const std::string& args) const {
    const std::string out = (dir_ / "stdout").string(), err = (dir_ / "stderr").string();
    const std::string cmd = "cd '" + dir_.string() + "' && '" SLG_CLI "' " + args + " >'" + out + "' 2>'" + err + "'";
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slg::read_file(out);
    r.err = slg::read_file(err);
    return r;
  }

  std::string read(const std::string& rel) const { return slg::read_file(dir_ / rel); }

  fs::path dir_;
};

const std::string kScenario = std::string(SLG_DATA_DIR) + "/scenarios/demo.json";

}  // namespace

TEST_F(Cli, UsageErrorsExitOne) {
  auto r = run("");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  r = run("frobnicate");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("unknown subcommand 'frobnicate'"), std::string::npos);
  r = run("simulate --config x.json --bogus-flag");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--bogus-flag"), std::string::npos);
  EXPECT_EQ(run("gen-data stage9 --out d").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, MissingFileExitsTwoWithPath) {
  const auto r = run("simulate --config no/such/scenario.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no/such/scenario.json"), std::string::npos);
  EXPECT_EQ(run("fit-expert --data nowhere").code, 2);
  EXPECT_EQ(run("eval-nll --model missing.ckpt --n 10").code, 2);
}

TEST_F(Cli, SimulateIsByteIdenticalPerSeed) {
  ASSERT_EQ(run("simulate --config '" + kScenario + "' --mode human-robot --seed 3 --out a.json").code, 0);
  ASSERT_EQ(run("simulate --config '" + kScenario + "' --mode human-robot --seed 3 --out b.json").code, 0);
  EXPECT_EQ(read("a.json"), read("b.json"));
  ASSERT_EQ(run("simulate --config '" + kScenario + "' --mode human-robot --seed 4 --out c.json").code, 0);
  EXPECT_NE(read("a.json"), read("c.json"));
  const auto j = nlohmann::json::parse(read("a.json"));
  EXPECT_EQ(j["config"]["seed"], 3);
  EXPECT_EQ(j["config"]["mode"], "human-robot");
  EXPECT_FALSE(j["result"]["events"].empty());
}

TEST_F(Cli, ChanceNllMeanIsOne) {
  const auto r = run("eval-nll --model chance --n 10000 --seed 1 --out ev");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const double mean = j["models"]["chance"]["mean"];
  EXPECT_GE(mean, 0.95);
  EXPECT_LE(mean, 1.05);
  EXPECT_EQ(j["points"], 10000);
  EXPECT_EQ(nlohmann::json::parse(read("ev/chance.json"))["n"], 10000);
  EXPECT_EQ(read("ev/chance_histogram.tsv").rfind("bin_low", 0), 0u);
}

TEST_F(Cli, DataPipelineIsDeterministic) {
  for (const char* d : {"x", "y"}) {
    const std::string p(d);
    ASSERT_EQ(run("gen-data stage1 --maps 2 --per-class 3 --seed 5 --out " + p + "1").code, 0);
    ASSERT_EQ(run("gen-data stage2 --maps 4 --locations 8 --draws 4 --seed 5 --out " + p + "2").code, 0);
    ASSERT_EQ(run("gen-data corpus --n 50 --seed 5 --out " + p + "c.jsonl").code, 0);
    ASSERT_EQ(run("train --stage1 " + p + "1 --stage2 " + p + "2 --epochs 2 --features 2 --map-embedding 4 "
                  "--relation-embedding 3 --hidden 4 --batch 2 --seed 5 --out " + p + "m/model.json --log " + p + "log.tsv")
                  .code,
              0);
    ASSERT_EQ(run("fit-expert --data " + p + "2 --max-iterations 50 --seed 5 --out " + p + "fit.json").code, 0);
    ASSERT_EQ(run("eval-nll --model expert --model " + p + "m/model.json --model chance --data " + p +
                  "2 --split --seed 5 --out " + p + "ev")
                  .code,
              0);
    ASSERT_EQ(run("batch --random 4 --cap 150 --seed 5 --out " + p + "b").code, 0);
  }
  for (const char* f : {"1/points.jsonl", "2/points.jsonl", "c.jsonl", "m/model.json", "log.tsv", "fit.json",
                        "ev/summary.json", "ev/comparison.tsv", "ev/expert_histogram.tsv", "b/report.json",
                        "b/curves.tsv"})
    EXPECT_EQ(read(std::string("x") + f), read(std::string("y") + f)) << f;
  EXPECT_EQ(read("x2/maps/synth-s2-0.json"), read("y2/maps/synth-s2-0.json"));
}
