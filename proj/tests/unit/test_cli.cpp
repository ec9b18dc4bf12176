#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbf_cli/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "sbf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = sbf::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sbf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

constexpr const char* kRun1Counts = "cycles,54272970\nN_b,1295709\nN_r,105439\nN_b_B,342349\nN_r_B,50418\n";

}  // namespace

TEST_F(CliTest, SimulateIsDeterministic) {
  const auto a = run({"simulate", "--cycles", "20000", "--seed", "5", "--out", path("a")});
  const auto b = run({"simulate", "--cycles", "20000", "--seed", "5", "--threads", "2", "--out", path("b")});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  for (const char* f : {"simulate_report.json", "counts.csv"}) EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f));
  const auto c = run({"simulate", "--cycles", "20000", "--seed", "6", "--out", path("c")});
  EXPECT_NE(slurp(dir_ / "a" / "counts.csv"), slurp(dir_ / "c" / "counts.csv"));
}

TEST_F(CliTest, ReplayFromProvenance) {
  const auto a = run({"simulate", "--cycles", "20000", "--seed", "11", "--out", path("a")});
  ASSERT_EQ(a.code, 0) << a.err;
  const auto report = nlohmann::json::parse(slurp(dir_ / "a" / "simulate_report.json"));
  write(dir_ / "replay.json", report["provenance"]["config"].dump());
  const auto b = run({"simulate", "--config", path("replay.json"), "--out", path("b")});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(dir_ / "a" / "simulate_report.json"), slurp(dir_ / "b" / "simulate_report.json"));
}

TEST_F(CliTest, EstimateRunOne) {
  write(dir_ / "run1.csv", kRun1Counts);
  const auto r = run({"estimate", path("run1.csv"), "--out", path("est")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("0.9454(6)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("17.33(20)"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir_ / "est" / "estimate_report.json"));
}

TEST_F(CliTest, EstimateReadsSimulateReport) {
  ASSERT_EQ(run({"simulate", "--cycles", "20000", "--out", path("a")}).code, 0);
  const auto r = run({"estimate", path("a/simulate_report.json"), "--out", path("est")});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, ConfigAndParseErrorsExitTwo) {
  EXPECT_EQ(run({"simulate", "--no-such-flag"}).code, sbf::cli::kConfigError);
  EXPECT_EQ(run({}).code, sbf::cli::kConfigError);
  write(dir_ / "bad.json", R"({"blue": {"rabbi": "1 MHz_x2pi"}})");
  const auto r = run({"simulate", "--config", path("bad.json"), "--out", path("o")});
  EXPECT_EQ(r.code, sbf::cli::kConfigError);
  EXPECT_NE(r.err.find("blue.rabbi"), std::string::npos);
  write(dir_ / "empty.csv", "");
  EXPECT_EQ(run({"estimate", path("empty.csv"), "--out", path("o")}).code, sbf::cli::kConfigError);
  write(dir_ / "broken.csv", "cycles,10\nN_b,x\n");
  const auto p = run({"estimate", path("broken.csv"), "--out", path("o")});
  EXPECT_EQ(p.code, sbf::cli::kConfigError);
  EXPECT_NE(p.err.find("line 2"), std::string::npos) << p.err;
  EXPECT_EQ(run({"simulate", "--cycles", "0", "--out", path("o")}).code, sbf::cli::kConfigError);
}

TEST_F(CliTest, RuntimeErrorExitThree) {
  // more background than signal in the repump window
  write(dir_ / "neg.csv", "cycles,100\nN_b,2000\nN_r,10\nN_b_B,5\nN_r_B,50\n");
  EXPECT_EQ(run({"estimate", path("neg.csv"), "--out", path("o")}).code, sbf::cli::kRuntimeError);
}

TEST_F(CliTest, DegenerateFitExitFour) {
  // an hour with only short events: everything lands in the first histogram bin
  write(dir_ / "short.json",
        R"({"collisions": {"duration": "1 h", "shelved_interval": "0 s", "short_interval": "60 s", "ion_lifetime": "0 s"}})");
  const auto r = run({"collisions", "--config", path("short.json"), "--out", path("o")});
  EXPECT_EQ(r.code, sbf::cli::kFitDegenerate) << r.err;
}

TEST_F(CliTest, CollisionsFromTraceFile) {
  write(dir_ / "c.json", R"({"collisions": {"duration": "2 h", "shelved_interval": "30 s", "short_interval": "0 s", "ion_lifetime": "0 s"}})");
  const auto a = run({"collisions", "--config", path("c.json"), "--write-trace", "--out", path("a")});
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run({"collisions", "--config", path("c.json"), "--trace", path("a/trace.csv"), "--out", path("b")});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(dir_ / "a" / "histogram.csv"), slurp(dir_ / "b" / "histogram.csv"));
  write(dir_ / "empty_trace.csv", "");
  EXPECT_EQ(run({"collisions", "--trace", path("empty_trace.csv"), "--out", path("o")}).code,
            sbf::cli::kConfigError);
}

TEST_F(CliTest, Spectrum) {
  const auto r = run({"spectrum", "--start", "-100 MHz_x2pi", "--stop", "20 MHz_x2pi", "--points", "13", "--out",
                      path("s")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dir_ / "s" / "spectrum.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 14);
  EXPECT_EQ(run({"spectrum", "--start", "-100 MHz", "--out", path("s")}).code, sbf::cli::kConfigError);
}
