#include <gtest/gtest.h>

#include <filesystem>
#include <json.hpp>
#include <sstream>
#include <string>

#include "semalloc/commands.hpp"
#include "semalloc/config.hpp"

using namespace semalloc::cli;
namespace fs = std::filesystem;

namespace {

class Scratch {
 public:
  explicit Scratch(const std::string& tag)
      : dir_(fs::temp_directory_path() / ("semalloc_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()))) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Scratch() { fs::remove_all(dir_); }
  const fs::path& path() const { return dir_; }

 private:
  fs::path dir_;
};

constexpr const char* kTinyConfig = R"({
  "experiments": [
    {"name": "sweep", "kind": "power_vs_pbar", "p_bar_grid": [0.5, 0.7], "n_realizations": 12, "seed": 3},
    {"name": "caps", "kind": "error_capacity", "scheme": "uncoded_forward", "p_bar_grid": [0.5], "n_realizations": 6}
  ]
})";

}  // namespace

TEST(Allocate, FixedGainsRegression) {
  AllocateArgs args;
  args.p_bar = 0.5;
  args.method = "unaware";
  args.fixed_gains = std::vector<double>{1.0, 1.0};
  std::ostringstream out, err;
  EXPECT_EQ(cmd_allocate(args, out, err), kExitOk);
  EXPECT_NE(out.str().find("total power 0.138144008 W"), std::string::npos) << out.str();
  EXPECT_NE(out.str().find("snr 0.760220481"), std::string::npos);
}

TEST(Allocate, ZeroPowerAndCsv) {
  Scratch tmp("alloc");
  AllocateArgs args;
  args.p_bar = 1.0;
  args.method = "all";
  args.csv = tmp.path() / "a.csv";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_allocate(args, out, err), kExitOk);
  EXPECT_NE(out.str().find("switched off"), std::string::npos);
  const auto csv = read_file(*args.csv);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,stream,power_w,power_dbm,error,snr,capacity,achieved_p,total_power");
  EXPECT_NE(csv.find("bisection,1,0,-inf"), std::string::npos);
}

TEST(Allocate, ExitCodes) {
  std::ostringstream out, err;
  AllocateArgs args;
  args.p_bar = 0.2;
  EXPECT_EQ(cmd_allocate(args, out, err), kExitFailure);
  EXPECT_NE(err.str().find("infeasible"), std::string::npos);
  args.p_bar = 0.5;
  args.method = "greedy";
  EXPECT_EQ(cmd_allocate(args, out, err), kExitUsage);
  args.method = "bisection";
  args.fixed_gains = std::vector<double>{1.0};
  EXPECT_EQ(cmd_allocate(args, out, err), kExitUsage);
  args.fixed_gains.reset();
  args.config = "/nonexistent/c.json";
  EXPECT_EQ(cmd_allocate(args, out, err), kExitIo);
}

TEST(GainList, Parsing) {
  EXPECT_EQ(parse_gain_list("1,2.5"), (std::vector<double>{1.0, 2.5}));
  EXPECT_THROW(parse_gain_list("1,-2"), UsageError);
  EXPECT_THROW(parse_gain_list("1,,2"), UsageError);
  EXPECT_THROW(parse_gain_list("abc"), UsageError);
}

TEST(Sha256, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Experiment, WritesCsvAndManifestDeterministically) {
  Scratch tmp("exp");
  const auto cfg = tmp.path() / "c.json";
  write_file(cfg, kTinyConfig);
  ExperimentArgs args;
  args.config = cfg;
  args.out_dir = tmp.path() / "run1";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_experiment(args, out, err), kExitOk) << err.str();
  args.out_dir = tmp.path() / "run2";
  ASSERT_EQ(cmd_experiment(args, out, err), kExitOk);
  for (const char* f : {"manifest.json", "sweep/power_vs_pbar.csv", "caps/error_capacity.csv"}) {
    EXPECT_EQ(read_file(tmp.path() / "run1" / f), read_file(tmp.path() / "run2" / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(read_file(tmp.path() / "run1" / "manifest.json"));
  EXPECT_EQ(manifest["tool"], "semalloc");
  EXPECT_EQ(manifest["config_sha256"], sha256_hex(kTinyConfig));
  ASSERT_EQ(manifest["experiments"].size(), 2U);
  EXPECT_EQ(manifest["experiments"][0]["file"], "sweep/power_vs_pbar.csv");
  EXPECT_EQ(manifest["experiments"][0]["seed"], 3);
}

TEST(Experiment, SingleNameAndSeedOverride) {
  Scratch tmp("one");
  const auto cfg = tmp.path() / "c.json";
  write_file(cfg, kTinyConfig);
  ExperimentArgs args;
  args.config = cfg;
  args.name = "sweep";
  args.seed = 99;
  args.out_dir = tmp.path() / "out";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_experiment(args, out, err), kExitOk);
  EXPECT_TRUE(fs::exists(tmp.path() / "out" / "power_vs_pbar.csv"));
  const auto manifest = nlohmann::json::parse(read_file(tmp.path() / "out" / "manifest.json"));
  EXPECT_EQ(manifest["experiments"][0]["seed"], 99);
  args.name = "nope";
  EXPECT_EQ(cmd_experiment(args, out, err), kExitUsage);
}

TEST(Validate, SuitesPassAndUnknownSuiteIsUsageError) {
  ValidateArgs args;
  args.suite = "lambertw";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate(args, out, err), kExitOk) << err.str();
  EXPECT_NE(out.str().find("PASS"), std::string::npos);
  args.suite = "everything";
  EXPECT_EQ(cmd_validate(args, out, err), kExitUsage);
}

TEST(Validate, BadConfigFails) {
  Scratch tmp("bad");
  const auto cfg = tmp.path() / "c.json";
  write_file(cfg, R"({"max_ber": 0.6})");
  ValidateArgs args;
  args.config = cfg;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate(args, out, err), kExitFailure);
  EXPECT_NE(err.str().find("$.max_ber"), std::string::npos);
}
