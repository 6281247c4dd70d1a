#include "lgn/cli.hpp"
#include "lgn/scoring.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <sstream>

using namespace lgn;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) { return cli::dispatch(args); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string captured_config(std::vector<std::string> args) {
  args.push_back("--print-config");
  ::testing::internal::CaptureStdout();
  const int code = run(args);
  const std::string out = ::testing::internal::GetCapturedStdout();
  EXPECT_EQ(code, 0);
  return out;
}

// Reduced synthetic run: small frames and short videos keep this test fast.
std::vector<std::string> small(std::vector<std::string> args, const fs::path& dir, const std::string& out = "out") {
  for (std::string s : {"--input-size", "32", "--n", "2", "--epochs", "1", "--seed", "3"}) args.push_back(s);
  args.push_back("--data");
  args.push_back((dir / "data").string());
  args.push_back("--out");
  args.push_back((dir / out).string());
  args.push_back("--checkpoint");
  args.push_back((dir / "out" / "checkpoint.lgn").string());
  return args;
}

}  // namespace

TEST(Cli, UnknownCommandAndFlag) {
  EXPECT_EQ(run({"frobnicate"}), cli::kExitUser);
  EXPECT_EQ(run({}), cli::kExitUser);
  EXPECT_EQ(run({"train", "--no-such-flag"}), cli::kExitUser);
  EXPECT_EQ(run({"--help"}), cli::kExitOk);
}

TEST(Cli, PresetValuesReachTheCommand) {
  const std::string out = captured_config({"eval", "--preset", "ped2"});
  EXPECT_NE(out.find("gamma = 0.009\n"), std::string::npos) << out;
  EXPECT_NE(out.find("lambda = 0.6\n"), std::string::npos) << out;
  EXPECT_NE(out.find("memory_size = 10\n"), std::string::npos) << out;
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  const auto dir = lgn::testing::scratch_dir("cli_cfg");
  { std::ofstream(dir / "run.cfg") << "preset = avenue\ngamma = 0.5\nlambda = 0.3\n"; }
  const std::string out = captured_config({"eval", "-c", (dir / "run.cfg").string(), "--gamma", "0.25"});
  EXPECT_NE(out.find("gamma = 0.25\n"), std::string::npos) << out;
  EXPECT_NE(out.find("lambda = 0.3\n"), std::string::npos) << out;
  EXPECT_NE(out.find("lambda_s = 2\n"), std::string::npos) << out;

  { std::ofstream(dir / "bad.cfg") << "gamma = 0.5\nwhat\n"; }
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run({"eval", "-c", (dir / "bad.cfg").string()}), cli::kExitUser);
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_NE(err.find("bad.cfg:2:"), std::string::npos) << err;
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  setenv("LGN_OUTPUT_DIR", "/tmp/lgn_env_out", 1);
  EXPECT_NE(captured_config({"train"}).find("out = /tmp/lgn_env_out\n"), std::string::npos);
  EXPECT_NE(captured_config({"train", "--out", "x"}).find("out = x\n"), std::string::npos);
  unsetenv("LGN_OUTPUT_DIR");
}

TEST(Cli, MissingInputsAreUserErrors) {
  EXPECT_EQ(run({"train"}), cli::kExitUser);
  EXPECT_EQ(run({"eval", "--data", "/nonexistent", "--checkpoint", "/nonexistent/c.lgn"}), cli::kExitUser);
  EXPECT_EQ(run({"score", "--data", "/nonexistent"}), cli::kExitUser);
}

TEST(Cli, PlotOnConstantScores) {
  const auto dir = lgn::testing::scratch_dir("cli_plot");
  ScoreSeries s;
  s.video_id = "flat";
  for (int i = 0; i < 10; ++i) s.records.push_back({i, 20.0, 0.1, 0.01, 0.5, std::nullopt});
  scoring::write_csv(s, dir / "flat.csv");
  EXPECT_EQ(run({"plot", "--scores", (dir / "flat.csv").string(), "--out", dir.string()}), 0);
  EXPECT_TRUE(fs::exists(dir / "plots" / "flat_normality.png"));
}

TEST(Cli, SynthTrainEvalScorePlot) {
  const auto dir = lgn::testing::scratch_dir("cli_e2e");
  ASSERT_EQ(run(small({"synth", "--train-videos", "1", "--test-videos", "2", "--length", "24"}, dir)), 0);
  ASSERT_TRUE(fs::exists(dir / "data" / "testing" / "labels" / "01.txt"));
  ASSERT_EQ(run(small({"train", "--variant", "glo_net"}, dir)), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "checkpoint.lgn"));
  const std::string log = slurp(dir / "out" / "train_log.csv");
  EXPECT_EQ(log.rfind("step,epoch,intensity,compactness,separateness,total\n", 0), 0u);

  ASSERT_EQ(run(small({"eval"}, dir)), 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
  EXPECT_EQ(summary["variant"], "glo_net");
  EXPECT_TRUE(summary["auc"].is_number());
  EXPECT_TRUE(summary["gap"].is_number());
  ASSERT_EQ(summary["auc_by_lambda"].size(), 3u);
  EXPECT_EQ(summary["auc_by_lambda"][0]["lambda"], 0.0);
  EXPECT_EQ(summary["auc_by_lambda"][2]["lambda"], 1.0);
  EXPECT_NE(slurp(dir / "out" / "summary.txt").find("glo_net"), std::string::npos);
  const std::string scores = slurp(dir / "out" / "scores" / "00.csv");

  // Re-running gives identical outputs.
  ASSERT_EQ(run(small({"eval"}, dir)), 0);
  EXPECT_EQ(slurp(dir / "out" / "scores" / "00.csv"), scores);

  ASSERT_EQ(run(small({"score", "--video", "01"}, dir, "one")), 0);
  EXPECT_TRUE(fs::exists(dir / "one" / "scores" / "01.csv"));
  EXPECT_FALSE(fs::exists(dir / "one" / "scores" / "00.csv"));
  EXPECT_EQ(run(small({"score", "--video", "99"}, dir)), cli::kExitUser);

  ASSERT_EQ(run(small({"plot", "--heatmaps", "00"}, dir)), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "plots" / "00_normality.png"));
  EXPECT_TRUE(fs::exists(dir / "out" / "plots" / "roc.png"));
  EXPECT_TRUE(fs::exists(dir / "out" / "plots" / "00_error_0002.png"));
}
