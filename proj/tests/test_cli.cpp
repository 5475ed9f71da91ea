#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "posture/config_io.hpp"
#include "posture/io.hpp"

namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test, so tests can run as separate processes.
fs::path out_root() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path d = fs::temp_directory_path() / "posture_cli_test" / info->name();
  static std::string prepared;
  if (prepared != info->name()) {
    fs::remove_all(d);
    fs::create_directories(d);
    prepared = info->name();
  }
  return d;
}

// Runs the CLI with output captured to a log file; returns the exit status.
int run(const std::string& args, const std::string& out_dir = "out") {
  const std::string cmd = std::string(POSTURE_CLI) + " --out-dir " + (out_root() / out_dir).string() + " " + args +
                          " > " + (out_root() / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_log() {
  std::ifstream in(out_root() / "last.log");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

} // namespace

TEST(Cli, SimulateWritesCanonicalTrace) {
  ASSERT_EQ(run("simulate"), 0) << last_log();
  EXPECT_EQ(line_count(out_root() / "out/simulate/sway.csv"), 12101u);  // header + 12100 samples
  const auto manifest = posture::read_json_file((out_root() / "out/simulate/run.json").string());
  EXPECT_EQ(manifest["subcommand"], "simulate");
  EXPECT_EQ(manifest["config"]["params"]["kp"], 811.2951);
}

TEST(Cli, PrtsWritesTilt) {
  ASSERT_EQ(run("prts --prts-p2p-deg 4"), 0) << last_log();
  const auto tf = posture::read_trace_csv((out_root() / "out/prts/tilt.csv").string());
  EXPECT_EQ(tf.values.size(), 12100u);
}

TEST(Cli, DatasetIsReproducible) {
  ASSERT_EQ(run("--seed 3 dataset --target 100", "ds_a"), 0) << last_log();
  ASSERT_EQ(run("--seed 3 dataset --target 100 --workers 2", "ds_b"), 0) << last_log();
  const auto a = posture::read_json_file((out_root() / "ds_a/dataset/manifest.json").string());
  const auto b = posture::read_json_file((out_root() / "ds_b/dataset/manifest.json").string());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a["records"].size(), 100u);
}

TEST(Cli, TrainEvalIdentifyPlotWorkflow) {
  const std::string root = "flow";
  ASSERT_EQ(run("--seed 3 dataset --target 100", root), 0) << last_log();
  ASSERT_EQ(run("train --epochs 1", root), 0) << last_log();
  EXPECT_EQ(line_count(out_root() / root / "model/history.csv"), 2u);
  ASSERT_EQ(run("eval", root), 0) << last_log();
  EXPECT_NE(last_log().find("mean-predictor baseline"), std::string::npos);
  const auto ev = posture::read_json_file((out_root() / root / "eval/eval.json").string());
  EXPECT_GT(ev["mean_baseline_mse"].get<double>(), 0.0);

  ASSERT_EQ(run("simulate", root), 0);
  const std::string trace = (out_root() / root / "simulate/sway.csv").string();
  ASSERT_EQ(run("identify --trace " + trace + " --reference 811.2951,284.564,312.2075,174.3144,0.4695,0.0003,0.121",
                root),
            0)
      << last_log();
  const auto rep = posture::read_json_file((out_root() / root / "identify/cnn/report.json").string());
  EXPECT_TRUE(rep.contains("squared_error"));
  EXPECT_TRUE(fs::exists(out_root() / root / "identify/cnn/resimulated.csv"));

  ASSERT_EQ(run("plot --trace " + trace + " --history " + (out_root() / root / "model").string() + " --report " +
                    (out_root() / root / "identify/cnn").string() + " --dataset " +
                    (out_root() / root / "dataset").string(),
                root),
            0)
      << last_log();
  for (const char* f : {"traces.svg", "history.svg", "report.svg", "sway_histogram.svg", "sway_histogram.csv"})
    EXPECT_TRUE(fs::exists(out_root() / root / "plots" / f)) << f;
}

TEST(Cli, ExitCodesDistinguishFailureKinds) {
  EXPECT_EQ(run("simulate --no-such-flag"), 2);
  EXPECT_EQ(run("simulate --dt 0.0007"), 2) << last_log();  // 121 s is not a multiple
  EXPECT_EQ(run("identify --trace /nonexistent.csv"), 2);

  const fs::path bad = out_root() / "bad.csv";
  std::ofstream(bad) << "time_s,angle_rad\n0,0\n0.01,zzz\n";
  EXPECT_EQ(run("identify --method iterative --trace " + bad.string()), 3) << last_log();
  EXPECT_NE(last_log().find("bad.csv"), std::string::npos);

  EXPECT_EQ(run("simulate --kp 10 --kp-pass 0", "div"), 4) << last_log();

  ASSERT_EQ(run("simulate --nv 0", "nc"), 0);
  EXPECT_EQ(run("identify --method iterative --budget 1 --trace " + (out_root() / "nc/simulate/sway.csv").string(),
                "nc"),
            5)
      << last_log();
  EXPECT_NE(last_log().find("NOT converged"), std::string::npos);
}

TEST(Cli, ResampleFlagAcceptsOffGridTraces) {
  const fs::path p = out_root() / "coarse.csv";
  {
    std::ofstream out(p);
    out << "time_s,angle_rad\n";
    for (int i = 0; i < 6050; ++i) out << i * 0.02 << ',' << 0.001 * std::sin(i * 0.01) << '\n';
  }
  EXPECT_EQ(run("identify --method iterative --budget 2 --trace " + p.string(), "rs"), 3);
  EXPECT_EQ(run("identify --method iterative --budget 2 --resample --trace " + p.string(), "rs"), 5) << last_log();
}

TEST(Cli, ConfigFileSuppliesOptions) {
  const fs::path cfg = out_root() / "opts.toml";
  std::ofstream(cfg) << "seed = 9\n[simulate]\nkp = 900.0\nnv = 0.0\n";
  ASSERT_EQ(run("--config " + cfg.string() + " simulate", "cfg"), 0) << last_log();
  const auto manifest = posture::read_json_file((out_root() / "cfg/simulate/run.json").string());
  EXPECT_EQ(manifest["config"]["params"]["kp"], 900.0);
  EXPECT_EQ(manifest["seed"], 9);
}
