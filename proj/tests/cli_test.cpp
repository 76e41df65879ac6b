#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "pointgnn/io.hpp"

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int status = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(POINTGNN_CLI) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pointgnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) +
            "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, SynthIsByteIdenticalForSeed) {
  ASSERT_EQ(run("synth --scenes 3 --seed 7 --output " + path("a")).status, 0);
  ASSERT_EQ(run("synth --scenes 3 --seed 7 --output " + path("b")).status, 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(path("a"))) {
    ++files;
    const auto name = e.path().filename().string();
    EXPECT_EQ(pgnn::read_file_text(e.path().string()), pgnn::read_file_text(path("b/" + name))) << name;
  }
  EXPECT_EQ(files, 6);
}

TEST_F(Cli, GraphOracleMatches) {
  ASSERT_EQ(run("synth --scenes 1 --seed 3 --output " + path("s")).status, 0);
  const RunResult r = run("graph --input " + path("s/scene_0000.txt") + " --radius 4 --voxel 0.8 --oracle --output " +
                          path("edges.txt"));
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("oracle MATCH"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(path("edges.txt")));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("frobnicate").status, 1);
  EXPECT_EQ(run("graph --input " + path("s/scene_0000.txt") + " --bogus-flag").status, 1);
  EXPECT_EQ(run("graph --input " + path("does_not_exist.txt")).status, 2);
  EXPECT_EQ(run("graph").status, 1);
}

TEST_F(Cli, TrainEvalAndAblateShareSchema) {
  ASSERT_EQ(run("synth --scenes 2 --seed 5 --output " + path("s")).status, 0);
  const RunResult t = run("train --input " + path("s") + " --output " + path("m") + " --steps 4 --quiet");
  ASSERT_EQ(t.status, 0) << t.out;
  EXPECT_TRUE(fs::exists(path("m/model.ckpt")));
  EXPECT_TRUE(fs::exists(path("m/manifest.txt")));
  EXPECT_TRUE(fs::exists(path("m/loss.csv")));

  const RunResult e = run("eval --model " + path("m") + " --input " + path("s") + " --output " + path("eval.csv"));
  ASSERT_EQ(e.status, 0) << e.out;
  const RunResult a = run("ablate --model " + path("m") + " --input " + path("s") + " --toggle auto_reg=off --output " +
                          path("ablate.csv"));
  ASSERT_EQ(a.status, 0) << a.out;
  const std::string header = "class,iou_threshold,ap,num_gt,num_det\n";
  EXPECT_EQ(pgnn::read_file_text(path("eval.csv")).substr(0, header.size()), header);
  EXPECT_EQ(pgnn::read_file_text(path("ablate.csv")).substr(0, header.size()), header);
  EXPECT_FALSE(fs::exists(path("eval.csv.tmp")));

  EXPECT_EQ(run("ablate --model " + path("m") + " --input " + path("s") + " --toggle T=9").status, 1);
}

TEST_F(Cli, GradcheckPasses) {
  const RunResult r = run("gradcheck --vertices 12 --probes 40");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos) << r.out;
}

}  // namespace
