#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "test_util.hpp"

#ifdef NSC_CLI_PATH

using nsc::testing::TempDir;

namespace {

int run(const std::string& args, const std::string& stdin_file = "/dev/null") {
  const std::string cmd = std::string(NSC_CLI_PATH) + " " + args + " < " + stdin_file + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("generate --train 0 --out /tmp/nsc_never"), 1);
  EXPECT_EQ(run("generate --bogus 3 --out /tmp/nsc_never"), 1);
  EXPECT_EQ(run("train --data /tmp --config /nonexistent.json --out /tmp/x.nsc"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, GenerateTrainEvalConsult) {
  TempDir dir("cli");
  const auto d = dir.path().string();
  const std::string gen = "generate --diseases 4 --symptoms 24 --train 60 --val 10 --test 10 --seed 3 --out ";
  ASSERT_EQ(run(gen + d + "/a"), 0);
  ASSERT_EQ(run(gen + d + "/b"), 0);
  for (const char* f : {"train.jsonl", "test.jsonl", "profiles.jsonl", "stats.tsv"})
    EXPECT_EQ(slurp(dir / (std::string("a/") + f)), slurp(dir / (std::string("b/") + f))) << f;

  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"layer_sizes": [8], "epochs": 1, "batch_size": 16, "max_attempts": 3})";
  }
  ASSERT_EQ(run("train --data " + d + "/a --config " + d + "/cfg.json --out " + d + "/m.nsc"), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "m.nsc.report.json"));
  EXPECT_EQ(run("train --data " + d + "/a --config " + d + "/cfg.json --mode diag-only --out " + d + "/x.nsc"), 1);

  EXPECT_EQ(run("eval --ckpt " + d + "/m.nsc --data " + d + "/a --k 1,x"), 1);
  EXPECT_EQ(run("eval --ckpt " + d + "/m.nsc --data " + d + "/a --k 1,3,5 --out " + d + "/r1.tsv"), 0);
  EXPECT_EQ(run("eval --ckpt " + d + "/m.nsc --data " + d + "/a --k 1,3,5 --out " + d + "/r2.tsv"), 0);
  const auto report = slurp(dir / "r1.tsv");
  EXPECT_EQ(report, slurp(dir / "r2.tsv"));
  for (const char* row : {"acc@1\t", "acc@3\t", "acc@5\t"}) EXPECT_NE(report.find(row), std::string::npos);
  EXPECT_EQ(run("eval --ckpt " + d + "/missing.nsc --data " + d + "/a"), 2);

  EXPECT_EQ(run("consult --ckpt " + d + "/m.nsc"), 0);  // immediate end of input
  {
    std::ofstream in(dir / "answers.txt");
    in << "symptom_0\nsymptom_001\n\nn\ny\nn\n";
  }
  EXPECT_EQ(run("consult --ckpt " + d + "/m.nsc", (dir / "answers.txt").string()), 0);
}

#endif
