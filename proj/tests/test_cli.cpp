#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "llp/io.hpp"

using namespace llp;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run llp_run(const std::string& args) {
  const std::string cmd = std::string(LLP_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (const std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

json run_json(const std::string& args) {
  const auto r = llp_run(args);
  EXPECT_EQ(r.status, 0) << args;
  return json::parse(r.out);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::current_path() / ("cli_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Cli, SimulateWritesManifest) {
  const auto dir = scratch("sim");
  const auto j = run_json("simulate --out " + dir.string() + " --seed 3");
  EXPECT_EQ(j["bags"], 128);
  EXPECT_EQ(read_bag_directory(dir).size(), 128u);
  EXPECT_TRUE(fs::exists(dir / "config.ini"));
  EXPECT_TRUE(fs::exists(dir / "test.csv"));
}

TEST(Cli, SimulateIsDeterministic) {
  const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  run_json("simulate --out " + a.string() + " --seed 5 --total 64");
  run_json("simulate --out " + b.string() + " --seed 5 --total 64");
  run_json("simulate --out " + c.string() + " --seed 6 --total 64");
  EXPECT_EQ(slurp(a / "manifest.csv"), slurp(b / "manifest.csv"));
  EXPECT_EQ(slurp(a / "bag_3.csv"), slurp(b / "bag_3.csv"));
  EXPECT_EQ(slurp(a / "test.csv"), slurp(b / "test.csv"));
  EXPECT_NE(slurp(a / "bag_3.csv"), slurp(c / "bag_3.csv"));
}

TEST(Cli, ConstantPureProportions) {
  const auto dir = scratch("pure");
  run_json("simulate --out " + dir.string() + " --lp-dist constant --lp-value 1 --total 32 --bag-size 4");
  for (const auto& b : read_bag_directory(dir)) EXPECT_EQ(b.empirical_lp, 1.0);
}

TEST(Cli, ConfigReplayReproducesOutputs) {
  const auto a = scratch("replay_a"), b = scratch("replay_b");
  run_json("simulate --out " + a.string() + " --seed 9 --total 48 --bag-size 6 --lp-dist walk --lp-step 0.1 --dim 3");
  run_json("--config " + (a / "config.ini").string() + " simulate --out " + b.string());
  for (const char* f : {"manifest.csv", "bag_0.csv", "bag_7.csv", "truth.csv", "test.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(llp_run("train --bags " + scratch("nothing").string() + " --out " + scratch("nothing_out").string()).status, 2);
  EXPECT_EQ(llp_run("").status, 2);
  EXPECT_EQ(llp_run("pair --lps 0.1,0.2,0.3").status, 2);
  EXPECT_EQ(llp_run("simulate --out x --model neither").status, 2);
  EXPECT_EQ(llp_run("bound --theorem 1 --kappa-plus 0.6 --kappa-minus 0.5 --weights 1").status, 2);
}

TEST(Cli, TrainAndEvaluatePureBags) {
  const auto bags = scratch("train_bags"), out = scratch("train_out"), eval = scratch("eval_out");
  run_json("simulate --out " + bags.string() + " --bag-size 1 --total 128 --lp-lo 0 --lp-hi 1 --mu 2 --test-per-class 200");
  const auto j = run_json("train --bags " + bags.string() + " --out " + out.string() + " --lambdas 1,0.01");
  const double lambda = j["lambda"];
  EXPECT_TRUE(lambda == 1.0 || lambda == 0.01);
  EXPECT_LT(j["test"]["ber"].get<double>(), 0.05);
  const auto report = read_json(out / "report.json");
  EXPECT_TRUE(report["cv"]["performed"].get<bool>());
  EXPECT_TRUE(fs::exists(out / "model.json"));

  const auto m = run_json("evaluate --model " + (out / "model.json").string() + " --test " + bags.string() + " --out " +
                          eval.string());
  EXPECT_EQ(m["auc"], j["test"]["auc"]);
  EXPECT_GT(m["auc"].get<double>(), 0.95);
  EXPECT_TRUE(fs::exists(eval / "roc.csv"));
  EXPECT_EQ(read_json(eval / "metrics.json"), m);
}

TEST(Cli, PairAndMerge) {
  const auto p = run_json("pair --lps 0.9,0.1,0.5,0.3 --method optimal");
  EXPECT_NEAR(p["objective"].get<double>(), 0.68, 1e-12);
  EXPECT_EQ(p["pairs"].size(), 2u);
  const auto m = run_json("merge --lps 0.9,0.8,0.1,0.2 --k 2 --scheme bm");
  ASSERT_EQ(m["pairs"].size(), 1u);
  EXPECT_NEAR(m["pairs"][0]["plus_lp"].get<double>(), 0.85, 1e-12);
  EXPECT_NEAR(m["pairs"][0]["minus_lp"].get<double>(), 0.15, 1e-12);
}

TEST(Cli, BoundAndEprDemo) {
  const auto b = run_json("bound --theorem 1 --kappa-plus 0 --kappa-minus 0 --nbar 100 --weights 1");
  EXPECT_NEAR(b["bound"].get<double>(), 0.5841, 1e-3);
  const auto t2 = run_json("bound --theorem 2 --gaps 0.5 --epsilon 0.1 --k 1 --n-pairs 1");
  EXPECT_NEAR(t2["hm_term"].get<double>(), 6.25, 1e-12);
  const auto e = run_json("epr-demo");
  EXPECT_NEAR(e["t_epr"].get<double>(), 0.618034, 1e-3);
  EXPECT_NEAR(e["t_ber"].get<double>(), 0.5, 1e-3);
  EXPECT_NEAR(e["ber_gap"].get<double>(), 0.006966, 1e-3);
}
