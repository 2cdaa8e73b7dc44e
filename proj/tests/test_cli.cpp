#include <gtest/gtest.h>

#include <sstream>

#include "gmr/cli.hpp"
#include "gmr/io.hpp"
#include "test_util.hpp"

using gmr::testing::slurp;
using gmr::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run gmr_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = gmr::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

std::vector<std::string> simulate_args(const std::string& out, const std::string& truth, const std::string& seed) {
  return {"simulate", "--n",     "800", "--K",   "2",   "--p",     "2",   "--G", "10", "--sigma",
          "2",        "--delta-beta", "12", "--seed", seed, "--out", out, "--truth", truth};
}

}  // namespace

TEST(Cli, SimulateWritesDefaultShape) {
  TempDir tmp;
  const auto r = gmr_cli(simulate_args(tmp.file("d.csv"), tmp.file("t.json"), "7"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("R=20"), std::string::npos);
  EXPECT_NE(r.out.find("n_r=40"), std::string::npos);
  const auto d = gmr::io::read_dataset_csv(tmp.file("d.csv"));
  EXPECT_EQ(d.num_groups(), 20);
  for (const auto& g : d.groups) EXPECT_EQ(g.size(), 40);
  const auto truth = gmr::io::read_json_file(tmp.file("t.json"));
  for (const char* key : {"beta_true", "labels", "sigma", "Sigma_x", "config"}) EXPECT_TRUE(truth.contains(key));
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(gmr_cli({"simulate", "--n", "800"}).code, 2);
  EXPECT_EQ(gmr_cli({}).code, 2);
  EXPECT_EQ(gmr_cli({"nonsense"}).code, 2);
  EXPECT_EQ(gmr_cli({"fit", "--K", "two", "x.csv"}).code, 2);
  EXPECT_EQ(gmr_cli({"predict", "--model", "m.json", "--data", "d.csv", "--fallback", "maybe"}).code, 2);
  EXPECT_EQ(gmr_cli({"evaluate"}).code, 2);
  EXPECT_EQ(gmr_cli({"--help"}).code, 0);
}

TEST(Cli, RuntimeErrorsExitOne) {
  TempDir tmp;
  EXPECT_EQ(gmr_cli({"fit", tmp.file("missing.csv"), "--K", "2"}).code, 1);
  const auto r = gmr_cli({"simulate", "--n", "10", "--K", "5", "--p", "2", "--G", "1", "--sigma", "1",
                          "--delta-beta", "1", "--out", tmp.file("d.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Infeasible"), std::string::npos);
}

TEST(Cli, PipelineIsDeterministic) {
  TempDir a, b;
  for (const TempDir* dir : {&a, &b}) {
    ASSERT_EQ(gmr_cli(simulate_args(dir->file("d.csv"), dir->file("t.json"), "3")).code, 0);
    ASSERT_EQ(gmr_cli({"fit", dir->file("d.csv"), "--K", "2", "--seed", "5", "--jobs", "3", "--out",
                       dir->file("m.json")}).code, 0);
    ASSERT_EQ(gmr_cli({"predict", "--model", dir->file("m.json"), "--data", dir->file("d.csv"), "--out",
                       dir->file("p.csv")}).code, 0);
    ASSERT_EQ(gmr_cli({"evaluate", "--model", dir->file("m.json"), "--truth", dir->file("t.json"),
                       "--predictions", dir->file("p.csv"), "--out", dir->file("e.json")}).code, 0);
  }
  for (const char* f : {"d.csv", "t.json", "m.json", "p.csv", "e.json"})
    EXPECT_EQ(slurp(a.file(f)), slurp(b.file(f))) << f;
  const auto metrics = gmr::io::read_json_file(a.file("e.json"));
  EXPECT_DOUBLE_EQ(metrics.at("nmi").get<double>(), 1.0);
  EXPECT_TRUE(gmr::io::read_json_file(a.file("m.json")).at("converged").get<bool>());
}

TEST(Cli, NoiselessFitEvaluatesPerfectly) {
  TempDir tmp;
  ASSERT_EQ(gmr_cli({"simulate", "--n", "200", "--K", "2", "--p", "2", "--G", "5", "--sigma", "0",
                     "--delta-beta", "6", "--out", tmp.file("d.csv"), "--truth", tmp.file("t.json")}).code, 0);
  ASSERT_EQ(gmr_cli({"fit", tmp.file("d.csv"), "--K", "2", "--out", tmp.file("m.json")}).code, 0);
  ASSERT_EQ(gmr_cli({"predict", "--model", tmp.file("m.json"), "--data", tmp.file("d.csv"), "--out",
                     tmp.file("p.csv")}).code, 0);
  const auto r = gmr_cli({"evaluate", "--model", tmp.file("m.json"), "--truth", tmp.file("t.json"),
                          "--predictions", tmp.file("p.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = gmr::io::Json::parse(r.out);
  EXPECT_DOUBLE_EQ(m.at("nmi").get<double>(), 1.0);
  EXPECT_LT(m.at("beta_error").get<double>(), 1e-8);
  EXPECT_LT(m.at("rmse").get<double>(), 1e-6);
  EXPECT_EQ(r.out, gmr_cli({"evaluate", "--model", tmp.file("m.json"), "--truth", tmp.file("t.json"),
                            "--predictions", tmp.file("p.csv")}).out);
}

TEST(Cli, PredictFallbackPolicies) {
  TempDir tmp;
  ASSERT_EQ(gmr_cli(simulate_args(tmp.file("d.csv"), tmp.file("t.json"), "1")).code, 0);
  ASSERT_EQ(gmr_cli({"fit", tmp.file("d.csv"), "--K", "2", "--out", tmp.file("m.json")}).code, 0);
  write_file(tmp.file("new.csv"), "group,y,x1,x2\ng01,,0.5,1\nunseen,1,2,3\n");

  auto r = gmr_cli({"predict", "--model", tmp.file("m.json"), "--data", tmp.file("new.csv"), "--fallback", "error"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("UnknownGroup"), std::string::npos);

  r = gmr_cli({"predict", "--model", tmp.file("m.json"), "--data", tmp.file("new.csv"), "--fallback", "prior"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  const auto preds = gmr::io::read_predictions_csv(in);
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_FALSE(preds[0].used_fallback);
  EXPECT_FALSE(preds[0].y_true.has_value());
  EXPECT_TRUE(preds[1].used_fallback);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  TempDir tmp;
  write_file(tmp.file("sim.json"),
             R"({"n": 120, "K": 3, "p": 2, "G": 4, "sigma": 1.5, "delta_beta": 9, "seed": 4})");
  ASSERT_EQ(gmr_cli({"simulate", "--config", tmp.file("sim.json"), "--out", tmp.file("a.csv")}).code, 0);
  EXPECT_EQ(gmr::io::read_dataset_csv(tmp.file("a.csv")).num_groups(), 12);

  ASSERT_EQ(gmr_cli({"simulate", "--config", tmp.file("sim.json"), "--G", "2", "--out", tmp.file("b.csv")}).code, 0);
  EXPECT_EQ(gmr::io::read_dataset_csv(tmp.file("b.csv")).num_groups(), 6);

  write_file(tmp.file("bad.json"), R"({"n": 120, "bogus": 1})");
  EXPECT_EQ(gmr_cli({"simulate", "--config", tmp.file("bad.json")}).code, 2);
}

TEST(Cli, TooManyClustersWarns) {
  TempDir tmp;
  ASSERT_EQ(gmr_cli({"simulate", "--n", "40", "--K", "2", "--p", "2", "--G", "2", "--sigma", "1", "--delta-beta",
                     "10", "--out", tmp.file("d.csv")}).code, 0);
  const auto r = gmr_cli({"fit", tmp.file("d.csv"), "--K", "6", "--out", tmp.file("m.json")});
  EXPECT_NE(r.err.find("exceeds the number of groups"), std::string::npos);
  EXPECT_TRUE(r.code == 0 || r.code == 1);
}

TEST(Cli, SelectKWritesTable) {
  TempDir tmp;
  ASSERT_EQ(gmr_cli(simulate_args(tmp.file("d.csv"), tmp.file("t.json"), "2")).code, 0);
  const auto r = gmr_cli({"select-k", tmp.file("d.csv"), "--k-grid", "2,3", "--reps", "2", "--restarts", "2",
                          "--json", tmp.file("s.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("K,mean_rmse,sd_rmse\n0,", 0), 0u);
  const auto j = gmr::io::read_json_file(tmp.file("s.json"));
  EXPECT_EQ(j.at("best_k").get<int>(), 2);
  EXPECT_EQ(j.at("rmse_by_k").size(), 4u);
}

TEST(Cli, BenchmarkStreamsOrderedLines) {
  TempDir tmp;
  write_file(tmp.file("spec.json"),
             R"({"n": 100, "K": 2, "p": 2, "G": 10, "sigma": [2, 10], "delta_beta": 4, "n_reps": 3, "seed": 1,
                 "em": {"n_restarts": 2}})");
  const auto run = [&](const std::string& jobs, const std::string& out) {
    return gmr_cli({"benchmark", tmp.file("spec.json"), "--jobs", jobs, "--out", tmp.file(out), "--summary",
                    tmp.file(out + ".csv")});
  };
  ASSERT_EQ(run("1", "a.jsonl").code, 0);
  ASSERT_EQ(run("4", "b.jsonl").code, 0);
  EXPECT_EQ(slurp(tmp.file("a.jsonl")), slurp(tmp.file("b.jsonl")));
  EXPECT_EQ(slurp(tmp.file("a.jsonl.csv")), slurp(tmp.file("b.jsonl.csv")));
  std::istringstream lines(slurp(tmp.file("a.jsonl")));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const auto j = gmr::io::Json::parse(line);
    EXPECT_EQ(j.at("cell").get<int>(), count / 3);
    EXPECT_EQ(j.at("rep").get<int>(), count % 3);
    ++count;
  }
  EXPECT_EQ(count, 6);
  EXPECT_EQ(gmr_cli({"benchmark", tmp.file("spec.json"), "--reps", "1", "--out", tmp.file("c.jsonl")}).code, 0);
  const auto first_line = [](const std::string& text) { return text.substr(0, text.find('\n')); };
  EXPECT_EQ(first_line(slurp(tmp.file("c.jsonl"))), first_line(slurp(tmp.file("a.jsonl"))));
}
