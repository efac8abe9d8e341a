#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dro_lab_cli.hpp"

namespace fs = std::filesystem;
using dro_lab::Json;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "dro-lab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = dro_lab::dro_lab_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dro_lab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
    write("data.csv", "x\n1\n2\n3\n4\n");
    write("pair.csv", "x,w\n0,0.5\n1,0.5\n");
    write("gen.json", R"({"kind": "uniform-box", "dim": 1, "nu": 1.0})");
    write("exp.json", R"({"generator": {"kind": "uniform-box", "dim": 1, "nu": 1.0},
                          "model": "mean-squared", "family": {"kind": "phi", "phi": "chi2"},
                          "schedule": {"beta": 1.0, "r": 1.0}, "n": 80, "R": 10})");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }
  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, TotalVariationRadiusOutOfRange) {
  const CliRun r = invoke({"value", "--phi", "tv", "--delta", "3", "--data", path("data.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("delta must be in (0,2) for tv"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, TotalVariationValue) {
  const CliRun r = invoke({"value", "--phi", "tv", "--delta", "1", "--data", path("data.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(Json::parse(r.out).at("value").get<double>(), 3.75, 1e-8);
}

TEST_F(CliTest, ExpandAtZeroRadiusNeedsNoData) {
  const CliRun r = invoke({"expand", "--delta", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Json::parse(r.out), Json::parse(R"({"expansion": 0.0})"));
}

TEST_F(CliTest, ExpandChiSquare) {
  const CliRun r = invoke({"expand", "--phi", "chi2", "--delta", "0.2", "--data", path("data.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_NEAR(j.at("variance").get<double>(), 1.25, 1e-12);
  EXPECT_NEAR(j.at("expansion").get<double>(), std::sqrt(0.2 * 1.25), 1e-12);
}

TEST_F(CliTest, ExpandWasserstein) {
  const CliRun r = invoke({"expand", "--family", "wasserstein", "--p", "2", "--delta", "0.04", "--data", path("data.csv"),
                     "--loss", "linear@[3]"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(Json::parse(r.out).at("expansion").get<double>(), 0.2 * 3.0, 1e-12);
}

TEST_F(CliTest, ChiSquareValueAndDensity) {
  const CliRun r = invoke({"worst-case", "--phi", "chi2", "--delta", "0.04", "--data", path("pair.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_NEAR(j.at("value").get<double>(), 0.6, 1e-8);
  EXPECT_NEAR(j.at("density")[0].get<double>(), 0.8, 1e-6);
  EXPECT_NEAR(j.at("density")[1].get<double>(), 1.2, 1e-6);
}

TEST_F(CliTest, WassersteinValue) {
  const CliRun r = invoke({"value", "--family", "wasserstein", "--p", "2", "--delta", "0.25", "--data", path("data.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_NEAR(j.at("value").get<double>(), 3.0, 1e-8);
  EXPECT_NEAR(j.at("mean").get<double>(), 2.5, 1e-12);
}

TEST_F(CliTest, ErmAndSolve) {
  CliRun r = invoke({"erm", "--model", "mean-squared", "--data", path("data.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(Json::parse(r.out).at("theta")[0].get<double>(), 2.5, 1e-6);
  EXPECT_NEAR(Json::parse(r.out).at("value").get<double>(), 1.25, 1e-9);

  r = invoke({"solve", "--model", "mean-squared", "--phi", "chi2", "--delta", "0", "--data", path("data.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(Json::parse(r.out).at("value").get<double>(), 1.25, 1e-9);

  r = invoke({"solve", "--model", "mean-squared", "--phi", "chi2", "--delta", "0.1", "--data", path("data.csv"), "--out",
           path("solve.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const Json j = Json::parse(slurp(path("solve.json")));
  EXPECT_GT(j.at("value").get<double>(), 1.25);
  EXPECT_EQ(j.at("delta").get<double>(), 0.1);
}

TEST_F(CliTest, GeneratorDataSource) {
  const CliRun a = invoke({"value", "--phi", "kl", "--delta", "0.1", "--generator", path("gen.json"), "--n", "50", "--seed", "4"});
  const CliRun b = invoke({"value", "--phi", "kl", "--delta", "0.1", "--generator", path("gen.json"), "--n", "50", "--seed", "4"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const CliRun missing = invoke({"value", "--delta", "0.1", "--generator", path("gen.json"), "--n", "50"});
  EXPECT_EQ(missing.code, 2);
  const CliRun both = invoke({"value", "--delta", "0.1", "--generator", path("gen.json"), "--data", path("data.csv")});
  EXPECT_EQ(both.code, 2);
}

TEST_F(CliTest, ConfigurationErrors) {
  EXPECT_EQ(invoke({"value", "--bogus", "1"}).code, 2);
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"value", "--data", path("data.csv")}).code, 2);
  EXPECT_EQ(invoke({"value", "--delta", "-1", "--data", path("data.csv")}).code, 2);
  EXPECT_EQ(invoke({"value", "--phi", "hellinger", "--delta", "1", "--data", path("data.csv")}).code, 2);
  EXPECT_EQ(invoke({"value", "--family", "wasserstein", "--p", "1", "--delta", "1", "--data", path("data.csv")}).code, 2);
  EXPECT_EQ(invoke({"value", "--delta", "1", "--data", path("missing.csv")}).code, 2);
  const CliRun wrong = invoke({"value", "--delta", "1", "--data", path("data.csv"), "--loss", "linear@[1,2]"});
  EXPECT_EQ(wrong.code, 2);
  EXPECT_NE(wrong.err.find("theta has 2 entries"), std::string::npos);
}

TEST_F(CliTest, MalformedConfig) {
  write("bad.json", "{\"generator\": ");
  const CliRun r = invoke({"experiment", "--config", path("bad.json"), "--seed", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("malformed JSON"), std::string::npos) << r.err;
  write("unknown.json", R"({"generator": {"kind": "uniform-box", "nu": 1.0}, "model": "mean-squared",
                            "family": {"kind": "phi", "phi": "chi2"}, "schedule": {"beta": 1, "r": 1},
                            "n": 10, "R": 10, "colour": 1})");
  const CliRun u = invoke({"experiment", "--config", path("unknown.json"), "--seed", "1"});
  EXPECT_EQ(u.code, 2);
  EXPECT_NE(u.err.find("colour"), std::string::npos);
}

TEST_F(CliTest, ExperimentNeedsSeed) {
  const CliRun r = invoke({"experiment", "--config", path("exp.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--seed"), std::string::npos);
}

TEST_F(CliTest, ExperimentIsByteReproducible) {
  const CliRun a = invoke({"experiment", "--config", path("exp.json"), "--seed", "77", "--csv", path("a.csv")});
  const CliRun b = invoke({"experiment", "--config", path("exp.json"), "--seed", "77", "--jobs", "2", "--csv", path("b.csv")});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_FALSE(slurp(path("a.csv")).empty());
  const Json j = Json::parse(a.out);
  EXPECT_EQ(j.at("regime").get<std::string>(), "critical");
  EXPECT_EQ(j.at("config").at("seed").get<unsigned long long>(), 77u);
  EXPECT_NE(a.err.find("fewer than 100 replications"), std::string::npos);
}

TEST_F(CliTest, HelpListsEveryFlag) {
  const CliRun top = invoke({"--help"});
  EXPECT_EQ(top.code, 0);
  for (const char* s : {"value", "worst-case", "expand", "erm", "solve", "experiment"}) {
    EXPECT_NE(top.out.find(s), std::string::npos) << s;
  }
  const CliRun value = invoke({"value", "--help"});
  EXPECT_EQ(value.code, 0);
  for (const char* f : {"--family", "--phi", "--p", "--norm", "--delta", "--data", "--weighted", "--generator", "--n",
                        "--seed", "--loss", "--model", "--box", "--out"}) {
    EXPECT_NE(value.out.find(f), std::string::npos) << f;
  }
  const CliRun exp = invoke({"experiment", "--help"});
  for (const char* f : {"--config", "--out", "--csv", "--jobs", "--seed"}) {
    EXPECT_NE(exp.out.find(f), std::string::npos) << f;
  }
}
