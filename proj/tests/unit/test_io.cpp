#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "drolab/io/experiment_io.hpp"
#include "drolab/io/measure_io.hpp"

using namespace drolab;
using io::Json;

namespace {

template <class F>
std::string config_error(F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "<no ConfigError>";
}

Json base_config() {
  return Json::parse(R"({
    "generator": {"kind": "uniform-box", "dim": 1, "nu": 1.0},
    "model": "mean-squared",
    "family": {"kind": "phi", "phi": "chi2"},
    "schedule": {"beta": 1.0, "r": 1.0},
    "n": 100, "R": 12, "seed": 5
  })");
}

}  // namespace

TEST(MeasureIo, JsonRoundTrip) {
  const EmpiricalMeasure mu((Eigen::MatrixXd(2, 3) << 0.1, -2.0, 3.5, 1.0, 0.0, 1e-7).finished(),
                            (Vec(3) << 0.2, 0.3, 0.5).finished());
  const EmpiricalMeasure back = io::measure_from_json(Json::parse(io::measure_to_json(mu).dump()));
  EXPECT_EQ(back.points(), mu.points());
  EXPECT_EQ(back.weights(), mu.weights());
}

TEST(MeasureIo, JsonDefaultsToUniformWeights) {
  const EmpiricalMeasure mu = io::measure_from_json(Json::parse(R"({"points": [[1], [2], [4], [5]]})"));
  EXPECT_EQ(mu.size(), 4);
  EXPECT_DOUBLE_EQ(mu.weights()[2], 0.25);
}

TEST(MeasureIo, CsvWithHeaderAndWeights) {
  std::istringstream in("x,y,weight\n0,1,0.125\n2,3,0.375\n\n4,5,0.5\n");
  const EmpiricalMeasure mu = io::measure_from_csv(in, "mem");
  ASSERT_EQ(mu.dim(), 2);
  ASSERT_EQ(mu.size(), 3);
  EXPECT_DOUBLE_EQ(mu.points()(1, 2), 5.0);
  EXPECT_DOUBLE_EQ(mu.weights()[1], 0.375);
  std::istringstream unnormalized("x,w\n0,1\n1,3\n");
  EXPECT_THROW(io::measure_from_csv(unnormalized, "mem"), ConfigError);
  std::istringstream flagged("0,0.25\n1,0.75\n");
  EXPECT_EQ(io::measure_from_csv(flagged, "mem", true).dim(), 1);
}

TEST(MeasureIo, CsvWithoutHeader) {
  std::istringstream in("1.5\n-2\n 3 \n");
  const EmpiricalMeasure mu = io::measure_from_csv(in, "mem");
  EXPECT_EQ(mu.dim(), 1);
  EXPECT_DOUBLE_EQ(mu.points()(0, 2), 3.0);
  EXPECT_NEAR(mu.weights()[0], 1.0 / 3.0, 1e-15);
}

TEST(MeasureIo, CsvErrorsCarryLocation) {
  std::istringstream ragged("1,2\n3\n");
  EXPECT_NE(config_error([&] { io::measure_from_csv(ragged, "d.csv"); }).find("d.csv:2"), std::string::npos);
  std::istringstream text("1\nabc\n");
  EXPECT_NE(config_error([&] { io::measure_from_csv(text, "d.csv"); }).find("non-numeric"), std::string::npos);
  std::istringstream empty("x\n");
  EXPECT_THROW(io::measure_from_csv(empty, "d.csv"), ConfigError);
  EXPECT_THROW(io::load_measure("/nonexistent/data.csv"), ConfigError);
}

TEST(ConfigIo, ParsesAllFields) {
  Json j = base_config();
  j["jobs"] = 2;
  j["ks_draws"] = 500;
  j["solution"] = false;
  j["theta_star_set"] = Json::parse("[[0.1], [-0.1]]");
  const ExperimentConfig c = io::config_from_json(j);
  EXPECT_EQ(c.model, "mean-squared");
  EXPECT_EQ(c.n, 100);
  EXPECT_EQ(c.replications, 12);
  EXPECT_EQ(c.master_seed, 5u);
  EXPECT_EQ(c.jobs, 2);
  EXPECT_EQ(c.ks_draws, 500);
  EXPECT_FALSE(c.solution);
  ASSERT_EQ(c.theta_star_set.size(), 2u);
  EXPECT_DOUBLE_EQ(c.theta_star_set[1][0], -0.1);
  EXPECT_TRUE(c.family.is_phi());
}

TEST(ConfigIo, RejectsUnknownKeysByName) {
  Json j = base_config();
  j["replications"] = 10;
  EXPECT_NE(config_error([&] { io::config_from_json(j); }).find("'replications'"), std::string::npos);
}

TEST(ConfigIo, MissingAndMistypedFieldsAreNamed) {
  Json j = base_config();
  j.erase("schedule");
  EXPECT_NE(config_error([&] { io::config_from_json(j); }).find("config.schedule"), std::string::npos);
  j = base_config();
  j["n"] = "many";
  EXPECT_NE(config_error([&] { io::config_from_json(j); }).find("'n'"), std::string::npos);
  j = base_config();
  j["family"] = Json::parse(R"({"kind": "wasserstein", "p": 1.0})");
  EXPECT_THROW(io::config_from_json(j), ConfigError);
  j = base_config();
  j["schedule"]["r"] = -1.0;
  EXPECT_THROW(io::config_from_json(j), ConfigError);
}

TEST(ConfigIo, WassersteinAndBoxedModel) {
  Json j = base_config();
  j["generator"] = Json::parse(R"({"kind": "uniform-box", "dim": 3, "nu": 2.0})");
  j["model"] = Json::parse(R"({"name": "logistic", "box": {"lower": [-1, -1], "upper": [1, 2]}})");
  j["family"] = Json::parse(R"({"kind": "wasserstein", "p": 2, "norm": 1.5})");
  const ExperimentConfig c = io::config_from_json(j);
  ASSERT_TRUE(c.theta_box);
  EXPECT_DOUBLE_EQ(c.theta_box->upper()[1], 2.0);
  EXPECT_DOUBLE_EQ(c.family.wasserstein_spec().norm_exponent(), 1.5);
  const ExperimentConfig again = io::config_from_json(io::config_to_json(c));
  EXPECT_EQ(io::config_to_json(again).dump(), io::config_to_json(c).dump());
}

TEST(ReportIo, RoundTrip) {
  ExperimentConfig c = io::config_from_json(base_config());
  c.push_forward_draws = 500;
  const ExperimentReport r = run_experiment(c);
  const Json j = io::report_to_json(r);
  const ExperimentReport back = io::report_from_json(Json::parse(j.dump()));
  EXPECT_EQ(io::report_to_json(back).dump(), j.dump());
  EXPECT_EQ(back.replications.size(), r.replications.size());
  EXPECT_EQ(back.value_summary.p95_abs, r.value_summary.p95_abs);
  ASSERT_TRUE(back.solution_law);
  EXPECT_EQ(back.solution_law->analytic_covariance, r.solution_law->analytic_covariance);
  EXPECT_FALSE(j.contains("wall_time_seconds"));
}

TEST(ReportIo, ErrorsCsvFormat) {
  ExperimentConfig c = io::config_from_json(base_config());
  c.replications = 3;
  c.solution = false;
  const ExperimentReport r = run_experiment(c);
  std::ostringstream os;
  io::write_errors_csv(r, os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "index,seed,failed,value_error,paired_error,erm_error,solution_error_0");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
    EXPECT_EQ(line.rfind(std::to_string(rows) + "," + std::to_string(r.replications[static_cast<std::size_t>(rows)].seed) + ",0,", 0), 0u);
    ++rows;
  }
  EXPECT_EQ(rows, 3);
  EXPECT_NEAR(std::stod(os.str().substr(os.str().find(",0,", os.str().find('\n')) + 3)), r.replications[0].value_error,
              1e-15 * (1.0 + std::abs(r.replications[0].value_error)));
}
