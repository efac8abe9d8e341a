#pragma once

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "drolab/drolab.hpp"
#include "drolab/io/experiment_io.hpp"
#include "drolab/io/measure_io.hpp"

namespace dro_lab {

using drolab::io::Json;

enum ExitCode : int { kOk = 0, kConfig = 2, kSolver = 3, kInvalidExperiment = 4 };

struct Options {
  std::string family = "phi";
  std::string phi = "kl";
  double p = 2.0;
  double norm = 2.0;
  std::optional<double> delta;
  std::string data;
  bool weighted = false;
  std::string generator;
  long long n = 0;
  std::optional<unsigned long long> seed;
  std::string loss;
  std::string model;
  std::string box;
  std::string config;
  std::string out;
  std::string csv;
  int jobs = 1;
};

inline std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("dro-lab", sink);
  logger->set_pattern("dro-lab [%l] %v");
  const char* env = std::getenv("DRO_LAB_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    logger->set_level(spdlog::level::err);
  } else if (level == "debug") {
    logger->set_level(spdlog::level::debug);
  } else {
    logger->set_level(spdlog::level::info);
    if (level != "info") logger->warn("DRO_LAB_LOG='{}' not recognized; using info", level);
  }
  return logger;
}

inline Json read_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw drolab::ConfigError("cannot open " + what + " '" + path + "'");
  try {
    Json j;
    in >> j;
    return j;
  } catch (const Json::parse_error& e) {
    throw drolab::ConfigError("malformed JSON in " + what + " '" + path + "': " + e.what());
  }
}

inline drolab::Family family_from(const Options& o) {
  if (o.family == "phi") return drolab::Family::phi(drolab::builtin_phi(o.phi));
  if (o.family == "wasserstein") return drolab::Family::wasserstein(drolab::WassersteinSpec(o.p, o.norm));
  throw drolab::ConfigError("--family must be 'phi' or 'wasserstein'");
}

inline double require_delta(const Options& o) {
  if (!o.delta) throw drolab::ConfigError("--delta is required");
  if (!(*o.delta >= 0.0)) throw drolab::DomainError("delta must be nonnegative");
  return *o.delta;
}

inline std::optional<drolab::EmpiricalMeasure> load_data(const Options& o, bool required) {
  const bool has_file = !o.data.empty();
  const bool has_gen = !o.generator.empty();
  if (has_file && has_gen) throw drolab::ConfigError("exactly one data source: give --data or --generator, not both");
  if (!has_file && !has_gen) {
    if (required) throw drolab::ConfigError("exactly one data source is required: --data or --generator");
    return std::nullopt;
  }
  if (has_file) return drolab::io::load_measure(o.data, o.weighted);
  if (o.n < 1) throw drolab::ConfigError("--generator needs --n >= 1");
  if (!o.seed) throw drolab::ConfigError("--generator needs --seed");
  const auto gen = drolab::io::generator_from_json(read_json_file(o.generator, "generator")).with_seed(*o.seed);
  return drolab::draw(gen, static_cast<Eigen::Index>(o.n));
}

struct LossSpec {
  std::string name;
  std::optional<drolab::Vec> theta;
};

/// "name", "name@theta.json", or "name@[1, 2]".
inline LossSpec parse_loss(const Options& o) {
  LossSpec s;
  std::string spec = o.loss;
  if (spec.empty()) spec = o.model;
  if (spec.empty()) return s;
  const auto at = spec.find('@');
  s.name = spec.substr(0, at);
  if (at == std::string::npos) return s;
  const std::string rest = spec.substr(at + 1);
  Json j;
  const auto first = rest.find_first_not_of(" \t");
  if (first != std::string::npos && (rest[first] == '[' || rest[first] == '-' || std::isdigit(static_cast<unsigned char>(rest[first])))) {
    try {
      j = Json::parse(rest);
    } catch (const Json::parse_error&) {
      j = read_json_file(rest, "theta file");
    }
  } else {
    j = read_json_file(rest, "theta file");
  }
  if (j.is_object() && j.contains("theta")) j = j.at("theta");
  s.theta = drolab::io::vector(j, "theta");
  return s;
}

inline std::optional<drolab::Box> parse_box(const Options& o, Eigen::Index dim) {
  if (o.box.empty()) return std::nullopt;
  const auto comma = o.box.find(',');
  if (comma == std::string::npos) throw drolab::ConfigError("--box must be LO,HI");
  try {
    const double lo = std::stod(o.box.substr(0, comma));
    const double hi = std::stod(o.box.substr(comma + 1));
    return drolab::Box::cube(dim, lo, hi);
  } catch (const std::invalid_argument&) {
    throw drolab::ConfigError("--box must be LO,HI with numeric bounds");
  }
}

inline drolab::LossModel model_from(const Options& o, const LossSpec& spec, Eigen::Index data_dim) {
  const std::string name = spec.name.empty() ? "linear" : spec.name;
  const Eigen::Index m = name == "logistic" ? data_dim - 1 : data_dim;
  return drolab::make_model(name, data_dim, parse_box(o, std::max<Eigen::Index>(m, 1)));
}

/// Parameter for value-type commands; the default loss is the first coordinate, l = x_1.
inline drolab::Vec theta_from(const LossSpec& spec, const drolab::LossModel& model) {
  if (spec.theta) {
    if (spec.theta->size() != model.param_dim()) {
      throw drolab::ConfigError("theta has " + std::to_string(spec.theta->size()) + " entries, model '" + model.name +
                                "' needs " + std::to_string(model.param_dim()));
    }
    return *spec.theta;
  }
  if (!spec.name.empty()) throw drolab::ConfigError("--loss needs a parameter: " + spec.name + "@theta.json");
  return drolab::Vec::Unit(model.param_dim(), 0);
}

inline void emit(const Json& j, const Options& o, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw drolab::ConfigError("cannot write '" + o.out + "'");
  f << text;
}

inline Json solution_json(const drolab::ErmSolution& s) {
  return Json{{"theta", drolab::io::to_json(s.theta)},
              {"value", s.value},
              {"gradient_norm", s.gradient_norm},
              {"projected", s.projected},
              {"converged", s.converged},
              {"derivative_free", s.derivative_free},
              {"warnings", s.warnings}};
}

inline Json value_json(const drolab::Family& family, const drolab::EmpiricalMeasure& mu, const drolab::LossModel& model,
                       const drolab::Vec& theta, double delta, bool worst_case) {
  Json j{{"family", family.is_phi() ? "phi" : "wasserstein"}, {"delta", delta}};
  if (family.is_phi()) {
    const drolab::Vec y = model.values(mu, theta);
    const auto r = drolab::phi_dro_value(mu.weights(), y, delta, family.phi_function());
    j["phi"] = family.phi_function().name();
    j["value"] = r.value;
    j["mean"] = r.mean;
    j["lambda"] = r.lambda_star ? Json(*r.lambda_star) : Json(nullptr);
    j["mu"] = r.mu_star;
    j["lambda_at_floor"] = r.lambda_at_floor;
    j["unique"] = r.unique;
    j["dual_gap_estimate"] = r.dual_gap_estimate;
    j["density"] = r.density ? drolab::io::to_json(*r.density) : Json(nullptr);
    return j;
  }
  const auto& spec = family.wasserstein_spec();
  const auto r = drolab::w_dro_value(mu, model.field(theta), delta, spec);
  j["p"] = spec.p();
  j["norm"] = spec.norm_exponent();
  j["value"] = r.value;
  j["mean"] = r.mean;
  j["lambda"] = r.lambda_star;
  j["inner_status"] = drolab::to_string(r.inner_status);
  j["degraded"] = r.degraded;
  j["search_box"] = drolab::io::box_to_json(r.search_box);
  if (worst_case && r.maximizers) j["maximizers"] = drolab::io::columns_to_json(*r.maximizers);
  return j;
}

inline int run_experiment_command(const Options& o, std::ostream& out, spdlog::logger& log) {
  if (o.config.empty()) throw drolab::ConfigError("experiment needs --config");
  if (!o.seed) throw drolab::ConfigError("experiment needs --seed; there is no time-based default");
  drolab::ExperimentConfig cfg = drolab::io::config_from_json(read_json_file(o.config, "config"));
  cfg.master_seed = *o.seed;
  cfg.jobs = o.jobs;
  log.info("experiment: n={}, R={}, jobs={}", cfg.n, cfg.replications, cfg.jobs);
  const drolab::ExperimentReport rep = drolab::run_experiment(cfg);
  for (const auto& w : rep.warnings) log.warn("{}", w);
  log.info("wall time {:.3f} s, {} failed replications", rep.wall_time_seconds, rep.failures);
  emit(drolab::io::report_to_json(rep), o, out);
  if (!o.csv.empty()) {
    std::ofstream f(o.csv, std::ios::binary);
    if (!f) throw drolab::ConfigError("cannot write '" + o.csv + "'");
    drolab::io::write_errors_csv(rep, f);
  }
  return rep.valid ? kOk : kInvalidExperiment;
}

inline int dispatch(const std::string& command, const Options& o, std::ostream& out, spdlog::logger& log) {
  if (command == "experiment") return run_experiment_command(o, out, log);
  const drolab::Family family = family_from(o);
  const LossSpec spec = parse_loss(o);

  if (command == "expand") {
    const double delta = require_delta(o);
    auto mu = load_data(o, delta > 0.0);
    if (delta == 0.0) {
      emit(Json{{"expansion", 0.0}}, o, out);
      return kOk;
    }
    const drolab::LossModel model = model_from(o, spec, mu->dim());
    const drolab::Vec theta = theta_from(spec, model);
    Json j{{"delta", delta}};
    if (family.is_phi()) {
      const auto m = drolab::weighted_moments(mu->weights(), model.values(*mu, theta));
      const double kappa = family.phi_function().kappa();
      j["expansion"] = drolab::phi_expansion(delta, m.variance, kappa);
      j["variance"] = m.variance;
      j["kappa"] = kappa;
    } else {
      j["expansion"] = drolab::w_expansion(*mu, model.x_gradients(*mu, theta), delta, family.wasserstein_spec());
    }
    emit(j, o, out);
    return kOk;
  }

  auto mu = load_data(o, true);
  const drolab::LossModel model = model_from(o, spec, mu->dim());
  if (command == "value" || command == "worst-case") {
    const double delta = require_delta(o);
    emit(value_json(family, *mu, model, theta_from(spec, model), delta, command == "worst-case"), o, out);
    return kOk;
  }
  if (command == "erm") {
    const auto s = drolab::erm_solve(model, *mu);
    emit(solution_json(s), o, out);
    return kOk;
  }
  if (command == "solve") {
    const double delta = require_delta(o);
    const auto s = drolab::dro_solve(model, *mu, family, delta);
    for (const auto& w : s.warnings) log.warn("{}", w);
    Json j = solution_json(s);
    j["delta"] = delta;
    j["family"] = family.name();
    emit(j, o, out);
    return kOk;
  }
  throw drolab::ConfigError("unknown subcommand '" + command + "'");
}

inline void add_family_flags(CLI::App* sub, Options& o) {
  sub->add_option("--family", o.family, "Ambiguity family: phi or wasserstein")->check(CLI::IsMember({"phi", "wasserstein"}));
  sub->add_option("--phi", o.phi, "Divergence generator: kl, chi2 or tv");
  sub->add_option("--p", o.p, "Wasserstein order p > 1");
  sub->add_option("--norm", o.norm, "Ground-norm exponent in (1, inf)");
  sub->add_option("--delta", o.delta, "Ambiguity radius delta >= 0");
}

inline void add_data_flags(CLI::App* sub, Options& o) {
  sub->add_option("--data", o.data, "Data file: .json measure or CSV (one point per row)");
  sub->add_flag("--weighted", o.weighted, "Treat the last CSV column as weights");
  sub->add_option("--generator", o.generator, "Generator JSON to draw data from (needs --n and --seed)");
  sub->add_option("--n", o.n, "Sample size for --generator");
  sub->add_option("--seed", o.seed, "Seed for --generator");
  sub->add_option("--loss", o.loss, "Loss as MODEL@theta.json or MODEL@[..]; default linear@[1,0,...]");
  sub->add_option("--model", o.model, "Model name: mean-squared, linear or logistic");
  sub->add_option("--box", o.box, "Parameter box LO,HI applied to every coordinate");
  sub->add_option("--out", o.out, "Write the JSON result here instead of stdout");
}

/// Entry point shared by the executable and the tests.
inline int dro_lab_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto log = make_logger(err);
  Options o;
  CLI::App app{"Distributionally robust values, estimators and asymptotic experiments", "dro-lab"};
  app.require_subcommand(1);
  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {{"value", "Worst-case expectation of the loss at a fixed parameter"},
                      {"worst-case", "Worst-case density (phi) or displaced support points (Wasserstein)"},
                      {"expand", "First-order robustness premium"},
                      {"erm", "Empirical risk minimizer over the parameter box"},
                      {"solve", "Distributionally robust estimator over the parameter box"}};
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_family_flags(sub, o);
    add_data_flags(sub, o);
  }
  CLI::App* exp = app.add_subcommand("experiment", "Monte Carlo study of the scaled errors against their limit laws");
  exp->add_option("--config", o.config, "Experiment config JSON")->required();
  exp->add_option("--out", o.out, "Report JSON path (default stdout)");
  exp->add_option("--csv", o.csv, "Per-replication error CSV path");
  exp->add_option("--jobs", o.jobs, "Parallel replications")->check(CLI::PositiveNumber);
  exp->add_option("--seed", o.seed, "Master seed (required)");

  std::vector<std::string> args;
  for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    log->error("{}", e.what());
    return kConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, o, out, *log);
  } catch (const drolab::ConfigError& e) {
    log->error("{}", e.what());
    return kConfig;
  } catch (const drolab::DomainError& e) {
    log->error("{}", e.what());
    return kConfig;
  } catch (const drolab::OracleMisuse& e) {
    log->error("{}", e.what());
    return kConfig;
  } catch (const drolab::SolverError& e) {
    log->error("solver failure: {}", e.what());
    return kSolver;
  } catch (const std::exception& e) {
    log->error("solver failure: {}", e.what());
    return kSolver;
  }
}

}  // namespace dro_lab
