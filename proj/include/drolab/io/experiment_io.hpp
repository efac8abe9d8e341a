#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "drolab/asymptotics.hpp"
#include "drolab/io/json_fields.hpp"

namespace drolab::io {

inline constexpr int kReportSchema = 1;

inline DataGenerator generator_from_json(const Json& j) {
  const std::string where = "generator";
  const GeneratorKind kind = generator_kind_from_string(text(field(j, "kind", where), where + ".kind"));
  const std::uint64_t seed = j.contains("seed") ? static_cast<std::uint64_t>(integer(j.at("seed"), where + ".seed")) : 0;
  switch (kind) {
    case GeneratorKind::uniform_box: {
      const auto dim = j.contains("dim") ? static_cast<Eigen::Index>(integer(j.at("dim"), where + ".dim")) : 1;
      const double nu = number(field(j, "nu", where), where + ".nu");
      DataGenerator g = DataGenerator::uniform_box(dim, nu, seed);
      if (j.contains("lower")) g.lower = vector(j.at("lower"), where + ".lower");
      if (j.contains("upper")) g.upper = vector(j.at("upper"), where + ".upper");
      g.validate();
      return g;
    }
    case GeneratorKind::discrete: {
      const Eigen::MatrixXd atoms = columns(field(j, "atoms", where), where + ".atoms");
      const Vec probs = vector(field(j, "probs", where), where + ".probs");
      const double nu = j.contains("nu") ? number(j.at("nu"), where + ".nu") : atoms.cwiseAbs().maxCoeff();
      return DataGenerator::discrete(atoms, probs, nu, seed);
    }
    case GeneratorKind::truncated_gaussian: {
      const Vec mean = vector(field(j, "mean", where), where + ".mean");
      Vec sd = vector(field(j, "sd", where), where + ".sd");
      if (sd.size() == 1 && mean.size() > 1) sd = Vec::Constant(mean.size(), sd[0]);
      return DataGenerator::truncated_gaussian(mean, sd, number(field(j, "nu", where), where + ".nu"), seed);
    }
  }
  throw ConfigError("unknown generator kind");
}

inline Json generator_to_json(const DataGenerator& g) {
  Json j{{"kind", to_string(g.kind)}, {"dim", g.dim}, {"nu", g.nu}, {"seed", g.seed}};
  switch (g.kind) {
    case GeneratorKind::uniform_box:
      j["lower"] = to_json(g.lower);
      j["upper"] = to_json(g.upper);
      break;
    case GeneratorKind::discrete:
      j["atoms"] = columns_to_json(g.atoms);
      j["probs"] = to_json(g.probs);
      break;
    case GeneratorKind::truncated_gaussian:
      j["mean"] = to_json(g.mean);
      j["sd"] = to_json(g.sd);
      break;
  }
  return j;
}

/// {"kind": "phi", "phi": "kl"|"chi2"|"tv"} or {"kind": "wasserstein", "p": 2, "norm": 2}.
inline Family family_from_json(const Json& j) {
  const std::string where = "family";
  const std::string kind = text(field(j, "kind", where), where + ".kind");
  if (kind == "phi") return Family::phi(builtin_phi(text(field(j, "phi", where), where + ".phi")));
  if (kind == "wasserstein") {
    const double p = number(field(j, "p", where), where + ".p");
    const double q = j.contains("norm") ? number(j.at("norm"), where + ".norm") : 2.0;
    return Family::wasserstein(WassersteinSpec(p, q));
  }
  throw ConfigError("field 'family.kind' must be 'phi' or 'wasserstein'");
}

inline Json family_to_json(const Family& f) {
  if (f.is_phi()) return Json{{"kind", "phi"}, {"phi", f.phi_function().name()}};
  const auto& s = f.wasserstein_spec();
  return Json{{"kind", "wasserstein"}, {"p", s.p()}, {"norm", s.norm_exponent()}};
}

inline ExperimentConfig config_from_json(const Json& j) {
  const std::string where = "config";
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  static const std::vector<std::string> known{"generator", "model", "family", "schedule", "n", "R", "seed", "jobs",
                                              "ks_draws", "solution", "push_forward_draws", "theta_star_set", "schema"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError("unknown config field '" + it.key() + "'");
    }
  }
  ExperimentConfig c;
  c.generator = generator_from_json(field(j, "generator", where));
  const Json& model = field(j, "model", where);
  if (model.is_string()) {
    c.model = model.get<std::string>();
  } else {
    c.model = text(field(model, "name", "model"), "model.name");
    if (model.contains("box")) {
      const Eigen::Index m = c.model == "logistic" ? c.generator.dim - 1 : c.generator.dim;
      c.theta_box = box(model.at("box"), m, "model.box");
    }
  }
  c.family = family_from_json(field(j, "family", where));
  const Json& sched = field(j, "schedule", where);
  c.beta = number(field(sched, "beta", "schedule"), "schedule.beta");
  c.r = number(field(sched, "r", "schedule"), "schedule.r");
  c.n = static_cast<Eigen::Index>(integer(field(j, "n", where), "n"));
  c.replications = static_cast<int>(integer(field(j, "R", where), "R"));
  if (j.contains("seed")) c.master_seed = static_cast<std::uint64_t>(integer(j.at("seed"), "seed"));
  if (j.contains("jobs")) c.jobs = static_cast<int>(integer(j.at("jobs"), "jobs"));
  if (j.contains("ks_draws")) c.ks_draws = static_cast<int>(integer(j.at("ks_draws"), "ks_draws"));
  if (j.contains("solution")) {
    if (!j.at("solution").is_boolean()) throw ConfigError("field 'solution' must be a boolean");
    c.solution = j.at("solution").get<bool>();
  }
  if (j.contains("push_forward_draws")) {
    c.push_forward_draws = static_cast<int>(integer(j.at("push_forward_draws"), "push_forward_draws"));
  }
  if (j.contains("theta_star_set")) {
    const Eigen::MatrixXd set = columns(j.at("theta_star_set"), "theta_star_set");
    for (Eigen::Index k = 0; k < set.cols(); ++k) c.theta_star_set.push_back(set.col(k));
  }
  c.schedule();
  return c;
}

inline Json config_to_json(const ExperimentConfig& c) {
  Json model{{"name", c.model}};
  if (c.theta_box) model["box"] = box_to_json(*c.theta_box);
  Json j{{"generator", generator_to_json(c.generator)},
         {"model", model},
         {"family", family_to_json(c.family)},
         {"schedule", Json{{"beta", c.beta}, {"r", c.r}}},
         {"n", c.n},
         {"R", c.replications},
         {"seed", c.master_seed},
         {"ks_draws", c.ks_draws},
         {"solution", c.solution},
         {"push_forward_draws", c.push_forward_draws}};
  if (!c.theta_star_set.empty()) {
    Json set = Json::array();
    for (const auto& t : c.theta_star_set) set.push_back(to_json(t));
    j["theta_star_set"] = set;
  }
  return j;
}

namespace detail {
inline Json summary_to_json(const SampleSummary& s) {
  return Json{{"mean", s.mean}, {"sd", s.sd}, {"p95_abs", s.p95_abs}, {"max_abs", s.max_abs}};
}
inline SampleSummary summary_from_json(const Json& j) {
  SampleSummary s;
  s.mean = number(field(j, "mean", "summary"), "summary.mean");
  s.sd = number(field(j, "sd", "summary"), "summary.sd");
  s.p95_abs = number(field(j, "p95_abs", "summary"), "summary.p95_abs");
  s.max_abs = number(field(j, "max_abs", "summary"), "summary.max_abs");
  return s;
}
inline LimitLaw::Kind law_kind_from_string(const std::string& s) {
  if (s == "normal") return LimitLaw::Kind::normal;
  if (s == "inf-of-correlated-normals") return LimitLaw::Kind::inf_of_normals;
  if (s == "point-mass") return LimitLaw::Kind::point_mass;
  throw ConfigError("unknown limit law kind '" + s + "'");
}
inline Regime regime_from_string(const std::string& s) {
  if (s == "sub-critical") return Regime::sub_critical;
  if (s == "critical") return Regime::critical;
  if (s == "super-critical") return Regime::super_critical;
  throw ConfigError("unknown regime '" + s + "'");
}
}  // namespace detail

/// Serialized report. Wall time is deliberately left out so identical runs give identical bytes.
inline Json report_to_json(const ExperimentReport& r) {
  Json law{{"kind", LimitLaw::kind_name(r.value_law.kind)},
           {"mean", r.value_law.mean},
           {"variance", r.value_law.variance},
           {"scaling_base", to_string(r.value_law.base)},
           {"scaling_exponent", r.value_law.scaling_exponent}};
  if (r.value_law.kind == LimitLaw::Kind::point_mass) law["point"] = r.value_law.point;
  if (r.value_law.kind == LimitLaw::Kind::inf_of_normals) {
    law["means"] = r.value_law.means;
    law["covariance"] = rows_to_json(r.value_law.covariance);
  }
  Json reps = Json::array();
  for (const auto& rec : r.replications) {
    Json e{{"index", rec.index}, {"seed", rec.seed}, {"failed", rec.failed}};
    if (rec.failed) {
      e["error"] = rec.error;
    } else {
      e["converged"] = rec.converged;
      e["dro_value"] = rec.dro_value;
      e["erm_value"] = rec.erm_value;
      e["value_error"] = rec.value_error;
      e["paired_error"] = rec.paired_error;
      e["erm_error"] = rec.erm_error;
      e["solution_error"] = to_json(rec.solution_error);
      if (rec.solution_error_alt) e["solution_error_alt"] = to_json(*rec.solution_error_alt);
    }
    reps.push_back(e);
  }
  Json j{{"schema", kReportSchema},
         {"config", config_to_json(r.config)},
         {"master_seed", r.config.master_seed},
         {"regime", to_string(r.regime)},
         {"scaling", Json{{"base", to_string(r.scaling_base)}, {"exponent", r.scaling_exponent}, {"factor", r.scaling}}},
         {"delta_n", r.delta_n},
         {"population", Json{{"value", r.population_value},
                             {"theta_star", to_json(r.theta_star)},
                             {"sigma2", r.sigma2},
                             {"rho", r.rho},
                             {"rho_gradient", to_json(r.rho_gradient)}}},
         {"failures", r.failures},
         {"nonconverged", r.nonconverged},
         {"valid", r.valid},
         {"value_law", law},
         {"value_errors", detail::summary_to_json(r.value_summary)},
         {"paired_errors", detail::summary_to_json(r.paired_summary)},
         {"erm_errors", detail::summary_to_json(r.erm_summary)},
         {"mean_z", r.mean_z},
         {"variance_ratio", r.variance_ratio},
         {"variance_z", r.variance_z},
         {"warnings", r.warnings},
         {"replications", reps}};
  if (r.ks) j["ks"] = Json{{"statistic", r.ks->statistic}, {"p_value", r.ks->p_value}};
  if (r.solution_mean.size() > 0) {
    Json sol{{"mean", to_json(r.solution_mean)}, {"variance", to_json(r.solution_variance)}};
    if (r.solution_law) {
      const auto& s = *r.solution_law;
      sol["law"] = Json{{"kind", s.kind == SolutionLimitLaw::Kind::normal ? "normal" : "point-mass"},
                        {"mean", to_json(s.mean)},
                        {"covariance", rows_to_json(s.covariance)},
                        {"bias", to_json(s.bias)},
                        {"jacobian", rows_to_json(s.jacobian)},
                        {"jacobian_linear", s.jacobian_linear},
                        {"analytic_covariance", rows_to_json(s.analytic_covariance)},
                        {"analytic_mean_minus", to_json(s.analytic_mean_minus)},
                        {"analytic_mean_plus", to_json(s.analytic_mean_plus)},
                        {"draws", s.draws}};
      sol["mean_z"] = to_json(r.solution_mean_z);
      sol["variance_ratio"] = to_json(r.solution_variance_ratio);
    }
    j["solution"] = sol;
  }
  return j;
}

/// Reads a serialized report back; the limit-law draws themselves are not stored.
inline ExperimentReport report_from_json(const Json& j) {
  const std::string where = "report";
  if (integer(field(j, "schema", where), "schema") != kReportSchema) throw ConfigError("unsupported report schema");
  ExperimentReport r;
  r.config = config_from_json(field(j, "config", where));
  r.regime = detail::regime_from_string(text(field(j, "regime", where), "regime"));
  const Json& sc = field(j, "scaling", where);
  r.scaling_base = text(field(sc, "base", "scaling"), "scaling.base") == "n" ? ScalingBase::n : ScalingBase::delta;
  r.scaling_exponent = number(field(sc, "exponent", "scaling"), "scaling.exponent");
  r.scaling = number(field(sc, "factor", "scaling"), "scaling.factor");
  r.delta_n = number(field(j, "delta_n", where), "delta_n");
  const Json& pop = field(j, "population", where);
  r.population_value = number(field(pop, "value", "population"), "population.value");
  r.theta_star = vector(field(pop, "theta_star", "population"), "population.theta_star");
  r.sigma2 = number(field(pop, "sigma2", "population"), "population.sigma2");
  r.rho = number(field(pop, "rho", "population"), "population.rho");
  r.rho_gradient = vector(field(pop, "rho_gradient", "population"), "population.rho_gradient");
  r.failures = static_cast<int>(integer(field(j, "failures", where), "failures"));
  r.nonconverged = static_cast<int>(integer(field(j, "nonconverged", where), "nonconverged"));
  r.valid = field(j, "valid", where).get<bool>();
  const Json& law = field(j, "value_law", where);
  r.value_law.kind = detail::law_kind_from_string(text(field(law, "kind", "value_law"), "value_law.kind"));
  r.value_law.mean = number(field(law, "mean", "value_law"), "value_law.mean");
  r.value_law.variance = number(field(law, "variance", "value_law"), "value_law.variance");
  r.value_law.base = text(field(law, "scaling_base", "value_law"), "value_law.scaling_base") == "n" ? ScalingBase::n : ScalingBase::delta;
  r.value_law.scaling_exponent = number(field(law, "scaling_exponent", "value_law"), "value_law.scaling_exponent");
  if (law.contains("point")) r.value_law.point = number(law.at("point"), "value_law.point");
  if (law.contains("means")) r.value_law.means = law.at("means").get<std::vector<double>>();
  if (law.contains("covariance")) r.value_law.covariance = rows(law.at("covariance"), "value_law.covariance");
  r.value_summary = detail::summary_from_json(field(j, "value_errors", where));
  r.paired_summary = detail::summary_from_json(field(j, "paired_errors", where));
  r.erm_summary = detail::summary_from_json(field(j, "erm_errors", where));
  r.mean_z = number(field(j, "mean_z", where), "mean_z");
  r.variance_ratio = number(field(j, "variance_ratio", where), "variance_ratio");
  r.variance_z = number(field(j, "variance_z", where), "variance_z");
  r.warnings = field(j, "warnings", where).get<std::vector<std::string>>();
  if (j.contains("ks")) {
    KsResult ks;
    ks.statistic = number(field(j.at("ks"), "statistic", "ks"), "ks.statistic");
    ks.p_value = number(field(j.at("ks"), "p_value", "ks"), "ks.p_value");
    r.ks = ks;
  }
  for (const Json& e : field(j, "replications", where)) {
    ReplicationRecord rec;
    rec.index = static_cast<int>(integer(field(e, "index", "replication"), "replication.index"));
    rec.seed = e.at("seed").get<std::uint64_t>();
    rec.failed = e.at("failed").get<bool>();
    if (rec.failed) {
      rec.error = e.value("error", std::string());
    } else {
      rec.converged = e.at("converged").get<bool>();
      rec.dro_value = number(e.at("dro_value"), "replication.dro_value");
      rec.erm_value = number(e.at("erm_value"), "replication.erm_value");
      rec.value_error = number(e.at("value_error"), "replication.value_error");
      rec.paired_error = number(e.at("paired_error"), "replication.paired_error");
      rec.erm_error = number(e.at("erm_error"), "replication.erm_error");
      rec.solution_error = vector(e.at("solution_error"), "replication.solution_error");
      if (e.contains("solution_error_alt")) rec.solution_error_alt = vector(e.at("solution_error_alt"), "replication.solution_error_alt");
    }
    r.replications.push_back(std::move(rec));
  }
  if (j.contains("solution")) {
    const Json& sol = j.at("solution");
    r.solution_mean = vector(field(sol, "mean", "solution"), "solution.mean");
    r.solution_variance = vector(field(sol, "variance", "solution"), "solution.variance");
    if (sol.contains("law")) {
      const Json& l = sol.at("law");
      SolutionLimitLaw s;
      s.kind = text(field(l, "kind", "solution.law"), "solution.law.kind") == "normal" ? SolutionLimitLaw::Kind::normal
                                                                                        : SolutionLimitLaw::Kind::point_mass;
      s.mean = vector(l.at("mean"), "solution.law.mean");
      s.covariance = rows(l.at("covariance"), "solution.law.covariance");
      s.bias = vector(l.at("bias"), "solution.law.bias");
      s.jacobian = rows(l.at("jacobian"), "solution.law.jacobian");
      s.jacobian_linear = l.at("jacobian_linear").get<bool>();
      s.analytic_covariance = rows(l.at("analytic_covariance"), "solution.law.analytic_covariance");
      s.analytic_mean_minus = vector(l.at("analytic_mean_minus"), "solution.law.analytic_mean_minus");
      s.analytic_mean_plus = vector(l.at("analytic_mean_plus"), "solution.law.analytic_mean_plus");
      s.draws = static_cast<int>(integer(l.at("draws"), "solution.law.draws"));
      s.base = r.scaling_base;
      s.scaling_exponent = r.scaling_exponent;
      r.solution_law = s;
      r.solution_mean_z = vector(sol.at("mean_z"), "solution.mean_z");
      r.solution_variance_ratio = vector(sol.at("variance_ratio"), "solution.variance_ratio");
    }
  }
  return r;
}

namespace detail {
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

/// One row per replication: index, seed, failed, value_error, paired_error, erm_error, solution_error_j...
inline void write_errors_csv(const ExperimentReport& r, std::ostream& os) {
  const Eigen::Index m = r.theta_star.size();
  os << "index,seed,failed,value_error,paired_error,erm_error";
  for (Eigen::Index j = 0; j < m; ++j) os << ",solution_error_" << j;
  os << '\n';
  for (const auto& rec : r.replications) {
    os << rec.index << ',' << rec.seed << ',' << (rec.failed ? 1 : 0);
    if (rec.failed) {
      os << ",,,";
      for (Eigen::Index j = 0; j < m; ++j) os << ',';
    } else {
      os << ',' << detail::g17(rec.value_error) << ',' << detail::g17(rec.paired_error) << ','
         << detail::g17(rec.erm_error);
      for (Eigen::Index j = 0; j < m; ++j) os << ',' << detail::g17(rec.solution_error[j]);
    }
    os << '\n';
  }
}

}  // namespace drolab::io
