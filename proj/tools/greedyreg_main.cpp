#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "greedyreg/analysis.hpp"

using json = nlohmann::ordered_json;
using namespace greedyreg;

namespace {

constexpr const char* kToolVersion = "greedyreg 0.1.0";

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("config: cannot open " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
  if (!cfg.is_object()) throw ContractError("config: top level must be an object");
  return cfg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericError("cannot write " + path.string());
  out << text;
}

void write_summary(const std::filesystem::path& out_dir, const std::string& command,
                   const json& cfg, json results) {
  json summary;
  summary["tool"] = kToolVersion;
  summary["command"] = command;
  summary["config"] = cfg;
  summary["results"] = std::move(results);
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
}

std::string csv_header(const json& cfg, const std::string& kind, const std::string& columns) {
  std::string s;
  s += std::string("# ") + kToolVersion + " csv v1: " + kind + "\n";
  s += "# config: " + cfg.dump() + "\n";
  s += columns + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// rate

int cmd_rate(const json& cfg, const std::filesystem::path& out_dir) {
  RateConfig rc;
  rc.seed = cfg.at("seed").get<std::uint64_t>();
  rc.family = hard::family_from_name(cfg.value("family", std::string("minus")));
  if (cfg.contains("params")) {
    const json& p = cfg.at("params");
    rc.params.gamma = p.value("gamma", rc.params.gamma);
    rc.params.p = p.value("p", rc.params.p);
    rc.params.q = p.value("q", rc.params.q);
    rc.params.m = p.value("m", rc.params.m);
  }
  if (cfg.contains("n_values")) {
    rc.n_values = cfg.at("n_values").get<std::vector<std::size_t>>();
  } else {
    const int lo = cfg.value("n_log2_min", 8), hi = cfg.value("n_log2_max", 16);
    if (lo < 1 || hi < lo || hi > 62)
      throw ContractError("config: need 1 <= n_log2_min <= n_log2_max <= 62");
    for (int k = lo; k <= hi; ++k) rc.n_values.push_back(std::size_t{1} << k);
  }
  rc.replications = cfg.value("replications", 2000);
  rc.workers = cfg.value("workers", 1);
  const std::string alg = cfg.value("algorithm", std::string("plugin"));
  if (alg == "plugin")
    rc.algorithm = hard::make_plugin_algorithm();
  else if (alg == "oracle")
    rc.algorithm = hard::make_oracle_algorithm();
  else
    throw ContractError("config: algorithm must be plugin or oracle");

  const RateReport rep = run_rate_experiment(rc);

  std::string csv = csv_header(cfg, "rate", "n,mean_regret,ci95,lower_bound");
  for (std::size_t i = 0; i < rep.n_values.size(); ++i) {
    csv += std::to_string(rep.n_values[i]) + "," + fmt_g(rep.mean_regret[i]) + "," +
           fmt_g(rep.ci95[i]) + "," + fmt_g(rep.lower_bound[i]) + "\n";
  }
  write_text(out_dir / "report.csv", csv);

  json res;
  res["family"] = rep.family;
  res["algorithm"] = rep.algorithm_name;
  res["algorithm_adapted"] = rep.algorithm_adapted;
  res["replications"] = rep.replications;
  res["n_values"] = rep.n_values;
  res["mean_regret"] = rep.mean_regret;
  res["ci95"] = rep.ci95;
  res["lower_bound"] = rep.lower_bound;
  res["lower_bound_violations"] = rep.lower_bound_violations;
  res["fitted_exponent"] = rep.fitted_exponent;
  res["fitted_stderr"] = rep.fitted_stderr;
  res["fit_points_used"] = rep.fit_points_used;
  res["fit_points_dropped"] = rep.fit_points_dropped;
  res["fit_degenerate"] = rep.fit_degenerate;
  res["theoretical_exponent"] = rep.theoretical_exponent;
  res["boundary_flag"] = rep.boundary_flag;
  write_summary(out_dir, "rate", cfg, std::move(res));
  return 0;
}

// ---------------------------------------------------------------------------
// audit

int cmd_audit(const json& cfg, const std::filesystem::path& out_dir) {
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  const auto trials = cfg.value("trials", std::size_t{10000});
  const auto instances = cfg.value("instances", std::size_t{20});
  const auto lattice = cfg.value("lattice_points", std::size_t{10000});
  const double slack = cfg.value("slack", 1e-9);
  const double corrupt = cfg.value("corrupt_bound", 0.0);

  const AuditSuite suite = run_audit_suite(trials, instances, lattice, slack, seed, corrupt);

  std::string csv = csv_header(cfg, "audit", "name,trials,violations,min_margin");
  for (const AuditReport& r : suite.reports) {
    csv += r.name + "," + std::to_string(r.trials) + "," + std::to_string(r.violation_count) +
           "," + fmt_g(r.min_margin) + "\n";
  }
  write_text(out_dir / "report.csv", csv);

  json res;
  res["total_trials"] = suite.total_trials;
  res["total_violations"] = suite.total_violations;
  json reports = json::array();
  for (const AuditReport& r : suite.reports) {
    json jr;
    jr["name"] = r.name;
    jr["trials"] = r.trials;
    jr["violations"] = r.violation_count;
    jr["min_margin"] = r.min_margin;
    jr["slack"] = r.slack;
    json samples = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(r.violations.size(), 5); ++i) {
      json v;
      v["inputs"] = r.violations[i].inputs;
      v["lhs"] = r.violations[i].lhs;
      v["rhs"] = r.violations[i].rhs;
      samples.push_back(std::move(v));
    }
    jr["violation_samples"] = std::move(samples);
    reports.push_back(std::move(jr));
  }
  res["reports"] = std::move(reports);
  write_summary(out_dir, "audit", cfg, std::move(res));

  if (suite.total_violations > 0) {
    std::fprintf(stderr, "audit: %zu violations detected\n", suite.total_violations);
    return 4;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// lemmas

int cmd_lemmas(const json& cfg, const std::filesystem::path& out_dir) {
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  const auto draws = cfg.value("draws", std::size_t{100000});
  const auto trials = cfg.value("trials", std::size_t{50});
  const double rhs_scale = cfg.value("rhs_scale", 1.0);
  if (trials == 0) throw ContractError("config: trials >= 1");

  const auto g_shifted = [](double m) {
    return Sampler([m](Rng& r) { return std::pow(0.5 + 0.5 * r.uniform(), m); });
  };
  const auto g_power = [](double m) {
    return Sampler([m](Rng& r) { return std::pow(r.uniform(), m); });
  };
  const Sampler unit = [](Rng& r) { return r.uniform(); };

  struct Row {
    std::string name;
    std::size_t trial;
    OracleResult result;
  };
  std::vector<Row> rows;
  std::size_t failures = 0;
  const auto run = [&](std::size_t slot, const std::function<OracleResult(std::uint64_t)>& fn) {
    for (std::size_t t = 0; t < trials; ++t) {
      OracleResult r = fn(derive_seed(seed, 20 + slot, t));
      if (!r.holds) ++failures;
      rows.push_back({r.name, t, std::move(r)});
    }
  };

  if (cfg.contains("truncation")) {
    const json& tc = cfg.at("truncation");
    const double m = tc.value("m", 2.0), alpha = tc.at("alpha").get<double>();
    const double M = tc.value("M", 1.0);
    const double u = tc.value("u", 0.1), v = tc.value("v", 0.001);
    run(0, [&](std::uint64_t s) {
      return truncation_lemma_oracle(g_power(m), M, m, alpha, u, v, draws, s, rhs_scale);
    });
  } else {
    run(0, [&](std::uint64_t s) {
      return truncation_lemma_oracle(g_power(2.0), 1.0, 2.0, 1.0, 0.1, 0.001, draws, s,
                                     rhs_scale);
    });
    run(1, [&](std::uint64_t s) {
      return truncation_lemma_oracle(g_power(1.0), 1.0, 1.0, 1.0, 0.05, 0.05, draws, s,
                                     rhs_scale);
    });
  }
  if (cfg.contains("inverse_moment")) {
    const json& im = cfg.at("inverse_moment");
    const double m = im.value("m", 2.0), alpha = im.at("alpha").get<double>();
    const double M = im.value("M", 1.0);
    run(2, [&](std::uint64_t s) {
      return inverse_moment_oracle(g_shifted(m), alpha, M, m, draws, s, rhs_scale);
    });
  } else {
    run(2, [&](std::uint64_t s) {
      return inverse_moment_oracle(g_shifted(2.0), 0.25, 1.0, 2.0, draws, s, rhs_scale);
    });
    run(3, [&](std::uint64_t s) {
      return inverse_moment_oracle(g_power(2.0), 0.25, 1.25, 2.0, draws, s, rhs_scale);
    });
  }
  if (cfg.contains("holder")) {
    const json& ho = cfg.at("holder");
    const double p = ho.at("p").get<double>(), q = ho.at("q").get<double>();
    run(4, [&](std::uint64_t s) {
      return generalized_holder_oracle(unit, unit, p, q, draws, s, rhs_scale);
    });
  } else {
    run(4, [&](std::uint64_t s) {
      return generalized_holder_oracle(unit, unit, 2.0, 2.0, draws, s, rhs_scale);
    });
    run(5, [&](std::uint64_t s) {
      return generalized_holder_oracle(unit, unit, 2.0,
                                       std::numeric_limits<double>::infinity(), draws, s,
                                       rhs_scale);
    });
    // Coupled pair X = Y = U^-0.3: the bound is met with exact equality.
    const PairSampler coupled = [](Rng& r) {
      const double x = std::pow(r.uniform(), -0.3);
      return std::make_pair(x, x);
    };
    run(6, [&](std::uint64_t s) {
      return generalized_holder_oracle(coupled, 2.0, 2.0, draws, s, rhs_scale);
    });
  }

  std::vector<SignPowerCheck> sign_rows;
  for (double q : {0.25, 0.5, 1.0}) {
    SignPowerCheck c = sign_power_check(q, draws, derive_seed(seed, 40, sign_rows.size()));
    if (!c.holds) ++failures;
    sign_rows.push_back(c);
  }

  std::string csv = csv_header(cfg, "lemmas", "name,trial,lhs,rhs,holds");
  for (const Row& r : rows) {
    csv += r.name + "," + std::to_string(r.trial) + "," + fmt_g(r.result.lhs) + "," +
           fmt_g(r.result.rhs) + "," + (r.result.holds ? "1" : "0") + "\n";
  }
  for (const SignPowerCheck& c : sign_rows) {
    csv += "sign-power-q" + fmt_g(c.q) + ",0," + fmt_g(c.max_ratio) + "," + fmt_g(c.bound) +
           "," + (c.holds ? "1" : "0") + "\n";
  }
  write_text(out_dir / "report.csv", csv);

  json res;
  res["oracle_trials"] = rows.size();
  res["failures"] = failures;
  json oracle_rows = json::array();
  for (const Row& r : rows) {
    json jr;
    jr["name"] = r.name;
    jr["trial"] = r.trial;
    jr["lhs"] = r.result.lhs;
    jr["rhs"] = r.result.rhs;
    jr["lhs_std_error"] = r.result.lhs_std_error;
    jr["rhs_std_error"] = r.result.rhs_std_error;
    jr["holds"] = r.result.holds;
    oracle_rows.push_back(std::move(jr));
  }
  res["oracles"] = std::move(oracle_rows);
  json sp = json::array();
  for (const SignPowerCheck& c : sign_rows) {
    json jr;
    jr["q"] = c.q;
    jr["max_ratio"] = c.max_ratio;
    jr["bound"] = c.bound;
    jr["pairs"] = c.pairs;
    jr["holds"] = c.holds;
    sp.push_back(std::move(jr));
  }
  res["sign_power"] = std::move(sp);
  write_summary(out_dir, "lemmas", cfg, std::move(res));

  if (failures > 0) {
    std::fprintf(stderr, "lemmas: %zu oracle failures\n", failures);
    return 4;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// tv

int cmd_tv(const json& cfg, const std::filesystem::path& out_dir) {
  (void)cfg.at("seed").get<std::uint64_t>();  // schema: seed mandatory on every command
  const int cells = cfg.value("cells", 400);
  const double rel_tol = cfg.value("rel_tol", 1e-4);
  const double mass_scale = cfg.value("mass_scale", 1.0);
  // The exponent fit needs magnitudes spanning two decades.
  const std::vector<double> h_values = cfg.value(
      "h_values", std::vector<double>{0.004, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4});
  const std::vector<std::string> densities = cfg.value(
      "densities", std::vector<std::string>{"uniform", "gaussian", "atom"});
  if (h_values.empty()) throw ContractError("config: h_values must be nonempty");

  orm::Arr direction(1);
  direction[0] = 1.0;

  std::string csv = csv_header(cfg, "tv", "density,h,tv");
  json per_density = json::array();
  for (const std::string& name : densities) {
    orm::DensityGrid grid;
    if (name == "uniform")
      grid = orm::uniform_density(0.0, 1.0, cells);
    else if (name == "gaussian")
      grid = orm::gaussian_density(0.0, 0.5, 3.0, cells);
    else if (name == "atom")
      grid = orm::atom_spike_density(0.0, 1.0, cells, 0.5, 0.5);
    else
      throw ContractError("config: unknown density " + name);
    if (mass_scale != 1.0) grid.values *= mass_scale;
    const double mass = grid.mass();
    if (std::abs(mass - 1.0) > 1e-3)
      throw ContractError("config: density " + name + " has mass " + fmt_g(mass) +
                          ", expected 1");
    const orm::TvFit fit = fit_tv_exponent(grid, h_values, direction, rel_tol);
    for (std::size_t k = 0; k < fit.h.size(); ++k)
      csv += name + "," + fmt_g(fit.h[k]) + "," + fmt_g(fit.tv[k]) + "\n";
    json jd;
    jd["density"] = name;
    jd["q_bar"] = fit.q_bar;
    jd["ell"] = fit.ell;
    jd["fit_stderr"] = fit.fit_stderr;
    jd["regular"] = fit.regular;
    per_density.push_back(std::move(jd));
  }
  write_text(out_dir / "report.csv", csv);

  json res;
  res["densities"] = std::move(per_density);
  write_summary(out_dir, "tv", cfg, std::move(res));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"greedy-regret experiment driver"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  int workers = 1;
  std::uint64_t seed_override = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (default: current)");
    sub->add_option("--workers", workers, "parallel replication workers");
    sub->add_option("--seed", seed_override, "override the config seed");
  };
  CLI::App* c_rate = app.add_subcommand("rate", "two-point regret rate experiment");
  CLI::App* c_audit = app.add_subcommand("audit", "inequality audits on hard instances");
  CLI::App* c_lemmas = app.add_subcommand("lemmas", "Monte Carlo lemma oracles");
  CLI::App* c_tv = app.add_subcommand("tv", "density shift-regularity checks");
  for (CLI::App* sub : {c_rate, c_audit, c_lemmas, c_tv}) add_common(sub);

  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();

  try {
    json cfg = load_config(config_path);
    if (sub->count("--seed") > 0) cfg["seed"] = seed_override;
    if (!cfg.contains("seed")) throw ContractError("config: seed is mandatory");
    if (!cfg.at("seed").is_number_unsigned())
      throw ContractError("config: seed must be a nonnegative integer");
    if (sub->count("--workers") > 0) cfg["workers"] = workers;

    std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);

    if (sub == c_rate) return cmd_rate(cfg, out);
    if (sub == c_audit) return cmd_audit(cfg, out);
    if (sub == c_lemmas) return cmd_lemmas(cfg, out);
    return cmd_tv(cfg, out);
  } catch (const ContractError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
