#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct RunResult {
  int code = -1;
  std::string err;
};

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::path("/tmp/greedyreg_cli") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_config(const fs::path& path, const json& cfg) {
  std::ofstream out(path);
  out << cfg.dump(2) << "\n";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path errfile = dir / "stderr.log";
  const std::string cmd =
      std::string(CLI_BIN) + " " + args + " > /dev/null 2> " + errfile.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  if (status != -1 && WIFEXITED(status)) r.code = WEXITSTATUS(status);
  r.err = slurp(errfile);
  return r;
}

json rate_config(std::uint64_t seed) {
  json cfg;
  cfg["seed"] = seed;
  cfg["family"] = "minus";
  cfg["params"] = {{"gamma", 0.9}, {"p", 2.0}, {"q", 1.0}, {"m", 1.0}};
  cfg["n_values"] = {32, 64, 128};
  cfg["replications"] = 50;
  return cfg;
}

}  // namespace

TEST_CASE("cli rate: happy path, versioned outputs, byte-identical reruns") {
  auto dir = fresh_dir("rate_ok");
  write_config(dir / "cfg.json", rate_config(7));

  auto r1 = run_cli("rate --config " + (dir / "cfg.json").string() + " --out " +
                        (dir / "out1").string(),
                    dir);
  CHECK(r1.code == 0);

  const std::string csv = slurp(dir / "out1" / "report.csv");
  CHECK(csv.find("# greedyreg") == 0);
  CHECK(csv.find("csv v1") != std::string::npos);
  CHECK(csv.find("# config:") != std::string::npos);
  CHECK(csv.find("n,mean_regret,ci95,lower_bound") != std::string::npos);

  auto summary = json::parse(slurp(dir / "out1" / "summary.json"));
  CHECK(summary.at("tool").get<std::string>().find("greedyreg") == 0);
  CHECK(summary.at("command") == "rate");
  CHECK(summary.at("config").at("seed") == 7);
  auto res = summary.at("results");
  CHECK(res.at("family") == "minus");
  CHECK(res.at("replications") == 50);
  CHECK(res.at("n_values").size() == 3);
  CHECK(res.at("fitted_exponent").is_number());
  CHECK(res.at("lower_bound_violations") == 0);
  CHECK(res.at("boundary_flag") == true);

  auto r2 = run_cli("rate --config " + (dir / "cfg.json").string() + " --out " +
                        (dir / "out2").string(),
                    dir);
  CHECK(r2.code == 0);
  CHECK(slurp(dir / "out1" / "report.csv") == slurp(dir / "out2" / "report.csv"));
  CHECK(slurp(dir / "out1" / "summary.json") == slurp(dir / "out2" / "summary.json"));
}

TEST_CASE("cli rate: seed override and worker-count independence") {
  auto dir = fresh_dir("rate_seed");
  write_config(dir / "cfg.json", rate_config(7));

  auto r = run_cli("rate --config " + (dir / "cfg.json").string() + " --out " +
                       (dir / "o9").string() + " --seed 9",
                   dir);
  CHECK(r.code == 0);
  auto s9 = json::parse(slurp(dir / "o9" / "summary.json"));
  CHECK(s9.at("config").at("seed") == 9);

  auto w1 = run_cli("rate --config " + (dir / "cfg.json").string() + " --out " +
                        (dir / "w1").string() + " --workers 1",
                    dir);
  auto w3 = run_cli("rate --config " + (dir / "cfg.json").string() + " --out " +
                        (dir / "w3").string() + " --workers 3",
                    dir);
  CHECK(w1.code == 0);
  CHECK(w3.code == 0);
  auto j1 = json::parse(slurp(dir / "w1" / "summary.json"));
  auto j3 = json::parse(slurp(dir / "w3" / "summary.json"));
  CHECK(j1.at("results") == j3.at("results"));
}

TEST_CASE("cli rate: config errors exit with code 2") {
  auto dir = fresh_dir("rate_bad");

  json noseed = rate_config(7);
  noseed.erase("seed");
  write_config(dir / "noseed.json", noseed);
  auto r1 = run_cli("rate --config " + (dir / "noseed.json").string() + " --out " +
                        (dir / "o").string(),
                    dir);
  CHECK(r1.code == 2);
  CHECK(r1.err.find("config error") != std::string::npos);
  CHECK(r1.err.find("seed") != std::string::npos);

  json badpq = rate_config(7);
  badpq["params"] = {{"gamma", 0.9}, {"p", 0.5}, {"q", 0.8}, {"m", 1.0}};
  write_config(dir / "badpq.json", badpq);
  auto r2 = run_cli("rate --config " + (dir / "badpq.json").string() + " --out " +
                        (dir / "o").string(),
                    dir);
  CHECK(r2.code == 2);
  CHECK(r2.err.find("p >= q") != std::string::npos);

  json badfam = rate_config(7);
  badfam["family"] = "sideways";
  write_config(dir / "badfam.json", badfam);
  CHECK(run_cli("rate --config " + (dir / "badfam.json").string() + " --out " +
                    (dir / "o").string(),
                dir)
            .code == 2);

  json badalg = rate_config(7);
  badalg["algorithm"] = "psychic";
  write_config(dir / "badalg.json", badalg);
  CHECK(run_cli("rate --config " + (dir / "badalg.json").string() + " --out " +
                    (dir / "o").string(),
                dir)
            .code == 2);

  std::ofstream(dir / "mangled.json") << "{ not json";
  CHECK(run_cli("rate --config " + (dir / "mangled.json").string() + " --out " +
                    (dir / "o").string(),
                dir)
            .code == 2);

  CHECK(run_cli("rate --config " + (dir / "missing.json").string() + " --out " +
                    (dir / "o").string(),
                dir)
            .code == 2);
}

TEST_CASE("cli audit: clean panel passes, corrupted bound trips exit 4") {
  auto dir = fresh_dir("audit");
  json cfg;
  cfg["seed"] = 3;
  cfg["trials"] = 300;
  cfg["instances"] = 3;
  cfg["lattice_points"] = 400;
  write_config(dir / "cfg.json", cfg);

  auto ok = run_cli("audit --config " + (dir / "cfg.json").string() + " --out " +
                        (dir / "out").string(),
                    dir);
  CHECK(ok.code == 0);
  const std::string csv = slurp(dir / "out" / "report.csv");
  CHECK(csv.find("name,trials,violations,min_margin") != std::string::npos);
  auto summary = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(summary.at("results").at("total_violations") == 0);
  CHECK(summary.at("results").at("total_trials").get<std::size_t>() >= 300);

  auto rerun = run_cli("audit --config " + (dir / "cfg.json").string() + " --out " +
                           (dir / "out2").string(),
                       dir);
  CHECK(rerun.code == 0);
  CHECK(slurp(dir / "out" / "report.csv") == slurp(dir / "out2" / "report.csv"));

  json dirty = cfg;
  dirty["corrupt_bound"] = 0.5;
  write_config(dir / "dirty.json", dirty);
  auto bad = run_cli("audit --config " + (dir / "dirty.json").string() + " --out " +
                         (dir / "outbad").string(),
                     dir);
  CHECK(bad.code == 4);
  auto badsum = json::parse(slurp(dir / "outbad" / "summary.json"));
  CHECK(badsum.at("results").at("total_violations").get<std::size_t>() > 0);

  json empty = cfg;
  empty["lattice_points"] = 0;
  write_config(dir / "empty.json", empty);
  CHECK(run_cli("audit --config " + (dir / "empty.json").string() + " --out " +
                    (dir / "oe").string(),
                dir)
            .code == 2);
}

TEST_CASE("cli lemmas: oracle suite passes and negative controls fail loudly") {
  auto dir = fresh_dir("lemmas");
  json cfg;
  cfg["seed"] = 5;
  cfg["draws"] = 20000;
  cfg["trials"] = 4;
  write_config(dir / "cfg.json", cfg);

  auto ok = run_cli("lemmas --config " + (dir / "cfg.json").string() + " --out " +
                        (dir / "out").string(),
                    dir);
  CHECK(ok.code == 0);
  auto summary = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(summary.at("results").at("failures") == 0);
  CHECK(summary.at("results").at("oracles").size() >= 4);
  CHECK(summary.at("results").at("sign_power").size() == 3);
  const std::string csv = slurp(dir / "out" / "report.csv");
  CHECK(csv.find("name,trial,lhs,rhs,holds") != std::string::npos);
  CHECK(csv.find("sign-power") != std::string::npos);

  json zero = cfg;
  zero["rhs_scale"] = 0.0;
  write_config(dir / "zero.json", zero);
  auto bad = run_cli("lemmas --config " + (dir / "zero.json").string() + " --out " +
                         (dir / "outbad").string(),
                     dir);
  CHECK(bad.code == 4);

  json badh = cfg;
  badh["holder"] = {{"p", 1.5}, {"q", 1.5}};
  write_config(dir / "badh.json", badh);
  auto rh = run_cli("lemmas --config " + (dir / "badh.json").string() + " --out " +
                        (dir / "oh").string(),
                    dir);
  CHECK(rh.code == 2);
  CHECK(rh.err.find("1/p + 1/q") != std::string::npos);

  json badt = cfg;
  badt["truncation"] = {{"alpha", 0.25}};
  write_config(dir / "badt.json", badt);
  CHECK(run_cli("lemmas --config " + (dir / "badt.json").string() + " --out " +
                    (dir / "ot").string(),
                dir)
            .code == 2);
}

TEST_CASE("cli tv: density regularity report and config gates") {
  auto dir = fresh_dir("tv");
  json cfg;
  cfg["seed"] = 1;
  cfg["cells"] = 200;
  write_config(dir / "cfg.json", cfg);

  auto ok = run_cli("tv --config " + (dir / "cfg.json").string() + " --out " +
                        (dir / "out").string(),
                    dir);
  CHECK(ok.code == 0);
  auto summary = json::parse(slurp(dir / "out" / "summary.json"));
  auto rows = summary.at("results").at("densities");
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    const std::string name = row.at("density");
    if (name == "uniform") {
      CHECK(row.at("q_bar").get<double>() == doctest::Approx(1.0).epsilon(0.05));
      CHECK(row.at("regular") == true);
    } else if (name == "gaussian") {
      CHECK(row.at("q_bar").get<double>() == doctest::Approx(1.0).epsilon(0.05));
      CHECK(row.at("regular") == true);
    } else {
      CHECK(name == "atom");
      CHECK(row.at("regular") == false);
    }
  }
  const std::string csv = slurp(dir / "out" / "report.csv");
  CHECK(csv.find("density,h,tv") != std::string::npos);

  json scaled = cfg;
  scaled["mass_scale"] = 0.5;
  write_config(dir / "scaled.json", scaled);
  auto rs = run_cli("tv --config " + (dir / "scaled.json").string() + " --out " +
                        (dir / "os").string(),
                    dir);
  CHECK(rs.code == 2);
  CHECK(rs.err.find("mass") != std::string::npos);

  json unknown = cfg;
  unknown["densities"] = {"perlin"};
  write_config(dir / "unknown.json", unknown);
  CHECK(run_cli("tv --config " + (dir / "unknown.json").string() + " --out " +
                    (dir / "ou").string(),
                dir)
            .code == 2);
}

TEST_CASE("cli refuses to run without a subcommand or config") {
  auto dir = fresh_dir("args");
  CHECK(run_cli("", dir).code != 0);
  CHECK(run_cli("rate", dir).code != 0);
}
