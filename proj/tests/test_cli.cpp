#include "coxlasso/dataset_io.hpp"
#include "coxlasso/harness.hpp"
#include "coxlasso/lasso.hpp"
#include "coxlasso/partial_likelihood.hpp"
#include "coxlasso/report_io.hpp"
#include "coxlasso/sim_config.hpp"

#include "helpers.hpp"

#include <json.hpp>

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

using namespace coxlasso;
using namespace testutil;
using nlohmann::ordered_json;

namespace {

const std::string kDir = "cli_test_artifacts";

std::string art(const std::string& name) { return kDir + "/" + name; }

// Runs the binary under test; stdout goes to stdout_path when given.
int run_cli(const std::string& args, const std::string& stdout_path = "") {
  const char* exe = std::getenv("COXLASSO_CLI");
  REQUIRE_MESSAGE(exe != nullptr, "COXLASSO_CLI must point at the binary");
  std::filesystem::create_directories(kDir);
  std::string cmd = std::string("\"") + exe + "\" " + args;
  if (stdout_path.empty()) {
    cmd += " > /dev/null 2>> " + art("stderr.log");
  } else {
    cmd += " > " + stdout_path + " 2>> " + art("stderr.log");
  }
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string write_sim_config(const std::string& name, int n, int p, std::uint64_t seed) {
  SimConfig cfg = basic_config(n, p, seed);
  cfg.beta_true[0] = 0.5;
  const std::string path = art(name);
  std::filesystem::create_directories(kDir);
  write_text_file(path, sim_config_to_text(cfg));
  return path;
}

ordered_json parse_file(const std::string& path) {
  return ordered_json::parse(read_text_file(path));
}

}  // namespace

TEST_CASE("cli simulate is deterministic and seed overridable") {
  const std::string cfg = write_sim_config("sim.cfg", 40, 2, 77);
  REQUIRE(run_cli("simulate --config " + cfg + " --out " + art("d1.txt") + " --format text") == 0);
  REQUIRE(run_cli("simulate --config " + cfg + " --out " + art("d2.txt") + " --format text") == 0);
  CHECK(read_text_file(art("d1.txt")) == read_text_file(art("d2.txt")));

  REQUIRE(run_cli("simulate --config " + cfg + " --out " + art("d3.txt") +
                  " --format text --seed 123") == 0);
  CHECK(read_text_file(art("d3.txt")) != read_text_file(art("d1.txt")));

  const ordered_json m = parse_file(art("d1.txt.manifest.json"));
  CHECK(m.at("subcommand") == "simulate");
  CHECK(m.at("seed") == 77);
  CHECK(m.at("outputs") == ordered_json::array({art("d1.txt")}));
  CHECK(m.at("inputs") == ordered_json::array({cfg}));
}

TEST_CASE("cli text and json dataset formats carry the same data") {
  const std::string cfg = write_sim_config("fmt.cfg", 35, 2, 81);
  REQUIRE(run_cli("simulate --config " + cfg + " --out " + art("fmt.txt") + " --format text") == 0);
  REQUIRE(run_cli("simulate --config " + cfg + " --out " + art("fmt.json") + " --format json") == 0);

  const Dataset a = load_dataset(art("fmt.txt"));
  const Dataset b = load_dataset(art("fmt.json"));
  CHECK(dataset_to_text(a) == dataset_to_text(b));

  REQUIRE(run_cli("loglik --dataset " + art("fmt.txt") + " --beta 0.3,-0.2 --grad --hess",
                  art("lk_text.json")) == 0);
  REQUIRE(run_cli("loglik --dataset " + art("fmt.json") + " --beta 0.3,-0.2 --grad --hess",
                  art("lk_json.json")) == 0);
  const ordered_json lt = parse_file(art("lk_text.json"));
  const ordered_json lj = parse_file(art("lk_json.json"));
  CHECK(lt == lj);

  // The printed value matches an in-process evaluation of the same dataset.
  Eigen::VectorXd beta(2);
  beta << 0.3, -0.2;
  const double value = neg_log_partial_likelihood(a, beta);
  CHECK(json_to_num(lt.at("value"), "value") == value);
  CHECK(lt.at("gradient").size() == 2);
  REQUIRE(lt.at("hessian").size() == 2);
  CHECK(lt.at("hessian").at(0).size() == 2);
}

TEST_CASE("cli exit codes distinguish usage and runtime failures") {
  const std::string cfg = write_sim_config("codes.cfg", 30, 2, 5);
  REQUIRE(run_cli("simulate --config " + cfg + " --out " + art("codes.txt") +
                  " --format text") == 0);

  // Usage problems: contradictory or missing arguments, unknown names.
  CHECK(run_cli("fit --dataset " + art("codes.txt") + " --lambda 0.1 --theoretical --out " +
                art("never.json")) == 2);
  CHECK(run_cli("path --dataset " + art("codes.txt") + " --out " + art("never.json")) == 2);
  CHECK(run_cli("no-such-subcommand") == 2);
  CHECK(run_cli("simulate --config " + cfg) == 2);  // --out is required
  CHECK(run_cli("verify --experiment not-an-experiment --config " + cfg + " --out " +
                art("never.json")) == 2);

  // Runtime problems: missing files, shape mismatches.
  CHECK(run_cli("loglik --dataset " + art("absent.txt") + " --beta 0.1,0.2") == 1);
  CHECK(run_cli("loglik --dataset " + art("codes.txt") + " --beta 0.1,0.2,0.3") == 1);
}

TEST_CASE("cli fit reports the solution and its provenance") {
  const std::string cfg = write_sim_config("fit.cfg", 50, 2, 19);
  REQUIRE(run_cli("simulate --config " + cfg + " --out " + art("fit.txt") + " --format text") == 0);

  REQUIRE(run_cli("fit --dataset " + art("fit.txt") + " --lambda 0.05 --out " +
                  art("fit_fixed.json")) == 0);
  const ordered_json doc = parse_file(art("fit_fixed.json"));
  CHECK(doc.at("lambda_mode") == "fixed");
  CHECK(json_to_num(doc.at("lambda"), "lambda") == 0.05);
  CHECK(doc.at("converged") == true);
  CHECK(doc.at("beta_hat").size() == 2);
  CHECK(doc.at("n") == 50);

  // The in-process solver with the same knobs lands on the same solution.
  const Dataset d = load_dataset(art("fit.txt"));
  SolverOptions opts;  // CLI defaults match the library defaults for tol/iters
  opts.tolerance = 1e-8;
  opts.max_iterations = 50000;
  const FitResult fit = fit_lasso(d, 0.05, opts);
  CHECK(json_to_num(doc.at("objective"), "objective") == fit.objective);

  REQUIRE(run_cli("fit --dataset " + art("fit.txt") + " --theoretical --xi 2 --eps 0.01 --out " +
                  art("fit_theo.json")) == 0);
  const ordered_json theo = parse_file(art("fit_theo.json"));
  CHECK(theo.at("lambda_mode") == "theoretical");
  CHECK(json_to_num(theo.at("lambda"), "lambda") == theoretical_lambda(50, 2, 1.0, 2.0, 0.01));

  const ordered_json m = parse_file(art("fit_fixed.manifest.json"));
  CHECK(m.at("subcommand") == "fit");
  CHECK(m.at("outputs") == ordered_json::array({art("fit_fixed.json")}));
}

TEST_CASE("cli path fits a geometric grid with a csv summary") {
  const std::string cfg = write_sim_config("path.cfg", 45, 3, 23);
  REQUIRE(run_cli("simulate --config " + cfg + " --out " + art("path.txt") +
                  " --format text") == 0);
  REQUIRE(run_cli("path --dataset " + art("path.txt") + " --auto 5 --out " +
                  art("path.json")) == 0);

  const ordered_json doc = parse_file(art("path.json"));
  REQUIRE(doc.at("fits").size() == 5);
  // The grid starts at the smallest penalty that zeroes the fit.
  const Dataset d = load_dataset(art("path.txt"));
  const double top = lambda_max(PartialLikelihood(d));
  CHECK(json_to_num(doc.at("fits").at(0).at("lambda"), "lambda") == doctest::Approx(top));
  for (const auto& entry : doc.at("fits").at(0).at("beta_hat")) {
    CHECK(json_to_num(entry, "beta") == 0.0);
  }

  const std::string csv = read_text_file(art("path.csv"));
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n' ? 1 : 0;
  CHECK(lines == 6);
  CHECK(csv.rfind("lambda,objective,kkt_residual,iterations,converged,nonzeros", 0) == 0);

  const ordered_json m = parse_file(art("path.manifest.json"));
  CHECK(m.at("outputs") ==
        ordered_json::array({art("path.json"), art("path.csv")}));
}

TEST_CASE("cli factors on an identity matrix") {
  std::filesystem::create_directories(kDir);
  write_text_file(art("identity.txt"), "1 0\n0 1\n");

  REQUIRE(run_cli("factors --sigma " + art("identity.txt") + " --support 0 --xi 2 --q 1,2",
                  art("factors.json")) == 0);
  const ordered_json doc = parse_file(art("factors.json"));
  CHECK(json_to_num(doc.at("kappa").at("value"), "kappa") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(json_to_num(doc.at("re").at("value"), "re") == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(doc.at("fq").size() == 2);
  for (const auto& entry : doc.at("fq")) {
    CHECK(json_to_num(entry.at("value"), "fq") > 0.0);
  }

  // With --out the run also records a manifest carrying the sampling seed.
  REQUIRE(run_cli("factors --sigma " + art("identity.txt") +
                  " --support 0 --xi 2 --q 1 --out " + art("factors_out.json")) == 0);
  const ordered_json m = parse_file(art("factors_out.manifest.json"));
  CHECK(m.at("subcommand") == "factors");
  CHECK(m.at("seed") == 0xC0FFEE);

  // Source selection is exclusive, and the capped matrix needs its inputs.
  CHECK(run_cli("factors --support 0 --xi 2") == 2);
  const std::string ds = art("codes.txt");  // may not exist; usage check fires first
  CHECK(run_cli("factors --sigma " + art("identity.txt") + " --dataset " + ds +
                " --support 0 --xi 2") == 2);
  CHECK(run_cli("factors --dataset " + ds + " --mcap 2 --support 0 --xi 2") == 2);
}

TEST_CASE("cli verify runs an experiment reproducibly") {
  HarnessConfig cfg;
  cfg.sim = basic_config(30, 2, 11);
  cfg.sim.beta_true[0] = 0.5;
  cfg.replications = 4;
  cfg.pairs = 3;
  cfg.directions = 2;
  cfg.factor_starts = 4;
  cfg.factor_samples = 1000;
  cfg.factor_local_iterations = 100;
  cfg.pop_replications = 20;
  std::filesystem::create_directories(kDir);
  const std::string cfg_path = art("harness.cfg");
  write_text_file(cfg_path, harness_config_to_text(cfg));

  REQUIRE(run_cli("verify --experiment basic-inequality --config " + cfg_path + " --out " +
                  art("v1.json")) == 0);
  REQUIRE(run_cli("verify --experiment basic-inequality --config " + cfg_path + " --out " +
                  art("v2.json")) == 0);
  REQUIRE(run_cli("verify --experiment basic-inequality --config " + cfg_path +
                  " --threads 4 --out " + art("v3.json")) == 0);
  CHECK(read_text_file(art("v1.json")) == read_text_file(art("v2.json")));
  CHECK(read_text_file(art("v1.json")) == read_text_file(art("v3.json")));
  CHECK(read_text_file(art("v1.csv")) == read_text_file(art("v3.csv")));

  const ordered_json doc = parse_file(art("v1.json"));
  CHECK(doc.at("pass") == true);
  CHECK(doc.at("records").size() == 4);

  const ordered_json m = parse_file(art("v1.manifest.json"));
  CHECK(m.at("subcommand") == "verify");
  CHECK(m.at("seed") == 11);
  CHECK(m.at("inputs") == ordered_json::array({cfg_path}));
  CHECK(m.at("outputs") == ordered_json::array({art("v1.json"), art("v1.csv")}));

  // --reps overrides the configured replication count.
  REQUIRE(run_cli("verify --experiment basic-inequality --config " + cfg_path +
                  " --reps 2 --out " + art("v4.json")) == 0);
  CHECK(parse_file(art("v4.json")).at("records").size() == 2);

  // --seed changes the draw.
  REQUIRE(run_cli("verify --experiment basic-inequality --config " + cfg_path +
                  " --seed 99 --out " + art("v5.json")) == 0);
  CHECK(read_text_file(art("v5.json")) != read_text_file(art("v1.json")));
}

TEST_CASE("cli verify exits nonzero when the experiment fails") {
  HarnessConfig cfg;
  cfg.sim = basic_config(30, 2, 13);
  cfg.sim.beta_true[0] = 0.5;
  cfg.replications = 3;
  // One iteration at a tiny tolerance cannot converge at a working penalty,
  // so every replication records a solver violation.
  cfg.lambda_mode = "fixed";
  cfg.lambda_fixed = 0.01;
  cfg.solver_max_iterations = 1;
  cfg.solver_tolerance = 1e-14;
  std::filesystem::create_directories(kDir);
  const std::string cfg_path = art("failing.cfg");
  write_text_file(cfg_path, harness_config_to_text(cfg));

  CHECK(run_cli("verify --experiment basic-inequality --config " + cfg_path + " --out " +
                art("vfail.json")) == 1);
  const ordered_json doc = parse_file(art("vfail.json"));
  CHECK(doc.at("pass") == false);
}
