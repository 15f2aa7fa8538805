#include "mfldp/errors.hpp"
#include "mfldp/harness.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mfldp;
using nlohmann::json;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfldp_harness_" + name);
  fs::remove_all(p);
  return p;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double binomial_pmf(int n, int k, double p) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                  (n - k) * std::log1p(-p));
}

}  // namespace

TEST_CASE("FNV-1a reference values", "[harness]") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
  CHECK(hex64(1) == "0000000000000001");
}

TEST_CASE("config parsing", "[harness]") {
  const auto single = ExperimentConfig::from_json({{"model", "const2"}, {"task", "simulate"}, {"params", {{"N", 5}}}});
  REQUIRE(single.tasks.size() == 1);
  CHECK(single.tasks[0].name == "simulate");
  CHECK(single.tasks[0].seed == 1);

  const auto multi = ExperimentConfig::from_json(
      {{"model", "const2"},
       {"seed", 9},
       {"tasks", {{{"task", "mkv"}}, {{"task", "mkv"}, {"seed", 4}}, {{"task", "qp"}, {"name", "x"}}}}});
  REQUIRE(multi.tasks.size() == 3);
  CHECK(multi.tasks[0].name == "mkv");
  CHECK(multi.tasks[1].name == "mkv-2");
  CHECK(multi.tasks[0].seed == 9);
  CHECK(multi.tasks[1].seed == 4);
  CHECK(multi.tasks[2].name == "x");

  CHECK_THROWS_AS(ExperimentConfig::from_json({{"task", "simulate"}}), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"model", "const2"}, {"task", "fly"}}), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"model", "const2"}, {"task", "mkv"}, {"colour", 1}}), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"model", "const2"}, {"tasks", json::array()}}), ValidationError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json({{"model", "const2"}, {"tasks", {{{"task", "mkv"}, {"name", "../up"}}}}}),
      ValidationError);
}

TEST_CASE("exit codes", "[harness]") {
  CHECK(exit_code_for(ValidationError("x")) == 2);
  CHECK(exit_code_for(ParseError("x", 0)) == 2);
  CHECK(exit_code_for(NumericalError("x")) == 3);
  CHECK(exit_code_for(UnsupportedDynamics("x")) == 3);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("stationary task matches the binomial law", "[harness]") {
  ExperimentConfig cfg = ExperimentConfig::from_json(
      {{"model", "const2"}, {"seed", 3}, {"task", "stationary"}, {"params", {{"N", 100}, {"sample", 5000.0}}}});
  cfg.out = scratch("stationary").string();
  const ExperimentOutcome res = run_experiment(cfg);
  REQUIRE(res.exit_code == 0);
  const json summary = read_json(fs::path(cfg.out) / "stationary" / "summary.json");
  const auto mode = summary["mode"].get<std::vector<int>>();
  CHECK(std::abs(mode[0] - 67) <= 2);
  CHECK(mode[0] + mode[1] == 100);

  std::ifstream in(fs::path(cfg.out) / "stationary" / "histogram.csv");
  std::string line;
  std::getline(in, line);
  double tv = 0.0;
  double mass = 0.0;
  std::vector<double> seen(101, 0.0);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      v.push_back(std::stod(cell));
    }
    seen[static_cast<std::size_t>(v[1])] = v.back();
    mass += v.back();
  }
  for (int k = 0; k <= 100; ++k) {
    tv += 0.5 * std::abs(seen[static_cast<std::size_t>(k)] - binomial_pmf(100, k, 1.0 / 3.0));
  }
  CHECK(mass == Approx(1.0).epsilon(1e-9));
  CHECK(tv <= 0.05);

  const json manifest = read_json(res.manifest);
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest["seeds"]["stationary"] == 3);
  CHECK(manifest["outputs"].contains("stationary/histogram.csv"));
  CHECK(manifest["config_hash"] == hex64(fnv1a64(cfg.to_json().dump())));
}

TEST_CASE("identical configs give identical outputs", "[harness]") {
  const json base = {{"model", "sis-bistable"},
                     {"seed", 5},
                     {"tasks",
                      {{{"task", "simulate"}, {"params", {{"N", 50}, {"horizon", 5.0}}}},
                       {{"task", "mkv"}, {"params", {{"mode", "equilibria"}}}},
                       {{"task", "qp"}, {"params", {{"from", "equilibrium:0"}, {"to", {0.4, 0.6}}, {"restarts", 2}}}},
                       {{"task", "action"}, {"params", {{"from", {0.2, 0.8}}, {"to", {0.7, 0.3}}, {"T", 2.0}}}}}}};
  ExperimentConfig a = ExperimentConfig::from_json(base);
  ExperimentConfig b = a;
  a.out = scratch("repro_a").string();
  b.out = scratch("repro_b").string();
  const ExperimentOutcome ra = run_experiment(a);
  const ExperimentOutcome rb = run_experiment(b);
  REQUIRE(ra.exit_code == 0);
  REQUIRE(rb.exit_code == 0);
  const json ma = read_json(ra.manifest);
  const json mb = read_json(rb.manifest);
  CHECK(ma["outputs"] == mb["outputs"]);
  CHECK(ma["outputs"].size() >= 8);
  for (const auto& [file, hash] : ma["outputs"].items()) {
    CHECK(slurp(fs::path(a.out) / file) == slurp(fs::path(b.out) / file));
  }
}

TEST_CASE("validation failure is reported with status 2", "[harness]") {
  const json model = {{"name", "stuck"},
                      {"states", 2},
                      {"edges", {{{"from", 0}, {"to", 1}, {"rate", "mu[1]"}}, {{"from", 1}, {"to", 0}, {"rate", "1"}}}}};
  ExperimentConfig cfg = ExperimentConfig::from_json(
      {{"model", model}, {"tasks", {{{"task", "validate"}}, {{"task", "simulate"}, {"params", {{"N", 5}}}}}}});
  cfg.out = scratch("invalid").string();
  const ExperimentOutcome res = run_experiment(cfg);
  CHECK(res.exit_code == 2);
  CHECK(res.tasks[0].status == 2);
  CHECK(res.tasks[1].status == 2);
  CHECK(fs::exists(fs::path(cfg.out) / "validate" / "validation.json"));
  const json manifest = read_json(res.manifest);
  CHECK(manifest["model_validation"]["a3_bounds"] == false);
  CHECK(manifest["exit_code"] == 2);
}

TEST_CASE("bad parameters and missing models", "[harness]") {
  ExperimentConfig cfg = ExperimentConfig::from_json(
      {{"model", "const2"},
       {"tasks",
        {{{"task", "simulate"}, {"params", {{"N", 5}, {"horizn", 1.0}}}},
         {{"task", "qp"}, {"params", {{"from", {0.5, 0.6, 0.1}}, {"to", "uniform"}}}},
         {{"task", "mkv"}, {"params", {{"mode", "integrate"}, {"horizon", 1.0}}}}}}});
  cfg.out = scratch("bad").string();
  const ExperimentOutcome res = run_experiment(cfg);
  CHECK(res.tasks[0].status == 2);
  CHECK(res.tasks[0].error.find("horizn") != std::string::npos);
  CHECK(res.tasks[1].status == 2);
  CHECK(res.tasks[2].status == 0);
  CHECK(res.exit_code == 2);

  ExperimentConfig missing = ExperimentConfig::from_json({{"model", "no-such-model"}, {"task", "mkv"}});
  missing.out = scratch("missing").string();
  CHECK(run_experiment(missing).exit_code == 2);
}
