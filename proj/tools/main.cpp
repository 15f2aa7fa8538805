#include "mfldp/errors.hpp"
#include "mfldp/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

// "0.2,0.8" -> [0.2, 0.8]; anything else ("uniform", "equilibrium:1") stays a string.
json point_arg(const std::string& s) {
  if (s.find_first_of("0123456789") == std::string::npos || s.rfind("equilibrium", 0) == 0) {
    return s;
  }
  json a = json::array();
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      a.push_back(std::stod(part, &used));
      if (used != part.size()) {
        throw std::invalid_argument(part);
      }
    } catch (const std::exception&) {
      throw mfldp::ValidationError("bad point '" + s + "'");
    }
  }
  return a;
}

// Subcommand options collected into task params; only options given on the command line are set.
struct TaskBuilder {
  std::string task;
  json fixed = json::object();
  std::vector<std::function<void(json&)>> setters;

  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    setters.push_back([opt, value, key](json& p) {
      if (opt->count() > 0) {
        p[key] = *value;
      }
    });
    return opt;
  }

  void point(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help,
             bool required = false) {
    auto value = std::make_shared<std::string>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    if (required) {
      opt->required();
    }
    setters.push_back([opt, value, key](json& p) {
      if (opt->count() > 0) {
        p[key] = point_arg(*value);
      }
    });
  }

  [[nodiscard]] json params() const {
    json p = fixed;
    for (const auto& s : setters) {
      s(p);
    }
    return p;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field jump processes: simulation, action functional, quasipotential and rate function"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string model = "const2";
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string config_file;
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Do not print the task summary");

  std::map<CLI::App*, TaskBuilder> builders;
  auto task_command = [&](CLI::App* parent, const std::string& name, const std::string& task, const std::string& help,
                          json fixed = json::object()) {
    CLI::App* sub = parent->add_subcommand(name, help);
    sub->add_option("-m,--model", model, "Built-in model name or model JSON file")->capture_default_str();
    sub->add_option("--seed", seed, "Seed")->capture_default_str();
    sub->add_option("-o,--out", out, "Output directory")->capture_default_str();
    TaskBuilder& b = builders[sub];
    b.task = task;
    b.fixed = std::move(fixed);
    return std::pair<CLI::App*, TaskBuilder*>{sub, &b};
  };

  {
    auto [c, b] = task_command(&app, "validate", "validate", "Check the model assumptions on a simplex grid");
    b->option<int>(c, "--resolution", "resolution", "Grid resolution (0: default)");
  }
  {
    auto [c, b] = task_command(&app, "simulate", "simulate", "Simulate the empirical-measure chain");
    b->option<int>(c, "-N", "N", "Number of particles")->required();
    b->option<double>(c, "--horizon", "horizon", "Time horizon");
    b->point(c, "--init", "init", "Initial measure: weights, 'uniform' or 'equilibrium:k'");
  }
  {
    auto [c, b] = task_command(&app, "stationary", "stationary", "Occupation histogram of the stationary chain");
    b->option<int>(c, "-N", "N", "Number of particles")->required();
    b->option<double>(c, "--burn-in", "burn_in", "Burn-in time (negative: 10 relaxation times)");
    b->option<double>(c, "--sample", "sample", "Sampling time");
    b->option<int>(c, "--replicas", "replicas", "Independent replicas");
    b->option<int>(c, "--cell-resolution", "cell_resolution", "Simplex cell resolution for large N");
  }
  {
    auto [c, b] = task_command(&app, "ldp-slope", "ldp-slope", "Slope of -log p_N(ball) against N");
    b->point(c, "--target", "target", "Ball centre", true);
    b->option<double>(c, "--radius", "radius", "L1 radius");
    b->option<std::vector<int>>(c, "--N", "N", "Particle counts");
    b->option<std::vector<double>>(c, "--sample", "sample", "Sampling time, one value or one per N");
    b->option<double>(c, "--burn-in", "burn_in", "Burn-in time");
    b->option<int>(c, "--replicas", "replicas", "Independent replicas");
  }
  {
    CLI::App* mkv = app.add_subcommand("mkv", "McKean-Vlasov flow");
    mkv->require_subcommand(1);
    auto [ci, bi] = task_command(mkv, "integrate", "mkv", "Integrate the flow", {{"mode", "integrate"}});
    bi->point(ci, "--init", "init", "Initial measure");
    bi->option<double>(ci, "--horizon", "horizon", "Time horizon");
    bi->option<double>(ci, "--dt", "dt", "Step size");
    auto [ce, be] = task_command(mkv, "equilibria", "mkv", "Catalogue equilibria", {{"mode", "equilibria"}});
    be->option<int>(ce, "--starts", "starts", "Random starting points");
    be->option<double>(ce, "--horizon", "horizon", "Integration time per start");
  }
  {
    CLI::App* action = app.add_subcommand("action", "Action functional");
    action->require_subcommand(1);
    auto [ce, be] = task_command(action, "eval", "action", "Cost of a path CSV (t,mu0,..)", {{"mode", "eval"}});
    be->option<std::string>(ce, "--path", "path", "Path CSV")->required();
    auto [cc, bc] =
        task_command(action, "construct", "action", "Constant-velocity controls between two points", {{"mode", "construct"}});
    bc->point(cc, "--from", "from", "Start measure", true);
    bc->point(cc, "--to", "to", "End measure", true);
    bc->option<double>(cc, "--T", "T", "Duration");
    bc->option<int>(cc, "--knots", "knots", "Knots per leg of the realized path");
  }
  {
    CLI::App* qp = app.add_subcommand("qp", "Quasipotential and stationary rate function");
    qp->require_subcommand(1);
    auto add_qp_options = [](CLI::App* c, TaskBuilder* b) {
      b->option<int>(c, "--K", "K", "Knots");
      b->option<int>(c, "--restarts", "restarts", "Perturbed restarts");
      b->option<double>(c, "--T-max", "T_max", "Largest duration");
    };
    auto [cc, bc] = task_command(qp, "compute", "qp", "Quasipotential between two points", {{"mode", "compute"}});
    bc->point(cc, "--from", "from", "Start measure", true);
    bc->point(cc, "--to", "to", "End measure", true);
    add_qp_options(cc, bc);
    auto [cf, bf] = task_command(qp, "fw-catalog", "qp", "Equilibrium classes and graph weights", {{"mode", "fw-catalog"}});
    add_qp_options(cf, bf);
    auto [cr, br] = task_command(qp, "rate", "qp", "Stationary rate function s(xi)", {{"mode", "rate"}});
    br->point(cr, "--xi", "xi", "Point", true);
    add_qp_options(cr, br);
  }
  {
    auto [c, b] = task_command(&app, "report", "report", "End-to-end checks: LLN, s(xi_0), relative entropy, slope");
    b->option<std::vector<double>>(c, "--slope-sample", "slope_sample", "Sampling time per N");
    b->option<int>(c, "--lln-seeds", "lln_seeds", "Seeds for the LLN check");
  }
  CLI::App* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("--config", config_file, "Config JSON")->required();
  std::string run_out;
  run->add_option("-o,--out", run_out, "Override the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    mfldp::ExperimentConfig cfg;
    if (run->parsed()) {
      cfg = mfldp::ExperimentConfig::load(config_file);
      if (!run_out.empty()) {
        cfg.out = run_out;
      }
    } else {
      const TaskBuilder* chosen = nullptr;
      for (const auto& [sub, b] : builders) {
        if (sub->parsed()) {
          chosen = &b;
        }
      }
      if (!chosen) {
        std::cerr << app.help();
        return 2;
      }
      cfg = mfldp::ExperimentConfig::from_json(
          {{"model", model}, {"seed", seed}, {"out", out}, {"task", chosen->task}, {"params", chosen->params()}});
    }
    const mfldp::ExperimentOutcome outcome = mfldp::run_experiment(cfg);
    for (const auto& t : outcome.tasks) {
      if (t.status != 0) {
        std::cerr << t.name << ": " << t.error << "\n";
      } else if (!quiet) {
        std::cout << t.summary.dump(2) << "\n";
      }
    }
    if (!quiet) {
      std::cerr << "manifest: " << outcome.manifest.string() << "\n";
    }
    return outcome.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mfldp::exit_code_for(e);
  }
}
