#include "mfldp/harness.hpp"

#include "mfldp/action.hpp"
#include "mfldp/builtin_models.hpp"
#include "mfldp/errors.hpp"
#include "mfldp/mckean_vlasov.hpp"
#include "mfldp/model_io.hpp"
#include "mfldp/parallel.hpp"
#include "mfldp/particle_sim.hpp"
#include "mfldp/quasipotential.hpp"
#include "format.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mfldp {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json jnum(double x) {
  if (std::isfinite(x)) {
    return x;
  }
  return detail::format_double(x);
}

json jvec(const Vector& v) {
  json a = json::array();
  for (double x : v) {
    a.push_back(jnum(x));
  }
  return a;
}

json jmat(const Matrix& M) {
  json a = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    a.push_back(jvec(M.row(i).transpose()));
  }
  return a;
}

std::string csv_row(std::initializer_list<double> head, const Vector& tail = Vector()) {
  std::string s;
  bool first = true;
  for (double x : head) {
    s += (first ? "" : ",") + detail::format_double(x);
    first = false;
  }
  for (double x : tail) {
    s += (first ? "" : ",") + detail::format_double(x);
    first = false;
  }
  return s;
}

std::string mu_header(std::size_t r, const std::string& prefix = "mu") {
  std::string s;
  for (std::size_t k = 0; k < r; ++k) {
    s += "," + prefix + std::to_string(k);
  }
  return s;
}

// Parameter access with defaults; unknown keys are rejected by finish().
class Params {
 public:
  Params(const json& j, std::string task) : j_(j.is_null() ? json::object() : j), task_(std::move(task)) {
    if (!j_.is_object()) {
      throw ValidationError(task_ + ": params must be an object");
    }
  }

  [[nodiscard]] bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  [[nodiscard]] const json& raw(const std::string& key) {
    if (!has(key)) {
      throw ValidationError(task_ + ": missing parameter '" + key + "'");
    }
    return j_.at(key);
  }

  template <class T>
  [[nodiscard]] T get(const std::string& key, T fallback) {
    return has(key) ? convert<T>(key) : fallback;
  }

  template <class T>
  [[nodiscard]] T require(const std::string& key) {
    (void)raw(key);
    return convert<T>(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.contains(key)) {
        throw ValidationError(task_ + ": unknown parameter '" + key + "'");
      }
    }
  }

  [[nodiscard]] const std::string& task() const noexcept { return task_; }

 private:
  template <class T>
  T convert(const std::string& key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(task_ + ": parameter '" + key + "': " + e.what());
    }
  }

  json j_;
  std::string task_;
  std::set<std::string> used_;
};

std::vector<double> number_list(const json& j, const std::string& what) {
  try {
    if (j.is_number()) {
      return {j.get<double>()};
    }
    return j.get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ValidationError(what + " must be a number or a list of numbers");
  }
}

// A simplex point: a list of weights, "uniform", "equilibrium" or "equilibrium:k"
// (the k-th stable equilibrium).
class PointResolver {
 public:
  PointResolver(const Model& m, std::uint64_t seed) : m_(m), seed_(seed) {}

  Vector operator()(const json& j, const std::string& what) {
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      if (s == "uniform") {
        return SimplexPoint::uniform(m_.r()).weights();
      }
      if (s.rfind("equilibrium", 0) == 0) {
        std::size_t k = 0;
        if (s.size() > 11) {
          if (s[11] != ':') {
            throw ValidationError(what + ": bad point '" + s + "'");
          }
          try {
            k = std::stoul(s.substr(12));
          } catch (const std::exception&) {
            throw ValidationError(what + ": bad point '" + s + "'");
          }
        }
        const auto pts = catalog().stable_points();
        if (k >= pts.size()) {
          throw ValidationError(what + ": model has " + std::to_string(pts.size()) + " stable equilibria");
        }
        return pts[k].weights();
      }
      throw ValidationError(what + ": bad point '" + s + "'");
    }
    const auto w = number_list(j, what);
    if (w.size() != m_.r()) {
      throw ValidationError(what + ": expected " + std::to_string(m_.r()) + " weights");
    }
    try {
      return SimplexPoint(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()))).weights();
    } catch (const std::invalid_argument& e) {
      throw ValidationError(what + ": " + e.what());
    }
  }

  const EquilibriumCatalog& catalog() {
    if (!catalog_) {
      EquilibriumOptions eo;
      eo.seed = seed_;
      catalog_ = find_equilibria(m_, eo);
    }
    return *catalog_;
  }

 private:
  const Model& m_;
  std::uint64_t seed_;
  std::optional<EquilibriumCatalog> catalog_;
};

class Outputs {
 public:
  Outputs(fs::path dir, std::vector<std::string>& files) : dir_(std::move(dir)), files_(files) {}

  std::ofstream open(const std::string& name) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot write " + (dir_ / name).string());
    }
    files_.push_back(name);
    return out;
  }

  void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << "\n"; }

 private:
  fs::path dir_;
  std::vector<std::string>& files_;
};

json validation_json(const ValidationReport& v) {
  return {{"passed", v.passed()},     {"a1_irreducible", v.a1}, {"a2_lipschitz", v.a2}, {"a3_bounds", v.a3},
          {"c_hat", jnum(v.c_hat)},   {"C_hat", jnum(v.C_hat)}, {"lipschitz", jnum(v.lipschitz)},
          {"resolution", v.resolution}, {"grid_points", v.grid_points}, {"notes", v.notes}};
}

json catalog_json(const EquilibriumCatalog& c) {
  json eq = json::array();
  for (const auto& e : c.equilibria) {
    json ev = json::array();
    for (const auto& z : e.eigenvalues) {
      ev.push_back({jnum(z.real()), jnum(z.imag())});
    }
    eq.push_back({{"point", jvec(e.point.weights())},
                  {"stability", to_string(e.stability)},
                  {"eigenvalues", ev},
                  {"residual", jnum(e.residual)}});
  }
  return {{"equilibria", eq},
          {"l", c.l()},
          {"unresolved", c.unresolved},
          {"horizon", jnum(c.horizon)},
          {"starts", c.starts}};
}

json fw_json(const FWCatalog& fw) {
  json reps = json::array();
  for (const auto& r : fw.reps) {
    reps.push_back(jvec(r));
  }
  json graphs = json::array();
  for (const auto& g : fw.weights.best_graph) {
    graphs.push_back(g);
  }
  return {{"equilibria", catalog_json(fw.catalog)},
          {"l", fw.l()},
          {"representatives", reps},
          {"Vtilde", jmat(fw.Vtilde)},
          {"V", jmat(fw.V)},
          {"W", jvec(fw.weights.W)},
          {"s", jvec(fw.weights.s)},
          {"graph_counts", fw.weights.graph_counts},
          {"best_graph", graphs},
          {"warnings", fw.warnings}};
}

json slope_json(const SlopeEstimate& e) {
  return {{"N", e.N},
          {"p_hat", [&] {
             json a = json::array();
             for (double p : e.p_hat) {
               a.push_back(jnum(p));
             }
             return a;
           }()},
          {"one_sided", e.one_sided},
          {"slope", jnum(e.slope)},
          {"intercept", jnum(e.intercept)},
          {"slope_stderr", jnum(e.slope_stderr)},
          {"ci_low", jnum(e.ci_low)},
          {"ci_high", jnum(e.ci_high)},
          {"lower_bound", jnum(e.lower_bound)}};
}

void write_slope_csv(std::ostream& out, const SlopeEstimate& e) {
  out << "N,p_hat,sample_time,ball_entries\n";
  for (std::size_t k = 0; k < e.N.size(); ++k) {
    out << e.N[k] << "," << detail::format_double(e.p_hat[k]) << "," << detail::format_double(e.sample_time[k]) << ","
        << (k < e.ball_entries.size() ? e.ball_entries[k] : 0) << "\n";
  }
}

QuasipotentialOptions qp_options(Params& p, std::uint64_t seed) {
  QuasipotentialOptions q;
  q.K = p.get("K", q.K);
  q.T_min = p.get("T_min", q.T_min);
  q.T_max = p.get("T_max", q.T_max);
  q.golden_iterations = p.get("golden_iterations", q.golden_iterations);
  q.restarts = p.get("restarts", q.restarts);
  q.restart_scale = p.get("restart_scale", q.restart_scale);
  q.seed = seed;
  if (q.K < 2) {
    throw ValidationError(p.task() + ": K must be at least 2");
  }
  return q;
}

FWOptions fw_options(Params& p, std::uint64_t seed) {
  FWOptions f;
  f.vtilde.qp = qp_options(p, seed);
  f.equilibria.seed = seed;
  f.equilibria.starts = p.get("starts", f.equilibria.starts);
  f.check_omega = p.get("check_omega", f.check_omega);
  f.vtilde.penalty_weight = p.get("penalty_weight", f.vtilde.penalty_weight);
  f.vtilde.exclusion_radius = p.get("exclusion_radius", f.vtilde.exclusion_radius);
  return f;
}

LatticePoint lattice_init(Params& p, PointResolver& points, std::size_t r, int N) {
  if (p.has("init_counts")) {
    const auto counts = p.require<std::vector<int>>("init_counts");
    if (counts.size() != r) {
      throw ValidationError(p.task() + ": init_counts needs " + std::to_string(r) + " entries");
    }
    try {
      LatticePoint lp(counts);
      if (lp.N != N) {
        throw ValidationError(p.task() + ": init_counts must sum to N");
      }
      return lp;
    } catch (const std::invalid_argument& e) {
      throw ValidationError(p.task() + ": init_counts: " + e.what());
    }
  }
  const Vector mu = points(p.has("init") ? p.raw("init") : json("uniform"), p.task() + ": init");
  return LatticePoint::nearest(SimplexPoint(mu), N);
}

int positive_N(Params& p) {
  const int N = p.require<int>("N");
  if (N < 1) {
    throw ValidationError(p.task() + ": N must be positive");
  }
  return N;
}

json task_validate(const Model& m, Params& p, Outputs& out) {
  const ValidationReport v = validate_model(m, p.get("resolution", 0));
  p.finish();
  const json j = validation_json(v);
  out.write_json("validation.json", j);
  if (!v.passed()) {
    std::string notes;
    for (const auto& n : v.notes) {
      notes += (notes.empty() ? "" : "; ") + n;
    }
    throw ValidationError("model '" + m.name() + "' failed validation: " + notes);
  }
  return j;
}

json task_simulate(const Model& m, Params& p, Outputs& out, std::uint64_t seed, PointResolver& points) {
  const int N = positive_N(p);
  const double horizon = p.get("horizon", 10.0);
  const LatticePoint init = lattice_init(p, points, m.r(), N);
  p.finish();
  if (!(horizon >= 0.0)) {
    throw ValidationError("simulate: horizon must be nonnegative");
  }
  const Trajectory tr = simulate(m, N, init, horizon, seed);
  auto f = out.open("trajectory.csv");
  tr.write_csv(f, m.edges());
  const LatticePoint last = tr.state(tr.events());
  return {{"N", N},
          {"horizon", jnum(horizon)},
          {"seed", seed},
          {"events", tr.events()},
          {"initial_counts", init.counts},
          {"final_counts", last.counts},
          {"final_measure", jvec(last.as_vector())}};
}

json task_stationary(const Model& m, Params& p, Outputs& out, std::uint64_t seed, PointResolver& points) {
  const int N = positive_N(p);
  StationaryOptions o;
  o.seed = seed;
  o.burn_in = p.get("burn_in", o.burn_in);
  o.sample = p.get("sample", o.sample);
  o.replicas = p.get("replicas", o.replicas);
  o.cell_resolution = p.get("cell_resolution", o.cell_resolution);
  if (p.has("init") || p.has("init_counts")) {
    o.init = lattice_init(p, points, m.r(), N);
  }
  p.finish();
  if (!(o.sample > 0.0) || o.replicas < 1) {
    throw ValidationError("stationary: need sample > 0 and replicas >= 1");
  }
  const double burn_in = o.burn_in >= 0.0 ? o.burn_in : default_burn_in(m);
  o.burn_in = burn_in;
  const OccupationMeasure occ = stationary_histogram(m, N, o);
  auto f = out.open("histogram.csv");
  occ.write_csv(f);
  const auto mode = occ.mode();
  Vector mode_measure(static_cast<Eigen::Index>(mode.size()));
  const int total = occ.exact_lattice() ? N : occ.cell_resolution();
  for (std::size_t i = 0; i < mode.size(); ++i) {
    mode_measure[static_cast<Eigen::Index>(i)] = static_cast<double>(mode[i]) / total;
  }
  return {{"N", N},
          {"seed", seed},
          {"burn_in", jnum(burn_in)},
          {"sample", jnum(o.sample)},
          {"replicas", o.replicas},
          {"horizon", jnum(occ.horizon())},
          {"exact_lattice", occ.exact_lattice()},
          {"cell_resolution", occ.cell_resolution()},
          {"cells", occ.entries().size()},
          {"mode", mode},
          {"mode_measure", jvec(mode_measure)}};
}

json task_ldp_slope(const Model& m, Params& p, Outputs& out, std::uint64_t seed, PointResolver& points) {
  const Vector target = points(p.raw("target"), "ldp-slope: target");
  const double radius = p.get("radius", 0.05);
  const auto N_list = p.get("N", std::vector<int>{50, 100, 200, 400});
  SlopeOptions o;
  o.seed = seed;
  o.burn_in = p.get("burn_in", o.burn_in);
  o.replicas = p.get("replicas", o.replicas);
  if (p.has("sample")) {
    o.sample = number_list(p.raw("sample"), "ldp-slope: sample");
  }
  p.finish();
  if (!(radius > 0.0)) {
    throw ValidationError("ldp-slope: radius must be positive");
  }
  SlopeEstimate e;
  try {
    e = ldp_slope(m, SimplexPoint(target), radius, N_list, o);
  } catch (const std::invalid_argument& err) {
    throw ValidationError(std::string("ldp-slope: ") + err.what());
  }
  auto f = out.open("slope.csv");
  write_slope_csv(f, e);
  json j = slope_json(e);
  j["target"] = jvec(target);
  j["radius"] = jnum(radius);
  j["seed"] = seed;
  return j;
}

json task_mkv(const Model& m, Params& p, Outputs& out, std::uint64_t seed, PointResolver& points) {
  const auto mode = p.get<std::string>("mode", "integrate");
  if (mode == "integrate") {
    const Vector init = points(p.has("init") ? p.raw("init") : json("uniform"), "mkv: init");
    const double horizon = p.get("horizon", 10.0);
    const double dt = p.get("dt", 0.01);
    p.finish();
    if (!(horizon > 0.0) || !(dt > 0.0)) {
      throw ValidationError("mkv: horizon and dt must be positive");
    }
    const OdePath path = integrate(m, SimplexPoint(init), horizon, dt);
    auto f = out.open("path.csv");
    path.write_csv(f);
    return {{"mode", mode},
            {"init", jvec(init)},
            {"horizon", jnum(horizon)},
            {"dt", jnum(dt)},
            {"steps", path.times.size() - 1},
            {"final", jvec(path.points.back())},
            {"max_clip", jnum(path.max_clip)},
            {"max_halvings", path.max_halvings}};
  }
  if (mode == "equilibria") {
    EquilibriumOptions eo;
    eo.seed = seed;
    eo.starts = p.get("starts", eo.starts);
    eo.horizon = p.get("horizon", eo.horizon);
    eo.dt = p.get("dt", eo.dt);
    const bool omega = p.get("omega", true);
    p.finish();
    const EquilibriumCatalog c = find_equilibria(m, eo);
    json j = catalog_json(c);
    if (omega) {
      const OmegaLimitReport r = omega_limit_check(m, c);
      j["omega"] = {{"flagged", r.flagged},
                    {"starts", r.starts},
                    {"offending", r.offending_starts.size()},
                    {"max_endpoint_distance", jnum(r.max_endpoint_distance)},
                    {"max_endpoint_speed", jnum(r.max_endpoint_speed)}};
    }
    out.write_json("catalog.json", j);
    j["mode"] = mode;
    return j;
  }
  throw ValidationError("mkv: unknown mode '" + mode + "' (integrate | equilibria)");
}

json task_action(const Model& m, Params& p, Outputs& out, PointResolver& points) {
  const auto mode = p.get<std::string>("mode", "construct");
  if (mode == "eval") {
    const auto file = p.require<std::string>("path");
    const double max_substep = p.get("max_substep", 0.0);
    p.finish();
    std::ifstream in(file);
    if (!in) {
      throw ValidationError("action: cannot read path file '" + file + "'");
    }
    const PathGrid path = PathGrid::read_csv(in);
    if (path.r() != m.r()) {
      throw ValidationError("action: path has " + std::to_string(path.r()) + " states, model has " +
                            std::to_string(m.r()));
    }
    const PathCost c = path_cost(m, path, {}, max_substep);
    auto f = out.open("segments.csv");
    f << "k,t0,t1,cost_rate\n";
    for (std::size_t k = 0; k < c.segment_cost.size(); ++k) {
      f << k << "," << csv_row({path.times[k], path.times[k + 1], c.segment_cost[k]}) << "\n";
      if (c.infeasible_segment && *c.infeasible_segment == k) {
        break;
      }
    }
    json j = {{"mode", mode},
              {"cost", jnum(c.cost)},
              {"floor_cost", jnum(c.floor_cost)},
              {"flux", jnum(c.flux)},
              {"segments", path.segments()},
              {"finite", c.finite()},
              {"diagnosis", c.diagnosis}};
    if (c.infeasible_segment) {
      j["infeasible_segment"] = *c.infeasible_segment;
    }
    return j;
  }
  if (mode == "construct") {
    const Vector from = points(p.raw("from"), "action: from");
    const Vector to = points(p.raw("to"), "action: to");
    const double T = p.get("T", 1.0);
    const int knots = p.get("knots", 40);
    p.finish();
    if (!(T > 0.0) || knots < 1) {
      throw ValidationError("action: need T > 0 and knots >= 1");
    }
    const Construction c = constant_velocity_controls(m, from, to, T);
    const PathGrid realized = realized_path(c.controls, knots);
    const PathCost pc = path_cost(m, realized);
    {
      auto f = out.open("controls.csv");
      c.controls.write_csv(f);
    }
    {
      auto f = out.open("path.csv");
      realized.write_csv(f);
    }
    return {{"mode", mode},
            {"from", jvec(from)},
            {"to", jvec(to)},
            {"T", jnum(T)},
            {"legs", c.controls.segments.size()},
            {"cost_bound", jnum(c.cost_bound)},
            {"leg_bounds", [&] {
               json a = json::array();
               for (double b : c.leg_bounds) {
                 a.push_back(jnum(b));
               }
               return a;
             }()},
            {"path_cost", jnum(pc.cost)},
            {"C", jnum(c.C)},
            {"c", jnum(c.c)}};
  }
  throw ValidationError("action: unknown mode '" + mode + "' (eval | construct)");
}

json qp_json(const QuasipotentialResult& r) {
  json costs = json::array();
  for (double c : r.restart_costs) {
    costs.push_back(jnum(c));
  }
  return {{"V", jnum(r.V)},
          {"T", jnum(r.T)},
          {"penalty", jnum(r.penalty)},
          {"restart_costs", costs},
          {"restart_spread", jnum(r.restart_spread)},
          {"at_T_max", r.at_T_max},
          {"warning", r.warning}};
}

json task_qp(const Model& m, Params& p, Outputs& out, std::uint64_t seed, PointResolver& points) {
  const auto mode = p.get<std::string>("mode", "compute");
  if (mode == "compute") {
    const Vector from = points(p.raw("from"), "qp: from");
    const Vector to = points(p.raw("to"), "qp: to");
    const QuasipotentialOptions q = qp_options(p, seed);
    p.finish();
    const QuasipotentialResult r = quasipotential(m, from, to, q);
    {
      auto f = out.open("path.csv");
      r.path.write_csv(f);
    }
    {
      auto f = out.open("trace.csv");
      f << "T,cost\n";
      for (const auto& [T, c] : r.T_trace) {
        f << csv_row({T, c}) << "\n";
      }
    }
    json j = qp_json(r);
    j["mode"] = mode;
    j["from"] = jvec(from);
    j["to"] = jvec(to);
    return j;
  }
  if (mode == "fw-catalog" || mode == "rate") {
    std::vector<Vector> xis;
    if (mode == "rate") {
      const json& x = p.raw("xi");
      if (x.is_array() && !x.empty() && (x[0].is_array() || x[0].is_string())) {
        for (const auto& e : x) {
          xis.push_back(points(e, "qp: xi"));
        }
      } else {
        xis.push_back(points(x, "qp: xi"));
      }
    }
    const FWOptions fo = fw_options(p, seed);
    p.finish();
    const FWCatalog fw = fw_catalog(m, fo);
    const json cat = fw_json(fw);
    out.write_json("catalog.json", cat);
    if (mode == "fw-catalog") {
      json j = cat;
      j["mode"] = mode;
      return j;
    }
    auto f = out.open("rates.csv");
    f << mu_header(m.r(), "xi").substr(1) << ",s\n";
    json rates = json::array();
    for (const auto& xi : xis) {
      const double s = rate_function(m, fw, xi);
      f << csv_row({}, xi) << "," << detail::format_double(s) << "\n";
      rates.push_back({{"xi", jvec(xi)}, {"s", jnum(s)}});
    }
    return {{"mode", mode}, {"l", fw.l()}, {"s_offsets", jvec(fw.weights.s)}, {"rates", rates}};
  }
  throw ValidationError("qp: unknown mode '" + mode + "' (compute | fw-catalog | rate)");
}

double kl_divergence(const Vector& xi, const Vector& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    if (xi[i] > 0.0) {
      h += xi[i] * std::log(xi[i] / p[i]);
    }
  }
  return h;
}

json gate(const std::string& name, std::optional<bool> pass, json value, const std::string& criterion) {
  return {{"name", name}, {"pass", pass ? json(*pass) : json(nullptr)}, {"value", std::move(value)},
          {"criterion", criterion}};
}

// LLN, s(xi_0) = 0, relative-entropy agreement (constant-rate models) and the
// simulated slope against the computed rate function.
json task_report(const Model& m, Params& p, Outputs& out, std::uint64_t seed, PointResolver& points) {
  const int lln_N = p.get("lln_N", 1000);
  const double lln_horizon = p.get("lln_horizon", 10.0);
  const int lln_seeds = p.get("lln_seeds", 20);
  const double lln_tolerance = p.get("lln_tolerance", 0.08);
  const int lln_times = p.get("lln_times", 201);
  const Vector target = points(p.has("slope_target") ? p.raw("slope_target") : json("uniform"), "report: slope_target");
  const double radius = p.get("slope_radius", 0.05);
  const auto slope_N = p.get("slope_N", std::vector<int>{50, 100, 200, 400});
  const std::vector<double> slope_sample =
      p.has("slope_sample") ? number_list(p.raw("slope_sample"), "report: slope_sample")
                            : std::vector<double>{2e4, 1e5, 1e6, 1e6};
  std::vector<Vector> sanov_points;
  if (p.has("sanov_points")) {
    for (const auto& e : p.raw("sanov_points")) {
      sanov_points.push_back(points(e, "report: sanov_points"));
    }
  }
  QuasipotentialOptions qp = qp_options(p, seed);
  p.finish();
  if (lln_N < 1 || lln_seeds < 1 || lln_times < 2 || !(lln_horizon > 0.0)) {
    throw ValidationError("report: bad LLN parameters");
  }

  json gates = json::array();

  // Law of large numbers against the integrated McKean-Vlasov path, in total variation.
  const LatticePoint init = LatticePoint::nearest(SimplexPoint::uniform(m.r()), lln_N);
  const int steps_per_sample = 10;
  const double dt = lln_horizon / ((lln_times - 1) * steps_per_sample);
  const OdePath mkv = integrate(m, init.measure(), lln_horizon, dt);
  std::vector<double> sup_tv(static_cast<std::size_t>(lln_seeds));
  for (int s = 0; s < lln_seeds; ++s) {
    const Trajectory tr = simulate(m, lln_N, init, lln_horizon, seed + static_cast<std::uint64_t>(s));
    double worst = 0.0;
    for (int k = 0; k < lln_times; ++k) {
      const double t = lln_horizon * k / (lln_times - 1);
      const Vector mu = tr.state_at(t).as_vector();
      worst = std::max(worst, 0.5 * l1_distance(mu, mkv.points[static_cast<std::size_t>(k * steps_per_sample)]));
    }
    sup_tv[static_cast<std::size_t>(s)] = worst;
  }
  {
    auto f = out.open("lln.csv");
    f << "seed,sup_tv\n";
    for (int s = 0; s < lln_seeds; ++s) {
      f << seed + static_cast<std::uint64_t>(s) << "," << detail::format_double(sup_tv[static_cast<std::size_t>(s)])
        << "\n";
    }
  }
  const auto within = std::count_if(sup_tv.begin(), sup_tv.end(), [&](double v) { return v <= lln_tolerance; });
  const double lln_fraction = static_cast<double>(within) / lln_seeds;
  gates.push_back(gate("lln", lln_fraction >= 0.95, jnum(lln_fraction),
                       "fraction of seeds with sup_t TV <= " + detail::format_double(lln_tolerance) + " is >= 0.95"));

  // Rate function at the selected equilibria.
  FWOptions fo;
  fo.vtilde.qp = qp;
  fo.equilibria.seed = seed;
  const FWCatalog fw = fw_catalog(m, fo);
  out.write_json("catalog.json", fw_json(fw));
  double s_eq = 0.0;
  for (std::size_t i = 0; i < fw.l(); ++i) {
    if (fw.weights.s[static_cast<Eigen::Index>(i)] == 0.0) {
      s_eq = std::max(s_eq, rate_function(m, fw, fw.reps[i]));
    }
  }
  gates.push_back(gate("s_at_equilibrium", s_eq <= 1e-6, jnum(s_eq), "s(xi_0) <= 1e-6"));

  // Relative entropy: the stationary law of a constant-rate model is multinomial.
  if (m.constant_rates() && fw.l() == 1) {
    const Vector& eq = fw.reps[0];
    if (sanov_points.empty()) {
      if (m.r() == 2) {
        for (double x : {0.1, 0.3, 0.5, 0.75, 0.9}) {
          sanov_points.push_back(Vector{{x, 1.0 - x}});
        }
      } else {
        for (std::size_t k = 0; k < 5; ++k) {
          sanov_points.push_back(0.5 * eq + 0.5 * SimplexPoint::vertex(m.r(), k % m.r()).weights());
        }
      }
    }
    double worst = 0.0;
    auto f = out.open("sanov.csv");
    f << mu_header(m.r(), "xi").substr(1) << ",s,relative_entropy,relative_error\n";
    for (const auto& xi : sanov_points) {
      const double s = rate_function(m, fw, xi);
      const double h = kl_divergence(xi, eq);
      const double rel = h > 0.0 ? std::abs(s / h - 1.0) : std::abs(s);
      worst = std::max(worst, rel);
      f << csv_row({}, xi) << "," << csv_row({s, h, rel}) << "\n";
    }
    gates.push_back(gate("sanov", worst <= 0.05, jnum(worst), "max relative error against relative entropy <= 0.05"));
  } else {
    gates.push_back(gate("sanov", std::nullopt, nullptr, "applies to constant-rate models with one equilibrium"));
  }

  // Simulated slope of -log p_N against N versus s(target).
  SlopeOptions so;
  so.seed = seed;
  so.sample = slope_sample;
  const SlopeEstimate est = ldp_slope(m, SimplexPoint(target), radius, slope_N, so);
  {
    auto f = out.open("slope.csv");
    write_slope_csv(f, est);
  }
  const double s_target = rate_function(m, fw, target);
  std::vector<int> used_N;
  std::vector<double> used_p;
  for (std::size_t k = 0; k < est.N.size(); ++k) {
    if (est.p_hat[k] > 0.0) {
      used_N.push_back(est.N[k]);
      used_p.push_back(est.p_hat[k]);
    }
  }
  json slope_value = {{"s_target", jnum(s_target)}, {"estimate", slope_json(est)}, {"fitted_N", used_N}};
  if (used_N.size() >= 3) {
    const SlopeEstimate fit = fit_slope(used_N, used_p);
    const double rel = std::abs(fit.slope / s_target - 1.0);
    slope_value["slope"] = jnum(fit.slope);
    slope_value["relative_error"] = jnum(rel);
    gates.push_back(gate("slope", rel <= 0.2, slope_value, "|slope / s(target) - 1| <= 0.2"));
  } else {
    gates.push_back(gate("slope", false, slope_value, "needs p_hat > 0 for at least three N"));
  }

  int passed = 0;
  int decided = 0;
  for (const auto& g : gates) {
    if (!g["pass"].is_null()) {
      ++decided;
      passed += g["pass"].get<bool>() ? 1 : 0;
    }
  }
  const json report = {{"model", m.name()}, {"seed", seed}, {"gates", gates}};
  out.write_json("report.json", report);
  return {{"gates_passed", passed}, {"gates_decided", decided}, {"all_passed", passed == decided}, {"gates", gates}};
}

fs::path output_dir(const ExperimentConfig& cfg, const TaskSpec& t) { return fs::path(cfg.out) / t.name; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Model load_config_model(const json& j) {
  try {
    if (j.is_string()) {
      return load_model(j.get<std::string>());
    }
    if (j.is_object()) {
      return model_from_json(j);
    }
  } catch (const ParseError& e) {
    throw ValidationError(std::string("model: ") + e.what());
  } catch (const DomainError& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
  throw ValidationError("config: 'model' must be a name, a file path or an object");
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) {
    s[static_cast<std::size_t>(i)] = digits[h & 0xf];
  }
  return s;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) {
    throw ValidationError("config: top level must be an object");
  }
  static const std::set<std::string> known{"model", "seed", "out", "threads", "tasks", "task", "params", "name"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw ValidationError("config: unknown key '" + key + "'");
    }
  }
  ExperimentConfig cfg;
  try {
    if (!j.contains("model")) {
      throw ValidationError("config: missing 'model'");
    }
    cfg.model = j.at("model");
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out = j.value("out", cfg.out);
    cfg.threads = j.value("threads", cfg.threads);
    json tasks = json::array();
    if (j.contains("tasks")) {
      if (j.contains("task") || j.contains("params")) {
        throw ValidationError("config: give either 'tasks' or 'task'/'params'");
      }
      tasks = j.at("tasks");
    } else if (j.contains("task")) {
      json t = {{"task", j.at("task")}};
      if (j.contains("params")) {
        t["params"] = j.at("params");
      }
      if (j.contains("name")) {
        t["name"] = j.at("name");
      }
      tasks.push_back(t);
    }
    if (!tasks.is_array() || tasks.empty()) {
      throw ValidationError("config: no tasks");
    }
    static const std::set<std::string> kinds{"validate", "simulate", "stationary", "ldp-slope",
                                             "mkv",      "action",   "qp",         "report"};
    std::map<std::string, int> seen;
    for (const auto& t : tasks) {
      if (!t.is_object()) {
        throw ValidationError("config: each task must be an object");
      }
      for (const auto& [key, value] : t.items()) {
        if (key != "task" && key != "params" && key != "name" && key != "seed") {
          throw ValidationError("config: unknown task key '" + key + "'");
        }
      }
      TaskSpec spec;
      spec.task = t.at("task").get<std::string>();
      if (!kinds.contains(spec.task)) {
        throw ValidationError("config: unknown task '" + spec.task + "'");
      }
      spec.params = t.value("params", json::object());
      spec.seed = t.value("seed", cfg.seed);
      spec.name = t.value("name", spec.task);
      if (spec.name.empty() || spec.name.find_first_of("/\\") != std::string::npos || spec.name == "." ||
          spec.name == "..") {
        throw ValidationError("config: bad task name '" + spec.name + "'");
      }
      if (const int n = seen[spec.name]++; n > 0) {
        if (t.contains("name")) {
          throw ValidationError("config: duplicate task name '" + spec.name + "'");
        }
        spec.name += "-" + std::to_string(n + 1);
      }
      cfg.tasks.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw ValidationError("cannot read config '" + file.string() + "'");
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config '" + file.string() + "': " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json tasks_json = json::array();
  for (const auto& t : tasks) {
    tasks_json.push_back({{"name", t.name}, {"task", t.task}, {"params", t.params}, {"seed", t.seed}});
  }
  return {{"model", model}, {"seed", seed}, {"tasks", tasks_json}};
}

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const std::invalid_argument*>(&e)) {
    return 2;
  }
  if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const DomainError*>(&e)) {
    return 3;
  }
  return 1;
}

json run_task(const Model& m, const TaskSpec& task, const fs::path& dir, std::vector<std::string>& files) {
  fs::create_directories(dir);
  Outputs out(dir, files);
  Params p(task.params, task.task);
  PointResolver points(m, task.seed);
  json summary;
  if (task.task == "validate") {
    summary = task_validate(m, p, out);
  } else if (task.task == "simulate") {
    summary = task_simulate(m, p, out, task.seed, points);
  } else if (task.task == "stationary") {
    summary = task_stationary(m, p, out, task.seed, points);
  } else if (task.task == "ldp-slope") {
    summary = task_ldp_slope(m, p, out, task.seed, points);
  } else if (task.task == "mkv") {
    summary = task_mkv(m, p, out, task.seed, points);
  } else if (task.task == "action") {
    summary = task_action(m, p, out, points);
  } else if (task.task == "qp") {
    summary = task_qp(m, p, out, task.seed, points);
  } else if (task.task == "report") {
    summary = task_report(m, p, out, task.seed, points);
  } else {
    throw ValidationError("unknown task '" + task.task + "'");
  }
  summary["task"] = task.task;
  summary["model"] = m.name();
  out.write_json("summary.json", summary);
  return summary;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  ExperimentOutcome outcome;
  outcome.tasks.resize(cfg.tasks.size());
  fs::create_directories(cfg.out);

  std::optional<Model> model;
  std::string model_error;
  int model_status = 0;
  json validation;
  try {
    model = load_config_model(cfg.model);
    const ValidationReport v = validate_model(*model);
    validation = validation_json(v);
    if (!v.passed()) {
      std::string notes;
      for (const auto& n : v.notes) {
        notes += (notes.empty() ? "" : "; ") + n;
      }
      model_error = "model '" + model->name() + "' failed validation: " + notes;
      model_status = 2;
    }
  } catch (const std::exception& e) {
    model_error = e.what();
    model_status = std::max(2, exit_code_for(e));
  }

  parallel_for(
      cfg.tasks.size(),
      [&](std::size_t i) {
        const TaskSpec& spec = cfg.tasks[i];
        TaskOutcome& t = outcome.tasks[i];
        t.name = spec.name;
        t.task = spec.task;
        const auto t0 = clock::now();
        std::vector<std::string> files;
        const bool runnable = model && (model_status == 0 || spec.task == "validate");
        if (!runnable) {
          t.status = model_status;
          t.error = model_error;
        } else {
          try {
            t.summary = run_task(*model, spec, output_dir(cfg, spec), files);
          } catch (const std::exception& e) {
            t.status = exit_code_for(e);
            t.error = e.what();
          }
        }
        for (auto& f : files) {
          t.files.push_back(spec.name + "/" + f);
        }
        t.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
      },
      static_cast<std::size_t>(std::max(0, cfg.threads)));

  json tasks = json::array();
  json outputs = json::object();
  json seeds = json::object();
  for (const auto& t : outcome.tasks) {
    outcome.exit_code = std::max(outcome.exit_code, t.status);
    tasks.push_back({{"name", t.name},
                     {"task", t.task},
                     {"status", t.status},
                     {"error", t.error},
                     {"wall_time_seconds", t.wall_time}});
    for (const auto& f : t.files) {
      outputs[f] = hex64(fnv1a64(read_file(fs::path(cfg.out) / f)));
    }
  }
  for (const auto& s : cfg.tasks) {
    seeds[s.name] = s.seed;
  }
  const json config = cfg.to_json();
  const json manifest = {
      {"config", config},
      {"config_hash", hex64(fnv1a64(config.dump()))},
      {"versions",
       {{"mfldp", std::string(kVersion)},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"compiler", std::string(__VERSION__)}}},
      {"seeds", seeds},
      {"model_validation", validation},
      {"model_error", model_error},
      {"tasks", tasks},
      {"outputs", outputs},
      {"exit_code", outcome.exit_code},
      {"wall_time_seconds", std::chrono::duration<double>(clock::now() - start).count()}};
  outcome.manifest = fs::path(cfg.out) / "manifest.json";
  std::ofstream(outcome.manifest, std::ios::binary) << manifest.dump(2) << "\n";
  return outcome;
}

}  // namespace mfldp
