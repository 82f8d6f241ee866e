#include "polyproj/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "polyproj/generators.hpp"

namespace polyproj {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Reads typed fields out of one JSON object and remembers which keys were
// used, so leftovers can be reported as unknown.
class Section {
 public:
  Section(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + "must be a JSON object");
  }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, int& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(where(key) + "expected an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) throw ConfigError(where(key) + "out of range");
      out = static_cast<int>(x);
    }
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(where(key) + "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const std::string& key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(where(key) + "expected a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(where(key) + "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(where(key) + "expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ConfigError(where() + "unknown key '" + key + "'");
  }

  std::string where(const std::string& key = "") const {
    std::string p = path_.empty() ? key : (key.empty() ? path_ : path_ + "." + key);
    return p.empty() ? "config: " : "config: " + p + ": ";
  }

 private:
  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config: " + what);
}

void read_matrix(Section s, MatrixSection& m) {
  s.read("dim", m.dim);
  s.read("samples", m.samples);
  s.read("entry_range", m.entry_range);
  s.read("constant_c", m.constant_c);
  s.read("sigma_floor", m.sigma_floor);
  s.read("tolerance", m.tolerance);
  s.read("counterexample", m.counterexample);
  s.finish();
}

void read_project(Section s, ProjectSection& p) {
  s.read("dim", p.dim);
  s.read("n", p.n);
  s.read("a", p.a);
  s.read("r", p.r);
  s.read("rho", p.rho);
  s.read("tol_det", p.tol_det);
  s.read("tol_opt", p.tol_opt);
  s.read("max_outer", p.max_outer);
  s.read("max_inner", p.max_inner);
  s.read("rk4_steps", p.rk4_steps);
  s.read("data", p.data);
  s.read("amplitude", p.amplitude);
  s.read("init", p.init);
  s.read("init_amplitude", p.init_amplitude);
  s.read("ka_probe_n", p.ka_probe_n);
  s.read("dump_fields", p.dump_fields);
  s.finish();
}

void read_nse(Section s, NseConfig& c) {
  s.read("dim", c.dim);
  s.read("n", c.n);
  s.read("r", c.r);
  s.read("mu", c.mu);
  s.read("tau", c.tau);
  s.read("t_end", c.t_end);
  s.read("semigroup_substeps", c.semigroup_substeps);
  s.read("proj_rho", c.proj_rho);
  s.read("proj_tol_det", c.proj_tol_det);
  s.read("proj_tol_opt", c.proj_tol_opt);
  s.read("proj_max_outer", c.proj_max_outer);
  s.read("proj_max_inner", c.proj_max_inner);
  s.read("rk4_steps", c.rk4_steps);
  s.read("initial_condition", c.initial_condition);
  s.read("amplitude", c.amplitude);
  s.read("c0", c.c0);
  s.read("snapshot_every", c.snapshot_every);
  s.read("duhamel", c.duhamel);
  s.read("record_wallclock", c.record_wallclock);
  s.finish();
}

void read_convergence(Section s, ConvergenceSection& c) {
  s.read("refinements", c.refinements);
  s.read("chorin", c.chorin);
  s.finish();
}

void apply_settings(ProjectionProblem& prob, const ProjectSection& p) {
  prob.a = p.a;
  prob.r = p.r;
  prob.rho = p.rho;
  prob.tol_det = p.tol_det;
  prob.tol_opt = p.tol_opt;
  prob.max_outer = p.max_outer;
  prob.max_inner = p.max_inner;
  prob.rk4_steps = p.rk4_steps;
}

void validate(const RunConfig& cfg) {
  require(cfg.threads >= 0, "threads must be >= 0");

  const MatrixSection& m = cfg.matrix;
  require(m.dim >= 2 && m.dim <= 4, "matrix.dim must be 2, 3 or 4");
  require(m.samples > 0, "matrix.samples must be > 0");
  require(m.entry_range >= 0.0, "matrix.entry_range must be >= 0");
  require(m.sigma_floor >= 0.0 && m.tolerance >= 0.0, "matrix.sigma_floor and matrix.tolerance must be >= 0");

  const ProjectSection& p = cfg.project;
  require(p.dim == 2 || p.dim == 3, "project.dim must be 2 or 3");
  require(p.n >= 4, "project.n must be >= 4");
  static const std::set<std::string> data_kinds{"identity", "swirl", "epsilon-family", "random-feasible"};
  static const std::set<std::string> init_kinds{"reference", "identity", "data", "random-feasible"};
  require(data_kinds.count(p.data) > 0, "project.data must be one of identity, swirl, epsilon-family, random-feasible");
  require(init_kinds.count(p.init) > 0, "project.init must be one of reference, identity, data, random-feasible");
  require(p.ka_probe_n == 0 || p.ka_probe_n >= 8, "project.ka_probe_n must be 0 or >= 8");
  require(p.rk4_steps >= 1 && p.max_outer >= 1 && p.max_inner >= 1, "project iteration counts must be >= 1");

  static const std::set<std::string> ics{"vortex-pair", "bump-swirl", "zero", "cellular", "random"};
  require(ics.count(cfg.nse.initial_condition) > 0, "nse.initial_condition must be one of vortex-pair, bump-swirl, zero, cellular, random");
  require(cfg.nse.rk4_steps >= 1 && cfg.nse.proj_max_outer >= 1 && cfg.nse.proj_max_inner >= 1,
          "nse projection iteration counts must be >= 1");
  require(cfg.convergence.refinements >= 1, "convergence.refinements must be >= 1");

  try {
    cfg.nse.validate();
    ProjectionProblem probe(MapField::identity(Grid(p.dim, p.n)));
    apply_settings(probe, p);
    probe.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  RunConfig cfg;
  Section top(doc, "");
  if (const Json* v = top.find("seed")) {
    if (!v->is_null()) {
      if (!v->is_number_unsigned()) throw ConfigError("config: seed: expected a non-negative integer");
      cfg.seed = v->get<std::uint64_t>();
    }
  }
  top.read("threads", cfg.threads);
  if (const Json* v = top.find("matrix")) read_matrix(Section(*v, "matrix"), cfg.matrix);
  if (const Json* v = top.find("project")) read_project(Section(*v, "project"), cfg.project);
  if (const Json* v = top.find("nse")) read_nse(Section(*v, "nse"), cfg.nse);
  if (const Json* v = top.find("convergence")) read_convergence(Section(*v, "convergence"), cfg.convergence);
  top.finish();
  if (cfg.seed) cfg.nse.seed = *cfg.seed;
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_json_text(const RunConfig& cfg) {
  OrderedJson j;
  j["seed"] = cfg.seed ? OrderedJson(*cfg.seed) : OrderedJson(nullptr);
  j["threads"] = cfg.threads;
  const MatrixSection& m = cfg.matrix;
  j["matrix"] = {{"dim", m.dim},
                 {"samples", m.samples},
                 {"entry_range", m.entry_range},
                 {"constant_c", m.constant_c},
                 {"sigma_floor", m.sigma_floor},
                 {"tolerance", m.tolerance},
                 {"counterexample", m.counterexample}};
  const ProjectSection& p = cfg.project;
  j["project"] = {{"dim", p.dim},
                  {"n", p.n},
                  {"a", p.a},
                  {"r", p.r},
                  {"rho", p.rho},
                  {"tol_det", p.tol_det},
                  {"tol_opt", p.tol_opt},
                  {"max_outer", p.max_outer},
                  {"max_inner", p.max_inner},
                  {"rk4_steps", p.rk4_steps},
                  {"data", p.data},
                  {"amplitude", p.amplitude},
                  {"init", p.init},
                  {"init_amplitude", p.init_amplitude},
                  {"ka_probe_n", p.ka_probe_n},
                  {"dump_fields", p.dump_fields}};
  const NseConfig& c = cfg.nse;
  j["nse"] = {{"dim", c.dim},
              {"n", c.n},
              {"r", c.r},
              {"mu", c.mu},
              {"tau", c.tau},
              {"t_end", c.t_end},
              {"semigroup_substeps", c.semigroup_substeps},
              {"proj_rho", c.proj_rho},
              {"proj_tol_det", c.proj_tol_det},
              {"proj_tol_opt", c.proj_tol_opt},
              {"proj_max_outer", c.proj_max_outer},
              {"proj_max_inner", c.proj_max_inner},
              {"rk4_steps", c.rk4_steps},
              {"initial_condition", c.initial_condition},
              {"amplitude", c.amplitude},
              {"c0", c.c0},
              {"snapshot_every", c.snapshot_every},
              {"duhamel", c.duhamel},
              {"record_wallclock", c.record_wallclock}};
  j["convergence"] = {{"refinements", cfg.convergence.refinements}, {"chorin", cfg.convergence.chorin}};
  return j.dump(2) + "\n";
}

bool needs_seed(const RunConfig& cfg, const std::string& command) {
  if (command == "verify-matrix-ineq") return !(cfg.matrix.dim == 4 && cfg.matrix.counterexample);
  if (command == "project") return cfg.project.data == "random-feasible" || cfg.project.init == "random-feasible";
  if (command == "nse" || command == "convergence") return cfg.nse.initial_condition == "random";
  return false;
}

ProjectionProblem make_projection_problem(const RunConfig& cfg) {
  const ProjectSection& p = cfg.project;
  const Grid g(p.dim, p.n);
  MapField s = MapField::identity(g);
  if (p.data == "swirl") {
    s = swirl_map(g, p.amplitude);
  } else if (p.data == "epsilon-family") {
    s = epsilon_family_map(g, p.amplitude);
  } else if (p.data == "random-feasible") {
    s = random_feasible_map(g, cfg.seed.value_or(0), p.amplitude);
  }
  ProjectionProblem prob(std::move(s));
  apply_settings(prob, p);
  return prob;
}

std::optional<MapField> make_projection_init(const RunConfig& cfg, const ProjectionProblem& prob) {
  const std::string& kind = cfg.project.init;
  const Grid& g = prob.s.grid();
  if (kind == "identity") return MapField::identity(g);
  if (kind == "data") return prob.s;
  // Offset the stream so the init differs from random-feasible data with the same seed.
  if (kind == "random-feasible") return random_feasible_map(g, cfg.seed.value_or(0) + 0x9e3779b9ULL, cfg.project.init_amplitude);
  return std::nullopt;
}

}  // namespace polyproj
