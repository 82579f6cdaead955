#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "plsmooth/norms.hpp"
#include "plsmooth/pipeline.hpp"
#include "plsmooth/sweep.hpp"
#include "plsmooth/verify.hpp"

using namespace plsmooth;
using json = nlohmann::ordered_json;

namespace {

enum Exit { Ok = 0, Io = 1, Invalid = 2, Uncertified = 3, Unmet = 4 };

struct RunConfig {
  std::string command;
  std::string input;
  std::string out;
  double p = 2;
  double q = 2;
  std::vector<double> lambdas = {1.0, 0.5, 0.25, 0.125, 0.0625};
  double epsilon = 1e-2;
  std::vector<std::string> norms;
  unsigned long long seed = 1;
  int workers = 1;
  int grid = 0;
  double tolerance = 1e-3;
  long audit_samples = 100000;
};

// Keys of a config file; command-line flags take precedence.
void apply_config_file(RunConfig& cfg, const std::string& path, const std::set<std::string>& given) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (given.count(key)) continue;
      if (key == "input") cfg.input = v.get<std::string>();
      else if (key == "out") cfg.out = v.get<std::string>();
      else if (key == "p") cfg.p = v.get<double>();
      else if (key == "q") cfg.q = v.get<double>();
      else if (key == "lambdas") cfg.lambdas = v.get<std::vector<double>>();
      else if (key == "epsilon") cfg.epsilon = v.get<double>();
      else if (key == "norm") cfg.norms = v.get<std::vector<std::string>>();
      else if (key == "seed") cfg.seed = v.get<unsigned long long>();
      else if (key == "workers") cfg.workers = v.get<int>();
      else if (key == "grid") cfg.grid = v.get<int>();
      else if (key == "tolerance") cfg.tolerance = v.get<double>();
      else if (key == "audit-samples") cfg.audit_samples = v.get<long>();
      else throw ParseError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

void check_config(const RunConfig& cfg) {
  if (cfg.input.empty()) throw ParseError("no input mesh");
  if (!(cfg.p >= 1 && cfg.p <= 64) || !(cfg.q >= 1 && cfg.q <= 64)) throw ParseError("p and q must lie in [1, 64]");
  if (cfg.lambdas.empty()) throw ParseError("empty lambda list");
  for (double l : cfg.lambdas)
    if (!(l > 0 && l <= 1)) throw ParseError("lambda values must lie in (0, 1]");
  if (!(cfg.epsilon >= 0)) throw ParseError("epsilon must be nonnegative");
  if (cfg.workers < 1) throw ParseError("workers must be positive");
  if (cfg.grid < 0) throw ParseError("grid must be nonnegative");
  if (!(cfg.tolerance > 0)) throw ParseError("tolerance must be positive");
  for (const auto& n : cfg.norms) RINorm::parse(n);
}

json vec(const Vec3& x) { return {x(0), x(1), x(2)}; }

json to_json(const ValidationReport& r) {
  json j = {{"ok", r.ok}, {"reflected", r.reflected}, {"min_det", r.min_det}, {"max_det", r.max_det}};
  j["failures"] = json::array();
  for (const auto& f : r.failures)
    j["failures"].push_back(
        {{"kind", f.kind}, {"a", f.a}, {"b", f.b}, {"witness", vec(f.witness)}, {"message", f.message}});
  return j;
}

json to_json(const CertificationReport& c) {
  json j = {{"check", c.check},         {"pass", c.pass},     {"samples", c.samples}, {"worst", c.worst},
            {"tolerance", c.tolerance}, {"extreme", c.extreme}, {"seed", c.seed}};
  if (c.witness) j["witness"] = vec(*c.witness);
  if (c.witness2) j["witness2"] = vec(*c.witness2);
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

json to_json(const SmoothingParams& P) {
  json j = {{"smoothed_vertices", P.smoothed_vertices()},
            {"smoothed_edges", P.smoothed_edges()},
            {"smoothed_faces", P.smoothed_faces()}};
  j["log"] = P.log;
  return j;
}

json to_json(const SweepRow& r, const std::vector<std::string>& names) {
  json j = {{"lambda", r.lambda},       {"vol_E", r.vol_E},           {"vol_balls", r.vol_balls},
            {"vol_tubes", r.vol_tubes}, {"vol_slabs", r.vol_slabs},   {"linf_f", r.linf_f},
            {"w1p_f", r.w1p_f},         {"linf_inv", r.linf_inv},     {"w1q_inv", r.w1q_inv},
            {"sup_Dg", r.sup_Dg},       {"sup_Dginv", r.sup_Dginv},   {"sup_ddiff", r.sup_ddiff},
            {"lp_bound", r.lp_bound},   {"image_volume", r.image_volume}, {"nodes", r.nodes},
            {"owner_mismatch", r.owner_mismatch}, {"min_det", r.min_det}};
  json ri = json::object();
  for (size_t i = 0; i < names.size() && i < r.ri.size(); ++i) ri[names[i]] = r.ri[i];
  j["norms"] = ri;
  j["certified"] = r.certified;
  j["boundary_fixed"] = r.boundary_fixed;
  j["checks"] = json::array();
  for (const auto& c : r.checks) j["checks"].push_back(to_json(c));
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

struct Run {
  RunConfig cfg;
  json report;

  void write(const std::string& name, const std::string& text) const {
    if (cfg.out.empty()) return;
    std::filesystem::create_directories(cfg.out);
    std::ofstream os(std::filesystem::path(cfg.out) / name, std::ios::binary);
    if (!os) throw std::ios_base::failure("cannot write " + name + " in " + cfg.out);
    os << text;
  }

  int finish(int code) {
    report["exit_code"] = code;
    write("report.json", report.dump(2) + "\n");
    return code;
  }

  // Reads and validates the input; returns the map or sets the exit code.
  std::optional<PLMap> load(int& code) {
    const PLMap f = map_from_document(read_mesh_file(cfg.input));
    const ValidationReport v = validate_pl_homeo(f);
    report["validation"] = to_json(v);
    std::cout << "validation: " << (v.ok ? "pass" : "FAIL") << (v.reflected ? " (orientation reversing)" : "")
              << "\n";
    for (const auto& fl : v.failures) std::cout << "  " << fl.kind << ": " << fl.message << "\n";
    if (!v.ok) {
      code = finish(Invalid);
      return std::nullopt;
    }
    return f;
  }

  SweepOptions sweep_options() const {
    SweepOptions opt;
    opt.lambdas = cfg.lambdas;
    opt.p = cfg.p;
    opt.q = cfg.q;
    for (const auto& n : cfg.norms) opt.norms.push_back(RINorm::parse(n));
    opt.region.tolerance = cfg.tolerance;
    opt.audit_samples = cfg.audit_samples;
    opt.seed = cfg.seed;
    opt.workers = cfg.workers;
    return opt;
  }

  int validate() {
    int code = Ok;
    if (!load(code)) return code;
    return finish(Ok);
  }

  int smooth() {
    int code = Ok;
    auto f = load(code);
    if (!f) return code;
    const SmoothingParams P = choose_params(*f);
    report["parameters"] = to_json(P);
    const SmoothedMap g(*f, P);
    SweepOptions opt = sweep_options();
    opt.lambdas = {cfg.lambdas.front()};
    const SweepTable table = lambda_sweep(g, opt);
    const SweepRow& row = table.rows.front();
    const SmoothedMap gl = g.scaled(row.lambda);
    const auto& K = gl.working().mesh();

    PointMap map = [&](const Vec3& x) { return gl.eval(V3<double>(x)); };
    JacobianMap jac = [&](const Vec3& x) { return gl.jacobian(x); };
    const CertificationReport fd = fd_check(map, jac, cells_sampler(K), 20000, K.scale, cfg.seed);
    const InterfaceReport iface = interface_mismatch(gl, 10000, unsigned(cfg.seed));

    report["level"] = to_json(row, table.norm_names);
    report["derivative_check"] = to_json(fd);
    report["interfaces"] = {{"ok", iface.ok}, {"samples", iface.samples}, {"worst", iface.worst}};
    if (!iface.ok) report["interfaces"]["witness"] = vec(iface.witness);
    const bool certified = row.certified && fd.pass && iface.ok;
    report["certified"] = certified;

    for (const auto& c : row.checks) std::cout << c.summary() << "\n";
    std::cout << fd.summary() << "\n";
    std::cout << "interfaces: " << (iface.ok ? "pass" : "FAIL") << " (worst " << iface.worst << ")\n";
    if (!row.note.empty()) std::cout << "note: " << row.note << "\n";
    std::cout << "certificate at lambda " << row.lambda << ": " << (certified ? "pass" : "FAIL") << "\n";

    if (cfg.grid > 0) write("grid.csv", grid_dump(gl));
    return finish(certified ? Ok : Uncertified);
  }

  // g on the lattice nodes of the bounding box that lie in the domain.
  std::string grid_dump(const SmoothedMap& gl) const {
    const auto& K = gl.input().mesh();
    std::ostringstream os;
    os << "x,y,z,g1,g2,g3\n";
    char buf[160];
    const int n = cfg.grid;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j)
        for (int k = 0; k <= n; ++k) {
          Vec3 t(double(i) / n, double(j) / n, double(k) / n);
          Vec3 x = K.bounds.lo + t.cwiseProduct(K.bounds.hi - K.bounds.lo);
          if (K.locate(x) < 0) continue;
          Vec3 y = gl(x);
          std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", x(0), x(1), x(2), y(0), y(1),
                        y(2));
          os << buf;
        }
    return os.str();
  }

  int sweep() {
    int code = Ok;
    auto f = load(code);
    if (!f) return code;
    const SmoothingParams P = choose_params(*f);
    report["parameters"] = to_json(P);
    const SmoothedMap g(*f, P);
    const SweepTable table = lambda_sweep(g, sweep_options());
    const std::string csv = table.csv();
    write("sweep.csv", csv);
    std::cout << csv;

    json rows = json::array();
    for (const auto& r : table.rows) rows.push_back(to_json(r, table.norm_names));
    report["rows"] = rows;
    report["epsilon"] = cfg.epsilon;
    const int k = table.first_below(cfg.epsilon);
    report["achieved"] = k >= 0;
    if (k >= 0) report["achieved_lambda"] = table.rows[k].lambda;
    std::cout << "epsilon " << cfg.epsilon << ": ";
    if (k >= 0)
      std::cout << "pass at lambda " << table.rows[k].lambda << "\n";
    else
      std::cout << "FAIL, no certified lambda with w1p_f + w1q_inv below it\n";
    return finish(k >= 0 ? Ok : Unmet);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smoothing of piecewise linear homeomorphisms in dimension three"};
  Run run;
  RunConfig& cfg = run.cfg;
  std::string config_path;
  app.add_option("command", cfg.command, "validate | smooth | sweep")
      ->required()
      ->check(CLI::IsMember({"validate", "smooth", "sweep"}));
  app.add_option("--config", config_path, "JSON file with any of the keys below; flags win");
  app.add_option("--input", cfg.input, "mesh document (JSON)");
  app.add_option("--out", cfg.out, "directory for report.json, sweep.csv and grid.csv");
  app.add_option("--p", cfg.p, "exponent for Dg - Df");
  app.add_option("--q", cfg.q, "exponent for the inverse");
  app.add_option("--lambdas", cfg.lambdas, "scales in (0, 1]; smooth uses the first")->delimiter(',');
  app.add_option("--epsilon", cfg.epsilon, "target for w1p_f + w1q_inv");
  app.add_option("--norm", cfg.norms, "extra norm of |Dg - Df|: lp:P, lorentz:P:Q or linf (repeatable)");
  app.add_option("--seed", cfg.seed, "seed of every sampled check");
  app.add_option("--workers", cfg.workers, "threads for the sweep");
  app.add_option("--grid", cfg.grid, "smooth: dump g on an (n+1)^3 lattice");
  app.add_option("--tolerance", cfg.tolerance, "relative quadrature tolerance");
  app.add_option("--audit-samples", cfg.audit_samples, "injectivity audit samples per level");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return Io;
  }

  try {
    if (!config_path.empty()) {
      std::set<std::string> given;
      for (const auto* opt : app.get_options())
        if (opt->count() > 0 && !opt->get_lnames().empty()) given.insert(opt->get_lnames().front());
      apply_config_file(cfg, config_path, given);
    }
    check_config(cfg);
    run.report = {{"command", cfg.command}, {"input", cfg.input},     {"p", cfg.p},
                  {"q", cfg.q},             {"lambdas", cfg.lambdas}, {"norms", cfg.norms},
                  {"seed", cfg.seed},       {"tolerance", cfg.tolerance}};
    if (cfg.command == "validate") return run.validate();
    if (cfg.command == "smooth") return run.smooth();
    return run.sweep();
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Io;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Io;
  } catch (const ValidationError& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    run.report["error"] = e.what();
    return run.finish(Invalid);
  } catch (const Error& e) {
    // parameter selection or smoothing could not be certified
    std::cerr << "certification failed: " << e.what() << "\n";
    run.report["error"] = e.what();
    return run.finish(Uncertified);
  }
}
