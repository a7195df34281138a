#include "bdlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bdlab/field_io.hpp"
#include "bdlab/regularity.hpp"
#include "bdlab/solver.hpp"

namespace bdlab {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------- config

namespace {

/// Object view that records which keys were read, so leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const std::string at = key.empty() ? (path_.empty() ? "<root>" : path_) : where(key);
    throw ConfigError(at + ": " + msg);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(key, "has the wrong type");
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, where(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) fail(k, "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Coordinates read_point(Section& s, const std::string& key, int dim, const Coordinates& fallback) {
  const Coordinates p = s.get<Coordinates>(key, fallback);
  if (static_cast<int>(p.size()) != dim) s.fail(key, "needs " + std::to_string(dim) + " coordinates");
  return p;
}

std::vector<Coordinates> read_points(Section& s, const std::string& key, int dim, const Coordinates& fallback) {
  if (!s.has(key)) {
    s.get<json>(key, json());
    return {fallback};
  }
  const json& arr = s.raw(key);
  if (!arr.is_array() || arr.empty()) s.fail(key, "must be a nonempty array of points");
  std::vector<Coordinates> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string at = key + "[" + std::to_string(i) + "]";
    if (!arr[i].is_array() || static_cast<int>(arr[i].size()) != dim) s.fail(at, "needs " + std::to_string(dim) + " coordinates");
    Coordinates p;
    for (const auto& v : arr[i]) {
      if (!v.is_number()) s.fail(at, "coordinates must be numbers");
      p.push_back(v.get<double>());
    }
    out.push_back(p);
  }
  return out;
}

void require(Section& s, const std::string& key, bool ok, const std::string& msg) {
  if (!ok) s.fail(key, msg);
}

const std::set<std::string> kPresets = {"shear", "stretch", "rigid", "bump", "custom-file"};

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["dimension"] = c.dimension;
  j["domain"] = {{"lo", c.lo}, {"hi", c.hi}};
  j["resolution"] = c.cells;
  j["integrand"] = {{"kind", c.integrand}, {"param", c.integrand_param}};
  j["datum"] = {{"preset", c.datum}, {"amplitude", c.datum_amplitude}, {"path", c.datum_file}, {"field", c.datum_field}};
  j["solver"] = {{"j_max", c.j_max},
                 {"tol_scale", c.tol_scale},
                 {"max_newton", c.max_newton},
                 {"allow_degenerate", c.allow_degenerate},
                 {"seed", c.seed}};
  json d;
  if (c.excess.enabled) {
    d["excess"] = {{"centers", c.excess.centers},
                   {"radius", c.excess.radius},
                   {"alpha_min", c.excess.alpha_min},
                   {"smallness", c.excess.smallness}};
  }
  if (c.scaling.enabled) {
    json balls = json::array();
    for (const auto& b : c.scaling.balls) balls.push_back({{"center", b.center}, {"radius", b.radius}});
    d["scaling"] = {{"balls", balls}, {"branch", c.scaling.branch}, {"spread_limit", c.scaling.spread_limit}};
  }
  if (c.poincare.enabled) {
    d["poincare"] = {{"families", c.poincare.families},
                     {"points_per_decade", c.poincare.points_per_decade},
                     {"lambda", c.poincare.lambda},
                     {"spread_limit", c.poincare.spread_limit}};
  }
  if (c.second_order.enabled) {
    d["second_order"] = {
        {"center", c.second_order.center}, {"radius", c.second_order.radius}, {"factor", c.second_order.factor}};
  }
  if (c.comparison.enabled) {
    d["comparison"] = {{"centers", c.comparison.centers},
                       {"radius", c.comparison.radius},
                       {"alpha", c.comparison.alpha},
                       {"lambda_con", c.comparison.lambda_con},
                       {"dev_alpha", c.comparison.dev_alpha}};
  }
  if (c.uniqueness.enabled) {
    d["uniqueness"] = {{"perturbation", c.uniqueness.perturbation}, {"tolerance", c.uniqueness.tolerance}};
  }
  j["diagnostics"] = d.is_null() ? json::object() : d;
  j["write_solution"] = c.write_solution;
  j["output"] = c.output_dir.generic_string();
  return j;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section top(root, "");
  c.dimension = top.get<int>("dimension", 2);
  require(top, "dimension", c.dimension == 2 || c.dimension == 3, "must be 2 or 3");
  const int n = c.dimension;

  {
    Section dom = top.child("domain");
    c.lo = read_point(dom, "lo", n, Coordinates(n, 0.0));
    c.hi = read_point(dom, "hi", n, Coordinates(n, 1.0));
    for (int d = 0; d < n; ++d) require(dom, "hi", c.hi[d] > c.lo[d], "must exceed lo in every coordinate");
    dom.finish();
  }
  if (top.has("resolution") && top.raw("resolution").is_number_integer()) {
    c.cells.assign(n, top.get<int>("resolution", 0));
  } else {
    c.cells = top.get<std::vector<int>>("resolution", std::vector<int>(n, 32));
  }
  require(top, "resolution", static_cast<int>(c.cells.size()) == n, "needs one count per axis");
  for (int k : c.cells) require(top, "resolution", k >= 8, "must be at least 8 cells per axis");

  IntegrandSpec f = phi_a(1.5);
  {
    Section in = top.child("integrand");
    c.integrand = in.get<std::string>("kind", c.integrand);
    c.integrand_param = in.get<double>("param", c.integrand_param);
    try {
      f = make_integrand(c.integrand, c.integrand_param);
    } catch (const Error& e) {
      in.fail("kind", e.what());
    }
    in.finish();
  }

  {
    Section da = top.child("datum");
    c.datum = da.get<std::string>("preset", c.datum);
    require(da, "preset", kPresets.count(c.datum) > 0, "unknown preset '" + c.datum + "'");
    c.datum_amplitude = da.get<double>("amplitude", c.datum_amplitude);
    c.datum_file = da.get<std::string>("path", "");
    c.datum_field = da.get<std::string>("field", "");
    if (c.datum == "custom-file") require(da, "path", !c.datum_file.empty(), "custom-file datum needs a path");
    da.finish();
  }

  c.seed = top.get<std::uint64_t>("seed", c.seed);
  {
    Section so = top.child("solver");
    c.j_max = so.get<int>("j_max", c.j_max);
    require(so, "j_max", c.j_max >= 1, "must be at least 1");
    c.tol_scale = so.get<double>("tol_scale", c.tol_scale);
    require(so, "tol_scale", c.tol_scale > 0.0, "must be positive");
    c.max_newton = so.get<int>("max_newton", c.max_newton);
    require(so, "max_newton", c.max_newton >= 1, "must be at least 1");
    c.allow_degenerate = so.get<bool>("allow_degenerate", false);
    c.seed = so.get<std::uint64_t>("seed", c.seed);
    so.finish();
  }
  if (f.degenerate_at_origin() && !c.allow_degenerate) {
    throw ConfigError("integrand.kind: " + f.name() +
                      " is degenerate at the origin; set solver.allow_degenerate to declare inf|e(u)| > 0");
  }

  const Coordinates middle = [&] {
    Coordinates m(n);
    for (int d = 0; d < n; ++d) m[d] = 0.5 * (c.lo[d] + c.hi[d]);
    return m;
  }();

  Section diag = top.child("diagnostics");
  if (diag.has("excess")) {
    Section s = diag.child("excess");
    c.excess.enabled = true;
    c.excess.centers = read_points(s, "centers", n, middle);
    c.excess.radius = s.get<double>("radius", c.excess.radius);
    require(s, "radius", c.excess.radius > 0.0, "must be positive");
    double h = 0.0;
    for (int d = 0; d < n; ++d) h = std::max(h, (c.hi[d] - c.lo[d]) / c.cells[d]);
    require(s, "radius", c.excess.radius >= 32.0 * h * (1.0 - 1e-12),
            "must be at least 32 h so that the ladder down to 4 h has four levels");
    c.excess.alpha_min = s.get<double>("alpha_min", c.excess.alpha_min);
    require(s, "alpha_min", c.excess.alpha_min > 0.0 && c.excess.alpha_min < 1.0, "must lie in (0, 1)");
    c.excess.smallness = s.get<double>("smallness", c.excess.smallness);
    s.finish();
  }
  if (diag.has("scaling")) {
    Section s = diag.child("scaling");
    c.scaling.enabled = true;
    c.scaling.branch = s.get<std::string>("branch", c.scaling.branch);
    require(s, "branch", c.scaling.branch == "auto" || c.scaling.branch == "luxemburg" || c.scaling.branch == "sobolev",
            "must be auto, luxemburg or sobolev");
    c.scaling.spread_limit = s.get<double>("spread_limit", c.scaling.spread_limit);
    if (!s.has("balls")) s.fail("balls", "is required");
    const json& arr = s.raw("balls");
    if (!arr.is_array() || arr.empty()) s.fail("balls", "must be a nonempty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section b(arr[i], s.where("balls[" + std::to_string(i) + "]"));
      BallSpec spec;
      spec.center = read_point(b, "center", n, middle);
      spec.radius = b.get<double>("radius", 0.0);
      require(b, "radius", spec.radius > 0.0, "must be positive");
      b.finish();
      c.scaling.balls.push_back(spec);
    }
    const std::string& br = c.scaling.branch;
    if ((br == "sobolev" && n < 3) || (br == "luxemburg" && n != 2)) {
      s.fail("branch", "predictor-invalid: the " + br + " branch does not apply in dimension " + std::to_string(n));
    }
    if (!f.ellipticity_a()) s.fail("", "predictor-invalid: " + f.name() + " has no ellipticity exponent");
    const RegularityPredictor pred{n, *f.ellipticity_a()};
    if (!pred.valid()) {
      std::ostringstream os;
      os << "predictor-invalid: a = " << pred.a << " violates 1 < a < 1 + 2/n for n = " << n;
      s.fail("", os.str());
    }
    s.finish();
  }
  if (diag.has("poincare")) {
    Section s = diag.child("poincare");
    c.poincare.enabled = true;
    c.poincare.families = s.get<std::vector<std::string>>("families", poincare_family_names());
    for (const auto& fam : c.poincare.families) {
      const auto& names = poincare_family_names();
      require(s, "families", fam == "solution" || std::find(names.begin(), names.end(), fam) != names.end(),
              "unknown family '" + fam + "'");
    }
    require(s, "families", !c.poincare.families.empty(), "must not be empty");
    c.poincare.points_per_decade = s.get<int>("points_per_decade", c.poincare.points_per_decade);
    require(s, "points_per_decade", c.poincare.points_per_decade >= 1, "must be at least 1");
    c.poincare.lambda = s.get<double>("lambda", c.poincare.lambda);
    require(s, "lambda", c.poincare.lambda > 1.0, "must exceed 1");
    c.poincare.spread_limit = s.get<double>("spread_limit", c.poincare.spread_limit);
    s.finish();
  }
  if (diag.has("second_order")) {
    Section s = diag.child("second_order");
    c.second_order.enabled = true;
    c.second_order.center = read_point(s, "center", n, middle);
    c.second_order.radius = s.get<double>("radius", c.second_order.radius);
    require(s, "radius", c.second_order.radius > 0.0, "must be positive");
    c.second_order.factor = s.get<double>("factor", c.second_order.factor);
    require(s, "factor", c.second_order.factor >= 1.0, "must be at least 1");
    s.finish();
  }
  if (diag.has("comparison")) {
    Section s = diag.child("comparison");
    c.comparison.enabled = true;
    c.comparison.centers = read_points(s, "centers", n, middle);
    c.comparison.radius = s.get<double>("radius", c.comparison.radius);
    require(s, "radius", c.comparison.radius > 0.0, "must be positive");
    c.comparison.alpha = s.get<double>("alpha", c.comparison.alpha);
    require(s, "alpha", c.comparison.alpha > 0.0 && c.comparison.alpha < 1.0, "must lie in (0, 1)");
    c.comparison.lambda_con = s.get<double>("lambda_con", c.comparison.lambda_con);
    require(s, "lambda_con", c.comparison.lambda_con > 1.0, "must exceed 1");
    c.comparison.dev_alpha = s.get<bool>("dev_alpha", false);
    s.finish();
  }
  if (diag.has("uniqueness")) {
    Section s = diag.child("uniqueness");
    c.uniqueness.enabled = true;
    c.uniqueness.perturbation = s.get<double>("perturbation", c.uniqueness.perturbation);
    c.uniqueness.tolerance = s.get<double>("tolerance", c.uniqueness.tolerance);
    require(s, "tolerance", c.uniqueness.tolerance > 0.0, "must be positive");
    s.finish();
  }
  diag.finish();

  c.write_solution = top.get<bool>("write_solution", false);
  c.output_dir = top.get<std::string>("output", c.output_dir.string());
  top.finish();
  c.hash = fnv1a_hex(config_to_json(c).dump());
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

bool RunManifest::all_passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

std::string format_suite_table(const std::vector<SuiteResult>& results) {
  std::ostringstream os;
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-20s %-4s samples=%-8ld failures=%ld", r.name.c_str(),
                  r.passed() ? "PASS" : "FAIL", r.samples, r.failures);
    os << line << "\n";
    if (!r.witness.empty()) os << "  witness: " << r.witness << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------- pipeline

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

class Timer {
 public:
  explicit Timer(std::vector<PhaseTiming>& out) : out_(out) {}
  template <class Fn>
  void phase(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    out_.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  }

 private:
  std::vector<PhaseTiming>& out_;
};

/// Serialized writer: files are collected in memory and written in a fixed order.
class Outputs {
 public:
  explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  void add_file(const std::string& name) { external_.push_back(name); }

  const std::filesystem::path& dir() const { return dir_; }

  void write(RunManifest& m) {
    std::filesystem::create_directories(dir_);
    for (const auto& [name, content] : files_) {
      std::ofstream out(dir_ / name, std::ios::binary);
      out << content;
      if (!out) throw Error("cannot write " + (dir_ / name).string());
      m.files.push_back({name, content.size(), fnv1a_hex(content)});
    }
    for (const auto& name : external_) {
      std::ifstream in(dir_ / name, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      m.files.push_back({name, ss.str().size(), fnv1a_hex(ss.str())});
    }
    ojson j;
    j["config_hash"] = m.config_hash;
    j["version"] = m.version;
    ojson t = ojson::array();
    for (const auto& p : m.timings) t.push_back({{"phase", p.phase}, {"seconds", p.seconds}});
    j["timings"] = t;
    ojson f = ojson::array();
    for (const auto& o : m.files) f.push_back({{"name", o.name}, {"bytes", o.bytes}, {"fnv1a", o.hash}});
    j["files"] = f;
    ojson a = ojson::array();
    for (const auto& x : m.assertions) a.push_back({{"check", x.check}, {"passed", x.passed}, {"detail", x.detail}});
    j["assertions"] = a;
    j["exit_code"] = m.exit_code();
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    out << j.dump(2) << "\n";
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
  std::vector<std::string> external_;
};

template <int Dim>
typename Grid<Dim>::Point to_point(const Coordinates& c) {
  typename Grid<Dim>::Point p;
  for (int d = 0; d < Dim; ++d) p(d) = c[d];
  return p;
}

template <int Dim>
ojson point_json(const typename Grid<Dim>::Point& p) {
  ojson a = ojson::array();
  for (int d = 0; d < Dim; ++d) a.push_back(p(d));
  return a;
}

template <int Dim>
std::shared_ptr<const Grid<Dim>> make_grid(const ExperimentConfig& c) {
  typename Grid<Dim>::Multi cells;
  for (int d = 0; d < Dim; ++d) cells(d) = c.cells[d];
  return Grid<Dim>::Make(to_point<Dim>(c.lo), to_point<Dim>(c.hi), cells);
}

template <int Dim>
DisplacementField<Dim> make_datum(const ExperimentConfig& c, const std::shared_ptr<const Grid<Dim>>& grid) {
  if (c.datum != "custom-file") return boundary_preset<Dim>(c.datum, grid, c.datum_amplitude);
  const FieldBundle<Dim> b = read_fields<Dim>(c.datum_file);
  if (b.grid->num_nodes() != grid->num_nodes() || (b.grid->lo() - grid->lo()).norm() > 1e-12 ||
      (b.grid->hi() - grid->hi()).norm() > 1e-12) {
    throw ConfigError("datum.path: field grid does not match the configured domain and resolution");
  }
  std::size_t k = 0;
  if (!c.datum_field.empty()) {
    const auto it = std::find(b.names.begin(), b.names.end(), c.datum_field);
    if (it == b.names.end()) throw ConfigError("datum.field: no field named '" + c.datum_field + "'");
    k = static_cast<std::size_t>(it - b.names.begin());
  }
  return DisplacementField<Dim>(grid, b.fields.at(k).values());
}

template <int Dim>
std::string center_header() {
  return Dim == 2 ? "cx,cy" : "cx,cy,cz";
}

template <int Dim>
std::string center_cells(const typename Grid<Dim>::Point& p) {
  std::string s;
  for (int d = 0; d < Dim; ++d) s += (d ? "," : "") + num(p(d));
  return s;
}

struct PoincareOutcome {
  std::string csv;
  ojson json;
  Assertion assertion;
};

template <int Dim>
PoincareOutcome poincare_phase(const ExperimentConfig& c, const std::shared_ptr<const Grid<Dim>>& grid,
                               const DisplacementField<Dim>* solution) {
  PoincareOutcome out;
  out.csv = "family,eps,L,ratio\n";
  out.json = ojson::object();
  std::vector<double> maxima;
  std::string violation;
  for (const auto& fam : c.poincare.families) {
    const bool own = fam == "solution" || fam == "datum";
    const DisplacementField<Dim> u = own ? *solution : poincare_family<Dim>(fam, grid);
    double mx = 0.0;
    try {
      for (const auto& s : poincare_sweep(u, c.poincare.points_per_decade, c.poincare.lambda)) {
        out.csv += fam + "," + num(s.eps) + "," + num(s.load) + "," + num(s.ratio) + "\n";
        mx = std::max(mx, s.ratio);
      }
    } catch (const InequalityViolation& e) {
      violation = fam + ": " + e.what();
    }
    maxima.push_back(mx);
    out.json[fam] = {{"max_ratio", mx}};
  }
  const double med = median(maxima);
  const double top = *std::max_element(maxima.begin(), maxima.end());
  out.json["median_of_family_maxima"] = med;
  out.json["fitted_constant"] = top;
  out.assertion.check = "poincare_spread";
  out.assertion.passed = violation.empty() && top <= c.poincare.spread_limit * med;
  out.assertion.detail = violation.empty() ? "max " + num(top) + " vs median " + num(med) : violation;
  return out;
}

template <int Dim>
RunManifest run_impl(const ExperimentConfig& c) {
  RunManifest m;
  m.config_hash = c.hash;
  Timer timer(m.timings);
  Outputs out(c.output_dir);
  const auto grid = make_grid<Dim>(c);
  const IntegrandSpec f = make_integrand(c.integrand, c.integrand_param);
  NewtonOptions opts;
  opts.tol_scale = c.tol_scale;
  opts.max_newton = c.max_newton;
  opts.allow_degenerate = c.allow_degenerate;

  ojson report;
  report["version"] = kArtifactVersion;
  report["config_hash"] = c.hash;
  report["config"] = ojson::parse(config_to_json(c).dump());
  if (f.ellipticity_a()) {
    const RegularityPredictor pred{Dim, *f.ellipticity_a()};
    ojson p = {{"a", pred.a}, {"in_theorem_range", pred.valid()}};
    if (Dim == 2) p["luxemburg_exponent"] = pred.luxemburg_exponent();
    else p["sobolev_exponent"] = pred.sobolev_exponent();
    p["second_order_exponent_bound"] = pred.second_order_exponent_bound();
    p["singular_set_dimension_bound"] = pred.singular_set_dimension_bound();
    report["predictor"] = p;
  }

  DisplacementField<Dim> u0(grid);
  SolverReport<Dim> sol;
  timer.phase("solve", [&] {
    u0 = make_datum<Dim>(c, grid);
    sol = run_viscosity_ladder<Dim>(f, grid, u0, c.j_max, opts);
  });
  const DisplacementField<Dim>& u = sol.final_field();

  std::vector<SecondOrderEnergy> second;
  if (c.second_order.enabled) {
    timer.phase("second_order", [&] {
      const auto x0 = to_point<Dim>(c.second_order.center);
      for (const auto& st : sol.stages) second.push_back(second_order_energy(st, x0, c.second_order.radius));
    });
  }

  {
    std::string csv =
        "j,A_j,weight,energy,plain_energy,regularization_mass,el_residual,tolerance,newton_iterations,cg_iterations,"
        "cauchy_difference";
    if (!second.empty()) csv += ",second_order_lhs,second_order_rhs,second_order_ratio";
    csv += "\n";
    ojson stages = ojson::array();
    for (std::size_t i = 0; i < sol.stages.size(); ++i) {
      const auto& s = sol.stages[i];
      const double cd = i == 0 ? 0.0 : sol.cauchy_differences[i - 1];
      csv += std::to_string(s.j) + "," + num(s.a_j) + "," + num(s.weight) + "," + num(s.energy) + "," +
             num(s.plain_energy) + "," + num(s.regularization_mass) + "," + num(s.el_residual) + "," +
             num(s.tolerance) + "," + std::to_string(s.newton_iterations) + "," + std::to_string(s.cg_iterations) +
             "," + num(cd);
      if (!second.empty()) csv += "," + num(second[i].lhs) + "," + num(second[i].rhs) + "," + num(second[i].ratio());
      csv += "\n";
      stages.push_back({{"j", s.j}, {"A_j", s.a_j}, {"energy", s.energy}, {"plain_energy", s.plain_energy},
                        {"el_residual", s.el_residual}, {"newton_iterations", s.newton_iterations}});
    }
    out.add("stages.csv", csv);
    report["solver"] = {{"integrand", f.name()},
                        {"stages", stages},
                        {"relaxed_energy", sol.relaxed_energy},
                        {"cauchy_differences", sol.cauchy_differences},
                        {"energy_gaps", sol.energy_gaps}};
  }

  ojson diag = ojson::object();
  if (!second.empty()) {
    // Ratios at this level come from strain roundoff of exactly affine fields.
    constexpr double kRatioFloor = 1e-20;
    const auto ratio = [&](const SecondOrderEnergy& s) { return s.ratio() <= kRatioFloor ? 0.0 : s.ratio(); };
    const double r1 = ratio(second.front());
    bool ok = true;
    double lo = r1, hi = r1;
    for (const auto& s : second) {
      const double r = ratio(s);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      if (r1 > 0.0) ok = ok && r <= c.second_order.factor * r1 && r >= r1 / c.second_order.factor;
      else ok = ok && r == 0.0;
    }
    m.assertions.push_back({"second_order_uniform_in_j", ok,
                            "ratio range [" + num(lo) + ", " + num(hi) + "] around j=1 value " + num(r1)});
    diag["second_order"] = {{"j1_ratio", r1}, {"min_ratio", lo}, {"max_ratio", hi}, {"passed", ok}};
  }

  if (c.excess.enabled) {
    timer.phase("excess", [&] {
      const StrainField<Dim> e = symmetric_gradient(u);
      std::string csv = center_header<Dim>() + ",r,Phi,PhiTilde\n";
      ojson centers = ojson::array();
      ojson singular = ojson::array();
      bool ok = true;
      for (const auto& cc : c.excess.centers) {
        const auto x0 = to_point<Dim>(cc);
        const ExcessProfile<Dim> prof = excess(e, x0, c.excess.radius);
        for (const auto& l : prof.levels) {
          csv += center_cells<Dim>(x0) + "," + num(l.radius) + "," + num(l.phi) + "," + num(l.phi_tilde) + "\n";
        }
        const DecayFit fit = decay_fit(prof, c.excess.alpha_min, c.excess.smallness);
        if (!fit.applicable) singular.push_back(point_json<Dim>(x0));
        if (fit.applicable && !fit.pass) ok = false;
        centers.push_back({{"center", point_json<Dim>(x0)},
                           {"slope", fit.slope},
                           {"points", fit.points},
                           {"exact", fit.exact},
                           {"applicable", fit.applicable},
                           {"pass", fit.pass}});
      }
      out.add("excess_ladder.csv", csv);
      diag["excess"] = {{"centers", centers}, {"smallness_failures", singular}};
      m.assertions.push_back({"excess_decay", ok, "slope >= " + num(2.0 * c.excess.alpha_min) + " where applicable"});
    });
  }

  if (c.scaling.enabled) {
    timer.phase("scaling", [&] {
      std::vector<std::pair<typename Grid<Dim>::Point, double>> balls;
      for (const auto& b : c.scaling.balls) balls.emplace_back(to_point<Dim>(b.center), b.radius);
      const ScalingReport<Dim> rep = sobolev_scaling_check(u, f, balls);
      std::string csv = "ball,lhs,rhs,ratio\n";
      std::vector<double> ratios;
      for (std::size_t i = 0; i < rep.balls.size(); ++i) {
        const auto& b = rep.balls[i];
        csv += std::to_string(i) + "," + num(b.lhs) + "," + num(b.rhs) + "," + num(b.ratio) + "\n";
        ratios.push_back(b.ratio);
      }
      out.add("scaling_check.csv", csv);
      const double med = median(ratios);
      const bool ok = rep.max_ratio <= c.scaling.spread_limit * med;
      diag["scaling"] = {{"branch", rep.luxemburg ? "luxemburg" : "sobolev"},
                         {"exponent", rep.exponent},
                         {"fitted_constant", rep.max_ratio},
                         {"median_ratio", med}};
      m.assertions.push_back({"scaling_spread", ok, "max " + num(rep.max_ratio) + " vs median " + num(med)});
    });
  }

  if (c.poincare.enabled) {
    timer.phase("poincare", [&] {
      PoincareOutcome p = poincare_phase<Dim>(c, grid, &u);
      out.add("poincare_sweep.csv", p.csv);
      diag["poincare"] = p.json;
      m.assertions.push_back(p.assertion);
    });
  }

  if (c.comparison.enabled) {
    timer.phase("comparison", [&] {
      ojson rows = ojson::array();
      for (const auto& cc : c.comparison.centers) {
        const auto x0 = to_point<Dim>(cc);
        ojson row = {{"center", point_json<Dim>(x0)}};
        try {
          const auto d = mollification_parameters(u, x0, c.comparison.radius, c.comparison.alpha, c.comparison.lambda_con);
          row["phi_tilde"] = d.phi_tilde;
          row["eps"] = d.eps;
          row["t_alpha"] = d.t_alpha;
          row["sup_term"] = d.sup_term;
          row["holder_term"] = d.holder_term;
          row["predicted"] = d.predicted;
          row["ratio"] = d.ratio;
          if (c.comparison.dev_alpha && d.eps > 0.0) {
            const DisplacementField<Dim> v = mollify_twice(u, d.eps);
            row["dev_alpha"] = dev_alpha(v, f, x0, 0.5 * c.comparison.radius);
          }
        } catch (const GridTooCoarse& e) {
          row["skipped"] = e.what();
        } catch (const PreconditionError& e) {
          row["skipped"] = e.what();
        }
        rows.push_back(row);
      }
      diag["comparison"] = rows;
    });
  }

  if (c.uniqueness.enabled) {
    timer.phase("uniqueness", [&] {
      std::mt19937_64 rng(c.seed);
      std::normal_distribution<double> normal;
      DisplacementField<Dim> warm = u0;
      for (int i = 0; i < grid->num_nodes(); ++i) {
        if (grid->is_boundary_node(i)) continue;
        for (int d = 0; d < Dim; ++d) warm.values()(d, i) += c.uniqueness.perturbation * normal(rng);
      }
      const SolverReport<Dim> other = run_viscosity_ladder<Dim>(f, grid, u0, c.j_max, opts, warm);
      const double dist = strain_l1_distance(u, other.final_field());
      const bool ok = dist <= c.uniqueness.tolerance * grid->volume();
      diag["uniqueness"] = {{"strain_l1_distance", dist}, {"bound", c.uniqueness.tolerance * grid->volume()}};
      m.assertions.push_back({"uniqueness_modulo_rigid", ok, "strain L1 distance " + num(dist)});
    });
  }

  report["diagnostics"] = diag;
  ojson asserts = ojson::array();
  for (const auto& a : m.assertions) asserts.push_back({{"check", a.check}, {"passed", a.passed}, {"detail", a.detail}});
  report["assertions"] = asserts;
  report["exit_code"] = m.exit_code();
  out.add("report.json", report.dump(2) + "\n");

  std::string gp = "# gnuplot script; run from the output directory\nset datafile separator ','\n";
  gp += "set terminal pngcairo size 900,600\n";
  gp += "set output 'stages.png'\nset logscale x 2\nset xlabel 'j'\nset ylabel 'energy'\n";
  gp += "plot 'stages.csv' using 1:4 skip 1 with linespoints title 'F_j[v_j]', '' using 1:5 skip 1 with linespoints title 'F[v_j]'\n";
  if (c.excess.enabled) {
    const int rc = Dim + 1, pc = Dim + 3;
    gp += "set output 'excess.png'\nset logscale xy\nset xlabel 'r'\nset ylabel 'PhiTilde'\n";
    gp += "plot 'excess_ladder.csv' using " + std::to_string(rc) + ":" + std::to_string(pc) +
          " skip 1 with points title 'excess'\nunset logscale\n";
  }
  if (c.poincare.enabled) {
    gp += "set output 'poincare.png'\nset logscale xy\nset xlabel 'L eps'\nset ylabel 'ratio'\n";
    gp += "plot 'poincare_sweep.csv' using ($3*$2):4 skip 1 with points title 'normalized ratio'\n";
  }
  out.add("plot.gp", gp);

  timer.phase("write", [&] {
    if (c.write_solution) {
      std::filesystem::create_directories(out.dir());
      write_fields<Dim>(out.dir() / "solution.csv", FieldBundle<Dim>{grid, {"u", "u0"}, {u, u0}}, FieldFormat::Csv);
      out.add_file("solution.csv");
    }
  });
  out.write(m);
  return m;
}

template <int Dim>
RunManifest sweep_impl(const ExperimentConfig& c) {
  RunManifest m;
  m.config_hash = c.hash;
  Timer timer(m.timings);
  Outputs out(c.output_dir);
  const auto grid = make_grid<Dim>(c);
  ExperimentConfig cc = c;
  if (!cc.poincare.enabled) cc.poincare.families = poincare_family_names();
  std::erase(cc.poincare.families, std::string("solution"));
  cc.poincare.families.push_back("datum");
  DisplacementField<Dim> datum(grid);
  PoincareOutcome p;
  timer.phase("poincare", [&] {
    datum = make_datum<Dim>(c, grid);
    p = poincare_phase<Dim>(cc, grid, &datum);
  });
  m.assertions.push_back(p.assertion);
  out.add("poincare_sweep.csv", p.csv);
  ojson report;
  report["version"] = kArtifactVersion;
  report["config_hash"] = c.hash;
  report["poincare"] = p.json;
  report["exit_code"] = m.exit_code();
  out.add("report.json", report.dump(2) + "\n");
  out.write(m);
  return m;
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& config) {
  return config.dimension == 2 ? run_impl<2>(config) : run_impl<3>(config);
}

RunManifest run_poincare_sweep(const ExperimentConfig& config) {
  return config.dimension == 2 ? sweep_impl<2>(config) : sweep_impl<3>(config);
}

}  // namespace bdlab
