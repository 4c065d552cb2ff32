#include "quasicontact/config.hpp"

#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "quasicontact/errors.hpp"

namespace qc {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

std::string child(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Collects every violation instead of stopping at the first.
class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

  void allow(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& item : obj.items())
      if (!allowed.count(item.key())) fail(child(path, item.key()), "unknown key");
  }

  const json* object(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return nullptr;
    const json& v = obj.at(key);
    if (!v.is_object()) {
      fail(child(path, key), "must be an object");
      return nullptr;
    }
    return &v;
  }

  std::optional<double> number(const json& obj, const std::string& key, const std::string& path,
                               double lo = -std::numeric_limits<double>::infinity(), bool strict = false) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_number()) {
      fail(child(path, key), "must be a number");
      return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x) || (strict ? !(x > lo) : !(x >= lo))) {
      std::ostringstream os;
      os << "must be " << (strict ? "> " : ">= ") << lo << " (got " << x << ")";
      fail(child(path, key), os.str());
      return std::nullopt;
    }
    return x;
  }

  template <class Int>
  std::optional<Int> integer(const json& obj, const std::string& key, const std::string& path, long long lo) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(child(path, key), "must be an integer");
      return std::nullopt;
    }
    const long long x = v.get<long long>();
    if (x < lo) {
      fail(child(path, key), "must be >= " + std::to_string(lo) + " (got " + std::to_string(x) + ")");
      return std::nullopt;
    }
    return static_cast<Int>(x);
  }

  std::optional<std::vector<double>> vector(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    const std::string p = child(path, key);
    if (!v.is_array()) {
      fail(p, "must be an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        fail(p + "[" + std::to_string(i) + "]", "must be a number");
        return std::nullopt;
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::optional<std::vector<int>> int_vector(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    const std::string p = child(path, key);
    if (!v.is_array()) {
      fail(p, "must be an array of integers");
      return std::nullopt;
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) {
        fail(p + "[" + std::to_string(i) + "]", "must be an integer");
        return std::nullopt;
      }
      out.push_back(v[i].get<int>());
    }
    return out;
  }

  std::optional<Eigen::MatrixXd> matrix(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    const std::string p = child(path, key);
    if (!v.is_array() || v.empty() || !v[0].is_array()) {
      fail(p, "must be a non-empty array of rows");
      return std::nullopt;
    }
    const std::size_t rows = v.size(), cols = v[0].size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      if (!v[i].is_array() || v[i].size() != cols) {
        fail(p + "[" + std::to_string(i) + "]", "rows must all have length " + std::to_string(cols));
        return std::nullopt;
      }
      for (std::size_t j = 0; j < cols; ++j) {
        if (!v[i][j].is_number()) {
          fail(p + "[" + std::to_string(i) + "][" + std::to_string(j) + "]", "must be a number");
          return std::nullopt;
        }
        m(i, j) = v[i][j].get<double>();
      }
    }
    return m;
  }
};

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void read_grid(Reader& r, const json& obj, const std::string& key, const std::string& path, GridSpec& out) {
  const json* g = r.object(obj, key, path);
  if (!g) return;
  const std::string p = child(path, key);
  r.allow(*g, p, {"extent", "points_per_axis", "torus"});
  if (auto x = r.number(*g, "extent", p, 0.0, true)) out.extent = *x;
  if (auto n = r.integer<int>(*g, "points_per_axis", p, 3)) {
    if (*n % 2 == 0) r.fail(child(p, "points_per_axis"), "must be odd (got " + std::to_string(*n) + ")");
    else out.points_per_axis = *n;
  }
  if (g->contains("torus")) {
    if (!g->at("torus").is_boolean()) r.fail(child(p, "torus"), "must be true or false");
    else out.torus = g->at("torus").get<bool>();
  }
}

void read_refinement(Reader& r, const json& obj, const std::string& path, std::vector<int>& out) {
  if (auto v = r.int_vector(obj, "refinement", path)) {
    bool ok = v->size() >= 2;
    for (std::size_t i = 0; i < v->size(); ++i)
      ok = ok && (*v)[i] >= 3 && (*v)[i] % 2 == 1 && (i == 0 || (*v)[i] > (*v)[i - 1]);
    if (!ok) r.fail(child(path, "refinement"), "must list at least two increasing odd sizes >= 3");
    else out = *v;
  }
}

std::optional<Eigen::VectorXd> read_h(Reader& r, const json& obj, const std::string& path, const MarkSpace* marks) {
  auto v = r.vector(obj, "h", path);
  if (!v) return std::nullopt;
  const std::string p = child(path, "h");
  if (!marks) return std::nullopt;
  if (static_cast<Eigen::Index>(v->size()) != marks->size()) {
    r.fail(p, "must have one entry per mark (" + std::to_string(marks->size()) + ")");
    return std::nullopt;
  }
  const Eigen::VectorXd h = to_eigen(*v);
  if ((h.array() < 0.0).any()) {
    r.fail(p, "entries must be nonnegative");
    return std::nullopt;
  }
  const double mass = h.dot(marks->weights());
  if (std::abs(mass - 1.0) > 1e-8) {
    r.fail(p, "must be normalized so that sum h_i nu_i = 1 (got " + std::to_string(mass) + ")");
    return std::nullopt;
  }
  return h;
}

std::optional<MarkSpace> read_marks(Reader& r, const json& model) {
  const json* m = r.object(model, "marks", "model");
  if (!m) return MarkSpace::single();
  const std::string p = "model.marks";
  r.allow(*m, p, {"weights", "labels", "uniform_grid"});
  if (m->contains("uniform_grid")) {
    if (m->contains("weights")) r.fail(p, "give either weights or uniform_grid, not both");
    if (auto k = r.integer<long>(*m, "uniform_grid", p, 1)) return MarkSpace::uniform_grid(*k);
    return std::nullopt;
  }
  auto w = r.vector(*m, "weights", p);
  if (!w) {
    if (!m->contains("weights")) r.fail(child(p, "weights"), "required");
    return std::nullopt;
  }
  std::vector<std::string> labels;
  if (m->contains("labels")) {
    const json& l = m->at("labels");
    if (!l.is_array() || l.size() != w->size()) {
      r.fail(child(p, "labels"), "must be an array of " + std::to_string(w->size()) + " strings");
    } else {
      for (const auto& s : l) {
        if (!s.is_string()) r.fail(child(p, "labels"), "must contain strings");
        else labels.push_back(s.get<std::string>());
      }
    }
  }
  bool ok = !w->empty();
  for (std::size_t i = 0; i < w->size(); ++i)
    if (!((*w)[i] > 0.0)) {
      r.fail(child(p, "weights") + "[" + std::to_string(i) + "]", "must be strictly positive");
      ok = false;
    }
  if (!ok) return std::nullopt;
  if (!labels.empty() && labels.size() != w->size()) return std::nullopt;
  return MarkSpace(std::move(labels), to_eigen(*w));
}

std::optional<MarkKernel> read_kernel(Reader& r, const json& model, const MarkSpace& marks) {
  const Eigen::Index k = marks.size();
  Eigen::VectorXd mortality = Eigen::VectorXd::Ones(k);
  bool ok = true;
  if (auto m = r.vector(model, "mortality", "model")) {
    if (static_cast<Eigen::Index>(m->size()) != k) {
      r.fail("model.mortality", "must have one entry per mark (" + std::to_string(k) + ")");
      ok = false;
    } else {
      for (Eigen::Index i = 0; i < k; ++i) {
        if (!((*m)[i] > 0.0)) {
          r.fail("model.mortality[" + std::to_string(i) + "]", "must be strictly positive");
          ok = false;
        }
      }
      mortality = to_eigen(*m);
    }
  }

  const json* q = r.object(model, "kernel", "model");
  Eigen::MatrixXd matrix = Eigen::MatrixXd::Ones(k, k);
  if (q) {
    const std::string p = "model.kernel";
    r.allow(*q, p, {"matrix", "uniform", "exponential"});
    const int forms = static_cast<int>(q->contains("matrix")) + q->contains("uniform") + q->contains("exponential");
    if (forms != 1) {
      r.fail(p, "give exactly one of matrix, uniform, exponential");
      return std::nullopt;
    }
    if (q->contains("matrix")) {
      auto m = r.matrix(*q, "matrix", p);
      if (!m) return std::nullopt;
      if (m->rows() != k || m->cols() != k) {
        r.fail(child(p, "matrix"), "must be " + std::to_string(k) + " x " + std::to_string(k));
        return std::nullopt;
      }
      for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
          if (!((*m)(i, j) > 0.0)) {
            std::ostringstream os;
            os << "Q must be strictly positive (got " << (*m)(i, j) << ")";
            r.fail(child(p, "matrix") + "[" + std::to_string(i) + "][" + std::to_string(j) + "]", os.str());
            ok = false;
          }
      matrix = *m;
    } else if (q->contains("uniform")) {
      if (auto v = r.number(*q, "uniform", p, 0.0, true)) matrix.setConstant(*v);
      else ok = false;
    } else {
      const json* e = r.object(*q, "exponential", p);
      if (!e) return std::nullopt;
      const std::string pe = child(p, "exponential");
      r.allow(*e, pe, {"length", "amplitude"});
      const auto length = r.number(*e, "length", pe, 0.0, true);
      const auto amplitude = e->contains("amplitude") ? r.number(*e, "amplitude", pe, 0.0, true) : 1.0;
      if (!e->contains("length")) r.fail(child(pe, "length"), "required");
      if (marks.coordinates().size() == 0) r.fail(pe, "needs marks.uniform_grid for node coordinates");
      if (!length || !amplitude || marks.coordinates().size() == 0) return std::nullopt;
      matrix = MarkKernel::exponential(marks, *length, *amplitude).q_matrix();
    }
  }
  if (!ok) return std::nullopt;
  return MarkKernel(marks, matrix, mortality);
}

std::optional<DispersalKernel> read_dispersal(Reader& r, const json& model, int dim, const std::string& base_dir) {
  const json* d = r.object(model, "dispersal", "model");
  if (!d) return DispersalKernel::isotropic_gaussian(dim, 1.0);
  const std::string p = "model.dispersal";
  r.allow(*d, p, {"gaussian", "uniform_ball", "tabulated"});
  if (d->size() != 1) {
    r.fail(p, "give exactly one of gaussian, uniform_ball, tabulated");
    return std::nullopt;
  }
  try {
    if (const json* g = r.object(*d, "gaussian", p)) {
      const std::string pg = child(p, "gaussian");
      r.allow(*g, pg, {"sigma", "covariance", "mean"});
      Eigen::VectorXd mean;
      if (auto m = r.vector(*g, "mean", pg)) {
        if (static_cast<int>(m->size()) != dim) {
          r.fail(child(pg, "mean"), "must have length dim = " + std::to_string(dim));
          return std::nullopt;
        }
        mean = to_eigen(*m);
      }
      if (g->contains("sigma") == g->contains("covariance")) {
        r.fail(pg, "give exactly one of sigma, covariance");
        return std::nullopt;
      }
      if (g->contains("sigma")) {
        auto s = r.number(*g, "sigma", pg, 0.0, true);
        if (!s) return std::nullopt;
        return DispersalKernel::gaussian(Eigen::MatrixXd::Identity(dim, dim) * (*s) * (*s), mean);
      }
      auto c = r.matrix(*g, "covariance", pg);
      if (!c) return std::nullopt;
      if (c->rows() != dim || c->cols() != dim) {
        r.fail(child(pg, "covariance"), "must be dim x dim");
        return std::nullopt;
      }
      return DispersalKernel::gaussian(*c, mean);
    }
    if (const json* b = r.object(*d, "uniform_ball", p)) {
      const std::string pb = child(p, "uniform_ball");
      r.allow(*b, pb, {"radius"});
      auto radius = r.number(*b, "radius", pb, 0.0, true);
      if (!b->contains("radius")) r.fail(child(pb, "radius"), "required");
      if (!radius) return std::nullopt;
      return DispersalKernel::uniform_ball(dim, *radius);
    }
    if (const json* t = r.object(*d, "tabulated", p)) {
      const std::string pt = child(p, "tabulated");
      r.allow(*t, pt, {"file"});
      if (!t->contains("file") || !t->at("file").is_string()) {
        r.fail(child(pt, "file"), "required path string");
        return std::nullopt;
      }
      std::filesystem::path file = t->at("file").get<std::string>();
      if (file.is_relative()) file = std::filesystem::path(base_dir) / file;
      auto kernel = DispersalKernel::load_tabulated_csv(file.string());
      if (kernel.dim() != dim) {
        r.fail(child(pt, "file"), "table dimension " + std::to_string(kernel.dim()) + " differs from dim");
        return std::nullopt;
      }
      return kernel;
    }
  } catch (const std::exception& e) {
    r.fail(p, e.what());
  }
  return std::nullopt;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

MomentumGrid GridSpec::make(int dim, double torus_length) const {
  if (torus) return MomentumGrid::for_torus(dim, torus_length, points_per_axis);
  return MomentumGrid(dim, extent, points_per_axis);
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open file"});
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  const auto dir = std::filesystem::path(path).parent_path();
  RunConfig cfg = parse_config_json(doc, dir.empty() ? "." : dir.string());
  cfg.path = path;
  return cfg;
}

RunConfig parse_config_json(const json& doc, const std::string& base_dir) {
  Reader r;
  if (!doc.is_object()) throw ConfigError({"(root): must be an object"});
  r.allow(doc, "", {"model", "spectrum", "pair", "evolve", "simulate", "validate", "output"});
  const json* model = r.object(doc, "model", "");
  if (!model) {
    if (!doc.contains("model")) r.fail("model", "required");
    throw ConfigError(r.errors);
  }
  r.allow(*model, "model", {"dim", "torus_length", "kappa", "marks", "kernel", "mortality", "dispersal"});

  int dim = 3;
  if (auto d = r.integer<int>(*model, "dim", "model", 1)) dim = *d;
  double length = 0.0;
  if (auto l = r.number(*model, "torus_length", "model", 0.0, true)) length = *l;

  const auto marks = read_marks(r, *model);
  std::optional<MarkKernel> kernel;
  if (marks) kernel = read_kernel(r, *model, *marks);
  const auto dispersal = read_dispersal(r, *model, dim, base_dir);

  bool critical = true;
  double kappa = 0.0;
  if (model->contains("kappa")) {
    const json& k = model->at("kappa");
    if (k.is_string()) {
      if (k.get<std::string>() != "critical") r.fail("model.kappa", "must be a positive number or \"critical\"");
    } else if (auto v = r.number(*model, "kappa", "model", 0.0, true)) {
      critical = false;
      kappa = *v;
    }
  }
  if (dispersal) {
    const double spread = dispersal->max_std();
    if (length == 0.0 && !model->contains("torus_length")) length = std::max(8.0, 8.0 * spread);
    if (length > 0.0 && length < 8.0 * spread) {
      std::ostringstream os;
      os << "must be at least 8 x the dispersal standard deviation (" << 8.0 * spread << ")";
      r.fail("model.torus_length", os.str());
    }
  }

  const MarkSpace* space = marks ? &*marks : nullptr;
  SpectrumTask spectrum;
  if (const json* s = r.object(doc, "spectrum", "")) {
    r.allow(*s, "spectrum", {"tol", "max_iter"});
    if (auto t = r.number(*s, "tol", "spectrum", 0.0, true)) spectrum.options.tol = *t;
    if (auto n = r.integer<long>(*s, "max_iter", "spectrum", 1)) spectrum.options.max_iter = *n;
  }

  PairTask pair;
  if (const json* p = r.object(doc, "pair", "")) {
    r.allow(*p, "pair", {"rho", "grid", "refinement", "direction", "separations"});
    if (auto x = r.number(*p, "rho", "pair", 0.0, true)) pair.rho = *x;
    read_grid(r, *p, "grid", "pair", pair.grid);
    read_refinement(r, *p, "pair", pair.refinement);
    if (auto v = r.vector(*p, "direction", "pair")) {
      if (static_cast<int>(v->size()) != dim) r.fail("pair.direction", "must have length dim");
      else pair.direction = *v;
    }
    if (auto v = r.vector(*p, "separations", "pair")) pair.separations = *v;
  }
  if (pair.direction.empty()) {
    pair.direction.assign(dim, 0.0);
    pair.direction[0] = 1.0;
  }
  if (pair.separations.empty())
    for (int i = 1; i <= 20; ++i) pair.separations.push_back(0.25 * i);

  EvolveTask evolve;
  if (const json* e = r.object(doc, "evolve", "")) {
    r.allow(*e, "evolve", {"rho", "h", "t_end", "dt", "sample_interval", "grid", "forcing"});
    if (auto x = r.number(*e, "rho", "evolve", 0.0, true)) evolve.rho = *x;
    evolve.h = read_h(r, *e, "evolve", space);
    if (auto x = r.number(*e, "t_end", "evolve", 0.0, true)) evolve.t_end = *x;
    if (auto x = r.number(*e, "dt", "evolve", 0.0)) evolve.dt = *x;
    if (auto x = r.number(*e, "sample_interval", "evolve", 0.0)) evolve.sample_interval = *x;
    read_grid(r, *e, "grid", "evolve", evolve.grid);
    if (e->contains("forcing")) {
      const json& f = e->at("forcing");
      const std::string name = f.is_string() ? f.get<std::string>() : "";
      if (name == "self_consistent") evolve.forcing = Forcing::SelfConsistent;
      else if (name == "frozen") evolve.forcing = Forcing::Frozen;
      else if (name == "none") evolve.forcing = Forcing::None;
      else r.fail("evolve.forcing", "must be one of self_consistent, frozen, none");
    }
  }

  SimulateTask simulate;
  if (const json* s = r.object(doc, "simulate", "")) {
    r.allow(*s, "simulate", {"rho", "h", "t_end", "replicas", "seed", "sample_times", "pair_edges"});
    if (auto x = r.number(*s, "rho", "simulate", 0.0)) simulate.rho = *x;
    simulate.h = read_h(r, *s, "simulate", space);
    if (auto x = r.number(*s, "t_end", "simulate", 0.0)) simulate.t_end = *x;
    if (auto n = r.integer<std::size_t>(*s, "replicas", "simulate", 1)) simulate.replicas = *n;
    if (auto n = r.integer<std::uint64_t>(*s, "seed", "simulate", 0)) simulate.seed = *n;
    if (auto v = r.vector(*s, "sample_times", "simulate")) {
      for (double t : *v)
        if (t < 0.0 || t > simulate.t_end) r.fail("simulate.sample_times", "must lie in [0, t_end]");
      simulate.sample_times = *v;
    }
    if (auto v = r.vector(*s, "pair_edges", "simulate")) {
      bool ok = v->size() >= 2;
      for (std::size_t i = 0; i < v->size(); ++i)
        ok = ok && (*v)[i] >= 0.0 && (*v)[i] <= 0.5 * length && (i == 0 || (*v)[i] > (*v)[i - 1]);
      if (!ok) r.fail("simulate.pair_edges", "must be at least two increasing values in [0, torus_length / 2]");
      else simulate.pair_edges = *v;
    }
  }
  if (simulate.sample_times.empty()) {
    for (int i = 0; i <= 10; ++i) simulate.sample_times.push_back(simulate.t_end * i / 10.0);
  }

  ValidateTask validate;
  if (const json* v = r.object(doc, "validate", "")) {
    const std::string p = "validate";
    r.allow(*v, p, {"rho", "h", "seed", "replicas", "relax_time", "fixed_point_time", "pair_time",
                    "pair_replicas", "pair_edges", "pair_points_per_axis", "grid", "refinement", "k2_early",
                    "k2_late", "k2_tolerance"});
    if (auto x = r.number(*v, "rho", p, 0.0, true)) validate.rho = *x;
    validate.h = read_h(r, *v, p, space);
    if (auto n = r.integer<std::uint64_t>(*v, "seed", p, 0)) validate.seed = *n;
    if (auto n = r.integer<std::size_t>(*v, "replicas", p, 1)) validate.replicas = *n;
    if (auto x = r.number(*v, "relax_time", p, 0.0, true)) validate.relax_time = *x;
    if (auto x = r.number(*v, "fixed_point_time", p, 0.0, true)) validate.fixed_point_time = *x;
    if (auto x = r.number(*v, "pair_time", p, 0.0, true)) validate.pair_time = *x;
    if (auto n = r.integer<std::size_t>(*v, "pair_replicas", p, 2)) validate.pair_replicas = *n;
    if (auto e = r.vector(*v, "pair_edges", p)) {
      bool ok = e->size() >= 2;
      for (std::size_t i = 0; i < e->size(); ++i) ok = ok && (*e)[i] > 0.0 && (i == 0 || (*e)[i] > (*e)[i - 1]);
      if (!ok) r.fail("validate.pair_edges", "must be at least two increasing positive values");
      else validate.pair_edges = *e;
    }
    if (auto n = r.integer<int>(*v, "pair_points_per_axis", p, 3)) {
      if (*n % 2 == 0) r.fail("validate.pair_points_per_axis", "must be odd (got " + std::to_string(*n) + ")");
      else validate.pair_points_per_axis = *n;
    }
    read_grid(r, *v, "grid", p, validate.grid);
    read_refinement(r, *v, p, validate.refinement);
    if (auto x = r.number(*v, "k2_early", p, 0.0, true)) validate.k2_early = *x;
    if (auto x = r.number(*v, "k2_late", p, 0.0, true)) validate.k2_late = *x;
    if (auto x = r.number(*v, "k2_tolerance", p, 0.0, true)) validate.k2_tolerance = *x;
    if (validate.k2_late <= validate.k2_early) r.fail("validate.k2_late", "must exceed k2_early");
  }

  std::string output = "results";
  if (const json* o = r.object(doc, "output", "")) {
    r.allow(*o, "output", {"directory"});
    if (o->contains("directory")) {
      if (!o->at("directory").is_string()) r.fail("output.directory", "must be a string");
      else output = o->at("directory").get<std::string>();
    }
  }

  if (!r.errors.empty() || !kernel || !dispersal) {
    if (r.errors.empty()) r.fail("model", "incomplete");
    throw ConfigError(r.errors);
  }

  std::optional<CorrelationModel> resolved;
  try {
    resolved = critical ? CorrelationModel::critical(*kernel, *dispersal, spectrum.options)
                        : CorrelationModel::with_kappa(*kernel, *dispersal, kappa, spectrum.options);
  } catch (const std::exception& e) {
    throw ConfigError({std::string("model: ") + e.what()});
  }
  RunConfig cfg(std::move(*resolved));
  cfg.source = doc;
  cfg.dim = dim;
  cfg.torus_length = length;
  cfg.kappa_critical = critical;
  cfg.spectrum = spectrum;
  cfg.pair = std::move(pair);
  cfg.evolve = std::move(evolve);
  cfg.simulate = std::move(simulate);
  cfg.validate = std::move(validate);
  cfg.output_directory = output;
  return cfg;
}

}  // namespace qc
