#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "quasicontact/config.hpp"
#include "quasicontact/errors.hpp"
#include "quasicontact/harness.hpp"

using namespace qc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json markless_doc() { return {{"model", {{"dim", 3}, {"kappa", "critical"}}}}; }

json two_mark_doc() {
  return {{"model",
           {{"dim", 3},
            {"kappa", "critical"},
            {"marks", {{"weights", {0.5, 0.5}}}},
            {"kernel", {{"matrix", {{2, 1}, {1, 2}}}}}}}};
}

std::vector<std::string> violations_of(const json& doc) {
  try {
    parse_config_json(doc);
  } catch (const ConfigError& e) {
    return e.violations();
  }
  return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& tag)
      : dir(fs::temp_directory_path() / ("qc_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path write(const std::string& name, const json& doc) const {
    std::ofstream(dir / name) << doc.dump(2);
    return dir / name;
  }
};

// Shell average of cos(p . w) by radial Simpson quadrature of sin(p r) / (p r).
double shell_average_oracle(double p, double a, double b) {
  const int n = 2000;
  const double h = (b - a) / n;
  auto f = [p](double r) { return r * r * (p == 0.0 ? 1.0 : std::sin(p * r) / (p * r)); };
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0 / ((b * b * b - a * a * a) / 3.0);
}

}  // namespace

TEST_CASE("subcommand names round trip") {
  for (auto s : {Subcommand::Spectrum, Subcommand::Pair, Subcommand::Evolve, Subcommand::Simulate,
                 Subcommand::Validate})
    CHECK(parse_subcommand(to_string(s)) == s);
  CHECK_FALSE(parse_subcommand("plot"));
}

TEST_CASE("minimal markless config resolves critical kappa") {
  const auto cfg = parse_config_json(markless_doc());
  CHECK(cfg.kappa_critical);
  CHECK(cfg.model.kappa == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cfg.dim == 3);
  CHECK(cfg.torus_length == doctest::Approx(8.0));
  CHECK(cfg.model.marks() == 1);
}

TEST_CASE("config violations name their keys") {
  SUBCASE("even points per axis") {
    json doc = markless_doc();
    doc["pair"] = {{"grid", {{"points_per_axis", 32}}}};
    const auto v = violations_of(doc);
    REQUIRE_FALSE(v.empty());
    CHECK(mentions(v, "pair.grid.points_per_axis"));
    CHECK(mentions(v, "odd"));
  }
  SUBCASE("zero kernel entry") {
    json doc = two_mark_doc();
    doc["model"]["kernel"]["matrix"] = {{2, 0}, {1, 2}};
    const auto v = violations_of(doc);
    CHECK(mentions(v, "model.kernel.matrix[0][1]"));
    CHECK(mentions(v, "strictly positive"));
  }
  SUBCASE("zero replicas") {
    json doc = markless_doc();
    doc["simulate"] = {{"replicas", 0}};
    CHECK(mentions(violations_of(doc), "simulate.replicas"));
  }
  SUBCASE("every problem is collected") {
    json doc = markless_doc();
    doc["model"]["colour"] = "red";
    doc["model"]["dim"] = 0;
    doc["evolve"] = {{"t_end", -1}};
    const auto v = violations_of(doc);
    CHECK(v.size() >= 3);
    CHECK(mentions(v, "model.colour"));
    CHECK(mentions(v, "model.dim"));
    CHECK(mentions(v, "evolve.t_end"));
  }
  SUBCASE("torus too small for the dispersal") {
    json doc = markless_doc();
    doc["model"]["torus_length"] = 4.0;
    CHECK(mentions(violations_of(doc), "model.torus_length"));
  }
  SUBCASE("unnormalized initial profile") {
    json doc = two_mark_doc();
    doc["evolve"] = {{"h", {1, 0}}};
    CHECK(mentions(violations_of(doc), "evolve.h"));
  }
}

TEST_CASE("overrides") {
  auto cfg = parse_config_json(markless_doc());
  apply_overrides(cfg, {std::string("elsewhere"), 42u, 7u});
  CHECK(cfg.output_directory == "elsewhere");
  CHECK(cfg.simulate.seed == 42u);
  CHECK(cfg.simulate.replicas == 7u);
  CHECK(cfg.validate.replicas == 7u);
  CHECK_THROWS_AS(apply_overrides(cfg, {std::nullopt, std::nullopt, 0u}), ConfigError);
}

TEST_CASE("spectrum on the two-mark example") {
  Scratch scratch("spectrum");
  auto cfg = parse_config_json(two_mark_doc());
  cfg.output_directory = scratch.dir.string();
  std::ostringstream log;
  const auto res = dispatch(cfg, Subcommand::Spectrum, log);
  REQUIRE(res.exit_code == exit_code::ok);
  const json doc = json::parse(slurp(res.directory / "spectrum.json"));
  // Q diag(nu) = [[1, 1/2], [1/2, 1]]: eigenvalues 3/2 and 1/2
  CHECK(doc["r"].get<double>() == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(doc["kappa_cr"].get<double>() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(doc["spectral_gap"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
  const json manifest = json::parse(slurp(res.directory / "manifest.json"));
  CHECK(manifest["subcommand"] == "spectrum");
  CHECK(manifest["partial"] == false);
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest["files"].size() == 2);
}

TEST_CASE("output directories are append-only") {
  Scratch scratch("append");
  auto cfg = parse_config_json(two_mark_doc());
  cfg.output_directory = scratch.dir.string();
  std::ostringstream log;
  const auto first = dispatch(cfg, Subcommand::Spectrum, log);
  const std::string before = slurp(first.directory / "manifest.json");
  const auto second = dispatch(cfg, Subcommand::Spectrum, log);
  CHECK(first.directory != second.directory);
  CHECK(second.directory.filename() == "spectrum-1");
  CHECK(slurp(first.directory / "manifest.json") == before);
}

TEST_CASE("simulate artifacts are reproducible from the seed") {
  Scratch scratch("determinism");
  json doc = two_mark_doc();
  doc["model"]["torus_length"] = 8.0;
  doc["simulate"] = {{"t_end", 1.0}, {"replicas", 6}, {"seed", 9}, {"pair_edges", {0.5, 1.0, 2.0}}};
  auto cfg = parse_config_json(doc);
  cfg.output_directory = scratch.dir.string();
  std::ostringstream log;
  const auto a = dispatch(cfg, Subcommand::Simulate, log);
  const auto b = dispatch(cfg, Subcommand::Simulate, log);
  REQUIRE(a.exit_code == 0);
  for (const auto& f : a.files) {
    if (f == "manifest.json") continue;
    CHECK_MESSAGE(slurp(a.directory / f) == slurp(b.directory / f), f);
  }
  cfg.simulate.seed = 10;
  const auto c = dispatch(cfg, Subcommand::Simulate, log);
  CHECK(slurp(a.directory / "observations.csv") != slurp(c.directory / "observations.csv"));
}

TEST_CASE("k1 relaxation rate equals kappa times the spectral gap") {
  const auto cfg = parse_config_json(two_mark_doc());
  CHECK(k1_relaxation_rate(cfg.model) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  const auto check = check_density_relaxation_ode(cfg.model, 1.0, Eigen::Vector2d(2.0, 0.0));
  CHECK(check.passed);
  CHECK(check.value < 1e-8);
}

TEST_CASE("shell-averaged torus prediction") {
  const auto cfg = parse_config_json(markless_doc());
  const MomentumGrid grid = MomentumGrid::for_torus(3, 8.0, 7);
  K2Options opt;
  opt.t_end = 0.5;
  opt.zero_mode = true;
  const auto state = evolve_k2(cfg.model, 1.0, grid, opt).back();
  const std::vector<double> edges{0.5, 1.0, 2.0};
  std::vector<double> tail;
  const auto got = shell_averaged_prediction(state, edges, &tail);
  REQUIRE(got.size() == 2);
  for (std::size_t b = 0; b < 2; ++b) {
    double want = state.pair.constant_term(0, 0) + grid.inverse_weight() * state.zero_mode->real()(0, 0);
    for (std::size_t m = 0; m < grid.mode_count(); ++m) {
      const auto p = grid.mode(m);
      const double norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
      want += grid.inverse_weight() * state.pair.at(m, 0, 0).real() * shell_average_oracle(norm, edges[b], edges[b + 1]);
    }
    CHECK(got[b] == doctest::Approx(want).epsilon(1e-10));
    CHECK(tail[b] >= 0.0);
  }
}

TEST_CASE("criticality checks") {
  const auto checks = check_criticality_integral(1.0, 8.0, {17, 33, 65});
  REQUIRE(checks.size() == 2);
  CHECK(checks[0].passed);
  CHECK(checks[1].passed);
}

TEST_CASE("command line exit codes") {
  const char* cli = std::getenv("QC_CLI");
  if (!cli) {
    MESSAGE("QC_CLI not set; skipping");
    return;
  }
  Scratch scratch("cli");
  auto run = [&](const std::string& args) {
    const std::string cmd = std::string(cli) + " " + args + " --out " + (scratch.dir / "out").string() +
                            " > " + (scratch.dir / "log.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  const auto good = scratch.write("good.json", two_mark_doc());
  CHECK(run("spectrum --config " + good.string()) == 0);
  CHECK(fs::exists(scratch.dir / "out" / "spectrum" / "spectrum.json"));

  json even = two_mark_doc();
  even["pair"] = {{"grid", {{"points_per_axis", 10}}}};
  CHECK(run("pair --config " + scratch.write("even.json", even).string()) == 2);
  CHECK(slurp(scratch.dir / "log.txt").find("pair.grid.points_per_axis") != std::string::npos);

  CHECK(run("simulate --replicas 0 --config " + good.string()) == 2);
  CHECK_FALSE(fs::exists(scratch.dir / "out" / "simulate"));
  CHECK(run("spectrum --config " + (scratch.dir / "missing.json").string()) == 2);
  CHECK(run("plot --config " + good.string()) == 2);

  // an unreachable tolerance makes the suite fail with exit 1
  json strict = markless_doc();
  strict["validate"] = {{"replicas", 20},       {"pair_replicas", 10}, {"pair_points_per_axis", 9},
                        {"grid", {{"extent", 1.0}, {"points_per_axis", 9}}}, {"k2_tolerance", 1e-6}, {"relax_time", 1.0},
                        {"pair_time", 1.0}};
  CHECK(run("validate --config " + scratch.write("strict.json", strict).string()) == 1);
  const json manifest = json::parse(slurp(scratch.dir / "out" / "validate" / "manifest.json"));
  CHECK(manifest["exit_code"] == 1);
  CHECK(manifest["partial"] == false);
}
