#include "ica_lab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ica_lab/classify.hpp"
#include "ica_lab/deformation.hpp"
#include "ica_lab/density.hpp"
#include "ica_lab/errors.hpp"
#include "ica_lab/maps.hpp"
#include "ica_lab/metrics.hpp"
#include "ica_lab/numerics.hpp"
#include "ica_lab/rng.hpp"
#include "ica_lab/spurious.hpp"
#include "ica_lab/trainer.hpp"

namespace ica_lab {
namespace {

using nlohmann::json;

constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Strict JSON access.  Every unknown key is a schema violation: configs are
// contracts, and silently ignored options hide user mistakes.

[[noreturn]] void fail_schema(const std::string& msg) { throw schema_error(msg); }

void require_object(const json& j, const std::string& ctx) {
  if (!j.is_object()) fail_schema(ctx + ": expected an object");
}

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& ctx) {
  require_object(j, ctx);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail_schema(ctx + ": unknown key '" + it.key() + "'");
  }
}

const json& get_req(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) fail_schema(ctx + ": missing required key '" + key + "'");
  return *it;
}

double as_num(const json& v, const std::string& ctx) {
  if (!v.is_number()) fail_schema(ctx + ": expected a number");
  return v.get<double>();
}

double num_req(const json& j, const char* key, const std::string& ctx) {
  return as_num(get_req(j, key, ctx), ctx + "." + key);
}

double num_opt(const json& j, const char* key, double fallback,
               const std::string& ctx) {
  auto it = j.find(key);
  return it == j.end() ? fallback : as_num(*it, ctx + "." + key);
}

int int_req(const json& j, const char* key, const std::string& ctx) {
  const json& v = get_req(j, key, ctx);
  if (!v.is_number_integer()) fail_schema(ctx + "." + key + ": expected an integer");
  return v.get<int>();
}

int int_opt(const json& j, const char* key, int fallback, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer())
    fail_schema(ctx + "." + key + ": expected an integer");
  return it->get<int>();
}

bool bool_opt(const json& j, const char* key, bool fallback,
              const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) fail_schema(ctx + "." + key + ": expected a boolean");
  return it->get<bool>();
}

std::string str_req(const json& j, const char* key, const std::string& ctx) {
  const json& v = get_req(j, key, ctx);
  if (!v.is_string()) fail_schema(ctx + "." + key + ": expected a string");
  return v.get<std::string>();
}

Eigen::VectorXd vec_from(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.empty()) fail_schema(ctx + ": expected a nonempty array");
  Eigen::VectorXd out(static_cast<int>(v.size()));
  int i = 0;
  for (const auto& e : v) out[i++] = as_num(e, ctx);
  return out;
}

Eigen::VectorXd vec_req(const json& j, const char* key, const std::string& ctx) {
  return vec_from(get_req(j, key, ctx), ctx + "." + key);
}

Eigen::MatrixXd mat_req(const json& j, const char* key, const std::string& ctx) {
  const std::string c = ctx + "." + key;
  const json& v = get_req(j, key, ctx);
  if (!v.is_array() || v.empty()) fail_schema(c + ": expected an array of rows");
  const int rows = static_cast<int>(v.size());
  Eigen::MatrixXd out;
  for (int r = 0; r < rows; ++r) {
    Eigen::VectorXd row = vec_from(v[r], c);
    if (r == 0) out.resize(rows, row.size());
    if (row.size() != out.cols()) fail_schema(c + ": ragged matrix rows");
    out.row(r) = row.transpose();
  }
  return out;
}

std::vector<std::string> str_array_req(const json& j, const char* key,
                                       const std::string& ctx) {
  const json& v = get_req(j, key, ctx);
  if (!v.is_array() || v.empty())
    fail_schema(ctx + "." + key + ": expected a nonempty array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) fail_schema(ctx + "." + key + ": expected strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Builders: JSON records -> library objects

std::shared_ptr<GaussianDensity> gaussian_from_json(const json& j,
                                                    const std::string& ctx) {
  require_keys(j, {"kind", "dim", "mean", "cov", "cov_diag"}, ctx);
  Eigen::VectorXd mean;
  if (j.contains("mean")) {
    mean = vec_req(j, "mean", ctx);
  } else {
    mean = Eigen::VectorXd::Zero(int_req(j, "dim", ctx));
  }
  const int d = static_cast<int>(mean.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d);
  if (j.contains("cov") && j.contains("cov_diag"))
    fail_schema(ctx + ": give either 'cov' or 'cov_diag', not both");
  if (j.contains("cov")) cov = mat_req(j, "cov", ctx);
  if (j.contains("cov_diag")) cov = vec_req(j, "cov_diag", ctx).asDiagonal();
  return std::make_shared<GaussianDensity>(mean, cov);
}

DensityPtr density_from_json(const json& j, const std::string& ctx) {
  require_object(j, ctx);
  const std::string kind = str_req(j, "kind", ctx);
  if (kind == "gaussian") return gaussian_from_json(j, ctx);
  if (kind == "gaussian_mixture") {
    require_keys(j, {"kind", "weights", "components"}, ctx);
    Eigen::VectorXd w = vec_req(j, "weights", ctx);
    const json& comps = get_req(j, "components", ctx);
    if (!comps.is_array() || static_cast<int>(comps.size()) != w.size())
      fail_schema(ctx + ": 'components' must match 'weights' in length");
    std::vector<double> weights(w.data(), w.data() + w.size());
    std::vector<std::shared_ptr<GaussianDensity>> gs;
    int i = 0;
    for (const auto& c : comps)
      gs.push_back(gaussian_from_json(c, ctx + ".components[" + std::to_string(i++) + "]"));
    return std::make_shared<GaussianMixtureDensity>(weights, gs);
  }
  if (kind == "uniform") {
    require_keys(j, {"kind", "dim"}, ctx);
    const int d = int_req(j, "dim", ctx);
    // Constant reference weight: measure preservation then means unit
    // Jacobian determinant, i.e. Lebesgue measure is preserved.
    return std::make_shared<ClosureDensity>(
        d, [](const Eigen::VectorXd&) { return 1.0; },
        [d](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(d); });
  }
  fail_schema(ctx + ": unknown density kind '" + kind + "'");
}

RadiusRotationProfile radius_rotation_from_json(const json& j,
                                                const std::string& ctx) {
  Eigen::VectorXd center = vec_req(j, "center", ctx);
  int pi = 0, pj = 1;
  if (j.contains("plane")) {
    Eigen::VectorXd plane = vec_req(j, "plane", ctx);
    if (plane.size() != 2) fail_schema(ctx + ".plane: expected [i, j]");
    pi = static_cast<int>(plane[0]);
    pj = static_cast<int>(plane[1]);
  }
  const double amplitude = num_opt(j, "amplitude", 1.0, ctx);
  const double cutoff = num_opt(j, "cutoff", 0.0, ctx);
  return RadiusRotationProfile::make(center, pi, pj, amplitude, cutoff);
}

MapPtr map_from_json(const json& j, const std::string& ctx);

Eigen::MatrixXd rotation_record_from_json(const json& j, int d,
                                          const std::string& ctx) {
  require_object(j, ctx);
  const std::string kind = str_req(j, "kind", ctx);
  if (kind == "identity") {
    require_keys(j, {"kind"}, ctx);
    return Eigen::MatrixXd::Identity(d, d);
  }
  if (kind == "random") {
    require_keys(j, {"kind", "seed"}, ctx);
    return LinearMap::random_orthogonal(d, static_cast<std::uint64_t>(int_req(j, "seed", ctx)));
  }
  if (kind == "matrix") {
    require_keys(j, {"kind", "matrix"}, ctx);
    return mat_req(j, "matrix", ctx);
  }
  fail_schema(ctx + ": unknown rotation kind '" + kind + "'");
}

MapPtr map_from_json(const json& j, const std::string& ctx) {
  require_object(j, ctx);
  const std::string kind = str_req(j, "kind", ctx);
  if (kind == "linear") {
    require_keys(j, {"kind", "matrix", "offset"}, ctx);
    Eigen::MatrixXd a = mat_req(j, "matrix", ctx);
    Eigen::VectorXd b = j.contains("offset") ? vec_req(j, "offset", ctx)
                                             : Eigen::VectorXd::Zero(a.rows());
    return std::make_shared<LinearMap>(a, b);
  }
  if (kind == "scaling") {
    require_keys(j, {"kind", "factors"}, ctx);
    Eigen::VectorXd f = vec_req(j, "factors", ctx);
    return std::make_shared<LinearMap>(Eigen::MatrixXd(f.asDiagonal()));
  }
  if (kind == "rotation") {
    require_keys(j, {"kind", "dim", "i", "j", "angle"}, ctx);
    return LinearMap::rotation(int_req(j, "dim", ctx), int_req(j, "i", ctx),
                               int_req(j, "j", ctx), num_req(j, "angle", ctx));
  }
  if (kind == "moebius") {
    require_keys(j, {"kind", "a", "b", "alpha", "eps", "rotation", "r_min"}, ctx);
    Eigen::VectorXd a = vec_req(j, "a", ctx);
    Eigen::VectorXd b = vec_req(j, "b", ctx);
    const int d = static_cast<int>(a.size());
    Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(d, d);
    if (j.contains("rotation"))
      rot = rotation_record_from_json(j.at("rotation"), d, ctx + ".rotation");
    return std::make_shared<MoebiusMap>(a, b, num_req(j, "alpha", ctx), rot,
                                        int_req(j, "eps", ctx),
                                        num_opt(j, "r_min", 1e-6, ctx));
  }
  if (kind == "radius_rotation") {
    require_keys(j, {"kind", "center", "plane", "amplitude", "cutoff", "t"}, ctx);
    return radius_rotation_from_json(j, ctx).map_at(num_req(j, "t", ctx));
  }
  if (kind == "compose") {
    require_keys(j, {"kind", "outer", "inner"}, ctx);
    return compose(map_from_json(get_req(j, "outer", ctx), ctx + ".outer"),
                   map_from_json(get_req(j, "inner", ctx), ctx + ".inner"));
  }
  fail_schema(ctx + ": unknown map kind '" + kind + "'");
}

FieldPtr field_from_json(const json& j, const std::string& ctx) {
  require_object(j, ctx);
  const std::string kind = str_req(j, "kind", ctx);
  if (kind == "rigid_rotation") {
    require_keys(j, {"kind", "dim", "i", "j", "center", "rate"}, ctx);
    const int d = int_req(j, "dim", ctx);
    const int i = int_req(j, "i", ctx);
    const int jj = int_req(j, "j", ctx);
    const double rate = num_opt(j, "rate", 1.0, ctx);
    Eigen::VectorXd c =
        j.contains("center") ? vec_req(j, "center", ctx) : Eigen::VectorXd::Zero(d);
    if (i < 0 || jj < 0 || i >= d || jj >= d || i == jj)
      fail_schema(ctx + ": invalid rotation plane");
    if (c.size() != d) fail_schema(ctx + ".center: wrong dimension");
    auto fn = [d, i, jj, rate, c](double, const Eigen::VectorXd& x) {
      Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
      out[i] = -rate * (x[jj] - c[jj]);
      out[jj] = rate * (x[i] - c[i]);
      return out;
    };
    return std::make_shared<FunctionalField>(d, fn, "rigid_rotation");
  }
  if (kind == "compact_divfree") {
    require_keys(j, {"kind", "center", "radius", "amplitude", "i", "j"}, ctx);
    RadialBump phi(vec_req(j, "center", ctx), num_req(j, "radius", ctx),
                   num_opt(j, "amplitude", 1.0, ctx));
    return build_compact_divfree(phi, int_req(j, "i", ctx), int_req(j, "j", ctx));
  }
  if (kind == "xij") {
    require_keys(j, {"kind", "density", "i", "j"}, ctx);
    return build_xij(density_from_json(get_req(j, "density", ctx), ctx + ".density"),
                     int_req(j, "i", ctx), int_req(j, "j", ctx));
  }
  if (kind == "radius_rotation_generator") {
    require_keys(j, {"kind", "center", "plane", "amplitude", "cutoff"}, ctx);
    return radius_rotation_from_json(j, ctx).generator();
  }
  if (kind == "extracted") {
    require_keys(j, {"kind", "base", "perturbation", "t", "dt"}, ctx);
    MapPtr base = map_from_json(get_req(j, "base", ctx), ctx + ".base");
    RadiusRotationProfile prof = radius_rotation_from_json(
        get_req(j, "perturbation", ctx), ctx + ".perturbation");
    Deformation def;
    def.f0 = base;
    def.deformed = [base, prof](double tau) {
      return compose(base, prof.map_at(tau));
    };
    return extract_generator(def, num_opt(j, "t", 0.0, ctx),
                             num_opt(j, "dt", 1e-4, ctx));
  }
  fail_schema(ctx + ": unknown field kind '" + kind + "'");
}

/// Evaluation points from a {"lo": [...], "hi": [...], "n": N} record; when
/// absent, the centered default grid in the unit cube, shrunk by `margin`.
Eigen::MatrixXd points_from_json(const json& cfg, int dim, const std::string& ctx,
                                 double margin = 0.02) {
  if (!cfg.contains("points")) {
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, margin);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, 1.0 - margin);
    return default_test_points(lo, hi);
  }
  const json& p = cfg.at("points");
  require_keys(p, {"lo", "hi", "n"}, ctx + ".points");
  Eigen::VectorXd lo = vec_req(p, "lo", ctx + ".points");
  Eigen::VectorXd hi = vec_req(p, "hi", ctx + ".points");
  if (lo.size() != dim || hi.size() != dim)
    fail_schema(ctx + ".points: lo/hi must have dimension " + std::to_string(dim));
  if (p.contains("n")) return halton_points(lo, hi, int_req(p, "n", ctx + ".points"));
  return default_test_points(lo, hi);
}

// ---------------------------------------------------------------------------
// Check bookkeeping and report assembly

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string op = "<=";  // how value relates to threshold when passing
  std::string detail;
};

struct ResidualRow {
  std::string check;
  int index = 0;
  double residual = 0.0;
};

struct RunOutput {
  std::vector<Check> checks;
  std::vector<ResidualRow> residuals;
  json extra = json::object();
  std::vector<std::string> artifacts;
  std::vector<std::string> warnings;
};

void add_class_report(RunOutput& out, const std::string& name,
                      const ClassReport& rep) {
  Check c;
  c.name = name;
  c.pass = rep.pass;
  c.value = rep.max_residual;
  c.threshold = rep.tol;
  c.detail = std::to_string(rep.n_points) + " points";
  out.checks.push_back(c);
  for (std::size_t i = 0; i < rep.residuals.size(); ++i)
    out.residuals.push_back({name, static_cast<int>(i), rep.residuals[i]});
}

std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(const std::string& s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a_hash(s)));
  return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw error("cannot open output file " + path.string());
  os << text;
  if (!os.good()) throw error("failed writing " + path.string());
}

std::string format_residual_csv(const std::vector<ResidualRow>& rows) {
  std::string out = "check,index,residual\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.10g\n", r.check.c_str(), r.index,
                  r.residual);
    out += buf;
  }
  return out;
}

std::string format_trace_row(const TraceRow& r) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%g,%llu\n", r.t, r.l1,
                r.kl, r.c_oct, r.lambda,
                static_cast<unsigned long long>(r.seed));
  return buf;
}

// ---------------------------------------------------------------------------
// Run handlers

struct RunSettings {
  std::uint64_t seed = 1;
  double tol = std::numeric_limits<double>::quiet_NaN();  // NaN: use per-run default
  std::filesystem::path outdir;
};

double pick_tol(const RunSettings& rs, const json& cfg, double fallback,
                const std::string& ctx) {
  if (std::isfinite(rs.tol)) return rs.tol;
  return num_opt(cfg, "tol", fallback, ctx);
}

RunOutput run_verify(const json& cfg, const RunSettings& rs) {
  const std::string ctx = "verify";
  require_keys(cfg, {"run", "out", "seed", "tol", "map", "points", "checks"}, ctx);
  MapPtr map = map_from_json(get_req(cfg, "map", ctx), ctx + ".map");
  if (!cfg.contains("points"))
    fail_schema(ctx + ": 'points' is required (the probe box)");
  Eigen::MatrixXd pts = points_from_json(cfg, map->dim(), ctx);
  const double tol = pick_tol(rs, cfg, 1e-6, ctx);

  RunOutput out;
  for (const std::string& name : str_array_req(cfg, "checks", ctx)) {
    if (name == "conformal") {
      add_class_report(out, name, classify_conformal(*map, pts, tol));
    } else if (name == "oct") {
      add_class_report(out, name, classify_oct(*map, pts, tol));
    } else if (name == "volume_preserving") {
      add_class_report(out, name, classify_volume_preserving(*map, pts, tol));
    } else {
      fail_schema(ctx + ".checks: unknown check '" + name + "'");
    }
  }
  out.extra["map"] = map->name();
  out.extra["n_points"] = pts.rows();
  return out;
}

MapPtr spurious_construction(const json& cfg, const std::string& ctx,
                             DensityPtr* reuse_density) {
  const json& c = get_req(cfg, "construction", ctx);
  require_object(c, ctx + ".construction");
  const std::string kind = str_req(c, "kind", ctx + ".construction");
  const std::string cc = ctx + ".construction";
  if (kind == "radius_rotation") {
    require_keys(c, {"kind", "center", "plane", "amplitude", "cutoff", "t"}, cc);
    return radius_rotation_from_json(c, cc).map_at(num_req(c, "t", cc));
  }
  if (kind == "xij_flow") {
    require_keys(c, {"kind", "density", "i", "j", "t", "steps"}, cc);
    DensityPtr den = density_from_json(get_req(c, "density", cc), cc + ".density");
    if (reuse_density && !*reuse_density) *reuse_density = den;
    FieldPtr field = build_xij(den, int_req(c, "i", cc), int_req(c, "j", cc));
    return flow_map(field, num_req(c, "t", cc), int_opt(c, "steps", 0, cc));
  }
  if (kind == "compact_divfree_flow") {
    require_keys(c, {"kind", "center", "radius", "amplitude", "i", "j", "t", "steps"},
                 cc);
    RadialBump phi(vec_req(c, "center", cc), num_req(c, "radius", cc),
                   num_opt(c, "amplitude", 1.0, cc));
    FieldPtr field =
        build_compact_divfree(phi, int_req(c, "i", cc), int_req(c, "j", cc));
    return flow_map(field, num_req(c, "t", cc), int_opt(c, "steps", 0, cc));
  }
  fail_schema(cc + ": unknown construction kind '" + kind + "'");
}

/// Largest displacement |f(x) - x| over points sampled within eps of the
/// unit-cube boundary.
double map_boundary_residual(const SmoothMap& f, double eps, int n,
                             std::uint64_t seed) {
  const int d = f.dim();
  RngStream rng = RngStream::substream(seed, "boundary_fixed", 0);
  double worst = 0.0;
  for (int s = 0; s < n; ++s) {
    Eigen::VectorXd x(d);
    for (int k = 0; k < d; ++k) x[k] = rng.uniform(0.0, 1.0);
    const int face = static_cast<int>(rng.uniform_int(2 * d));
    const int axis = face / 2;
    const double u = rng.uniform(0.0, eps);
    x[axis] = (face % 2 == 0) ? u : 1.0 - u;
    worst = std::max(worst, (f.evaluate(x) - x).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

RunOutput run_spurious(const json& cfg, const RunSettings& rs) {
  const std::string ctx = "spurious";
  require_keys(cfg,
               {"run", "out", "seed", "tol", "construction", "density", "points",
                "checks", "mpt_tol", "boundary_tol", "boundary_eps"},
               ctx);
  DensityPtr density;
  MapPtr map = spurious_construction(cfg, ctx, &density);
  if (cfg.contains("density"))
    density = density_from_json(cfg.at("density"), ctx + ".density");
  Eigen::MatrixXd pts = points_from_json(cfg, map->dim(), ctx);
  const double tol = pick_tol(rs, cfg, 1e-6, ctx);

  RunOutput out;
  for (const std::string& name : str_array_req(cfg, "checks", ctx)) {
    if (name == "volume_preserving") {
      add_class_report(out, name, classify_volume_preserving(*map, pts, tol));
    } else if (name == "mpt") {
      if (!density)
        fail_schema(ctx + ": the mpt check needs a 'density' record");
      MptReport rep = verify_mpt(*map, *density, pts,
                                 num_opt(cfg, "mpt_tol", tol, ctx));
      Check c;
      c.name = name;
      c.pass = rep.pass;
      c.value = rep.max_relative_residual;
      c.threshold = rep.tol;
      c.detail = std::to_string(rep.n_points) + " points";
      out.checks.push_back(c);
      for (std::size_t i = 0; i < rep.residuals.size(); ++i)
        out.residuals.push_back({name, static_cast<int>(i), rep.residuals[i]});
    } else if (name == "boundary_fixed") {
      const double eps = num_opt(cfg, "boundary_eps", 0.02, ctx);
      const double btol = num_opt(cfg, "boundary_tol", 1e-6, ctx);
      Check c;
      c.name = name;
      c.value = map_boundary_residual(*map, eps, 512, rs.seed);
      c.threshold = btol;
      c.pass = c.value <= btol;
      c.detail = "shell width " + std::to_string(eps);
      out.checks.push_back(c);
    } else {
      fail_schema(ctx + ".checks: unknown check '" + name + "'");
    }
  }
  out.extra["map"] = map->name();
  out.extra["n_points"] = pts.rows();
  return out;
}

RunOutput run_prop1(const json& cfg, const RunSettings& rs) {
  const std::string ctx = "prop1";
  require_keys(cfg,
               {"run", "out", "seed", "tol", "profile", "rotations",
                "rotation_seed", "density_tol", "n_points", "distinctness_min",
                "tabulated"},
               ctx);
  const json& prof = get_req(cfg, "profile", ctx);
  require_object(prof, ctx + ".profile");
  const std::string pkind = str_req(prof, "kind", ctx + ".profile");
  std::unique_ptr<RadialDensity> radial;
  if (pkind == "gaussian") {
    require_keys(prof, {"kind", "dim"}, ctx + ".profile");
    radial = std::make_unique<RadialDensity>(
        RadialDensity::gaussian(int_req(prof, "dim", ctx + ".profile")));
  } else if (pkind == "annulus") {
    require_keys(prof, {"kind", "dim", "inner", "outer"}, ctx + ".profile");
    radial = std::make_unique<RadialDensity>(RadialDensity::annulus(
        int_req(prof, "dim", ctx + ".profile"),
        num_req(prof, "inner", ctx + ".profile"),
        num_req(prof, "outer", ctx + ".profile")));
  } else {
    fail_schema(ctx + ".profile: unknown kind '" + pkind + "'");
  }
  const int d = radial->dim();
  PolarReparamOptions popts;
  popts.tabulated = bool_opt(cfg, "tabulated", true, ctx);
  MapPtr f = build_polar_reparam(*radial, popts);
  DensityPtr target = radial->spatial_density();

  const int n = int_opt(cfg, "n_points", 400, ctx);
  const double margin = 1e-3;
  Eigen::MatrixXd pts = halton_points(Eigen::VectorXd::Constant(d, margin),
                                      Eigen::VectorXd::Constant(d, 1.0 - margin), n);
  const double tol = pick_tol(rs, cfg, 1e-5, ctx);
  const double density_tol = num_opt(cfg, "density_tol", 5e-3, ctx);

  RunOutput out;
  add_class_report(out, "columns_orthogonal", classify_oct(*f, pts, tol));

  auto transport_residual = [&](const SmoothMap& g, const std::string& label) {
    double worst = 0.0;
    for (int i = 0; i < pts.rows(); ++i) {
      Eigen::VectorXd u = pts.row(i).transpose();
      Eigen::VectorXd y = g.evaluate(u);
      const double q = std::exp(-g.log_abs_det_jacobian(u));
      const double p = target->value(y);
      const double r = std::abs(q - p) / std::max(p, 1e-300);
      out.residuals.push_back({label, i, r});
      worst = std::max(worst, r);
    }
    return worst;
  };

  {
    Check c;
    c.name = "density_transport";
    c.value = transport_residual(*f, c.name);
    c.threshold = density_tol;
    c.pass = c.value <= density_tol;
    out.checks.push_back(c);
  }

  const int n_rot = int_opt(cfg, "rotations", 4, ctx);
  const int rot_seed = int_opt(cfg, "rotation_seed", 11, ctx);
  const double distinct_min = num_opt(cfg, "distinctness_min", 0.05, ctx);
  double rot_worst = 0.0;
  double distinct_floor = std::numeric_limits<double>::infinity();
  const int n_probe = std::min<int>(64, static_cast<int>(pts.rows()));
  for (int k = 0; k < n_rot; ++k) {
    Eigen::MatrixXd rot = LinearMap::random_orthogonal(
        d, static_cast<std::uint64_t>(rot_seed) + static_cast<std::uint64_t>(k));
    MapPtr g = rotate_member(f, rot);
    rot_worst = std::max(
        rot_worst, transport_residual(*g, "rotated_transport_" + std::to_string(k)));
    double gap = 0.0;
    for (int i = 0; i < n_probe; ++i) {
      Eigen::VectorXd u = pts.row(i).transpose();
      gap = std::max(gap, (g->evaluate(u) - f->evaluate(u)).norm());
    }
    distinct_floor = std::min(distinct_floor, gap);
  }
  if (n_rot > 0) {
    Check c;
    c.name = "rotated_transport";
    c.value = rot_worst;
    c.threshold = density_tol;
    c.pass = c.value <= density_tol;
    c.detail = std::to_string(n_rot) + " rotations";
    out.checks.push_back(c);

    Check dch;
    dch.name = "rotated_distinct";
    dch.value = distinct_floor;
    dch.threshold = distinct_min;
    dch.op = ">=";
    dch.pass = dch.value >= distinct_min;
    dch.detail = "smallest sup-gap to the base member";
    out.checks.push_back(dch);
  }
  out.extra["dim"] = d;
  out.extra["profile"] = pkind;
  out.extra["n_points"] = pts.rows();
  return out;
}

RunOutput run_deform_check(const json& cfg, const RunSettings& rs) {
  const std::string ctx = "deform-check";
  require_keys(cfg,
               {"run", "out", "seed", "tol", "f0", "field", "points", "checks",
                "div_tol", "fd_step", "boundary_eps", "boundary_tol", "wave_coords",
                "wave_h", "wave_tol", "resonance", "t"},
               ctx);
  MapPtr f0 = map_from_json(get_req(cfg, "f0", ctx), ctx + ".f0");
  FieldPtr field = field_from_json(get_req(cfg, "field", ctx), ctx + ".field");
  if (field->dim() != f0->dim())
    fail_schema(ctx + ": f0 and field dimensions differ");
  Eigen::MatrixXd pts = points_from_json(cfg, f0->dim(), ctx, 0.05);

  OctConstraintOptions opts;
  opts.first_order_tol = pick_tol(rs, cfg, 1e-6, ctx);
  opts.divergence_tol = num_opt(cfg, "div_tol", 1e-7, ctx);
  opts.fd_step = num_opt(cfg, "fd_step", 1e-5, ctx);
  opts.t = num_opt(cfg, "t", 0.0, ctx);

  RunOutput out;
  std::vector<std::string> checks = str_array_req(cfg, "checks", ctx);
  auto requested = [&checks](const char* n) {
    for (const auto& c : checks)
      if (c == n) return true;
    return false;
  };
  for (const auto& c : checks)
    if (c != "first_order" && c != "divergence" && c != "boundary" && c != "wave")
      fail_schema(ctx + ".checks: unknown check '" + c + "'");

  if (requested("first_order") || requested("divergence")) {
    ConstraintReport rep = oct_constraint_residual(*f0, *field, pts, opts);
    if (requested("first_order")) {
      Check c;
      c.name = "first_order";
      c.pass = rep.first_order_pass;
      c.value = rep.first_order_max;
      c.threshold = opts.first_order_tol;
      out.checks.push_back(c);
      for (int i = 0; i < rep.d; ++i)
        for (int jj = i; jj < rep.d; ++jj)
          out.residuals.push_back(
              {"first_order_pair", i * rep.d + jj, rep.pair_residual(i, jj)});
    }
    if (requested("divergence")) {
      Check c;
      c.name = "divergence";
      c.pass = rep.divergence_pass;
      c.value = rep.divergence_max;
      c.threshold = opts.divergence_tol;
      out.checks.push_back(c);
    }
    out.extra["field_sup_norm"] = rep.field_sup_norm;
  }
  if (requested("boundary")) {
    const double eps = num_opt(cfg, "boundary_eps", 0.05, ctx);
    const double btol = num_opt(cfg, "boundary_tol", 1e-8, ctx);
    Check c;
    c.name = "boundary";
    c.value = boundary_vanishing(*field, eps, 512, rs.seed);
    c.threshold = btol;
    c.pass = c.value <= btol;
    c.detail = "shell width " + std::to_string(eps);
    out.checks.push_back(c);
  }
  if (requested("wave")) {
    const double h = num_opt(cfg, "wave_h", 1e-3, ctx);
    const double wtol = num_opt(cfg, "wave_tol", 5e-3, ctx);
    std::vector<int> coords;
    if (cfg.contains("wave_coords")) {
      Eigen::VectorXd wc = vec_req(cfg, "wave_coords", ctx);
      for (int k = 0; k < wc.size(); ++k) coords.push_back(static_cast<int>(wc[k]));
    } else {
      for (int k = 0; k < f0->dim(); ++k) coords.push_back(k);
    }
    double worst = 0.0;
    for (int coord : coords) {
      const double r = wave_residual(*f0, *field, coord, pts, h);
      out.residuals.push_back({"wave", coord, r});
      worst = std::max(worst, r);
    }
    Check c;
    c.name = "wave";
    c.value = worst;
    c.threshold = wtol;
    c.pass = worst <= wtol;
    c.detail = std::to_string(coords.size()) + " components";
    out.checks.push_back(c);
  }
  if (cfg.contains("resonance")) {
    const json& r = cfg.at("resonance");
    require_keys(r, {"mu", "m", "i"}, ctx + ".resonance");
    Eigen::VectorXd mu = vec_req(r, "mu", ctx + ".resonance");
    Eigen::VectorXd md = vec_req(r, "m", ctx + ".resonance");
    Eigen::VectorXi m(md.size());
    for (int k = 0; k < md.size(); ++k) m[k] = static_cast<int>(md[k]);
    ResonanceResult res = resonance_alpha(mu, m, int_req(r, "i", ctx + ".resonance"));
    Check c;
    c.name = "resonance";
    c.pass = true;  // diagnostic, not a pass/fail criterion
    c.value = res.alpha;
    c.op = "info";
    c.detail = res.resonant ? "resonant (integer frequency)" : "non-resonant";
    out.checks.push_back(c);
    out.extra["resonant"] = res.resonant;
  }
  return out;
}

RunOutput run_train_drift(const json& cfg, const RunSettings& rs,
                          const std::string& config_hash) {
  const std::string ctx = "train-drift";
  require_keys(cfg,
               {"run", "out", "seed", "scenario", "lambdas", "steps", "batch",
                "time_points", "layers", "lr", "pretrain_budget",
                "pretrain_check_interval", "pretrain_target_kl",
                "pretrain_fail_kl", "l1_samples", "kl_samples", "c_oct_samples",
                "kl_limit"},
               ctx);
  const std::string sname = str_req(cfg, "scenario", ctx);
  DriftScenario scenario = DriftScenario::rot();
  if (sname == "pol") {
    scenario = DriftScenario::pol();
  } else if (sname != "rot") {
    fail_schema(ctx + ".scenario: expected 'rot' or 'pol'");
  }
  std::vector<double> lambdas{0.0, 2.0};
  if (cfg.contains("lambdas")) {
    Eigen::VectorXd l = vec_req(cfg, "lambdas", ctx);
    lambdas.assign(l.data(), l.data() + l.size());
  }

  RunOutput out;
  std::string trace_csv = TrainTrace::csv_header() + "\n";
  for (double lambda : lambdas) {
    TrainConfig tc;
    tc.seed = rs.seed;
    tc.lambda = lambda;
    tc.steps_per_segment = int_opt(cfg, "steps", tc.steps_per_segment, ctx);
    tc.batch = int_opt(cfg, "batch", tc.batch, ctx);
    tc.time_points = int_opt(cfg, "time_points", tc.time_points, ctx);
    tc.n_layers = int_opt(cfg, "layers", tc.n_layers, ctx);
    tc.lr = num_opt(cfg, "lr", tc.lr, ctx);
    tc.pretrain_budget = int_opt(cfg, "pretrain_budget", tc.pretrain_budget, ctx);
    tc.pretrain_check_interval =
        int_opt(cfg, "pretrain_check_interval", tc.pretrain_check_interval, ctx);
    tc.pretrain_target_kl =
        num_opt(cfg, "pretrain_target_kl", tc.pretrain_target_kl, ctx);
    tc.pretrain_fail_kl = num_opt(cfg, "pretrain_fail_kl", tc.pretrain_fail_kl, ctx);
    tc.l1_samples = int_opt(cfg, "l1_samples", tc.l1_samples, ctx);
    tc.kl_samples = int_opt(cfg, "kl_samples", tc.kl_samples, ctx);
    tc.c_oct_samples = int_opt(cfg, "c_oct_samples", tc.c_oct_samples, ctx);

    TrainResult result = drift_train(scenario, tc);

    char lam_buf[32];
    std::snprintf(lam_buf, sizeof lam_buf, "%g", lambda);
    const std::string arm = lam_buf;

    bool finite = true;
    double kl_max = 0.0, l1_mean = 0.0, kl_mean = 0.0, coct_mean = 0.0;
    for (const TraceRow& r : result.trace.rows) {
      trace_csv += format_trace_row(r);
      finite = finite && std::isfinite(r.l1) && std::isfinite(r.kl) &&
               std::isfinite(r.c_oct);
      kl_max = std::max(kl_max, r.kl);
      l1_mean += r.l1;
      kl_mean += r.kl;
      coct_mean += r.c_oct;
    }
    const double n_rows = std::max<std::size_t>(result.trace.rows.size(), 1);
    l1_mean /= n_rows;
    kl_mean /= n_rows;
    coct_mean /= n_rows;

    const std::string ckpt_name = "checkpoint_lambda" + arm + ".json";
    result.model.save((rs.outdir / ckpt_name).string(), config_hash);
    out.artifacts.push_back(ckpt_name);

    Check fin;
    fin.name = "arm_" + arm + "_metrics_finite";
    fin.pass = finite;
    fin.value = finite ? 1.0 : 0.0;
    fin.threshold = 1.0;
    fin.op = ">=";
    out.checks.push_back(fin);
    if (cfg.contains("kl_limit")) {
      Check c;
      c.name = "arm_" + arm + "_kl_bounded";
      c.value = kl_max;
      c.threshold = num_req(cfg, "kl_limit", ctx);
      c.pass = c.value <= c.threshold;
      out.checks.push_back(c);
    }
    json arm_info;
    arm_info["lambda"] = lambda;
    arm_info["pretrain_steps"] = result.trace.pretrain_steps;
    arm_info["pretrain_final_kl"] = result.trace.pretrain_final_kl;
    arm_info["mean_l1"] = l1_mean;
    arm_info["mean_kl"] = kl_mean;
    arm_info["mean_c_oct"] = coct_mean;
    arm_info["checkpoint"] = ckpt_name;
    out.extra["arms"].push_back(arm_info);
  }
  write_text_file(rs.outdir / "trace.csv", trace_csv);
  out.artifacts.push_back("trace.csv");
  out.extra["scenario"] = sname;
  return out;
}

// ---------------------------------------------------------------------------
// Built-in scenario catalog

struct Scenario {
  std::string name;
  std::string kind;  // subcommand that runs it
  std::string description;
  json config;
};

const std::vector<Scenario>& catalog() {
  static const std::vector<Scenario> entries = [] {
    std::vector<Scenario> v;
    v.push_back(
        {"moebius-conformal", "verify",
         "sphere-inversion map with a random rotation stays conformal (and so "
         "keeps orthogonal columns) away from its pole",
         json::parse(R"({
           "run": "verify", "seed": 5, "tol": 1e-6,
           "map": {"kind": "moebius", "alpha": 1.0, "eps": 2,
                   "a": [0.0, 0.0, 0.0], "b": [0.5, -0.25, 0.0],
                   "rotation": {"kind": "random", "seed": 5}},
           "points": {"lo": [0.4, 0.4, 0.4], "hi": [1.8, 1.8, 1.8]},
           "checks": ["conformal", "oct"]})")});
    v.push_back(
        {"axis-scaling", "verify",
         "anisotropic axis scaling with unit volume: orthogonal columns without "
         "conformality",
         json::parse(R"({
           "run": "verify", "tol": 1e-9,
           "map": {"kind": "scaling", "factors": [2.0, 0.5, 1.0]},
           "points": {"lo": [-1.0, -1.0, -1.0], "hi": [1.0, 1.0, 1.0]},
           "checks": ["oct", "volume_preserving"]})")});
    v.push_back(
        {"radius-rotation", "spurious",
         "radius-dependent rotation in the cube: unit determinant, fixed "
         "boundary, and preservation of a centered isotropic gaussian",
         json::parse(R"({
           "run": "spurious", "seed": 3, "tol": 1e-7,
           "construction": {"kind": "radius_rotation",
                            "center": [0.5, 0.5, 0.5], "plane": [0, 1],
                            "amplitude": 1.2, "t": 0.7},
           "density": {"kind": "gaussian", "mean": [0.5, 0.5, 0.5],
                       "cov_diag": [0.04, 0.04, 0.04]},
           "boundary_tol": 1e-4,
           "checks": ["volume_preserving", "mpt", "boundary_fixed"]})")});
    v.push_back(
        {"mixture-eddy", "spurious",
         "flow of the antisymmetric gradient field of a two-component gaussian "
         "mixture: volume preserved and the mixture itself transported to "
         "itself",
         json::parse(R"({
           "run": "spurious", "seed": 2, "tol": 2e-4, "mpt_tol": 2e-4,
           "construction": {"kind": "xij_flow", "i": 0, "j": 1,
                            "t": 0.5, "steps": 400,
             "density": {"kind": "gaussian_mixture", "weights": [0.5, 0.5],
               "components": [
                 {"kind": "gaussian", "mean": [-1.0, 0.0], "cov_diag": [0.5, 0.5]},
                 {"kind": "gaussian", "mean": [1.0, 0.5], "cov_diag": [0.7, 0.3]}]}},
           "points": {"lo": [-2.5, -2.0], "hi": [2.5, 2.5], "n": 200},
           "checks": ["volume_preserving", "mpt"]})")});
    v.push_back(
        {"compact-eddy", "spurious",
         "flow of a compactly supported divergence-free eddy: identity near the "
         "cube boundary, unit determinant inside, centered gaussian preserved",
         json::parse(R"({
           "run": "spurious", "seed": 8, "tol": 1e-4, "mpt_tol": 1e-4,
           "construction": {"kind": "compact_divfree_flow",
                            "center": [0.5, 0.5, 0.5], "radius": 0.4,
                            "amplitude": 0.5, "i": 0, "j": 2,
                            "t": 1.0, "steps": 800},
           "density": {"kind": "gaussian", "mean": [0.5, 0.5, 0.5],
                       "cov_diag": [0.09, 0.09, 0.09]},
           "points": {"lo": [0.05, 0.05, 0.05], "hi": [0.95, 0.95, 0.95], "n": 125},
           "boundary_tol": 1e-9,
           "checks": ["volume_preserving", "mpt", "boundary_fixed"]})")});
    v.push_back(
        {"gauss-transport-d2", "prop1",
         "orthogonal-column transport of the uniform square onto a planar "
         "isotropic gaussian, plus its rotated siblings",
         json::parse(R"({
           "run": "prop1", "seed": 4, "tol": 1e-5,
           "profile": {"kind": "gaussian", "dim": 2},
           "rotations": 4, "rotation_seed": 11,
           "density_tol": 5e-3, "n_points": 400, "distinctness_min": 0.05})")});
    v.push_back(
        {"shell-transport-d3", "prop1",
         "orthogonal-column transport of the unit cube onto a smooth spherical "
         "shell law in three dimensions",
         json::parse(R"({
           "run": "prop1", "seed": 9, "tol": 1e-5,
           "profile": {"kind": "annulus", "dim": 3, "inner": 1.0, "outer": 2.0},
           "rotations": 3, "rotation_seed": 7,
           "density_tol": 5e-3, "n_points": 343, "distinctness_min": 0.05})")});
    v.push_back(
        {"rigid-generator", "deform-check",
         "rigid rotation field around the identity satisfies the first-order "
         "compatibility system exactly",
         json::parse(R"({
           "run": "deform-check", "seed": 6, "tol": 1e-6,
           "f0": {"kind": "linear", "matrix": [[1.0, 0.0], [0.0, 1.0]]},
           "field": {"kind": "rigid_rotation", "dim": 2, "i": 0, "j": 1,
                     "center": [0.5, 0.5], "rate": 1.0},
           "points": {"lo": [0.05, 0.05], "hi": [0.95, 0.95], "n": 100},
           "checks": ["first_order", "divergence"]})")});
    v.push_back(
        {"eddy-generator", "deform-check",
         "compact divergence-free eddy: divergence-free to rounding and silent "
         "near the cube boundary (it still violates the first-order system, "
         "which is the point of the volume-class constructions)",
         json::parse(R"({
           "run": "deform-check", "seed": 12, "div_tol": 1e-5,
           "f0": {"kind": "scaling", "factors": [2.0, 1.0]},
           "field": {"kind": "compact_divfree", "center": [0.5, 0.5],
                     "radius": 0.45, "amplitude": 1.0, "i": 0, "j": 1},
           "points": {"lo": [0.05, 0.05], "hi": [0.95, 0.95], "n": 100},
           "boundary_eps": 0.04, "boundary_tol": 1e-12,
           "checks": ["divergence", "boundary"]})")});
    v.push_back(
        {"drift-rot", "train-drift",
         "two-arm drift run on the rotating linear family: the "
         "column-orthogonality penalty keeps the recovered sources aligned",
         json::parse(R"({
           "run": "train-drift", "scenario": "rot", "seed": 3,
           "lambdas": [0.0, 2.0], "steps": 1500, "time_points": 10,
           "batch": 256, "pretrain_budget": 8000, "pretrain_target_kl": 0.05})")});
    v.push_back(
        {"drift-pol", "train-drift",
         "two-arm drift run on the warped polar family, where orthogonal "
         "columns are not enough to pin the sources down",
         json::parse(R"({
           "run": "train-drift", "scenario": "pol", "seed": 3,
           "lambdas": [0.0, 2.0], "steps": 1500, "time_points": 10,
           "batch": 256, "pretrain_budget": 8000, "pretrain_target_kl": 0.1})")});
    return v;
  }();
  return entries;
}

const Scenario* find_scenario(const std::string& name) {
  for (const auto& s : catalog())
    if (s.name == name) return &s;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Report emission

int finish_run(const std::string& command, const json& cfg, const RunSettings& rs,
               RunOutput&& out, double wall_s, bool json_stdout) {
  bool all_pass = true;
  for (const Check& c : out.checks) all_pass = all_pass && c.pass;

  json checks = json::array();
  for (const Check& c : out.checks) {
    json jc;
    jc["name"] = c.name;
    jc["pass"] = c.pass;
    jc["value"] = c.value;
    jc["threshold"] = c.threshold;
    jc["op"] = c.op;
    if (!c.detail.empty()) jc["detail"] = c.detail;
    checks.push_back(jc);
  }

  if (!out.residuals.empty()) {
    write_text_file(rs.outdir / "residuals.csv", format_residual_csv(out.residuals));
    out.artifacts.push_back("residuals.csv");
  }

  json report;
  report["tool"] = "ica_lab";
  report["version"] = kToolVersion;
  report["command"] = command;
  report["config"] = cfg;
  report["config_hash"] = hash_hex(cfg.dump());
  report["seed"] = rs.seed;
  report["wall_time_s"] = wall_s;
  report["all_pass"] = all_pass;
  report["checks"] = checks;
  report["summary"] = out.extra;
  report["artifacts"] = out.artifacts;
  report["warnings"] = out.warnings;
  write_text_file(rs.outdir / "report.json", report.dump(2) + "\n");

  if (json_stdout) {
    std::cout << report.dump(2) << "\n";
  } else {
    for (const Check& c : out.checks) {
      char line[256];
      const char* rel = c.op == ">=" ? ">=" : "<=";
      if (c.op == "info") {
        std::snprintf(line, sizeof line, "[INFO] %-24s value=%.6g  %s",
                      c.name.c_str(), c.value, c.detail.c_str());
      } else {
        std::snprintf(line, sizeof line, "[%s] %-24s value=%.6g  (%s %.6g)%s%s",
                      c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value, rel,
                      c.threshold, c.detail.empty() ? "" : "  ",
                      c.detail.c_str());
      }
      std::cout << line << "\n";
    }
    int n_pass = 0;
    for (const Check& c : out.checks) n_pass += c.pass ? 1 : 0;
    std::cout << "ica_lab " << command << ": " << n_pass << "/" << out.checks.size()
              << " checks passed; report: " << (rs.outdir / "report.json").string()
              << "\n";
  }
  return all_pass ? kExitOk : kExitNumeric;
}

json load_config(const std::string& config_path, const std::string& scenario_name,
                 const std::string& command) {
  if (!config_path.empty() && !scenario_name.empty())
    fail_schema("give either --config or --scenario, not both");
  json cfg;
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) fail_schema("cannot open config file " + config_path);
    try {
      cfg = json::parse(is);
    } catch (const json::parse_error& e) {
      fail_schema(std::string("config is not valid JSON: ") + e.what());
    }
  } else if (!scenario_name.empty()) {
    const Scenario* s = find_scenario(scenario_name);
    if (!s) fail_schema("unknown scenario '" + scenario_name + "' (see: ica_lab list)");
    if (s->kind != command)
      fail_schema("scenario '" + scenario_name + "' belongs to subcommand '" +
                  s->kind + "', not '" + command + "'");
    cfg = s->config;
  } else {
    fail_schema("missing --config FILE or --scenario NAME");
  }
  require_object(cfg, "config");
  const std::string run = str_req(cfg, "run", "config");
  if (run != command)
    fail_schema("config.run is '" + run + "' but the subcommand is '" + command +
                "'");
  return cfg;
}

int run_list(const std::string& kind_filter, bool json_stdout) {
  static const char* kKinds[] = {"verify", "spurious", "prop1", "deform-check",
                                 "train-drift"};
  if (!kind_filter.empty()) {
    bool known = false;
    for (const char* k : kKinds) known = known || kind_filter == k;
    if (!known) fail_schema("unknown --kind '" + kind_filter + "'");
  }
  if (json_stdout) {
    json arr = json::array();
    for (const auto& s : catalog()) {
      if (!kind_filter.empty() && s.kind != kind_filter) continue;
      json e;
      e["name"] = s.name;
      e["kind"] = s.kind;
      e["description"] = s.description;
      e["config"] = s.config;
      arr.push_back(e);
    }
    std::cout << arr.dump(2) << "\n";
    return kExitOk;
  }
  for (const auto& s : catalog()) {
    if (!kind_filter.empty() && s.kind != kind_filter) continue;
    char line[512];
    std::snprintf(line, sizeof line, "%-20s %-12s %s", s.name.c_str(),
                  s.kind.c_str(), s.description.c_str());
    std::cout << line << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"ica_lab: numerical probes for smooth measure transports"};
  app.require_subcommand(1);

  std::string config_path, scenario_name, out_dir, kind_filter;
  std::uint64_t seed_flag = 0;
  double tol_flag = 0.0, lambda_flag = 0.0;
  int steps_flag = 0;
  bool json_stdout = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--scenario", scenario_name, "built-in scenario name");
    sub->add_option("--out", out_dir, "output directory for artifacts");
    sub->add_option("--seed", seed_flag, "root random seed (overrides config)");
    sub->add_option("--tol", tol_flag, "primary tolerance (overrides config)");
    sub->add_flag("--json", json_stdout, "print the report JSON to stdout");
  };

  CLI::App* c_verify = app.add_subcommand("verify", "classify a map's Jacobian structure");
  CLI::App* c_spurious =
      app.add_subcommand("spurious", "build a measure-preserving construction and check it");
  CLI::App* c_prop1 =
      app.add_subcommand("prop1", "orthogonal-column transport onto a rotation-invariant law");
  CLI::App* c_deform =
      app.add_subcommand("deform-check", "residuals of the deformation compatibility system");
  CLI::App* c_train =
      app.add_subcommand("train-drift", "two-arm flow training run under distribution drift");
  CLI::App* c_list = app.add_subcommand("list", "list the built-in scenarios");
  for (CLI::App* sub : {c_verify, c_spurious, c_prop1, c_deform, c_train})
    add_common(sub);
  c_train->add_option("--lambda", lambda_flag,
                      "run a single arm with this penalty weight");
  c_train->add_option("--steps", steps_flag, "steps per drift segment (override)");
  c_list->add_option("--kind", kind_filter, "only scenarios of this subcommand");
  c_list->add_flag("--json", json_stdout, "print the catalog as JSON");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? kExitOk : kExitSchema;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    if (command == "list") return run_list(kind_filter, json_stdout);

    json cfg = load_config(config_path, scenario_name, command);
    // Command-line overrides are folded into the config before hashing, so
    // the report's config block always describes what actually ran.
    if (sub->count("--seed")) cfg["seed"] = seed_flag;
    if (sub->count("--tol")) cfg["tol"] = tol_flag;
    if (command == "train-drift") {
      if (sub->count("--lambda")) cfg["lambdas"] = json::array({lambda_flag});
      if (sub->count("--steps")) cfg["steps"] = steps_flag;
    }

    RunSettings rs;
    if (cfg.contains("seed")) rs.seed = static_cast<std::uint64_t>(int_req(cfg, "seed", "config"));
    if (sub->count("--tol")) rs.tol = tol_flag;
    std::string out_str = "ica_lab_out";
    if (cfg.contains("out")) out_str = str_req(cfg, "out", "config");
    if (!out_dir.empty()) out_str = out_dir;
    rs.outdir = out_str;
    std::filesystem::create_directories(rs.outdir);

    const std::string config_hash = hash_hex(cfg.dump());
    const auto t0 = std::chrono::steady_clock::now();
    RunOutput out;
    if (command == "verify") {
      out = run_verify(cfg, rs);
    } else if (command == "spurious") {
      out = run_spurious(cfg, rs);
    } else if (command == "prop1") {
      out = run_prop1(cfg, rs);
    } else if (command == "deform-check") {
      out = run_deform_check(cfg, rs);
    } else {
      out = run_train_drift(cfg, rs, config_hash);
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return finish_run(command, cfg, rs, std::move(out), wall, json_stdout);
  } catch (const schema_error& e) {
    std::cerr << "ica_lab: config error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const json::exception& e) {
    std::cerr << "ica_lab: config error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const error& e) {
    std::cerr << "ica_lab: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "ica_lab: failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace ica_lab
