#include "pdelmi/config.hpp"

#include "pdelmi_presets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pdelmi::config {

using Index = Eigen::Index;

ConfigError::ConfigError(const std::string& path, const std::string& what)
    : std::runtime_error(path.empty() ? what : path + ": " + what), path_(path) {}

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(join(path, key), "unknown key");
  }
}

const Json* member(const Json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const Json& required(const Json& obj, const std::string& path, const char* key) {
  const Json* v = member(obj, key);
  if (!v) throw ConfigError(join(path, key), "missing required key");
  return *v;
}

double as_real(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "expected a finite number");
  return d;
}

double as_positive(const Json& v, const std::string& path) {
  const double d = as_real(v, path);
  if (!(d > 0.0)) throw ConfigError(path, "must be positive");
  return d;
}

std::size_t as_count(const Json& v, const std::string& path, std::size_t min = 0) {
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(path, "expected a non-negative integer");
  const auto n = v.get<std::size_t>();
  if (n < min) throw ConfigError(path, "must be at least " + std::to_string(min));
  return n;
}

bool as_bool(const Json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

template <typename T, typename Fn>
void read_opt(const Json& obj, const std::string& path, const char* key, T& out, Fn&& conv) {
  if (const Json* v = member(obj, key)) out = conv(*v, join(path, key));
}

ParamSpec parse_param(const Json& v, const std::string& path) {
  ParamSpec p;
  if (v.is_number()) {
    p.value = as_real(v, path);
    return p;
  }
  check_keys(v, path, {"value", "lo", "hi", "tol"});
  if (const Json* x = member(v, "value")) p.value = as_real(*x, join(path, "value"));
  const Json* lo = member(v, "lo");
  const Json* hi = member(v, "hi");
  if (!lo != !hi) throw ConfigError(path, "a sweep needs both lo and hi");
  if (lo) {
    p.lo = as_real(*lo, join(path, "lo"));
    p.hi = as_real(*hi, join(path, "hi"));
    if (!(*p.lo < *p.hi)) throw ConfigError(path, "sweep needs lo < hi");
  }
  read_opt(v, path, "tol", p.tol, as_positive);
  if (!p.value && !p.lo) throw ConfigError(path, "needs a value or a sweep");
  return p;
}

void parse_problem(const Json& doc, RunConfig& cfg) {
  const std::string path = "problem";
  const Json& pr = required(doc, "", "problem");
  check_keys(pr, path, {"m", "n", "A", "B", "params"});
  cfg.m = as_count(required(pr, path, "m"), "problem.m", 1);
  cfg.n = as_count(required(pr, path, "n"), "problem.n", 1);
  const auto n = cfg.n;

  const Json& a = required(pr, path, "A");
  if (!a.is_array() || a.size() != n * n)
    throw ConfigError("problem.A", "expected " + std::to_string(n * n) + " numbers in row-major order");
  cfg.a.resize(static_cast<Index>(n), static_cast<Index>(n));
  for (std::size_t k = 0; k < n * n; ++k)
    cfg.a(static_cast<Index>(k / n), static_cast<Index>(k % n)) = as_real(a[k], "problem.A[" + std::to_string(k) + "]");

  const Json& b = required(pr, path, "B");
  if (!b.is_array() || b.size() != n) throw ConfigError("problem.B", "expected " + std::to_string(n) + " rows");
  cfg.b_text.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    const std::string row_path = "problem.B[" + std::to_string(i) + "]";
    if (!b[i].is_array() || b[i].size() != n)
      throw ConfigError(row_path, "expected " + std::to_string(n) + " expressions");
    for (std::size_t j = 0; j < n; ++j) {
      const Json& e = b[i][j];
      // Plain numbers are accepted as constant expressions.
      if (e.is_number()) {
        std::ostringstream os;
        os.precision(17);
        os << as_real(e, row_path);
        cfg.b_text[i].push_back(os.str());
      } else {
        cfg.b_text[i].push_back(as_string(e, row_path + "[" + std::to_string(j) + "]"));
      }
    }
  }
  try {
    cfg.b = expr::MatrixExpr::parse(cfg.b_text);
  } catch (const expr::ParseError& e) {
    throw ConfigError("problem.B", e.what());
  }
  if (cfg.b.max_coord() > cfg.m)
    throw ConfigError("problem.B", "references x" + std::to_string(cfg.b.max_coord()) + " but m = " +
                                       std::to_string(cfg.m));

  if (const Json* params = member(pr, "params")) {
    if (!params->is_object()) throw ConfigError("problem.params", "expected an object");
    for (const auto& [name, v] : params->items()) {
      if (name.empty() || name == "pi" || name == "x" || (name[0] == 'x' && name.size() > 1 &&
                                                          std::all_of(name.begin() + 1, name.end(), ::isdigit)))
        throw ConfigError("problem.params." + name, "reserved name");
      cfg.params.emplace(name, parse_param(v, "problem.params." + name));
    }
  }
  std::size_t swept = 0;
  for (const auto& [name, p] : cfg.params) swept += p.swept() ? 1 : 0;
  if (swept > 1) throw ConfigError("problem.params", "at most one parameter may carry a sweep");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (const auto& name : cfg.b(i, j).param_names())
        if (!cfg.params.count(name))
          throw ConfigError("problem.B[" + std::to_string(i) + "][" + std::to_string(j) + "]",
                            "undeclared parameter '" + name + "'");
}

void parse_domain(const Json& doc, RunConfig& cfg) {
  const Json& d = required(doc, "", "domain");
  check_keys(d, "domain", {"kind", "bounds"});
  const std::string kind = as_string(required(d, "domain", "kind"), "domain.kind");
  if (kind == "interval") {
    cfg.domain_kind = DomainKind::Interval;
    const Json& bnd = required(d, "domain", "bounds");
    if (!bnd.is_array() || bnd.size() != 2) throw ConfigError("domain.bounds", "expected [a, b]");
    const double lo = as_real(bnd[0], "domain.bounds[0]"), hi = as_real(bnd[1], "domain.bounds[1]");
    if (!(lo < hi)) throw ConfigError("domain.bounds", "needs a < b");
    if (cfg.m != 1) throw ConfigError("domain.kind", "interval needs problem.m = 1");
    cfg.domain = mesh::Interval{lo, hi};
  } else if (kind == "box") {
    cfg.domain_kind = DomainKind::Box;
    const Json& bnd = required(d, "domain", "bounds");
    if (!bnd.is_array() || bnd.size() != cfg.m)
      throw ConfigError("domain.bounds", "expected one [lo, hi] pair per axis (" + std::to_string(cfg.m) + ")");
    mesh::Box box{mesh::Point(static_cast<Index>(cfg.m)), mesh::Point(static_cast<Index>(cfg.m))};
    for (std::size_t k = 0; k < cfg.m; ++k) {
      const std::string p = "domain.bounds[" + std::to_string(k) + "]";
      if (!bnd[k].is_array() || bnd[k].size() != 2) throw ConfigError(p, "expected [lo, hi]");
      box.lower[static_cast<Index>(k)] = as_real(bnd[k][0], p);
      box.upper[static_cast<Index>(k)] = as_real(bnd[k][1], p);
      if (!(box.lower[static_cast<Index>(k)] < box.upper[static_cast<Index>(k)])) throw ConfigError(p, "needs lo < hi");
    }
    cfg.domain = box;
  } else if (kind == "unit_ball_3d") {
    cfg.domain_kind = DomainKind::UnitBall3d;
    if (member(d, "bounds")) throw ConfigError("domain.bounds", "not used for unit_ball_3d");
    if (cfg.m != 3) throw ConfigError("domain.kind", "unit_ball_3d needs problem.m = 3");
    cfg.domain = mesh::UnitBall3{};
  } else {
    throw ConfigError("domain.kind", "expected interval, box or unit_ball_3d");
  }
}

void parse_solver(const Json& s, sdp::SolveOptions& o) {
  check_keys(s, "solver", {"margin_tol", "feas_floor", "max_newton_iters", "var_bound_R", "barrier_mu_shrink"});
  read_opt(s, "solver", "margin_tol", o.margin_tol, as_positive);
  read_opt(s, "solver", "feas_floor", o.feas_floor, as_positive);
  read_opt(s, "solver", "max_newton_iters", o.max_newton_iters,
           [](const Json& v, const std::string& p) { return static_cast<int>(as_count(v, p, 1)); });
  read_opt(s, "solver", "var_bound_R", o.var_bound_R, as_positive);
  read_opt(s, "solver", "barrier_mu_shrink", o.barrier_mu_shrink, as_positive);
  if (!(o.barrier_mu_shrink < 1.0)) throw ConfigError("solver.barrier_mu_shrink", "must be below 1");
}

void parse_oracle(const Json& s, OracleConfig& o) {
  const std::string p = "oracle";
  check_keys(s, p, {"enabled", "G", "dense_limit", "dt", "T", "spectral_dt", "simulate", "slack", "trajectory_stride"});
  read_opt(s, p, "enabled", o.enabled, as_bool);
  read_opt(s, p, "G", o.grid_points, [](const Json& v, const std::string& q) { return as_count(v, q, 3); });
  read_opt(s, p, "dense_limit", o.dense_limit,
           [](const Json& v, const std::string& q) { return static_cast<long>(as_count(v, q)); });
  read_opt(s, p, "dt", o.dt, as_positive);
  read_opt(s, p, "T", o.t_end, as_positive);
  read_opt(s, p, "spectral_dt", o.spectral_dt, as_positive);
  read_opt(s, p, "simulate", o.simulate, as_bool);
  read_opt(s, p, "slack", o.slack, [](const Json& v, const std::string& q) {
    const double d = as_real(v, q);
    if (d < 0.0) throw ConfigError(q, "must be non-negative");
    return d;
  });
  read_opt(s, p, "trajectory_stride", o.trajectory_stride,
           [](const Json& v, const std::string& q) { return as_count(v, q, 1); });
}

const char* kind_name(DomainKind k) {
  switch (k) {
    case DomainKind::Interval: return "interval";
    case DomainKind::Box: return "box";
    case DomainKind::UnitBall3d: return "unit_ball_3d";
  }
  return "";
}

}  // namespace

expr::ParamMap RunConfig::fixed_params() const {
  expr::ParamMap out;
  for (const auto& [name, p] : params) {
    if (!p.value) throw ConfigError("problem.params." + name, "needs a value for this command");
    out.emplace(name, *p.value);
  }
  return out;
}

std::optional<std::string> RunConfig::swept_param() const {
  for (const auto& [name, p] : params)
    if (p.swept()) return name;
  return std::nullopt;
}

RunConfig parse_config(const Json& doc) {
  check_keys(doc, "", {"problem", "domain", "method", "grid", "poincare", "solver", "oracle", "bisect", "pointwise"});
  RunConfig cfg;
  parse_problem(doc, cfg);
  parse_domain(doc, cfg);

  if (const Json* m = member(doc, "method")) {
    const std::string s = as_string(*m, "method");
    if (s == "thm1") cfg.method = lmi::Theorem::ConstantP;
    else if (s == "thm2") cfg.method = lmi::Theorem::PiecewiseLinearP;
    else throw ConfigError("method", "expected thm1 or thm2");
  }
  if (cfg.method == lmi::Theorem::PiecewiseLinearP && cfg.domain_kind == DomainKind::UnitBall3d)
    throw ConfigError("method", "thm2 needs an interval or box domain");
  if (cfg.method == lmi::Theorem::PiecewiseLinearP && cfg.domain_kind == DomainKind::Box && cfg.m != 2 && cfg.m != 3)
    throw ConfigError("method", "thm2 on a box needs m = 2 or 3");

  const Json& g = required(doc, "", "grid");
  check_keys(g, "grid", {"N", "samples_per_cell", "rho_inflation"});
  cfg.grid.n = as_count(required(g, "grid", "N"), "grid.N", 1);
  read_opt(g, "grid", "samples_per_cell", cfg.grid.samples_per_cell,
           [](const Json& v, const std::string& q) { return as_count(v, q, 2); });
  read_opt(g, "grid", "rho_inflation", cfg.grid.rho_inflation, [](const Json& v, const std::string& q) {
    const double d = as_real(v, q);
    if (d < 1.0) throw ConfigError(q, "must be at least 1");
    return d;
  });

  if (const Json* p = member(doc, "poincare")) {
    if (p->is_string()) {
      if (p->get<std::string>() != "auto") throw ConfigError("poincare", "expected \"auto\" or a number");
    } else {
      cfg.poincare = as_positive(*p, "poincare");
    }
  }

  if (const Json* s = member(doc, "solver")) parse_solver(*s, cfg.solver);
  if (const Json* s = member(doc, "oracle")) parse_oracle(*s, cfg.oracle);
  if (cfg.oracle.enabled && cfg.domain_kind != DomainKind::Interval)
    throw ConfigError("oracle.enabled", "the finite-difference oracle needs an interval domain");

  if (const Json* b = member(doc, "bisect")) {
    check_keys(*b, "bisect", {"mode", "grid_N"});
    if (const Json* m = member(*b, "mode")) {
      const std::string s = as_string(*m, "bisect.mode");
      if (s == "lmi") cfg.bisect.mode = BisectMode::Lmi;
      else if (s == "oracle") cfg.bisect.mode = BisectMode::Oracle;
      else throw ConfigError("bisect.mode", "expected lmi or oracle");
    }
    if (const Json* gn = member(*b, "grid_N")) {
      if (!gn->is_array()) throw ConfigError("bisect.grid_N", "expected a list of grid sizes");
      for (std::size_t k = 0; k < gn->size(); ++k)
        cfg.bisect.grid_values.push_back(as_count((*gn)[k], "bisect.grid_N[" + std::to_string(k) + "]", 1));
    }
  }
  if (cfg.bisect.mode == BisectMode::Oracle && cfg.domain_kind != DomainKind::Interval)
    throw ConfigError("bisect.mode", "oracle bisection needs an interval domain");

  if (const Json* p = member(doc, "pointwise")) {
    check_keys(*p, "pointwise", {"samples", "seed", "tol"});
    read_opt(*p, "pointwise", "samples", cfg.pointwise.samples, [](const Json& v, const std::string& q) {
      return as_count(v, q);
    });
    read_opt(*p, "pointwise", "seed", cfg.pointwise.seed, [](const Json& v, const std::string& q) {
      return static_cast<std::uint64_t>(as_count(v, q));
    });
    read_opt(*p, "pointwise", "tol", cfg.pointwise.tol, as_positive);
  }
  return cfg;
}

Json to_json(const RunConfig& cfg) {
  Json doc;
  Json& pr = doc["problem"];
  pr["m"] = cfg.m;
  pr["n"] = cfg.n;
  pr["A"] = Json::array();
  for (Index i = 0; i < cfg.a.rows(); ++i)
    for (Index j = 0; j < cfg.a.cols(); ++j) pr["A"].push_back(cfg.a(i, j));
  pr["B"] = cfg.b_text;
  pr["params"] = Json::object();
  for (const auto& [name, p] : cfg.params) {
    if (!p.swept()) {
      pr["params"][name] = *p.value;
      continue;
    }
    Json s;
    if (p.value) s["value"] = *p.value;
    s["lo"] = *p.lo;
    s["hi"] = *p.hi;
    s["tol"] = p.tol;
    pr["params"][name] = s;
  }

  Json& d = doc["domain"];
  d["kind"] = kind_name(cfg.domain_kind);
  if (const auto* iv = std::get_if<mesh::Interval>(&cfg.domain)) {
    d["bounds"] = {iv->a, iv->b};
  } else if (const auto* box = std::get_if<mesh::Box>(&cfg.domain)) {
    d["bounds"] = Json::array();
    for (Index k = 0; k < box->lower.size(); ++k) d["bounds"].push_back({box->lower[k], box->upper[k]});
  }

  doc["method"] = cfg.method == lmi::Theorem::ConstantP ? "thm1" : "thm2";
  doc["grid"] = {{"N", cfg.grid.n}, {"samples_per_cell", cfg.grid.samples_per_cell},
                 {"rho_inflation", cfg.grid.rho_inflation}};
  if (cfg.poincare) doc["poincare"] = *cfg.poincare;
  else doc["poincare"] = "auto";
  doc["solver"] = {{"margin_tol", cfg.solver.margin_tol},
                   {"feas_floor", cfg.solver.feas_floor},
                   {"max_newton_iters", cfg.solver.max_newton_iters},
                   {"var_bound_R", cfg.solver.var_bound_R},
                   {"barrier_mu_shrink", cfg.solver.barrier_mu_shrink}};
  const auto& o = cfg.oracle;
  doc["oracle"] = {{"enabled", o.enabled}, {"G", o.grid_points},      {"dense_limit", o.dense_limit},
                   {"dt", o.dt},           {"T", o.t_end},             {"spectral_dt", o.spectral_dt},
                   {"simulate", o.simulate}, {"slack", o.slack},       {"trajectory_stride", o.trajectory_stride}};
  doc["bisect"] = {{"mode", cfg.bisect.mode == BisectMode::Lmi ? "lmi" : "oracle"},
                   {"grid_N", cfg.bisect.grid_values}};
  doc["pointwise"] = {{"samples", cfg.pointwise.samples}, {"seed", cfg.pointwise.seed}, {"tol", cfg.pointwise.tol}};
  return doc;
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("", "override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError(path, "empty key in override path");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError(path, "override descends into a non-object");
      *node = Json::object();
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

Json preset(const std::string& name) {
  for (const auto& p : presets::all)
    if (name == p.name) return Json::parse(p.text);
  throw ConfigError("--preset", "unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : presets::all) out.emplace_back(p.name);
  return out;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open " + path);
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", path + ": " + e.what());
  }
}

}  // namespace pdelmi::config
