#include "pdelmi/commands.hpp"

#include "pdelmi/bounds.hpp"
#include "pdelmi/mesh.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

namespace pdelmi::commands {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using Index = Eigen::Index;

namespace {

constexpr const char* kVersion = "pdelmi 0.1.0";

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const char* method_name(lmi::Theorem t) { return t == lmi::Theorem::ConstantP ? "thm1" : "thm2"; }

const char* verdict_name(sdp::SolveStatus s) {
  switch (s) {
    case sdp::SolveStatus::Feasible: return "feasible";
    case sdp::SolveStatus::NotFeasibleWithinBounds: return "infeasible";
    case sdp::SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "";
}

int exit_code_for(sdp::SolveStatus s) {
  switch (s) {
    case sdp::SolveStatus::Feasible: return kExitOk;
    case sdp::SolveStatus::NotFeasibleWithinBounds: return kExitInfeasible;
    case sdp::SolveStatus::NumericalFailure: return kExitNumericalFailure;
  }
  return kExitNumericalFailure;
}

Json matrix_json(const DenseMatrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_json(const DenseVector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json params_json(const expr::ParamMap& params) {
  Json out = Json::object();
  for (const auto& [k, v] : params) out[k] = v;
  return out;
}

Json base_report(const char* command, const RunConfig& cfg) {
  Json r;
  r["command"] = command;
  r["version"] = kVersion;
  r["config"] = config::to_json(cfg);
  return r;
}

Json certificate_json(const lmi::Certificate& c) {
  Json j;
  j["theorem"] = method_name(c.theorem);
  j["epsilon"] = c.margin_eps;
  j["gamma"] = c.gamma;
  j["M"] = c.overshoot_m;
  j["delta_min"] = c.delta_min;
  j["delta_max"] = c.delta_max;
  if (c.theorem == lmi::Theorem::ConstantP) j["P"] = matrix_json(c.p);
  else j["vertex_matrices"] = c.p_vertices.size();
  j["Lambda"] = matrix_json(c.lambda);
  return j;
}

Json probe_json(const std::string& param, double value, std::size_t grid_n, const LmiRun& run, double seconds) {
  return {{"param", param},
          {"value", value},
          {"N", grid_n},
          {"status", verdict_name(run.solve.status)},
          {"accepted", run.solve.feasible()},
          {"margin", run.solve.best_margin},
          {"iterations", run.solve.iterations},
          {"seconds", seconds}};
}

Json verdict_json(const oracle::OracleVerdict& v, std::size_t grid_points) {
  return {{"G", grid_points},
          {"stable", v.stable},
          {"decay_estimate", v.decay_estimate},
          {"method", oracle::to_string(v.method)}};
}

Json trajectory_json(const oracle::Trajectory& traj, std::size_t stride) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (i % stride != 0 && i + 1 != traj.size()) continue;
    const auto& p = traj[i];
    rows.push_back({p.t, p.norm, p.v ? Json(*p.v) : Json(nullptr)});
  }
  return {{"columns", {"t", "norm", "V"}}, {"rows", std::move(rows)}};
}

/// Verdict, optional simulation and decay check on the configured interval.
Json run_oracle(const RunConfig& cfg, const expr::ParamMap& params, const lmi::Certificate* cert, Json& report,
                bool& stable) {
  const auto& o = cfg.oracle;
  const auto start = Clock::now();
  const auto sys = oracle_system(cfg, params, o.grid_points);
  const auto verdict = oracle::stability_by_eigs(sys, spectral_options(cfg));
  stable = verdict.stable;
  Json j = verdict_json(verdict, o.grid_points);
  if (o.simulate) {
    const auto& iv = std::get<mesh::Interval>(cfg.domain);
    const auto traj = oracle::simulate(sys, initial_state(sys, iv.a, iv.b), o.dt, o.t_end, cert);
    j["fitted_rate"] = oracle::fitted_decay_rate(traj);
    j["dt"] = o.dt;
    j["T"] = o.t_end;
    if (cert) {
      const auto rep = oracle::lyapunov_decay_check(traj, cert->gamma, o.slack);
      j["decay_check"] = {{"passed", rep.passed},
                          {"checked", rep.checked},
                          {"slack", o.slack},
                          {"worst_ratio", rep.worst_ratio},
                          {"first_violation_t", rep.first_violation_t ? Json(*rep.first_violation_t) : Json(nullptr)}};
    }
    report["trajectory"] = trajectory_json(traj, o.trajectory_stride);
  }
  j["seconds"] = seconds_since(start);
  return j;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string json_cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_number()) return format_number(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

LmiRun build_lmi(const RunConfig& cfg, const expr::ParamMap& params, std::size_t grid_n) {
  if (grid_n == 0) throw config::ConfigError("grid.N", "must be at least 1");
  LmiRun run;
  run.alpha = bounds::coercivity_alpha(cfg.a).alpha;
  run.poincare = bounds::poincare_constant(cfg.domain, cfg.poincare).c;
  const auto n = static_cast<Index>(cfg.n);
  const auto samples = cfg.grid.samples_per_cell;
  const double inflation = cfg.grid.rho_inflation;

  auto start = Clock::now();
  if (cfg.method == lmi::Theorem::ConstantP) {
    mesh::Partition part;
    if (const auto* iv = std::get_if<mesh::Interval>(&cfg.domain))
      part = mesh::uniform_interval_partition(iv->a, iv->b, grid_n, samples);
    else if (const auto* box = std::get_if<mesh::Box>(&cfg.domain))
      part = mesh::uniform_box_partition(box->lower, box->upper, grid_n, samples);
    else
      part = mesh::spherical_ball_partition(grid_n, samples);
    const auto cells = bounds::partition_bounds(cfg.b, part, params, inflation);
    run.bounds_seconds = seconds_since(start);
    start = Clock::now();
    run.system = lmi::assemble_thm1(cfg.a, cells, run.poincare, n);
  } else {
    mesh::SimplicialMesh msh;
    if (const auto* iv = std::get_if<mesh::Interval>(&cfg.domain))
      msh = mesh::interval_mesh(iv->a, iv->b, grid_n);
    else if (const auto* box = std::get_if<mesh::Box>(&cfg.domain))
      msh = mesh::box_mesh(box->lower, box->upper, grid_n);
    else
      throw config::ConfigError("method", "thm2 needs an interval or box domain");
    const auto vv = bounds::vertex_values(cfg.b, msh, params);
    const auto cells = bounds::mesh_bounds(cfg.b, msh, vv, params, samples, inflation);
    std::vector<double> rhos;
    rhos.reserve(cells.size());
    for (const auto& c : cells) rhos.push_back(c.rho);
    run.bounds_seconds = seconds_since(start);
    start = Clock::now();
    run.system = lmi::assemble_thm2(cfg.a, msh, vv, rhos, run.poincare, n);
  }
  run.assemble_seconds = seconds_since(start);
  return run;
}

LmiRun run_lmi(const RunConfig& cfg, const expr::ParamMap& params, std::size_t grid_n) {
  LmiRun run = build_lmi(cfg, params, grid_n);
  run.solve = sdp::solve_feasibility(run.system, cfg.solver);
  if (run.solve.feasible()) run.certificate = lmi::make_certificate(run.system, *run.solve.y, cfg.method);
  return run;
}

oracle::DiscreteSystem oracle_system(const RunConfig& cfg, const expr::ParamMap& params, std::size_t grid_points) {
  const auto* iv = std::get_if<mesh::Interval>(&cfg.domain);
  if (!iv) throw config::ConfigError("domain.kind", "the finite-difference oracle needs an interval domain");
  oracle::ProblemSpec spec{cfg.a, cfg.b, params, iv->a, iv->b};
  return oracle::discretize_1d(spec, grid_points);
}

oracle::SpectralOptions spectral_options(const RunConfig& cfg) {
  oracle::SpectralOptions opts;
  opts.dense_limit = cfg.oracle.dense_limit;
  opts.dt = cfg.oracle.spectral_dt;
  return opts;
}

DenseVector initial_state(const oracle::DiscreteSystem& sys, double a, double b) {
  DenseVector z(sys.dim());
  const auto n = static_cast<Index>(sys.n);
  for (std::size_t i = 0; i < sys.grid_points; ++i)
    for (Index c = 0; c < n; ++c)
      z[static_cast<Index>(i) * n + c] = std::sin(static_cast<double>(c + 1) * M_PI * (sys.x[i] - a) / (b - a));
  return z;
}

CommandResult cmd_analyze(const RunConfig& cfg) {
  const auto start = Clock::now();
  const auto params = cfg.fixed_params();
  CommandResult out;
  Json& r = out.report;
  r = base_report("analyze", cfg);
  r["params"] = params_json(params);

  const auto solve_start = Clock::now();
  const LmiRun run = run_lmi(cfg, params, cfg.grid.n);
  const double probe_seconds = seconds_since(solve_start);
  const std::string param = cfg.swept_param().value_or(params.empty() ? "" : params.begin()->first);
  r["verdict"] = verdict_name(run.solve.status);
  r["probes"] = Json::array({probe_json(param, params.count(param) ? params.at(param) : 0.0, cfg.grid.n, run,
                                        probe_seconds)});
  r["system"] = {{"variables", run.system.layout.total_len()},
                 {"blocks", run.system.blocks.size()},
                 {"alpha", run.alpha},
                 {"poincare", run.poincare}};
  r["solver"] = {{"status", sdp::to_string(run.solve.status)},
                 {"best_margin", run.solve.best_margin},
                 {"upper_bound", run.solve.upper_bound},
                 {"iterations", run.solve.iterations}};
  if (!run.solve.feasible() && !run.solve.trace.empty()) r["solver"]["last_trace"] = run.solve.trace.back();

  const lmi::Certificate* cert = run.certificate ? &*run.certificate : nullptr;
  if (cert) {
    r["certificate"] = certificate_json(*cert);
    const auto samples = mesh::sample_domain(cfg.domain, cfg.pointwise.samples, cfg.pointwise.seed);
    const auto pw = lmi::pointwise_check(*cert, cfg.b, samples, run.poincare, cfg.a, params, cfg.pointwise.tol);
    r["pointwise"] = {{"checked", pw.checked},
                      {"violations", pw.violations},
                      {"worst_violation", pw.worst_violation},
                      {"worst_x", pw.worst_x.size() ? vector_json(pw.worst_x) : Json(nullptr)},
                      {"tol", cfg.pointwise.tol},
                      {"seed", cfg.pointwise.seed}};
    if (cert->theorem == lmi::Theorem::ConstantP) r["pointwise"]["diffusion_lambda_min"] = pw.diffusion_lambda_min;
  }
  if (cfg.oracle.enabled) {
    bool stable = false;
    r["oracle"] = run_oracle(cfg, params, cert, r, stable);
    // Certified feasibility must imply discrete stability.
    r["oracle"]["consistent"] = !run.solve.feasible() || stable;
  }
  r["timings"] = {{"bounds_seconds", run.bounds_seconds},
                  {"assemble_seconds", run.assemble_seconds},
                  {"solve_seconds", run.solve.wall_time},
                  {"total_seconds", seconds_since(start)}};
  out.exit_code = exit_code_for(run.solve.status);
  return out;
}

CommandResult cmd_bisect(const RunConfig& cfg, std::size_t workers) {
  const auto start = Clock::now();
  const auto name = cfg.swept_param();
  if (!name) throw config::ConfigError("problem.params", "bisect needs a parameter with lo and hi");
  const auto& spec = cfg.params.at(*name);
  expr::ParamMap base;
  for (const auto& [k, p] : cfg.params)
    if (k != *name) {
      if (!p.value) throw config::ConfigError("problem.params." + k, "needs a value");
      base.emplace(k, *p.value);
    }

  CommandResult out;
  Json& r = out.report;
  r = base_report("bisect", cfg);
  r["param"] = *name;
  r["mode"] = cfg.bisect.mode == config::BisectMode::Lmi ? "lmi" : "oracle";
  r["bracket"] = {*spec.lo, *spec.hi};
  r["tol"] = spec.tol;
  r["workers"] = workers;
  r["probes"] = Json::array();
  r["thresholds"] = Json::array();

  const bool oracle_mode = cfg.bisect.mode == config::BisectMode::Oracle;
  std::vector<std::size_t> grids = oracle_mode ? std::vector<std::size_t>{cfg.oracle.grid_points}
                                               : cfg.bisect.grid_values;
  const bool table = !oracle_mode && !grids.empty();
  if (grids.empty()) grids.push_back(cfg.grid.n);

  for (const std::size_t grid : grids) {
    std::mutex lock;
    std::map<double, Json> log;
    oracle::Decider decider = [&](double v) {
      expr::ParamMap params = base;
      params[*name] = v;
      const auto probe_start = Clock::now();
      Json entry;
      bool accepted = false;
      if (oracle_mode) {
        const auto verdict = oracle::stability_by_eigs(oracle_system(cfg, params, grid), spectral_options(cfg));
        accepted = verdict.stable;
        entry = {{"param", *name},
                 {"value", v},
                 {"G", grid},
                 {"status", verdict.stable ? "stable" : "unstable"},
                 {"accepted", accepted},
                 {"decay_estimate", verdict.decay_estimate},
                 {"method", oracle::to_string(verdict.method)},
                 {"seconds", seconds_since(probe_start)}};
      } else {
        const LmiRun run = run_lmi(cfg, params, grid);
        accepted = run.solve.feasible();
        entry = probe_json(*name, v, grid, run, seconds_since(probe_start));
      }
      std::lock_guard<std::mutex> g(lock);
      log[v] = std::move(entry);
      return accepted;
    };

    Json row = {{oracle_mode ? "G" : "N", grid}, {"param", *name}};
    try {
      const auto res = oracle::bisect_threshold(decider, *spec.lo, *spec.hi, spec.tol, workers);
      for (const auto& p : res.probes) r["probes"].push_back(log.at(p.value));
      row["value"] = res.threshold;
      row["status"] = "ok";
    } catch (const oracle::BracketInvalid&) {
      const auto lo_it = log.find(*spec.lo);
      const bool lo_rejected = lo_it != log.end() && !lo_it->second["accepted"].get<bool>();
      if (!table || !lo_rejected) throw;
      // Rejected at the lower end: nothing to certify at this grid size.
      for (const double v : {*spec.lo, *spec.hi})
        if (log.count(v)) r["probes"].push_back(log.at(v));
      row["value"] = nullptr;
      row["status"] = "infeasible";
    }
    r["thresholds"].push_back(std::move(row));
  }
  r["verdict"] = "complete";
  r["timings"] = {{"total_seconds", seconds_since(start)}};
  out.exit_code = kExitOk;
  return out;
}

CommandResult cmd_oracle(const RunConfig& cfg) {
  const auto start = Clock::now();
  const auto params = cfg.fixed_params();
  CommandResult out;
  Json& r = out.report;
  r = base_report("oracle", cfg);
  r["params"] = params_json(params);
  bool stable = false;
  r["oracle"] = run_oracle(cfg, params, nullptr, r, stable);
  r["verdict"] = stable ? "stable" : "unstable";
  r["timings"] = {{"total_seconds", seconds_since(start)}};
  out.exit_code = stable ? kExitOk : kExitInfeasible;
  return out;
}

CommandResult cmd_export(const RunConfig& cfg, const std::string& path) {
  const auto params = cfg.fixed_params();
  const LmiRun run = build_lmi(cfg, params, cfg.grid.n);
  write_file_atomic(path, sdp::export_sdpa(run.system));
  std::size_t main = 0, poincare = 0, positivity = 0;
  for (const auto& b : run.system.blocks) {
    if (b.role == lmi::BlockRole::Main) ++main;
    else if (b.role == lmi::BlockRole::Poincare) ++poincare;
    else ++positivity;
  }
  CommandResult out;
  out.report = base_report("export", cfg);
  out.report["params"] = params_json(params);
  out.report["path"] = path;
  out.report["system"] = {{"variables", run.system.layout.total_len()},
                          {"blocks", run.system.blocks.size()},
                          {"main_blocks", main},
                          {"poincare_blocks", poincare},
                          {"positivity_blocks", positivity}};
  out.report["verdict"] = "complete";
  return out;
}

void write_file_atomic(const std::string& path, const std::string& text) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << text;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::vector<std::string> cmd_report(const Json& report, const std::string& outdir) {
  if (!report.is_object() || !report.contains("command") || !report["command"].is_string())
    throw config::ConfigError("report", "not a run report (missing \"command\")");
  const std::string command = report["command"];
  fs::create_directories(outdir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_file_atomic((fs::path(outdir) / name).string(), text);
    written.push_back(name);
  };

  std::ostringstream table, thresholds, probes;
  if (command == "bisect") {
    const std::string param = report.value("param", "b");
    const bool oracle_mode = report.value("mode", "lmi") == "oracle";
    const char* grid_key = oracle_mode ? "G" : "N";
    table << grid_key << "," << param << "_max\n";
    thresholds << "# " << grid_key << " " << param << "_max\n";
    for (const auto& row : report.at("thresholds")) {
      const std::string grid = json_cell(row.at(grid_key));
      if (row.at("value").is_null()) {
        table << grid << ",infeasible\n";
        continue;
      }
      table << grid << "," << json_cell(row.at("value")) << "\n";
      thresholds << grid << " " << json_cell(row.at("value")) << "\n";
    }
  } else if (command == "analyze" || command == "oracle") {
    const Json params = report.value("params", Json::object());
    std::vector<std::string> cols;
    std::vector<std::string> vals;
    auto add = [&](const std::string& c, const std::string& v) {
      cols.push_back(c);
      vals.push_back(v);
    };
    const Json& cfg = report.at("config");
    if (command == "analyze") {
      add("method", json_cell(cfg.at("method")));
      add("N", json_cell(cfg.at("grid").at("N")));
    } else {
      add("G", json_cell(cfg.at("oracle").at("G")));
    }
    for (const auto& [k, v] : params.items()) add(k, json_cell(v));
    add("verdict", json_cell(report.at("verdict")));
    if (command == "analyze") {
      const Json cert = report.value("certificate", Json::object());
      add("epsilon", json_cell(cert.value("epsilon", Json(nullptr))));
      add("gamma", json_cell(cert.value("gamma", Json(nullptr))));
      add("M", json_cell(cert.value("M", Json(nullptr))));
    } else {
      add("decay_estimate", json_cell(report.at("oracle").at("decay_estimate")));
      add("method_used", json_cell(report.at("oracle").at("method")));
    }
    for (std::size_t i = 0; i < cols.size(); ++i) table << (i ? "," : "") << cols[i];
    table << "\n";
    for (std::size_t i = 0; i < vals.size(); ++i) table << (i ? "," : "") << vals[i];
    table << "\n";
    thresholds << "# no thresholds in a " << command << " report\n";
  } else {
    throw config::ConfigError("report.command", "unsupported command '" + command + "'");
  }
  emit("table.csv", table.str());
  emit("thresholds.dat", thresholds.str());

  probes << "# value accepted grid\n";
  if (report.contains("probes"))
    for (const auto& p : report["probes"]) {
      const Json grid = p.contains("N") ? p["N"] : p.value("G", Json(nullptr));
      probes << json_cell(p.at("value")) << " " << (p.at("accepted").get<bool>() ? 1 : 0) << " " << json_cell(grid)
             << "\n";
    }
  emit("probes.dat", probes.str());

  if (report.contains("trajectory")) {
    std::ostringstream csv, dat;
    csv << "t,norm,V\n";
    dat << "# t norm V\n";
    for (const auto& row : report["trajectory"].at("rows")) {
      csv << json_cell(row.at(0)) << "," << json_cell(row.at(1)) << "," << json_cell(row.at(2)) << "\n";
      dat << json_cell(row.at(0)) << " " << json_cell(row.at(1)) << " "
          << (row.at(2).is_null() ? "nan" : json_cell(row.at(2))) << "\n";
    }
    emit("trajectory.csv", csv.str());
    emit("trajectory.dat", dat.str());
  }
  return written;
}

std::string summarize(const Json& report) {
  std::ostringstream os;
  const std::string command = report.value("command", "");
  os << command << ": " << report.value("verdict", "") << "\n";
  if (report.contains("params")) os << "  params: " << report["params"].dump() << "\n";
  if (report.contains("certificate")) {
    const auto& c = report["certificate"];
    os << "  epsilon = " << json_cell(c["epsilon"]) << ", gamma = " << json_cell(c["gamma"])
       << ", M = " << json_cell(c["M"]) << "\n";
  }
  if (report.contains("pointwise")) {
    const auto& p = report["pointwise"];
    os << "  pointwise: " << json_cell(p["checked"]) << " samples, " << json_cell(p["violations"])
       << " violations, worst " << json_cell(p["worst_violation"]) << "\n";
  }
  if (report.contains("thresholds"))
    for (const auto& t : report["thresholds"]) {
      const std::string key = t.contains("N") ? "N" : "G";
      os << "  " << key << " = " << json_cell(t[key]) << ": " << report.value("param", "") << "_max = "
         << (t["value"].is_null() ? std::string("infeasible") : json_cell(t["value"])) << "\n";
    }
  if (report.contains("oracle")) {
    const auto& o = report["oracle"];
    os << "  oracle (G = " << json_cell(o["G"]) << ", " << json_cell(o["method"])
       << "): " << (o["stable"].get<bool>() ? "stable" : "unstable") << ", rightmost rate "
       << json_cell(o["decay_estimate"]) << "\n";
    if (o.contains("decay_check")) {
      const auto& d = o["decay_check"];
      os << "  decay check: " << (d["passed"].get<bool>() ? "passed" : "failed") << ", worst V/envelope "
         << json_cell(d["worst_ratio"]) << "\n";
    }
  }
  if (report.contains("path")) os << "  wrote " << json_cell(report["path"]) << "\n";
  if (report.contains("timings")) os << "  total " << json_cell(report["timings"].value("total_seconds", Json(0.0)))
                                     << " s\n";
  return os.str();
}

}  // namespace pdelmi::commands
