#include "pdelmi/commands.hpp"
#include "pdelmi/config.hpp"
#include "pdelmi/sdp.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace pdelmi;
using namespace pdelmi::commands;
using config::Json;

namespace fs = std::filesystem;

namespace {

config::RunConfig example_1d(double b, std::size_t n = 100) {
  Json d = config::preset("paper-1d");
  d["problem"]["params"]["b"]["value"] = b;
  d["grid"]["N"] = n;
  return config::parse_config(d);
}

config::RunConfig scalar_heat() {
  const Json d = {{"problem", {{"m", 1}, {"n", 1}, {"A", {1}}, {"B", {{"0"}}}}},
                  {"domain", {{"kind", "interval"}, {"bounds", {0, 1}}}},
                  {"grid", {{"N", 4}}}};
  return config::parse_config(d);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pdelmi_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("analyze: feasible and infeasible points") {
  const auto ok = cmd_analyze(example_1d(6.0));
  CHECK(ok.exit_code == kExitOk);
  CHECK(ok.report["verdict"] == "feasible");
  CHECK(ok.report["certificate"]["epsilon"].get<double>() > 0.0);
  CHECK(ok.report["certificate"]["gamma"].get<double>() > 0.0);
  CHECK(ok.report["certificate"]["M"].get<double>() >= 1.0);
  CHECK(ok.report["pointwise"]["checked"] == 1000);
  CHECK(ok.report["pointwise"]["violations"] == 0);

  const auto bad = cmd_analyze(example_1d(7.0));
  CHECK(bad.exit_code == kExitInfeasible);
  CHECK_FALSE(bad.report.contains("certificate"));
}

TEST_CASE("analyze: scalar heat without reaction") {
  const auto r = cmd_analyze(scalar_heat());
  CHECK(r.exit_code == kExitOk);
  CHECK(r.report["certificate"]["gamma"].get<double>() > 0.0);
}

TEST_CASE("analyze: non-coercive diffusion") {
  Json d = config::preset("paper-1d");
  d["problem"]["A"] = {1, 0, 0, -1};
  CHECK_THROWS_AS(cmd_analyze(config::parse_config(d)), bounds::NotCoercive);
}

TEST_CASE("export then import reproduces the system") {
  const auto dir = scratch("export");
  const auto cfg = example_1d(6.0, 10);
  const auto res = cmd_export(cfg, (dir / "sys.dat-s").string());
  CHECK(res.exit_code == kExitOk);
  CHECK(res.report["system"]["main_blocks"] == 10);
  CHECK(res.report["system"]["poincare_blocks"] == 1);
  const std::string text = slurp(dir / "sys.dat-s");
  CHECK_FALSE(fs::exists(dir / "sys.dat-s.tmp"));
  const auto built = build_lmi(cfg, cfg.fixed_params(), 10);
  CHECK(sdp::structurally_equal(sdp::import_sdpa(text), sdp::import_sdpa(sdp::export_sdpa(built.system))));
  CHECK(text == sdp::export_sdpa(built.system));
}

TEST_CASE("bisect: table rows and report files") {
  Json d = config::preset("paper-1d");
  d["grid"]["N"] = 20;
  d["problem"]["params"]["b"]["tol"] = 0.1;
  d["bisect"]["grid_N"] = {2, 20};
  const auto r = cmd_bisect(config::parse_config(d), 2);
  CHECK(r.exit_code == kExitOk);
  REQUIRE(r.report["thresholds"].size() == 2);
  const auto& coarse = r.report["thresholds"][0];
  const auto& fine = r.report["thresholds"][1];
  CHECK(fine["status"] == "ok");
  CHECK(fine["value"].get<double>() > 5.0);
  if (coarse["status"] == "ok") CHECK(coarse["value"].get<double>() <= fine["value"].get<double>() + 0.1);

  const auto dir = scratch("bisect");
  const auto names = cmd_report(r.report, dir.string());
  CHECK(std::find(names.begin(), names.end(), "table.csv") != names.end());
  const std::string table = slurp(dir / "table.csv");
  CHECK(table.rfind("N,b_max\n2,", 0) == 0);
  CHECK(slurp(dir / "probes.dat").rfind("# value accepted grid\n", 0) == 0);
}

TEST_CASE("bisect: an empty bracket is rejected") {
  Json d = config::preset("paper-1d");
  d["grid"]["N"] = 10;
  d["problem"]["params"]["b"] = {{"lo", 8.0}, {"hi", 10.0}};
  CHECK_THROWS_AS(cmd_bisect(config::parse_config(d)), oracle::BracketInvalid);
  d["problem"]["params"]["b"] = 6.0;
  CHECK_THROWS_AS(cmd_bisect(config::parse_config(d)), config::ConfigError);
}

TEST_CASE("report: analyze summary row and trajectory columns") {
  Json d = config::preset("paper-1d");
  d["grid"]["N"] = 50;
  d["problem"]["params"]["b"]["value"] = 5.0;
  d["oracle"] = {{"enabled", true}, {"G", 100}, {"dt", 1e-3}, {"T", 0.2}, {"trajectory_stride", 10}};
  const auto r = cmd_analyze(config::parse_config(d));
  REQUIRE(r.exit_code == kExitOk);
  CHECK(r.report["oracle"]["consistent"] == true);
  CHECK(r.report["oracle"]["decay_check"]["passed"] == true);

  const auto dir = scratch("analyze");
  cmd_report(r.report, dir.string());
  std::istringstream table(slurp(dir / "table.csv"));
  std::string header, row, extra;
  std::getline(table, header);
  std::getline(table, row);
  CHECK(header == "method,N,b,verdict,epsilon,gamma,M");
  CHECK(row.rfind("thm1,50,5,feasible,", 0) == 0);
  CHECK_FALSE(std::getline(table, extra));

  std::istringstream traj(slurp(dir / "trajectory.csv"));
  std::getline(traj, header);
  CHECK(header == "t,norm,V");
  std::size_t rows = 0;
  while (std::getline(traj, row)) {
    ++rows;
    CHECK(std::count(row.begin(), row.end(), ',') == 2);
  }
  CHECK(rows == 21);
  CHECK_THROWS_AS(cmd_report(Json::object(), dir.string()), config::ConfigError);
}

TEST_CASE("oracle command exit codes") {
  Json d = config::preset("paper-1d");
  d["oracle"] = {{"G", 100}, {"simulate", false}};
  d["problem"]["params"]["b"]["value"] = 5.0;
  CHECK(cmd_oracle(config::parse_config(d)).exit_code == kExitOk);
  d["problem"]["params"]["b"]["value"] = 12.0;
  CHECK(cmd_oracle(config::parse_config(d)).exit_code == kExitInfeasible);
}
