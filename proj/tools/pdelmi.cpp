#include "pdelmi/bounds.hpp"
#include "pdelmi/commands.hpp"
#include "pdelmi/config.hpp"
#include "pdelmi/expr.hpp"
#include "pdelmi/oracle.hpp"
#include "pdelmi/parallel.hpp"
#include "pdelmi/sdp.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace pdelmi;
using commands::CommandResult;
using config::Json;

struct Common {
  std::string config_path;
  std::string preset;
  std::vector<std::string> overrides;
  bool parallel = false;
  bool json = false;
  std::string output;
};

config::RunConfig load(const Common& c) {
  if (c.config_path.empty() && c.preset.empty())
    throw config::ConfigError("", "give a config file or --preset");
  Json doc = c.preset.empty() ? Json::object() : config::preset(c.preset);
  if (!c.config_path.empty()) {
    const Json file = config::load_json_file(c.config_path);
    if (c.preset.empty()) doc = file;
    else doc.merge_patch(file);
  }
  for (const auto& o : c.overrides) config::apply_override(doc, o);
  return config::parse_config(doc);
}

int emit(const Common& c, const CommandResult& res) {
  if (!c.output.empty()) commands::write_file_atomic(c.output, res.report.dump(2) + "\n");
  if (c.json) std::cout << res.report.dump(2) << "\n";
  else std::cout << commands::summarize(res.report);
  return res.exit_code;
}

void add_common(CLI::App* app, Common& c, bool positional_config = true) {
  if (positional_config) app->add_option("config", c.config_path, "JSON config file (merged over --preset)");
  app->add_option("--preset", c.preset, "Built-in preset")->check(CLI::IsMember(config::preset_names()));
  app->add_option("--set", c.overrides, "Override key.path=value (value parsed as JSON, else string)");
  app->add_flag("--parallel", c.parallel, "Evaluate probes concurrently (PDELMI_WORKERS sets the count)");
  app->add_flag("--json", c.json, "Print the full JSON report");
  app->add_option("-o,--output", c.output, "Write the JSON report to this file");
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return commands::kExitConfigError;
  } catch (const oracle::BracketInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return commands::kExitConfigError;
  } catch (const expr::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return commands::kExitConfigError;
  } catch (const bounds::NotCoercive& e) {
    std::cerr << "not coercive: " << e.what() << "\n";
    return commands::kExitNotCoercive;
  } catch (const sdp::SdpaParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return commands::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return commands::kExitNumericalFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exponential stability certificates for coupled parabolic PDEs via LMIs"};
  app.require_subcommand(1);
  Common common;

  auto* analyze = app.add_subcommand("analyze", "Solve the LMIs at fixed parameter values");
  add_common(analyze, common);
  auto* bisect = app.add_subcommand("bisect", "Bisect the swept parameter for the largest certified value");
  add_common(bisect, common);
  auto* orc = app.add_subcommand("oracle", "Finite-difference stability check at fixed parameter values");
  add_common(orc, common);
  auto* exp = app.add_subcommand("export", "Write the assembled LMI system as SDPA sparse text");
  std::vector<std::string> export_args;
  add_common(exp, common, false);
  exp->add_option("args", export_args, "[config] out: optional JSON config, then the output .dat-s file")
      ->required()
      ->expected(1, 2);
  auto* rep = app.add_subcommand("report", "Turn a JSON report into CSV tables and plot data");
  std::string report_in, report_dir;
  rep->add_option("in", report_in, "JSON report")->required();
  rep->add_option("outdir", report_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  return guarded([&]() -> int {
    if (analyze->parsed()) return emit(common, commands::cmd_analyze(load(common)));
    if (bisect->parsed())
      return emit(common, commands::cmd_bisect(load(common), common.parallel ? worker_count() : 1));
    if (orc->parsed()) return emit(common, commands::cmd_oracle(load(common)));
    if (exp->parsed()) {
      if (export_args.size() == 2) common.config_path = export_args[0];
      return emit(common, commands::cmd_export(load(common), export_args.back()));
    }
    const Json report = config::load_json_file(report_in);
    for (const auto& name : commands::cmd_report(report, report_dir)) std::cout << report_dir << "/" << name << "\n";
    return commands::kExitOk;
  });
}
