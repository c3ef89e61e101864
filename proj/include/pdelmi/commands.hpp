#pragma once

#include "pdelmi/config.hpp"
#include "pdelmi/lmi.hpp"
#include "pdelmi/oracle.hpp"
#include "pdelmi/sdp.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace pdelmi::commands {

using config::Json;
using config::RunConfig;

/// Process exit codes; part of the command-line contract.
enum ExitCode : int {
  kExitOk = 0,
  kExitInfeasible = 2,
  kExitConfigError = 3,
  kExitNumericalFailure = 4,
  kExitNotCoercive = 5,
};

/// One assembled and solved LMI instance.
struct LmiRun {
  lmi::LmiSystem system;
  sdp::SolveResult solve;
  std::optional<lmi::Certificate> certificate;
  double alpha = 0.0;     // coercivity constant of A
  double poincare = 0.0;  // c used in the diffusion block
  double bounds_seconds = 0.0;
  double assemble_seconds = 0.0;
};

/// Coercivity and Poincaré constant, cell bounds, assembly. Throws
/// bounds::NotCoercive when the symmetric part of A is not positive definite.
LmiRun build_lmi(const RunConfig& cfg, const expr::ParamMap& params, std::size_t grid_n);

/// build_lmi followed by the solve and, when feasible, the certificate.
LmiRun run_lmi(const RunConfig& cfg, const expr::ParamMap& params, std::size_t grid_n);

/// Finite-difference operator for the configured interval problem.
oracle::DiscreteSystem oracle_system(const RunConfig& cfg, const expr::ParamMap& params, std::size_t grid_points);

oracle::SpectralOptions spectral_options(const RunConfig& cfg);

/// Smooth, deterministic initial state: component c is sin((c+1)π(x−a)/(b−a)).
DenseVector initial_state(const oracle::DiscreteSystem& sys, double a, double b);

struct CommandResult {
  Json report;
  int exit_code = kExitOk;
};

/// Single-point analysis at the fixed parameter values.
CommandResult cmd_analyze(const RunConfig& cfg);

/// Bisection over the swept parameter, once per grid size in bisect.grid_N
/// (or grid.N). `workers` > 1 evaluates probes speculatively in parallel.
CommandResult cmd_bisect(const RunConfig& cfg, std::size_t workers = 1);

/// Finite-difference stability verdict and, optionally, a simulation.
CommandResult cmd_oracle(const RunConfig& cfg);

/// Writes the assembled system at the fixed parameter values as SDPA sparse
/// text; the file is replaced atomically.
CommandResult cmd_export(const RunConfig& cfg, const std::string& path);

/// Writes table.csv, thresholds.dat, probes.dat and, when the report holds
/// a trajectory, trajectory.csv and trajectory.dat. Returns the file names.
std::vector<std::string> cmd_report(const Json& report, const std::string& outdir);

/// Writes `text` to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& text);

/// Human-readable summary of a report.
std::string summarize(const Json& report);

}  // namespace pdelmi::commands
