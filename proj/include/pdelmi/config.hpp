#pragma once

#include "pdelmi/expr.hpp"
#include "pdelmi/linalg.hpp"
#include "pdelmi/lmi.hpp"
#include "pdelmi/mesh.hpp"
#include "pdelmi/sdp.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdelmi::config {

using Json = nlohmann::ordered_json;

/// Invalid configuration; `path` is the dotted location of the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// A parameter is either fixed or swept; a swept parameter may still carry
/// the value used by single-point commands.
struct ParamSpec {
  std::optional<double> value;
  std::optional<double> lo, hi;
  double tol = 0.02;

  bool swept() const { return lo.has_value(); }
};

enum class DomainKind { Interval, Box, UnitBall3d };

struct GridConfig {
  std::size_t n = 0;                    // cells per axis (intervals for m = 1)
  std::size_t samples_per_cell = 21;    // per axis for m > 1
  double rho_inflation = 1.05;
};

struct OracleConfig {
  bool enabled = false;
  std::size_t grid_points = 1000;
  long dense_limit = 1000;
  double dt = 1e-4;
  double t_end = 2.0;
  double spectral_dt = 0.05;
  bool simulate = true;
  double slack = 0.05;
  std::size_t trajectory_stride = 100;  // rows kept in the report
};

enum class BisectMode { Lmi, Oracle };

struct BisectConfig {
  BisectMode mode = BisectMode::Lmi;
  std::vector<std::size_t> grid_values;  // one bisection per grid size when non-empty
};

struct PointwiseConfig {
  std::size_t samples = 1000;
  std::uint64_t seed = 20240601;
  double tol = 1e-7;
};

struct RunConfig {
  std::size_t m = 1, n = 0;
  DenseMatrix a;
  expr::MatrixExpr b;
  std::vector<std::vector<std::string>> b_text;
  std::map<std::string, ParamSpec, std::less<>> params;
  DomainKind domain_kind = DomainKind::Interval;
  mesh::DomainDescriptor domain;
  lmi::Theorem method = lmi::Theorem::ConstantP;
  GridConfig grid;
  std::optional<double> poincare;  // nullopt = derived from the domain
  sdp::SolveOptions solver;
  OracleConfig oracle;
  BisectConfig bisect;
  PointwiseConfig pointwise;

  /// Fixed values of every parameter (swept ones use their `value`).
  expr::ParamMap fixed_params() const;
  /// The single swept parameter, if any.
  std::optional<std::string> swept_param() const;
};

/// Validates a JSON document against the schema; unknown keys are rejected.
RunConfig parse_config(const Json& doc);

/// Complete document with every default spelled out; parses back to an
/// equivalent RunConfig.
Json to_json(const RunConfig& cfg);

/// Applies "a.b.c=value" overrides; the value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(Json& doc, const std::string& assignment);

/// Built-in presets: "paper-1d" and "paper-3d-ball".
Json preset(const std::string& name);
std::vector<std::string> preset_names();

Json load_json_file(const std::string& path);

}  // namespace pdelmi::config
