#pragma once

#include "pdelmi/expr.hpp"
#include "pdelmi/linalg.hpp"
#include "pdelmi/lmi.hpp"

#include <Eigen/SparseCore>

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pdelmi::oracle {

struct ProblemSpec {
  DenseMatrix a;
  expr::MatrixExpr b;
  expr::ParamMap params;
  double lower = 0.0, upper = 1.0;  // spatial interval
};

/// Finite-difference operator L = D₂ ⊗ A + blockdiag(B(x_i)) on the interior
/// nodes, node-major: z = (z_1, …, z_G) with z_i ∈ R^n.
struct DiscreteSystem {
  std::size_t grid_points = 0;
  std::size_t m = 1;
  std::size_t n = 0;
  double h = 0.0;
  std::vector<double> x;
  Eigen::SparseMatrix<double> op;

  Eigen::Index dim() const { return op.rows(); }
};

DiscreteSystem discretize_1d(const ProblemSpec& problem, std::size_t grid_points);

enum class OracleMethod { Eigen, Simulate };

const char* to_string(OracleMethod m);

struct OracleVerdict {
  bool stable = false;
  double decay_estimate = 0.0;  // rightmost real part of the spectrum (or fitted rate)
  OracleMethod method = OracleMethod::Eigen;
};

struct SpectralOptions {
  Eigen::Index dense_limit = 1000;  // dense eigen-solve up to this dimension
  double dt = 0.05;                 // implicit-Euler step of the propagator estimate
  int max_steps = 5000;
  double rel_tol = 1e-12;
};

/// Dense eigenvalues for small systems; otherwise the spectral radius ρ of
/// (I − dt·L)⁻¹ by normalized power iteration, reported as (1 − 1/ρ)/dt.
OracleVerdict stability_by_eigs(const DiscreteSystem& sys, const SpectralOptions& opts = {});

struct TrajectoryPoint {
  double t = 0.0;
  double norm = 0.0;
  std::optional<double> v;
};

using Trajectory = std::vector<TrajectoryPoint>;

class LinearSolveFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Implicit Euler (I − dt·L) z⁺ = z. ‖z‖ is the discrete L² norm
/// √(h Σ|z_i|²); with a certificate V = Σ h z_iᵀ P(x_i) z_i is recorded too.
Trajectory simulate(const DiscreteSystem& sys, const DenseVector& z0, double dt, double t_end,
                    const lmi::Certificate* cert = nullptr);

/// Least-squares slope of log‖z‖ over the last half of the horizon.
double fitted_decay_rate(const Trajectory& traj);

struct BisectionProbe {
  double value = 0.0;
  bool accepted = false;
};

struct BisectionResult {
  double threshold = 0.0;
  std::vector<BisectionProbe> probes;
};

class BracketInvalid : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Decider = std::function<bool(double)>;

/// Largest probed value accepted by a monotone decider, within `tol`.
/// With workers > 1 the next levels of the bisection tree are evaluated
/// speculatively; the returned threshold equals the sequential one.
BisectionResult bisect_threshold(const Decider& decider, double lo, double hi, double tol, std::size_t workers = 1);

struct DecayReport {
  bool passed = true;
  std::size_t checked = 0;
  std::optional<double> first_violation_t;
  double worst_ratio = 0.0;  // max V(t) / (V(0) e^{−2γt})
};

/// Checks V(t) ≤ V(0)·e^{−2γt}·(1 + slack) at every recorded t.
DecayReport lyapunov_decay_check(const Trajectory& traj, double gamma, double slack);

/// CSV with header "t,norm,V"; V is empty when not recorded.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace pdelmi::oracle
