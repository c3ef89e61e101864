#pragma once

#include "pdelmi/linalg.hpp"
#include "pdelmi/lmi.hpp"

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pdelmi::sdp {

struct SolveOptions {
  double margin_tol = 1e-7;
  double feas_floor = 1e-6;
  int max_newton_iters = 200;  // total interior-point iterations
  double var_bound_R = 1e4;
  double barrier_mu_shrink = 0.2;  // accepted and validated; centering is chosen adaptively

  void validate() const;
};

enum class SolveStatus { Feasible, NotFeasibleWithinBounds, NumericalFailure };

const char* to_string(SolveStatus s);

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  std::optional<DenseVector> y;  // present iff feasible
  double best_margin = 0.0;      // largest t reached, in scaled units
  double upper_bound = 0.0;      // weak-duality bound on the margin
  int iterations = 0;
  double wall_time = 0.0;        // seconds
  std::vector<double> scales;    // per-block prescale s_j
  std::vector<std::string> trace;

  bool feasible() const { return status == SolveStatus::Feasible; }
};

/// Maximizes t subject to s_j F_j(y) ⪰ t·I for every block and ‖y‖_∞ ≤ R,
/// s_j = 1/max(1, ‖F_j constant‖), with a primal-dual interior-point method
/// (HKM direction, Mehrotra predictor-corrector) started from the dual
/// feasible point y = 0, t = min λ_min − 1. Feasible as soon as
/// t ≥ feas_floor and the independent eigen-check passes; not feasible once
/// the weak-duality bound on t drops below feas_floor, the duality gap and
/// primal residual fall under margin_tol, or progress stalls.
SolveResult solve_feasibility(const lmi::LmiSystem& system, const SolveOptions& opts = {});

class SdpaParseError : public std::runtime_error {
 public:
  SdpaParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// SDPA sparse (.dat-s) text for F(y) = Σ y_i F_i − F₀ ⪰ 0, with F₀ = −constant.
std::string export_sdpa(const lmi::LmiSystem& system, const std::optional<DenseVector>& objective = {});

/// Reads SDPA sparse text. Variables become scalars y1..ym and every block is
/// imported as nonstrict with role Main.
lmi::LmiSystem import_sdpa(std::string_view text);

/// Same block dimensions, constants and coefficients (names and roles ignored).
bool structurally_equal(const lmi::LmiSystem& a, const lmi::LmiSystem& b);

}  // namespace pdelmi::sdp
