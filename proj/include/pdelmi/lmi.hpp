#pragma once

#include "pdelmi/bounds.hpp"
#include "pdelmi/expr.hpp"
#include "pdelmi/linalg.hpp"
#include "pdelmi/mesh.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pdelmi::lmi {

using Index = Eigen::Index;
using SymMat = SymmetricMatrix<double>;

enum class VarKind { SymMatrix, DiagMatrix, Scalar, FullMatrix };

struct VarDescriptor {
  std::string name;
  VarKind kind = VarKind::Scalar;
  Index rows = 1, cols = 1;
  Index offset = 0;

  Index length() const;
  /// Flat index of entry (i, j); symmetric matrices accept either order,
  /// diagonal matrices require i == j.
  Index index(Index i, Index j) const;
  /// Coefficient matrix multiplying the scalar at `index(i, j)`.
  DenseMatrix basis(Index i, Index j) const;
  /// Reassembles the matrix (or 1×1 scalar) from a flat variable vector.
  DenseMatrix value(const DenseVector& y) const;
};

/// Ordered, contiguous, uniquely named variable blocks over a flat vector.
class VarLayout {
 public:
  std::size_t add_sym(const std::string& name, Index dim);
  std::size_t add_diag(const std::string& name, Index dim);
  std::size_t add_scalar(const std::string& name);
  std::size_t add_full(const std::string& name, Index rows, Index cols);

  Index total_len() const { return total_; }
  const std::vector<VarDescriptor>& vars() const { return vars_; }
  const VarDescriptor& operator[](std::size_t k) const { return vars_[k]; }
  const VarDescriptor* find(const std::string& name) const;

  bool operator==(const VarLayout& other) const;

 private:
  std::size_t push(VarDescriptor d);

  std::vector<VarDescriptor> vars_;
  Index total_ = 0;
};

enum class Strictness { Strict, NonStrict };
/// Main: the per-cell inequality whose margin defines ε. Poincare: the
/// diffusion/Poincaré coupling. Positivity: P ≻ 0, Λ ≻ 0, σ > 0 side blocks.
enum class BlockRole { Main, Poincare, Positivity };

/// Affine symmetric map y ↦ F₀ + Σ y_i F_i of fixed dimension.
struct LmiBlock {
  std::string name;
  Index dim = 0;
  SymMat constant;
  std::vector<std::pair<Index, SymMat>> coeffs;  // ascending variable index, no duplicates
  Strictness strictness = Strictness::Strict;
  BlockRole role = BlockRole::Main;

  DenseMatrix evaluate(const DenseVector& y) const;
};

struct LmiSystem {
  VarLayout layout;
  std::vector<LmiBlock> blocks;
  std::shared_ptr<const mesh::SimplicialMesh> mesh;  // set for piecewise-linear systems

  /// Throws std::invalid_argument if a block references an unknown variable
  /// or carries matrices of the wrong size.
  void validate() const;
};

enum class Theorem { ConstantP, PiecewiseLinearP };

/// Constant-P system: per cell the 2n×2n block
///   [Λ − σ_k I − B_kᵀP − PB_k, ρ_k P; ⋆, σ_k I] ≻ 0,
/// one n×n block AᵀP + PA − c²Λ ⪰ 0, and positivity blocks for P, Λ, σ_k.
LmiSystem assemble_thm1(const DenseMatrix& a, const std::vector<bounds::CellBounds>& cells, double c, Index n);

/// Piecewise-linear-P system on a simplicial mesh: one (3+m)n block per
/// (simplex k, local vertex ℓ) with row sizes [n, n, n, mn], plus positivity
/// blocks for every P_p, Λ and σ_{k,ℓ}.
LmiSystem assemble_thm2(const DenseMatrix& a, const mesh::SimplicialMesh& mesh,
                        const std::vector<DenseMatrix>& vertex_values, const std::vector<double>& rhos, double c,
                        Index n);

/// [[M − BᵀΥ − ΥᵀB, Υᵀ − Pᵀ − BᵀΞ], [⋆, Ξ + Ξᵀ]].
SymMat lemma1_expand(const DenseMatrix& m, const DenseMatrix& b, const DenseMatrix& p, const DenseMatrix& upsilon,
                     const DenseMatrix& xi);

struct BlockValue {
  DenseMatrix value;
  double lambda_min = 0.0;
};

std::vector<BlockValue> evaluate_system(const LmiSystem& system, const DenseVector& y);

class InfeasiblePoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecayConstants {
  double gamma = 0.0;        // ε / (2 δ_max)
  double overshoot_m = 1.0;  // √(δ_max / δ_min)
};

DecayConstants decay_constants(double eps, double delta_min, double delta_max);

struct Certificate {
  Theorem theorem = Theorem::ConstantP;
  DenseMatrix p;                     // constant P
  std::vector<DenseMatrix> p_vertices;  // P_1..P_{N0}
  DenseMatrix lambda;
  std::vector<double> sigmas;
  double margin_eps = 0.0;
  double delta_min = 0.0, delta_max = 0.0;
  double gamma = 0.0;
  double overshoot_m = 1.0;
  std::shared_ptr<const mesh::SimplicialMesh> mesh;

  /// P(x): constant, or Σ α_ℓ(x) P_{p(k,ℓ)} on the simplex containing x.
  DenseMatrix lyapunov_matrix(const mesh::Point& x) const;
};

Certificate make_certificate(const LmiSystem& system, const DenseVector& y, Theorem theorem);

struct PointwiseReport {
  std::size_t checked = 0;
  std::size_t violations = 0;     // samples with violation > tol
  double worst_violation = 0.0;   // max(required − attained, 0)
  mesh::Point worst_x;
  double diffusion_lambda_min = 0.0;  // AᵀP + PA − c²Λ for constant P
};

/// Samples the pointwise conditions behind the certificate: for constant P,
/// Λ − B(x)ᵀP − PB(x) ⪰ εI and AᵀP + PA − c²Λ ⪰ 0; for piecewise-linear P,
/// the full (m+1)n pointwise matrix including the gradient coupling.
PointwiseReport pointwise_check(const Certificate& cert, const expr::MatrixExpr& b,
                                const std::vector<mesh::Point>& samples, double c, const DenseMatrix& a,
                                const expr::ParamMap& params, double tol = 1e-7);

}  // namespace pdelmi::lmi
