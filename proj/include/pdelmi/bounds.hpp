#pragma once

#include "pdelmi/expr.hpp"
#include "pdelmi/linalg.hpp"
#include "pdelmi/mesh.hpp"

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pdelmi::bounds {

/// The symmetric part of A is not positive definite.
class NotCoercive : public std::runtime_error {
 public:
  explicit NotCoercive(double alpha);
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

struct CoercivityResult {
  double alpha = 0.0;  // λ_min((A + Aᵀ)/2)
};

CoercivityResult coercivity_alpha(const DenseMatrix& a);

enum class PoincareMethod { Interval, Slab, UnitBall3d, UserSupplied };

struct PoincareConstant {
  double c = 0.0;
  PoincareMethod method = PoincareMethod::UserSupplied;
};

/// Interval (a,b) → (b−a)/π; slab → width; unit 3-ball → 1/π; box → shortest
/// side (slab bound). A user value always takes precedence.
PoincareConstant poincare_constant(const mesh::DomainDescriptor& domain, std::optional<double> user_value = {});

struct CellBounds {
  std::size_t cell_id = 0;
  DenseMatrix b_center;                 // B_k for partition cells
  std::vector<std::size_t> vertex_ids;  // B_p indices for simplices
  double rho = 0.0;                     // inflated bound
  double inflation = 1.0;
};

inline constexpr double kDefaultInflation = 1.05;
inline constexpr std::size_t kDefaultSamples = 21;

DenseMatrix center_value(const expr::MatrixExpr& b, const mesh::Cell& cell, const expr::ParamMap& params);

/// inflation · max over the cell's samples of ‖B(x) − B_k‖.
double estimate_rho_thm1(const expr::MatrixExpr& b, const mesh::Cell& cell, const DenseMatrix& b_k,
                         const expr::ParamMap& params, double inflation = kDefaultInflation);

/// One matrix B(ξ_p) per mesh vertex.
std::vector<DenseMatrix> vertex_values(const expr::MatrixExpr& b, const mesh::SimplicialMesh& mesh,
                                       const expr::ParamMap& params);

/// inflation · sampled max of ‖B(x) − Σ α_ℓ(x) B_{p(k,ℓ)}‖ over the simplex.
double estimate_rho_thm2(const expr::MatrixExpr& b, const mesh::SimplicialMesh& mesh, std::size_t simplex,
                         const std::vector<DenseMatrix>& vertex_values, const expr::ParamMap& params,
                         std::size_t samples_per_edge = kDefaultSamples, double inflation = kDefaultInflation);

/// B_k and ρ_k for every cell, computed in parallel and returned in cell order.
std::vector<CellBounds> partition_bounds(const expr::MatrixExpr& b, const mesh::Partition& partition,
                                         const expr::ParamMap& params, double inflation = kDefaultInflation);

/// ρ_k for every simplex, in simplex order.
std::vector<CellBounds> mesh_bounds(const expr::MatrixExpr& b, const mesh::SimplicialMesh& mesh,
                                    const std::vector<DenseMatrix>& vertex_values, const expr::ParamMap& params,
                                    std::size_t samples_per_edge = kDefaultSamples,
                                    double inflation = kDefaultInflation);

}  // namespace pdelmi::bounds
