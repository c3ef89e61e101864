#include "pdelmi/bounds.hpp"

#include "pdelmi/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <variant>

namespace pdelmi::bounds {

NotCoercive::NotCoercive(double alpha)
    : std::runtime_error("diffusion matrix is not coercive: lambda_min of its symmetric part is " +
                         std::to_string(alpha)),
      alpha_(alpha) {}

CoercivityResult coercivity_alpha(const DenseMatrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw std::invalid_argument("coercivity_alpha: A must be square");
  const DenseMatrix sym = 0.5 * (a + a.transpose());
  const double alpha = lambda_min(sym);
  if (!(alpha > 0.0)) throw NotCoercive(alpha);
  return {alpha};
}

PoincareConstant poincare_constant(const mesh::DomainDescriptor& domain, std::optional<double> user_value) {
  if (user_value) {
    if (!(*user_value > 0.0) || !std::isfinite(*user_value))
      throw std::invalid_argument("Poincare constant must be finite and positive");
    return {*user_value, PoincareMethod::UserSupplied};
  }
  return std::visit(
      [](const auto& d) -> PoincareConstant {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, mesh::Interval>) {
          return {(d.b - d.a) / M_PI, PoincareMethod::Interval};
        } else if constexpr (std::is_same_v<T, mesh::Slab>) {
          return {d.width, PoincareMethod::Slab};
        } else if constexpr (std::is_same_v<T, mesh::UnitBall3>) {
          return {1.0 / M_PI, PoincareMethod::UnitBall3d};
        } else if constexpr (std::is_same_v<T, mesh::Box>) {
          return {(d.upper - d.lower).minCoeff(), PoincareMethod::Slab};
        } else {
          throw std::invalid_argument("no Poincare constant known for this domain; supply one explicitly");
        }
      },
      domain);
}

namespace {

DenseMatrix eval_at(const expr::MatrixExpr& b, const mesh::Point& x, const expr::ParamMap& params) {
  return b.eval({{x.data(), static_cast<std::size_t>(x.size())}, &params});
}

}  // namespace

DenseMatrix center_value(const expr::MatrixExpr& b, const mesh::Cell& cell, const expr::ParamMap& params) {
  return eval_at(b, cell.center, params);
}

double estimate_rho_thm1(const expr::MatrixExpr& b, const mesh::Cell& cell, const DenseMatrix& b_k,
                         const expr::ParamMap& params, double inflation) {
  double rho = 0.0;
  for (const auto& x : cell.sample_points) rho = std::max(rho, operator_norm(eval_at(b, x, params) - b_k));
  return inflation * rho;
}

std::vector<DenseMatrix> vertex_values(const expr::MatrixExpr& b, const mesh::SimplicialMesh& mesh,
                                       const expr::ParamMap& params) {
  std::vector<DenseMatrix> out(mesh.vertices.size());
  parallel_for(out.size(), [&](std::size_t p) { out[p] = eval_at(b, mesh.vertices[p], params); });
  return out;
}

double estimate_rho_thm2(const expr::MatrixExpr& b, const mesh::SimplicialMesh& mesh, std::size_t simplex,
                         const std::vector<DenseMatrix>& vertex_values, const expr::ParamMap& params,
                         std::size_t samples_per_edge, double inflation) {
  if (vertex_values.size() != mesh.vertices.size())
    throw std::invalid_argument("estimate_rho_thm2: vertex values do not match mesh vertices");
  const auto verts = mesh.simplex_vertices(simplex);
  const auto& ids = mesh.simplices[simplex].vertex_ids;
  double rho = 0.0;
  for (const auto& x : mesh::simplex_sample_points(verts, samples_per_edge)) {
    const DenseVector alpha = mesh::barycentric(verts, x);
    DenseMatrix interp = DenseMatrix::Zero(vertex_values[0].rows(), vertex_values[0].cols());
    for (std::size_t l = 0; l < ids.size(); ++l) interp += alpha[static_cast<Eigen::Index>(l)] * vertex_values[ids[l]];
    rho = std::max(rho, operator_norm(eval_at(b, x, params) - interp));
  }
  return inflation * rho;
}

std::vector<CellBounds> partition_bounds(const expr::MatrixExpr& b, const mesh::Partition& partition,
                                         const expr::ParamMap& params, double inflation) {
  std::vector<CellBounds> out(partition.cells.size());
  parallel_for(out.size(), [&](std::size_t k) {
    const auto& cell = partition.cells[k];
    CellBounds cb;
    cb.cell_id = cell.id;
    cb.b_center = center_value(b, cell, params);
    cb.rho = estimate_rho_thm1(b, cell, cb.b_center, params, inflation);
    cb.inflation = inflation;
    out[k] = std::move(cb);
  });
  return out;
}

std::vector<CellBounds> mesh_bounds(const expr::MatrixExpr& b, const mesh::SimplicialMesh& mesh,
                                    const std::vector<DenseMatrix>& vertex_values, const expr::ParamMap& params,
                                    std::size_t samples_per_edge, double inflation) {
  std::vector<CellBounds> out(mesh.simplices.size());
  parallel_for(out.size(), [&](std::size_t k) {
    CellBounds cb;
    cb.cell_id = k + 1;
    cb.vertex_ids = mesh.simplices[k].vertex_ids;
    cb.rho = estimate_rho_thm2(b, mesh, k, vertex_values, params, samples_per_edge, inflation);
    cb.inflation = inflation;
    out[k] = std::move(cb);
  });
  return out;
}

}  // namespace pdelmi::bounds
