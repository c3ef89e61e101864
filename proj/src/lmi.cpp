#include "pdelmi/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace pdelmi::lmi {

Index VarDescriptor::length() const {
  switch (kind) {
    case VarKind::SymMatrix: return rows * (rows + 1) / 2;
    case VarKind::DiagMatrix: return rows;
    case VarKind::Scalar: return 1;
    case VarKind::FullMatrix: return rows * cols;
  }
  return 0;
}

Index VarDescriptor::index(Index i, Index j) const {
  switch (kind) {
    case VarKind::SymMatrix:
      if (i > j) std::swap(i, j);
      return offset + i * rows - i * (i - 1) / 2 + (j - i);
    case VarKind::DiagMatrix:
      if (i != j) throw std::invalid_argument("diagonal variable has no off-diagonal entries");
      return offset + i;
    case VarKind::Scalar: return offset;
    case VarKind::FullMatrix: return offset + i * cols + j;
  }
  return offset;
}

DenseMatrix VarDescriptor::basis(Index i, Index j) const {
  DenseMatrix e = DenseMatrix::Zero(rows, cols);
  e(i, j) = 1.0;
  if (kind == VarKind::SymMatrix) e(j, i) = 1.0;
  return e;
}

DenseMatrix VarDescriptor::value(const DenseVector& y) const {
  DenseMatrix out = DenseMatrix::Zero(rows, cols);
  switch (kind) {
    case VarKind::SymMatrix:
      for (Index i = 0; i < rows; ++i)
        for (Index j = i; j < rows; ++j) out(i, j) = out(j, i) = y[index(i, j)];
      break;
    case VarKind::DiagMatrix:
      for (Index i = 0; i < rows; ++i) out(i, i) = y[index(i, i)];
      break;
    case VarKind::Scalar: out(0, 0) = y[offset]; break;
    case VarKind::FullMatrix:
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = y[index(i, j)];
      break;
  }
  return out;
}

std::size_t VarLayout::push(VarDescriptor d) {
  if (find(d.name)) throw std::invalid_argument("duplicate variable name '" + d.name + "'");
  d.offset = total_;
  total_ += d.length();
  vars_.push_back(std::move(d));
  return vars_.size() - 1;
}

std::size_t VarLayout::add_sym(const std::string& name, Index dim) { return push({name, VarKind::SymMatrix, dim, dim, 0}); }
std::size_t VarLayout::add_diag(const std::string& name, Index dim) { return push({name, VarKind::DiagMatrix, dim, dim, 0}); }
std::size_t VarLayout::add_scalar(const std::string& name) { return push({name, VarKind::Scalar, 1, 1, 0}); }
std::size_t VarLayout::add_full(const std::string& name, Index rows, Index cols) {
  return push({name, VarKind::FullMatrix, rows, cols, 0});
}

const VarDescriptor* VarLayout::find(const std::string& name) const {
  for (const auto& v : vars_)
    if (v.name == name) return &v;
  return nullptr;
}

bool VarLayout::operator==(const VarLayout& other) const {
  if (total_ != other.total_ || vars_.size() != other.vars_.size()) return false;
  for (std::size_t k = 0; k < vars_.size(); ++k) {
    const auto &a = vars_[k], &b = other.vars_[k];
    if (a.name != b.name || a.kind != b.kind || a.rows != b.rows || a.cols != b.cols || a.offset != b.offset)
      return false;
  }
  return true;
}

DenseMatrix LmiBlock::evaluate(const DenseVector& y) const {
  DenseMatrix out = constant.dense();
  for (const auto& [var, coeff] : coeffs) {
    const double yi = y[var];
    if (yi == 0.0) continue;
    for (Index i = 0; i < dim; ++i)
      for (Index j = i; j < dim; ++j) {
        const double v = coeff(i, j);
        if (v != 0.0) out(i, j) += yi * v;
      }
  }
  out.triangularView<Eigen::StrictlyLower>() = out.transpose();
  return out;
}

void LmiSystem::validate() const {
  for (const auto& block : blocks) {
    if (block.constant.dim() != block.dim)
      throw std::invalid_argument("block '" + block.name + "': constant has the wrong dimension");
    Index last = -1;
    for (const auto& [var, coeff] : block.coeffs) {
      if (var < 0 || var >= layout.total_len())
        throw std::invalid_argument("block '" + block.name + "' references variable " + std::to_string(var) +
                                    " outside the layout");
      if (var <= last) throw std::invalid_argument("block '" + block.name + "': coefficients out of order");
      if (coeff.dim() != block.dim)
        throw std::invalid_argument("block '" + block.name + "': coefficient has the wrong dimension");
      last = var;
    }
  }
}

namespace {

/// Accumulates dense symmetric coefficient matrices for one block.
class BlockBuilder {
 public:
  BlockBuilder(std::string name, Index dim, Strictness strictness, BlockRole role)
      : name_(std::move(name)), dim_(dim), constant_(DenseMatrix::Zero(dim, dim)), strictness_(strictness), role_(role) {}

  /// Adds `m` at (row, col) and its transpose at (col, row); for row == col
  /// `m` is added as is and must be symmetric.
  void add(Index var, Index row, Index col, const DenseMatrix& m) { place(coeff(var), row, col, m); }
  void add_constant(Index row, Index col, const DenseMatrix& m) { place(constant_, row, col, m); }

  LmiBlock build() const {
    LmiBlock block;
    block.name = name_;
    block.dim = dim_;
    block.constant = SymMat::from_dense(constant_);
    block.strictness = strictness_;
    block.role = role_;
    for (const auto& [var, m] : coeffs_)
      if (!m.isZero(0.0)) block.coeffs.emplace_back(var, SymMat::from_dense(m));
    return block;
  }

 private:
  DenseMatrix& coeff(Index var) {
    auto it = coeffs_.find(var);
    if (it == coeffs_.end()) it = coeffs_.emplace(var, DenseMatrix::Zero(dim_, dim_)).first;
    return it->second;
  }

  static void place(DenseMatrix& target, Index row, Index col, const DenseMatrix& m) {
    target.block(row, col, m.rows(), m.cols()) += m;
    if (row != col) target.block(col, row, m.cols(), m.rows()) += m.transpose();
  }

  std::string name_;
  Index dim_;
  DenseMatrix constant_;
  std::map<Index, DenseMatrix> coeffs_;
  Strictness strictness_;
  BlockRole role_;
};

void add_positivity_block(std::vector<LmiBlock>& blocks, const VarDescriptor& var) {
  BlockBuilder bb("pos_" + var.name, var.rows, Strictness::Strict, BlockRole::Positivity);
  for (Index i = 0; i < var.rows; ++i)
    for (Index j = i; j < var.rows; ++j) {
      if (var.kind == VarKind::DiagMatrix && i != j) continue;
      bb.add(var.index(i, j), 0, 0, var.basis(i, j));
    }
  blocks.push_back(bb.build());
}

void require_square(const DenseMatrix& m, Index n, const char* what) {
  if (m.rows() != n || m.cols() != n)
    throw std::invalid_argument(std::string("dimension mismatch: ") + what + " must be " + std::to_string(n) + "x" +
                                std::to_string(n));
}

}  // namespace

LmiSystem assemble_thm1(const DenseMatrix& a, const std::vector<bounds::CellBounds>& cells, double c, Index n) {
  require_square(a, n, "A");
  if (!(c > 0.0)) throw std::invalid_argument("Poincare constant must be positive");
  if (cells.empty()) throw std::invalid_argument("assemble_thm1: empty partition");

  LmiSystem sys;
  const VarDescriptor p_var = sys.layout[sys.layout.add_sym("P", n)];
  const VarDescriptor lambda = sys.layout[sys.layout.add_diag("Lambda", n)];
  std::vector<VarDescriptor> sigma;
  for (const auto& cb : cells) sigma.push_back(sys.layout[sys.layout.add_scalar("sigma_" + std::to_string(cb.cell_id))]);

  const DenseMatrix eye = DenseMatrix::Identity(n, n);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& cb = cells[k];
    require_square(cb.b_center, n, "B_k");
    if (!(cb.rho >= 0.0)) throw std::invalid_argument("rho must be nonnegative");
    BlockBuilder bb("cell_" + std::to_string(cb.cell_id), 2 * n, Strictness::Strict, BlockRole::Main);
    for (Index i = 0; i < n; ++i) {
      bb.add(lambda.index(i, i), 0, 0, lambda.basis(i, i));
      for (Index j = i; j < n; ++j) {
        const DenseMatrix e = p_var.basis(i, j);
        const Index var = p_var.index(i, j);
        bb.add(var, 0, 0, -(cb.b_center.transpose() * e + e * cb.b_center));
        bb.add(var, 0, n, cb.rho * e);
      }
    }
    bb.add(sigma[k].offset, 0, 0, -eye);
    bb.add(sigma[k].offset, n, n, eye);
    sys.blocks.push_back(bb.build());
  }

  BlockBuilder poincare("poincare", n, Strictness::NonStrict, BlockRole::Poincare);
  for (Index i = 0; i < n; ++i) {
    poincare.add(lambda.index(i, i), 0, 0, -c * c * lambda.basis(i, i));
    for (Index j = i; j < n; ++j) {
      const DenseMatrix e = p_var.basis(i, j);
      poincare.add(p_var.index(i, j), 0, 0, a.transpose() * e + e * a);
    }
  }
  sys.blocks.push_back(poincare.build());

  add_positivity_block(sys.blocks, p_var);
  add_positivity_block(sys.blocks, lambda);
  for (const auto& s : sigma) add_positivity_block(sys.blocks, s);
  return sys;
}

LmiSystem assemble_thm2(const DenseMatrix& a, const mesh::SimplicialMesh& mesh,
                        const std::vector<DenseMatrix>& vertex_values, const std::vector<double>& rhos, double c,
                        Index n) {
  require_square(a, n, "A");
  if (!(c > 0.0)) throw std::invalid_argument("Poincare constant must be positive");
  if (mesh.simplices.empty()) throw std::invalid_argument("assemble_thm2: empty mesh");
  if (vertex_values.size() != mesh.vertices.size())
    throw std::invalid_argument("mesh/vertex misalignment: one B_p per mesh vertex is required");
  if (rhos.size() != mesh.simplices.size())
    throw std::invalid_argument("mesh/rho misalignment: one rho per simplex is required");
  for (const auto& bp : vertex_values) require_square(bp, n, "B_p");

  const auto m = static_cast<Index>(mesh.m);
  const std::size_t n_cells = mesh.simplices.size();
  LmiSystem sys;
  sys.mesh = std::make_shared<const mesh::SimplicialMesh>(mesh);

  std::vector<VarDescriptor> p_vars;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    p_vars.push_back(sys.layout[sys.layout.add_sym("P_" + std::to_string(v + 1), n)]);
  const VarDescriptor lambda = sys.layout[sys.layout.add_diag("Lambda", n)];
  std::vector<std::vector<VarDescriptor>> sigma(n_cells);
  for (std::size_t k = 0; k < n_cells; ++k)
    for (Index l = 0; l <= m; ++l)
      sigma[k].push_back(sys.layout[sys.layout.add_scalar("sigma_" + std::to_string(k + 1) + "_" + std::to_string(l))]);
  std::vector<VarDescriptor> upsilon, xi;
  for (std::size_t k = 0; k < n_cells; ++k) upsilon.push_back(sys.layout[sys.layout.add_full("Upsilon_" + std::to_string(k + 1), n, n)]);
  for (std::size_t k = 0; k < n_cells; ++k) xi.push_back(sys.layout[sys.layout.add_full("Xi_" + std::to_string(k + 1), n, n)]);

  const DenseMatrix eye = DenseMatrix::Identity(n, n);
  const DenseMatrix eye_m = DenseMatrix::Identity(m, m);
  const Index r1 = 0, r2 = n, r3 = 2 * n, r4 = 3 * n;
  const Index dim = (3 + m) * n;

  for (std::size_t k = 0; k < n_cells; ++k) {
    const auto& simplex = mesh.simplices[k];
    if (simplex.vertex_ids.size() != static_cast<std::size_t>(m) + 1 || simplex.gradients.size() != simplex.vertex_ids.size())
      throw std::invalid_argument("mesh/vertex misalignment in simplex " + std::to_string(k));
    const double rho = rhos[k];
    if (!(rho >= 0.0)) throw std::invalid_argument("rho must be nonnegative");

    for (Index l = 0; l <= m; ++l) {
      const std::size_t pv = simplex.vertex_ids[static_cast<std::size_t>(l)];
      const DenseMatrix& bp = vertex_values[pv];
      BlockBuilder bb("cell_" + std::to_string(k + 1) + "_" + std::to_string(l), dim, Strictness::Strict,
                      BlockRole::Main);

      for (Index i = 0; i < n; ++i) {
        bb.add(lambda.index(i, i), r1, r1, lambda.basis(i, i));
        bb.add(lambda.index(i, i), r4, r4, -c * c * kron(lambda.basis(i, i), eye_m));
      }
      bb.add(sigma[k][static_cast<std::size_t>(l)].offset, r1, r1, -eye);
      bb.add(sigma[k][static_cast<std::size_t>(l)].offset, r3, r3, eye);

      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
          const DenseMatrix u = upsilon[k].basis(i, j);
          bb.add(upsilon[k].index(i, j), r1, r1, -(bp.transpose() * u + u.transpose() * bp));
          bb.add(upsilon[k].index(i, j), r1, r2, u.transpose());
          const DenseMatrix x = xi[k].basis(i, j);
          bb.add(xi[k].index(i, j), r1, r2, -bp.transpose() * x);
          bb.add(xi[k].index(i, j), r2, r2, x + x.transpose());
        }

      const VarDescriptor& pl = p_vars[pv];
      for (Index i = 0; i < n; ++i)
        for (Index j = i; j < n; ++j) {
          const DenseMatrix e = pl.basis(i, j);
          bb.add(pl.index(i, j), r1, r2, -e);
          bb.add(pl.index(i, j), r1, r3, rho * e);
          bb.add(pl.index(i, j), r4, r4, kron(DenseMatrix(a.transpose() * e + e * a), eye_m));
        }

      // Gradient coupling Σ_r (P_{p(k,r)} A) ⊗ v_{p(k,r)}ᵀ in the (1,4) block.
      for (Index r = 0; r <= m; ++r) {
        const VarDescriptor& pr = p_vars[simplex.vertex_ids[static_cast<std::size_t>(r)]];
        const DenseMatrix vt = simplex.gradients[static_cast<std::size_t>(r)].transpose();
        for (Index i = 0; i < n; ++i)
          for (Index j = i; j < n; ++j) {
            const DenseMatrix e = pr.basis(i, j);
            bb.add(pr.index(i, j), r1, r4, kron(DenseMatrix(e * a), vt));
          }
      }
      sys.blocks.push_back(bb.build());
    }
  }

  for (const auto& pv : p_vars) add_positivity_block(sys.blocks, pv);
  add_positivity_block(sys.blocks, lambda);
  for (const auto& row : sigma)
    for (const auto& s : row) add_positivity_block(sys.blocks, s);
  return sys;
}

SymMat lemma1_expand(const DenseMatrix& m, const DenseMatrix& b, const DenseMatrix& p, const DenseMatrix& upsilon,
                     const DenseMatrix& xi) {
  const Index n = m.rows();
  for (const DenseMatrix* x : {&m, &b, &p, &upsilon, &xi})
    if (x->rows() != n || x->cols() != n) throw std::invalid_argument("lemma1_expand: dimension mismatch");
  DenseMatrix out(2 * n, 2 * n);
  const DenseMatrix off = upsilon.transpose() - p.transpose() - b.transpose() * xi;
  out.topLeftCorner(n, n) = m - b.transpose() * upsilon - upsilon.transpose() * b;
  out.topRightCorner(n, n) = off;
  out.bottomLeftCorner(n, n) = off.transpose();
  out.bottomRightCorner(n, n) = xi + xi.transpose();
  return SymMat::from_dense(out);
}

std::vector<BlockValue> evaluate_system(const LmiSystem& system, const DenseVector& y) {
  if (y.size() != system.layout.total_len())
    throw std::invalid_argument("evaluate_system: expected " + std::to_string(system.layout.total_len()) +
                                " variables, got " + std::to_string(y.size()));
  std::vector<BlockValue> out;
  out.reserve(system.blocks.size());
  for (const auto& block : system.blocks) {
    BlockValue bv;
    bv.value = block.evaluate(y);
    bv.lambda_min = lambda_min(bv.value);
    out.push_back(std::move(bv));
  }
  return out;
}

DecayConstants decay_constants(double eps, double delta_min, double delta_max) {
  if (!(eps > 0.0) || !(delta_min > 0.0) || !(delta_max >= delta_min))
    throw std::invalid_argument("decay_constants: need eps > 0 and 0 < delta_min <= delta_max");
  return {eps / (2.0 * delta_max), std::sqrt(delta_max / delta_min)};
}

Certificate make_certificate(const LmiSystem& system, const DenseVector& y, Theorem theorem) {
  const auto values = evaluate_system(system, y);
  Certificate cert;
  cert.theorem = theorem;
  double eps = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < values.size(); ++j) {
    const auto& block = system.blocks[j];
    const double lmin = values[j].lambda_min;
    if (block.strictness == Strictness::Strict && !(lmin > 0.0))
      throw InfeasiblePoint("block '" + block.name + "' is not positive definite (lambda_min = " +
                            std::to_string(lmin) + ")");
    if (block.strictness == Strictness::NonStrict && lmin < -1e-9 * std::max(1.0, values[j].value.norm()))
      throw InfeasiblePoint("block '" + block.name + "' is not positive semidefinite (lambda_min = " +
                            std::to_string(lmin) + ")");
    if (block.role == BlockRole::Main) eps = std::min(eps, lmin);
  }
  if (!std::isfinite(eps)) throw InfeasiblePoint("system has no main blocks");
  cert.margin_eps = eps;

  const auto* lambda = system.layout.find("Lambda");
  if (!lambda) throw std::invalid_argument("make_certificate: layout has no Lambda");
  cert.lambda = lambda->value(y);
  for (const auto& v : system.layout.vars())
    if (v.kind == VarKind::Scalar && v.name.rfind("sigma_", 0) == 0) cert.sigmas.push_back(y[v.offset]);

  std::vector<DenseMatrix> ps;
  if (theorem == Theorem::ConstantP) {
    const auto* p = system.layout.find("P");
    if (!p) throw std::invalid_argument("make_certificate: layout has no P");
    cert.p = p->value(y);
    ps.push_back(cert.p);
  } else {
    for (const auto& v : system.layout.vars())
      if (v.kind == VarKind::SymMatrix && v.name.rfind("P_", 0) == 0) cert.p_vertices.push_back(v.value(y));
    if (cert.p_vertices.empty()) throw std::invalid_argument("make_certificate: layout has no vertex matrices");
    cert.mesh = system.mesh;
    ps = cert.p_vertices;
  }
  cert.delta_min = std::numeric_limits<double>::infinity();
  cert.delta_max = 0.0;
  for (const auto& p : ps) {
    const auto eig = sym_eig(p);
    cert.delta_min = std::min(cert.delta_min, eig.values[0]);
    cert.delta_max = std::max(cert.delta_max, eig.values[eig.values.size() - 1]);
  }
  if (!(cert.delta_min > 0.0)) throw InfeasiblePoint("Lyapunov matrix is not positive definite");
  const auto dc = decay_constants(eps, cert.delta_min, cert.delta_max);
  cert.gamma = dc.gamma;
  cert.overshoot_m = dc.overshoot_m;
  return cert;
}

DenseMatrix Certificate::lyapunov_matrix(const mesh::Point& x) const {
  if (theorem == Theorem::ConstantP) return p;
  if (!mesh) throw std::logic_error("piecewise-linear certificate without mesh");
  const auto k = mesh::locate(*mesh, x, 1e-9);
  if (!k) throw std::out_of_range("point lies outside the mesh");
  const auto verts = mesh->simplex_vertices(*k);
  const DenseVector alpha = mesh::barycentric(verts, x);
  DenseMatrix out = DenseMatrix::Zero(p_vertices[0].rows(), p_vertices[0].cols());
  const auto& ids = mesh->simplices[*k].vertex_ids;
  for (std::size_t l = 0; l < ids.size(); ++l) out += alpha[static_cast<Eigen::Index>(l)] * p_vertices[ids[l]];
  return out;
}

PointwiseReport pointwise_check(const Certificate& cert, const expr::MatrixExpr& b,
                                const std::vector<mesh::Point>& samples, double c, const DenseMatrix& a,
                                const expr::ParamMap& params, double tol) {
  PointwiseReport rep;
  const Index n = cert.lambda.rows();
  const double eps = cert.margin_eps;
  auto record = [&](double violation, const mesh::Point& x) {
    ++rep.checked;
    if (violation > tol) ++rep.violations;
    if (violation > rep.worst_violation || rep.worst_x.size() == 0) {
      rep.worst_violation = std::max(rep.worst_violation, violation);
      rep.worst_x = x;
    }
  };

  if (cert.theorem == Theorem::ConstantP) {
    const DenseMatrix diffusion = a.transpose() * cert.p + cert.p * a - c * c * cert.lambda;
    rep.diffusion_lambda_min = lambda_min(diffusion);
    const double diffusion_violation = std::max(0.0, -rep.diffusion_lambda_min);
    for (const auto& x : samples) {
      const DenseMatrix bx = b.eval({{x.data(), static_cast<std::size_t>(x.size())}, &params});
      const DenseMatrix lhs = cert.lambda - bx.transpose() * cert.p - cert.p * bx;
      record(std::max(eps - lambda_min(lhs), diffusion_violation), x);
    }
    return rep;
  }

  const auto& msh = *cert.mesh;
  const auto m = static_cast<Index>(msh.m);
  rep.diffusion_lambda_min = std::numeric_limits<double>::infinity();
  for (const auto& x : samples) {
    const auto k = mesh::locate(msh, x, 1e-9);
    if (!k) throw std::out_of_range("pointwise_check: sample outside the mesh");
    const auto verts = msh.simplex_vertices(*k);
    const auto& simplex = msh.simplices[*k];
    const DenseVector alpha = mesh::barycentric(verts, x);
    DenseMatrix px = DenseMatrix::Zero(n, n);
    DenseMatrix coupling = DenseMatrix::Zero(n, n * m);
    for (std::size_t l = 0; l < simplex.vertex_ids.size(); ++l) {
      const DenseMatrix& pl = cert.p_vertices[simplex.vertex_ids[l]];
      px += alpha[static_cast<Index>(l)] * pl;
      coupling += kron(DenseMatrix(pl * a), DenseMatrix(simplex.gradients[l].transpose()));
    }
    const DenseMatrix bx = b.eval({{x.data(), static_cast<std::size_t>(x.size())}, &params});
    DenseMatrix full(n * (m + 1), n * (m + 1));
    full.topLeftCorner(n, n) = cert.lambda - bx.transpose() * px - px * bx - eps * DenseMatrix::Identity(n, n);
    full.topRightCorner(n, n * m) = coupling;
    full.bottomLeftCorner(n * m, n) = coupling.transpose();
    const DenseMatrix diffusion = a.transpose() * px + px * a - c * c * cert.lambda;
    full.bottomRightCorner(n * m, n * m) = kron(diffusion, DenseMatrix::Identity(m, m));
    rep.diffusion_lambda_min = std::min(rep.diffusion_lambda_min, lambda_min(diffusion));
    record(std::max(0.0, -lambda_min(full)), x);
  }
  return rep;
}

}  // namespace pdelmi::lmi
