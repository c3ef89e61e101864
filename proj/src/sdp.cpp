#include "pdelmi/sdp.hpp"

#include "pdelmi/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace pdelmi::sdp {

using lmi::Index;

void SolveOptions::validate() const {
  if (!(margin_tol > 0.0) || !(feas_floor > 0.0) || max_newton_iters <= 0 || !(var_bound_R > 0.0) ||
      !(barrier_mu_shrink > 0.0 && barrier_mu_shrink < 1.0))
    throw std::invalid_argument("solver options must be positive (and barrier_mu_shrink < 1)");
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::NotFeasibleWithinBounds: return "not_feasible_within_bounds";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

namespace {

/// One matrix block in dual form: S = C − Σ_a w_a A_a with w = (y, t),
/// A_a = −s·F_a for the block's variables and A_t = I.
struct ScaledBlock {
  Index dim = 0;
  DenseMatrix constant;
  std::vector<Index> vars;  // global indices; the margin t is implicit
  std::vector<DenseMatrix> coeffs;
};

struct PrimalDualState {
  std::vector<DenseMatrix> x, s;
  DenseVector box_xp, box_xm, box_sp, box_sm;  // dual/slack pairs for R − y ≥ 0 and R + y ≥ 0
  DenseVector w;                               // (y, t)
};

struct Direction {
  std::vector<DenseMatrix> dx, ds;
  DenseVector dxp, dxm, dsp, dsm;
  DenseVector dw;
};

class PrimalDual {
 public:
  PrimalDual(const lmi::LmiSystem& system, const SolveOptions& opts, std::vector<double>& scales)
      : n_(system.layout.total_len()), radius_(opts.var_bound_R) {
    blocks_.reserve(system.blocks.size());
    for (const auto& b : system.blocks) {
      ScaledBlock sb;
      sb.dim = b.dim;
      const DenseMatrix f0 = b.constant.dense();
      const double s = 1.0 / std::max(1.0, f0.norm());
      scales.push_back(s);
      sb.constant = s * f0;
      for (const auto& [var, coeff] : b.coeffs) {
        sb.vars.push_back(var);
        sb.coeffs.push_back(s * coeff.dense());
      }
      nu_ += static_cast<double>(b.dim);
      matrix_dims_ += static_cast<double>(b.dim);
      blocks_.push_back(std::move(sb));
    }
    nu_ += 2.0 * static_cast<double>(n_);
  }

  Index n_vars() const { return n_; }
  double nu() const { return nu_; }
  std::size_t n_blocks() const { return blocks_.size(); }

  /// s·F_j(y) − tI.
  DenseMatrix slack(std::size_t j, const DenseVector& w) const {
    const auto& b = blocks_[j];
    DenseMatrix out = b.constant;
    for (std::size_t k = 0; k < b.vars.size(); ++k) out.noalias() += w[b.vars[k]] * b.coeffs[k];
    out.diagonal().array() -= w[n_];
    return out;
  }

  PrimalDualState initial_state(double t0) const {
    PrimalDualState st;
    st.w = DenseVector::Zero(n_ + 1);
    st.w[n_] = t0;
    const double xi = 1.0 / std::max(1.0, matrix_dims_);
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      st.x.push_back(xi * DenseMatrix::Identity(blocks_[j].dim, blocks_[j].dim));
      st.s.push_back(slack(j, st.w));
    }
    st.box_xp = st.box_xm = DenseVector::Constant(n_, xi);
    st.box_sp = st.box_sm = DenseVector::Constant(n_, radius_);
    return st;
  }

  double complementarity(const PrimalDualState& st) const {
    double sum = st.box_xp.dot(st.box_sp) + st.box_xm.dot(st.box_sm);
    for (std::size_t j = 0; j < blocks_.size(); ++j) sum += (st.x[j].array() * st.s[j].array()).sum();
    return sum;
  }

  /// Primal residual r_a = b_a − Σ⟨A_a, X⟩ with b = e_t.
  DenseVector primal_residual(const PrimalDualState& st) const {
    DenseVector r = DenseVector::Zero(n_ + 1);
    r[n_] = 1.0;
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      const auto& b = blocks_[j];
      for (std::size_t k = 0; k < b.vars.size(); ++k) r[b.vars[k]] += (b.coeffs[k].array() * st.x[j].array()).sum();
      r[n_] -= st.x[j].trace();
    }
    r.head(n_) -= st.box_xp - st.box_xm;
    return r;
  }

  /// Weak-duality bound on the largest attainable margin over the box.
  double upper_bound(const PrimalDualState& st, const DenseVector& rp) const {
    double obj = radius_ * (st.box_xp.sum() + st.box_xm.sum());
    for (std::size_t j = 0; j < blocks_.size(); ++j) obj += (blocks_[j].constant.array() * st.x[j].array()).sum();
    const double denom = 1.0 - rp[n_];
    if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
    return (obj + radius_ * rp.head(n_).lpNorm<1>()) / denom;
  }

  struct Factorization {
    std::vector<DenseMatrix> s_inv;
    std::vector<std::vector<DenseMatrix>> xas;  // X A_a S⁻¹ per block entry (t last)
    Eigen::SparseMatrix<double> schur;
  };

  /// Schur complement M_ab = Σ tr(A_a X A_b S⁻¹) of the HKM direction.
  bool assemble(const PrimalDualState& st, Factorization& f) const {
    f.s_inv.assign(blocks_.size(), {});
    f.xas.assign(blocks_.size(), {});
    std::vector<DenseMatrix> local(blocks_.size());
    std::vector<char> ok(blocks_.size(), 1);
    parallel_for(blocks_.size(), [&](std::size_t j) {
      const auto& b = blocks_[j];
      Eigen::LLT<DenseMatrix> llt(st.s[j]);
      if (llt.info() != Eigen::Success) {
        ok[j] = 0;
        return;
      }
      f.s_inv[j] = llt.solve(DenseMatrix::Identity(b.dim, b.dim));
      const auto k = b.vars.size();
      auto& xas = f.xas[j];
      xas.resize(k + 1);
      for (std::size_t a = 0; a < k; ++a) xas[a] = -(st.x[j] * b.coeffs[a] * f.s_inv[j]);
      xas[k] = st.x[j] * f.s_inv[j];
      DenseMatrix m(k + 1, k + 1);
      for (std::size_t a = 0; a <= k; ++a) {
        for (std::size_t c = 0; c <= a; ++c) {
          // ⟨A_a, X A_c S⁻¹⟩ with A_a = −G_a or I.
          const double v = a < k ? -(b.coeffs[a].array() * xas[c].transpose().array()).sum() : xas[c].trace();
          m(static_cast<Index>(a), static_cast<Index>(c)) = m(static_cast<Index>(c), static_cast<Index>(a)) = v;
        }
      }
      local[j] = std::move(m);
    });
    for (char c : ok)
      if (!c) return false;

    triplets_.clear();
    for (Index i = 0; i < n_; ++i)
      triplets_.emplace_back(i, i, st.box_xp[i] / st.box_sp[i] + st.box_xm[i] / st.box_sm[i]);
    triplets_.emplace_back(n_, n_, 0.0);
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      const auto& vars = blocks_[j].vars;
      const auto k = static_cast<Index>(vars.size());
      auto global = [&](Index a) { return a < k ? vars[static_cast<std::size_t>(a)] : n_; };
      for (Index a = 0; a <= k; ++a)
        for (Index c = 0; c <= a; ++c) {
          const Index ga = global(a), gc = global(c);
          triplets_.emplace_back(std::max(ga, gc), std::min(ga, gc), local[j](a, c));
        }
    }
    f.schur.resize(n_ + 1, n_ + 1);
    f.schur.setFromTriplets(triplets_.begin(), triplets_.end());
    return true;
  }

  /// Right-hand side b − ⟨A, σμS⁻¹⟩ + ⟨A, K⟩ with the second-order term K.
  DenseVector rhs(const PrimalDualState& st, const Factorization& f, double sigma_mu, const Direction* pred) const {
    DenseVector r = DenseVector::Zero(n_ + 1);
    r[n_] = 1.0;
    std::vector<DenseMatrix> target(blocks_.size());
    parallel_for(blocks_.size(), [&](std::size_t j) {
      DenseMatrix g = -sigma_mu * f.s_inv[j];
      if (pred) g.noalias() += pred->dx[j] * pred->ds[j] * f.s_inv[j];
      target[j] = std::move(g);
    });
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      const auto& b = blocks_[j];
      for (std::size_t k = 0; k < b.vars.size(); ++k) r[b.vars[k]] -= (b.coeffs[k].array() * target[j].array()).sum();
      r[n_] += target[j].trace();
    }
    for (Index i = 0; i < n_; ++i) {
      double gp = -sigma_mu / st.box_sp[i], gm = -sigma_mu / st.box_sm[i];
      if (pred) {
        gp += pred->dxp[i] * pred->dsp[i] / st.box_sp[i];
        gm += pred->dxm[i] * pred->dsm[i] / st.box_sm[i];
      }
      r[i] += gp - gm;
    }
    return r;
  }

  /// Recovers ΔS and ΔX from Δw.
  Direction expand(const PrimalDualState& st, const Factorization& f, const DenseVector& dw, double sigma_mu,
                   const Direction* pred) const {
    Direction d;
    d.dw = dw;
    d.dx.resize(blocks_.size());
    d.ds.resize(blocks_.size());
    parallel_for(blocks_.size(), [&](std::size_t j) {
      const auto& b = blocks_[j];
      DenseMatrix ds = DenseMatrix::Zero(b.dim, b.dim);
      for (std::size_t k = 0; k < b.vars.size(); ++k) ds.noalias() += dw[b.vars[k]] * b.coeffs[k];
      ds.diagonal().array() -= dw[n_];
      DenseMatrix z = st.x[j] * ds * f.s_inv[j];
      if (pred) z.noalias() += pred->dx[j] * pred->ds[j] * f.s_inv[j];
      DenseMatrix dx = sigma_mu * f.s_inv[j] - st.x[j] - 0.5 * (z + z.transpose());
      d.dx[j] = 0.5 * (dx + dx.transpose());
      d.ds[j] = std::move(ds);
    });
    const DenseVector dy = dw.head(n_);
    d.dsp = -dy;
    d.dsm = dy;
    d.dxp.resize(n_);
    d.dxm.resize(n_);
    for (Index i = 0; i < n_; ++i) {
      double kp = 0.0, km = 0.0;
      if (pred) {
        kp = pred->dxp[i] * pred->dsp[i];
        km = pred->dxm[i] * pred->dsm[i];
      }
      d.dxp[i] = (sigma_mu - st.box_xp[i] * d.dsp[i] - kp) / st.box_sp[i] - st.box_xp[i];
      d.dxm[i] = (sigma_mu - st.box_xm[i] * d.dsm[i] - km) / st.box_sm[i] - st.box_xm[i];
    }
    return d;
  }

  /// Largest steps keeping X and S positive definite (capped at 1/0.95).
  std::pair<double, double> max_steps(const PrimalDualState& st, const Direction& d) const {
    std::vector<double> ap(blocks_.size()), ad(blocks_.size());
    parallel_for(blocks_.size(), [&](std::size_t j) {
      ap[j] = max_step(st.x[j], d.dx[j]);
      ad[j] = max_step(st.s[j], d.ds[j]);
    });
    double alpha_p = 1.0 / 0.95, alpha_d = 1.0 / 0.95;
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      alpha_p = std::min(alpha_p, ap[j]);
      alpha_d = std::min(alpha_d, ad[j]);
    }
    auto scalar_step = [](const DenseVector& v, const DenseVector& dv, double& alpha) {
      for (Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    };
    scalar_step(st.box_xp, d.dxp, alpha_p);
    scalar_step(st.box_xm, d.dxm, alpha_p);
    scalar_step(st.box_sp, d.dsp, alpha_d);
    scalar_step(st.box_sm, d.dsm, alpha_d);
    return {alpha_p, alpha_d};
  }

  double complementarity_after(const PrimalDualState& st, const Direction& d, double ap, double ad) const {
    double sum = (st.box_xp + ap * d.dxp).dot(st.box_sp + ad * d.dsp) + (st.box_xm + ap * d.dxm).dot(st.box_sm + ad * d.dsm);
    for (std::size_t j = 0; j < blocks_.size(); ++j)
      sum += ((st.x[j] + ap * d.dx[j]).array() * (st.s[j] + ad * d.ds[j]).array()).sum();
    return sum;
  }

  /// Applies the step; the dual slack is recomputed from w and must factor.
  bool apply(PrimalDualState& st, const Direction& d, double ap, double ad) const {
    PrimalDualState next = st;
    next.w += ad * d.dw;
    std::vector<char> ok(blocks_.size(), 1);
    parallel_for(blocks_.size(), [&](std::size_t j) {
      next.x[j] += ap * d.dx[j];
      next.s[j] = slack(j, next.w);
      Eigen::LLT<DenseMatrix> llt(next.s[j]);
      if (llt.info() != Eigen::Success) ok[j] = 0;
    });
    for (char c : ok)
      if (!c) return false;
    next.box_xp += ap * d.dxp;
    next.box_xm += ap * d.dxm;
    next.box_sp = (radius_ - next.w.head(n_).array()).matrix();
    next.box_sm = (radius_ + next.w.head(n_).array()).matrix();
    if (!(next.box_sp.minCoeff() > 0.0) || !(next.box_sm.minCoeff() > 0.0)) return false;
    st = std::move(next);
    return true;
  }

 private:
  static double max_step(const DenseMatrix& m, const DenseMatrix& dm) {
    Eigen::LLT<DenseMatrix> llt(m);
    const auto l = llt.matrixL();
    DenseMatrix tmp = l.solve(dm);
    tmp = l.solve(tmp.transpose().eval()).transpose().eval();
    tmp = 0.5 * (tmp + tmp.transpose());
    const double lmin = Eigen::SelfAdjointEigenSolver<DenseMatrix>(tmp, Eigen::EigenvaluesOnly).eigenvalues()[0];
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
  }

  Index n_;
  double radius_;
  double nu_ = 0.0;
  double matrix_dims_ = 0.0;
  std::vector<ScaledBlock> blocks_;
  mutable std::vector<Eigen::Triplet<double>> triplets_;
};

/// Sparse LDLᵀ of the Schur complement with diagonal regularization on
/// breakdown and one step of iterative refinement.
class SchurSolver {
 public:
  bool factorize(const Eigen::SparseMatrix<double>& lower) {
    matrix_ = &lower;
    if (!analyzed_) {
      ldlt_.analyzePattern(lower);
      analyzed_ = true;
    }
    const double diag_max = std::max(1.0, lower.diagonal().cwiseAbs().maxCoeff());
    double reg = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::SparseMatrix<double> m = lower;
      if (reg > 0.0)
        for (Index i = 0; i < m.rows(); ++i) m.coeffRef(i, i) += reg;
      ldlt_.factorize(m);
      if (ldlt_.info() == Eigen::Success && (ldlt_.vectorD().array() > 0.0).all()) return true;
      reg = reg == 0.0 ? 1e-14 * diag_max : reg * 100.0;
    }
    return false;
  }

  DenseVector solve(const DenseVector& rhs) const {
    DenseVector x = ldlt_.solve(rhs);
    const DenseVector r = rhs - matrix_->selfadjointView<Eigen::Lower>() * x;
    x += ldlt_.solve(r);
    return x;
  }

 private:
  const Eigen::SparseMatrix<double>* matrix_ = nullptr;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analyzed_ = false;
};

std::string format_iteration(int it, double t, double bound, double mu, double rp, double ap, double ad) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "it=%d t=%.6e bound=%.6e mu=%.3e rp=%.3e step=(%.3f, %.3f)", it, t, bound, mu, rp, ap,
                ad);
  return buf;
}

/// Every strict block re-checked with the Jacobi eigen-solver on unscaled data.
bool independent_check(const lmi::LmiSystem& system, const DenseVector& y, double floor, std::string& detail) {
  for (const auto& block : system.blocks) {
    if (block.strictness != lmi::Strictness::Strict) continue;
    const double lmin = sym_eig(block.evaluate(y)).values[0];
    if (lmin < floor) {
      detail = "soundness check failed on block '" + block.name + "' (lambda_min = " + std::to_string(lmin) + ")";
      return false;
    }
  }
  return true;
}

}  // namespace

SolveResult solve_feasibility(const lmi::LmiSystem& system, const SolveOptions& opts) {
  opts.validate();
  system.validate();
  const auto start = std::chrono::steady_clock::now();
  SolveResult res;
  auto finish = [&](SolveStatus status) {
    res.status = status;
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
  };

  PrimalDual pd(system, opts, res.scales);
  const Index n = pd.n_vars();
  const DenseVector zero = DenseVector::Zero(n + 1);
  double lmin0 = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < pd.n_blocks(); ++j) lmin0 = std::min(lmin0, sym_eig(pd.slack(j, zero)).values[0]);
  if (!std::isfinite(lmin0)) lmin0 = 0.0;
  PrimalDualState st = pd.initial_state(lmin0 - 1.0);
  res.best_margin = st.w[n];
  res.upper_bound = std::numeric_limits<double>::infinity();

  auto accept_feasible = [&]() {
    const DenseVector y = st.w.head(n);
    std::string detail;
    if (!independent_check(system, y, opts.feas_floor - opts.margin_tol, detail)) {
      res.trace.push_back(detail);
      return finish(SolveStatus::NumericalFailure);
    }
    res.y = y;
    return finish(SolveStatus::Feasible);
  };

  SchurSolver schur;
  PrimalDual::Factorization fact;
  const double nu = pd.nu();
  const double step_frac = 0.95;
  int stalled = 0;

  for (int it = 0;; ++it) {
    const double t = st.w[n];
    res.best_margin = std::max(res.best_margin, t);
    const double mu = pd.complementarity(st) / nu;
    const DenseVector rp = pd.primal_residual(st);
    res.upper_bound = std::min(res.upper_bound, pd.upper_bound(st, rp));
    if (t >= opts.feas_floor) return accept_feasible();
    if (res.upper_bound < opts.feas_floor) return finish(SolveStatus::NotFeasibleWithinBounds);
    if (mu * nu < opts.margin_tol && rp.lpNorm<Eigen::Infinity>() < opts.margin_tol) {
      res.trace.push_back("converged with margin below the floor");
      return finish(SolveStatus::NotFeasibleWithinBounds);
    }
    if (it >= opts.max_newton_iters) {
      res.trace.push_back("iteration limit reached before a verdict");
      return finish(SolveStatus::NumericalFailure);
    }

    if (!pd.assemble(st, fact)) {
      res.trace.push_back("dual slack lost definiteness");
      return finish(SolveStatus::NumericalFailure);
    }
    if (!schur.factorize(fact.schur)) {
      res.trace.push_back("Schur complement singular beyond recovery");
      return finish(SolveStatus::NumericalFailure);
    }

    // Predictor.
    const DenseVector dw_aff = schur.solve(pd.rhs(st, fact, 0.0, nullptr));
    if (!dw_aff.allFinite()) {
      res.trace.push_back("non-finite search direction");
      return finish(SolveStatus::NumericalFailure);
    }
    const Direction aff = pd.expand(st, fact, dw_aff, 0.0, nullptr);
    auto [ap_aff, ad_aff] = pd.max_steps(st, aff);
    ap_aff = std::min(1.0, ap_aff);
    ad_aff = std::min(1.0, ad_aff);
    const double mu_aff = pd.complementarity_after(st, aff, ap_aff, ad_aff) / nu;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector.
    const double sigma_mu = sigma * mu;
    const DenseVector dw = schur.solve(pd.rhs(st, fact, sigma_mu, &aff));
    if (!dw.allFinite()) {
      res.trace.push_back("non-finite search direction");
      return finish(SolveStatus::NumericalFailure);
    }
    const Direction dir = pd.expand(st, fact, dw, sigma_mu, &aff);
    auto [ap, ad] = pd.max_steps(st, dir);
    ap = std::min(1.0, step_frac * ap);
    ad = std::min(1.0, step_frac * ad);
    bool applied = false;
    for (int back = 0; back < 30 && !applied; ++back) {
      applied = pd.apply(st, dir, ap, ad);
      if (!applied) {
        ap *= 0.8;
        ad *= 0.8;
      }
    }
    ++res.iterations;
    res.trace.push_back(format_iteration(it, st.w[n], res.upper_bound, mu, rp.lpNorm<Eigen::Infinity>(), ap, ad));
    if (!applied) {
      res.trace.push_back("step rejected: iterate left the cone");
      return finish(SolveStatus::NumericalFailure);
    }
    // Tiny steps in both spaces mean the direction is no longer reliable;
    // with the margin still below the floor this is a not-feasible verdict.
    stalled = std::max(ap, ad) < 1e-3 ? stalled + 1 : 0;
    if (stalled >= 5 && st.w[n] < opts.feas_floor) {
      res.trace.push_back("progress stalled with margin below the floor");
      return finish(SolveStatus::NotFeasibleWithinBounds);
    }
  }
}

SdpaParseError::SdpaParseError(std::size_t line, const std::string& what)
    : std::runtime_error("SDPA line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

void append_number(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

std::string export_sdpa(const lmi::LmiSystem& system, const std::optional<DenseVector>& objective) {
  const Index m = system.layout.total_len();
  if (objective && objective->size() != m) throw std::invalid_argument("export_sdpa: objective has the wrong length");
  std::string out;
  out += std::to_string(m) + "\n" + std::to_string(system.blocks.size()) + "\n";
  for (std::size_t j = 0; j < system.blocks.size(); ++j) {
    if (j) out += ' ';
    out += std::to_string(system.blocks[j].dim);
  }
  out += '\n';
  for (Index i = 0; i < m; ++i) {
    if (i) out += ' ';
    append_number(out, objective ? (*objective)[i] : 0.0);
  }
  out += '\n';

  auto emit = [&](Index matno, std::size_t blockno, const lmi::SymMat& s, double sign) {
    for (Index i = 0; i < s.dim(); ++i)
      for (Index j = i; j < s.dim(); ++j) {
        const double v = sign * s(i, j);
        if (v == 0.0) continue;
        out += std::to_string(matno) + ' ' + std::to_string(blockno) + ' ' + std::to_string(i + 1) + ' ' +
               std::to_string(j + 1) + ' ';
        append_number(out, v);
        out += '\n';
      }
  };
  for (std::size_t j = 0; j < system.blocks.size(); ++j) emit(0, j + 1, system.blocks[j].constant, -1.0);

  std::vector<std::vector<std::pair<std::size_t, const lmi::SymMat*>>> by_var(static_cast<std::size_t>(m));
  for (std::size_t j = 0; j < system.blocks.size(); ++j)
    for (const auto& [var, coeff] : system.blocks[j].coeffs) by_var[static_cast<std::size_t>(var)].emplace_back(j, &coeff);
  for (Index i = 0; i < m; ++i)
    for (const auto& [j, coeff] : by_var[static_cast<std::size_t>(i)]) emit(i + 1, j + 1, *coeff, 1.0);
  return out;
}

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string> tokens;
};

std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string raw(text.substr(pos, end - pos));
    ++number;
    pos = end + 1;
    if (!raw.empty() && (raw[0] == '"' || raw[0] == '*')) continue;
    for (char& ch : raw)
      if (ch == ',' || ch == '(' || ch == ')' || ch == '{' || ch == '}' || ch == '\r' || ch == '\t') ch = ' ';
    std::istringstream in(raw);
    Line line{number, {}};
    for (std::string tok; in >> tok;) line.tokens.push_back(tok);
    if (!line.tokens.empty()) lines.push_back(std::move(line));
    if (end == text.size()) break;
  }
  return lines;
}

long parse_int(const std::string& tok, std::size_t line) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(tok, &used);
  } catch (const std::exception&) {
    throw SdpaParseError(line, "expected an integer, got '" + tok + "'");
  }
  if (used != tok.size()) throw SdpaParseError(line, "expected an integer, got '" + tok + "'");
  return v;
}

double parse_real(const std::string& tok, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw SdpaParseError(line, "expected a number, got '" + tok + "'");
  }
  if (used != tok.size()) throw SdpaParseError(line, "expected a number, got '" + tok + "'");
  return v;
}

}  // namespace

lmi::LmiSystem import_sdpa(std::string_view text) {
  const auto lines = tokenize(text);
  std::size_t cursor = 0;
  auto next = [&](const char* what) -> const Line& {
    if (cursor >= lines.size())
      throw SdpaParseError(lines.empty() ? 1 : lines.back().number + 1, std::string("missing ") + what);
    return lines[cursor++];
  };

  const Line& l_m = next("mDIM");
  const long m = parse_int(l_m.tokens[0], l_m.number);
  if (m < 0) throw SdpaParseError(l_m.number, "mDIM must be nonnegative");
  const Line& l_nb = next("nBLOCK");
  const long nblock = parse_int(l_nb.tokens[0], l_nb.number);
  if (nblock < 1) throw SdpaParseError(l_nb.number, "nBLOCK must be positive");
  const Line& l_sizes = next("block sizes");
  if (static_cast<long>(l_sizes.tokens.size()) < nblock)
    throw SdpaParseError(l_sizes.number, "expected " + std::to_string(nblock) + " block sizes");
  std::vector<Index> dims;
  std::vector<bool> diagonal;
  for (long j = 0; j < nblock; ++j) {
    const long s = parse_int(l_sizes.tokens[static_cast<std::size_t>(j)], l_sizes.number);
    if (s == 0) throw SdpaParseError(l_sizes.number, "block size must be nonzero");
    dims.push_back(std::abs(s));
    diagonal.push_back(s < 0);
  }
  if (m > 0) {
    const Line& l_obj = next("objective");
    if (static_cast<long>(l_obj.tokens.size()) < m)
      throw SdpaParseError(l_obj.number, "expected " + std::to_string(m) + " objective coefficients");
    for (long i = 0; i < m; ++i) parse_real(l_obj.tokens[static_cast<std::size_t>(i)], l_obj.number);
  }

  lmi::LmiSystem sys;
  for (long i = 0; i < m; ++i) sys.layout.add_scalar("y" + std::to_string(i + 1));
  std::vector<lmi::SymMat> constants;
  std::vector<std::map<Index, lmi::SymMat>> coeffs(static_cast<std::size_t>(nblock));
  std::vector<std::map<std::pair<long, std::pair<long, long>>, bool>> seen(static_cast<std::size_t>(nblock));
  for (Index d : dims) constants.emplace_back(d);

  while (cursor < lines.size()) {
    const Line& l = lines[cursor++];
    if (l.tokens.size() < 5) throw SdpaParseError(l.number, "entry needs 'matno blockno i j value'");
    const long matno = parse_int(l.tokens[0], l.number);
    const long blockno = parse_int(l.tokens[1], l.number);
    long i = parse_int(l.tokens[2], l.number), j = parse_int(l.tokens[3], l.number);
    const double v = parse_real(l.tokens[4], l.number);
    if (matno < 0 || matno > m) throw SdpaParseError(l.number, "matrix number out of range");
    if (blockno < 1 || blockno > nblock) throw SdpaParseError(l.number, "block number out of range");
    const auto b = static_cast<std::size_t>(blockno - 1);
    if (i > j) std::swap(i, j);
    if (i < 1 || j > dims[b]) throw SdpaParseError(l.number, "entry index out of range");
    if (diagonal[b] && i != j) throw SdpaParseError(l.number, "off-diagonal entry in a diagonal block");
    if (!seen[b].emplace(std::make_pair(matno, std::make_pair(i, j)), true).second)
      throw SdpaParseError(l.number, "duplicate entry");
    if (matno == 0) {
      constants[b].at(i - 1, j - 1) = -v;
    } else {
      auto it = coeffs[b].try_emplace(matno - 1, dims[b]).first;
      it->second.at(i - 1, j - 1) = v;
    }
  }

  for (std::size_t b = 0; b < dims.size(); ++b) {
    lmi::LmiBlock block;
    block.name = "block_" + std::to_string(b + 1);
    block.dim = dims[b];
    block.constant = constants[b];
    block.strictness = lmi::Strictness::NonStrict;
    block.role = lmi::BlockRole::Main;
    for (auto& [var, s] : coeffs[b]) block.coeffs.emplace_back(var, std::move(s));
    sys.blocks.push_back(std::move(block));
  }
  return sys;
}

bool structurally_equal(const lmi::LmiSystem& a, const lmi::LmiSystem& b) {
  if (a.layout.total_len() != b.layout.total_len() || a.blocks.size() != b.blocks.size()) return false;
  for (std::size_t j = 0; j < a.blocks.size(); ++j) {
    const auto &x = a.blocks[j], &y = b.blocks[j];
    if (x.dim != y.dim || !(x.constant == y.constant) || x.coeffs.size() != y.coeffs.size()) return false;
    for (std::size_t k = 0; k < x.coeffs.size(); ++k)
      if (x.coeffs[k].first != y.coeffs[k].first || !(x.coeffs[k].second == y.coeffs[k].second)) return false;
  }
  return true;
}

}  // namespace pdelmi::sdp
