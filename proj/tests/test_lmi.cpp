#include "pdelmi/bounds.hpp"
#include "pdelmi/lmi.hpp"
#include "pdelmi/sdp.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pdelmi;
using namespace pdelmi::lmi;

namespace {

DenseMatrix random_matrix(std::mt19937_64& rng, Index n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = u(rng);
  return m;
}

bounds::CellBounds cell(std::size_t id, const DenseMatrix& bk, double rho) {
  bounds::CellBounds c;
  c.cell_id = id;
  c.b_center = bk;
  c.rho = rho;
  return c;
}

DenseMatrix example_a() {
  DenseMatrix a(2, 2);
  a << 1, 0.1, 0.5, 1;
  return a;
}

expr::MatrixExpr example_b() {
  return expr::MatrixExpr::parse({{"2*sin(2*pi*x1) + b", "2*tan(x1)"}, {"2*cos(pi*x1)", "2*(2*x1) + b"}});
}

LmiSystem example_thm1(double b, std::size_t n_cells = 100) {
  const expr::ParamMap p{{"b", b}};
  const auto part = mesh::uniform_interval_partition(0.0, 1.0, n_cells, 21);
  return assemble_thm1(example_a(), bounds::partition_bounds(example_b(), part, p, 1.0), 1.0 / M_PI, 2);
}

}  // namespace

TEST_CASE("VarLayout: contiguous offsets, unique names, value reassembly") {
  VarLayout l;
  l.add_sym("P", 3);
  l.add_diag("Lambda", 3);
  l.add_scalar("s");
  l.add_full("U", 2, 3);
  CHECK(l.total_len() == 6 + 3 + 1 + 6);
  CHECK(l[1].offset == 6);
  CHECK(l[2].offset == 9);
  CHECK(l[3].offset == 10);
  CHECK_THROWS(l.add_scalar("s"));
  DenseVector y = DenseVector::LinSpaced(l.total_len(), 1.0, static_cast<double>(l.total_len()));
  const DenseMatrix p = l[0].value(y);
  CHECK(p == p.transpose());
  CHECK(l[1].value(y).isDiagonal());
  CHECK(l[3].value(y).rows() == 2);
  CHECK(l[0].index(2, 0) == l[0].index(0, 2));
  CHECK_THROWS(l[1].index(0, 1));
}

TEST_CASE("assemble_thm1: hand-evaluated scalar point") {
  DenseMatrix one = DenseMatrix::Ones(1, 1);
  const auto sys = assemble_thm1(one, {cell(1, DenseMatrix::Zero(1, 1), 0.0)}, 1.0 / M_PI, 1);
  CHECK_NOTHROW(sys.validate());
  DenseVector y(3);
  y << 1.0, 1.0, 0.5;  // P, Λ, σ
  const auto vals = evaluate_system(sys, y);
  const DenseMatrix main = vals[0].value;
  CHECK(main(0, 0) == doctest::Approx(0.5));
  CHECK(main(1, 1) == doctest::Approx(0.5));
  CHECK(main(0, 1) == 0.0);
  CHECK(vals[1].value(0, 0) == doctest::Approx(2.0 - 1.0 / (M_PI * M_PI)));
  for (const auto& v : vals) CHECK(v.lambda_min > 0.0);
}

TEST_CASE("assemble_thm1: zero rho leaves the off-diagonal block empty") {
  std::mt19937_64 rng(41);
  const auto sys = assemble_thm1(example_a(), {cell(1, random_matrix(rng, 2), 0.0), cell(2, random_matrix(rng, 2), 0.0)},
                                 0.3, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseVector y = DenseVector::Random(sys.layout.total_len());
    for (std::size_t k = 0; k < 2; ++k) CHECK(sys.blocks[k].evaluate(y).block(0, 2, 2, 2).isZero(0.0));
  }
}

TEST_CASE("assemble_thm1: block roles and counts") {
  const auto sys = example_thm1(6.0);
  std::size_t main = 0, poincare = 0, pos = 0;
  for (const auto& b : sys.blocks) {
    if (b.role == BlockRole::Main) {
      ++main;
      CHECK(b.dim == 4);
      CHECK(b.strictness == Strictness::Strict);
    } else if (b.role == BlockRole::Poincare) {
      ++poincare;
      CHECK(b.strictness == Strictness::NonStrict);
    } else {
      ++pos;
    }
  }
  CHECK(main == 100);
  CHECK(poincare == 1);
  CHECK(pos == 102);
  CHECK(sys.layout.total_len() == 3 + 2 + 100);
}

TEST_CASE("assemble_thm1: diffusion block uses AᵀP + PA") {
  DenseMatrix a(2, 2);
  a << 1, 2, 0, 1;
  const auto sys = assemble_thm1(a, {cell(1, DenseMatrix::Zero(2, 2), 0.0)}, 0.5, 2);
  DenseVector y = DenseVector::Zero(sys.layout.total_len());
  DenseMatrix p(2, 2);
  p << 2, 0.3, 0.3, 1;
  const auto& pv = *sys.layout.find("P");
  y[pv.index(0, 0)] = 2;
  y[pv.index(0, 1)] = 0.3;
  y[pv.index(1, 1)] = 1;
  const auto& lv = *sys.layout.find("Lambda");
  y[lv.index(0, 0)] = 4;
  y[lv.index(1, 1)] = 8;
  CHECK(pv.value(y) == p);
  const DenseMatrix expected = a.transpose() * p + p * a - 0.25 * DenseVector((DenseVector(2) << 4, 8).finished()).asDiagonal().toDenseMatrix();
  CHECK((sys.blocks[1].evaluate(y) - expected).norm() < 1e-14);
}

TEST_CASE("assemble_thm2: block structure") {
  const expr::ParamMap p{{"b", 6.0}};
  const auto msh = mesh::interval_mesh(0.0, 1.0, 100);
  const auto vv = bounds::vertex_values(example_b(), msh, p);
  const auto cb = bounds::mesh_bounds(example_b(), msh, vv, p, 21, 1.0);
  std::vector<double> rhos;
  for (const auto& c : cb) rhos.push_back(c.rho);
  const auto sys = assemble_thm2(example_a(), msh, vv, rhos, 1.0 / M_PI, 2);
  CHECK_NOTHROW(sys.validate());
  std::size_t main = 0;
  for (const auto& b : sys.blocks)
    if (b.role == BlockRole::Main) {
      ++main;
      CHECK(b.dim == 8);
    }
  CHECK(main == 200);
  CHECK_THROWS(assemble_thm2(example_a(), msh, std::vector<DenseMatrix>(vv.begin(), vv.end() - 1), rhos, 1.0, 2));
}

TEST_CASE("assemble_thm2: substitution gives Ξ + Ξᵀ = 2I and a vanishing gradient coupling for constant P") {
  const auto msh = mesh::interval_mesh(0.0, 1.0, 5);
  const std::vector<DenseMatrix> vv(msh.vertices.size(), DenseMatrix::Identity(2, 2));
  const std::vector<double> rhos(msh.simplices.size(), 0.0);
  const auto sys = assemble_thm2(DenseMatrix::Identity(2, 2), msh, vv, rhos, 1.0 / M_PI, 2);
  DenseVector y = DenseVector::Zero(sys.layout.total_len());
  for (const auto& v : sys.layout.vars()) {
    if (v.kind == VarKind::SymMatrix || v.kind == VarKind::DiagMatrix || v.kind == VarKind::FullMatrix)
      for (Index i = 0; i < v.rows; ++i) y[v.index(i, i)] = 1.0;
    if (v.kind == VarKind::Scalar) y[v.offset] = 1e-3;
  }
  for (const auto& b : sys.blocks) {
    if (b.role != BlockRole::Main) continue;
    const DenseMatrix f = b.evaluate(y);
    CHECK((f.block(2, 2, 2, 2) - 2.0 * DenseMatrix::Identity(2, 2)).norm() == 0.0);
    CHECK(f.block(0, 6, 2, 2).isZero(0.0));
  }
}

TEST_CASE("lemma1_expand: witness, congruence and both implication directions") {
  std::mt19937_64 rng(42);
  const Index n = 4;
  const DenseMatrix eye = DenseMatrix::Identity(n, n);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const DenseMatrix b = random_matrix(rng, n), p = random_matrix(rng, n), r = random_matrix(rng, n);
    // Compressed form PSD ⇒ expanded form PSD with Υ = P, Ξ = 0.
    const DenseMatrix m = b.transpose() * p + p.transpose() * b + r * r.transpose();
    const DenseMatrix e = lemma1_expand(m, b, p, p, DenseMatrix::Zero(n, n)).dense();
    if (lambda_min(e) < -1e-9) ++failures;
    if (e.block(0, n, n, n).norm() > 1e-12 || e.block(n, n, n, n).norm() != 0.0) ++failures;

    // Expanded form PSD ⇒ compressed form PSD: build a PSD W and read off M, P from it.
    DenseMatrix rw(2 * n, 2 * n);
    for (Index i = 0; i < 2 * n; ++i)
      for (Index j = 0; j < 2 * n; ++j) rw(i, j) = std::uniform_real_distribution<double>(-1, 1)(rng);
    const DenseMatrix w = rw * rw.transpose();
    const DenseMatrix ups = random_matrix(rng, n), skew = random_matrix(rng, n);
    const DenseMatrix xi = w.block(n, n, n, n) / 2.0 + (skew - skew.transpose()) / 2.0;
    const DenseMatrix p2 = (ups.transpose() - b.transpose() * xi - w.block(0, n, n, n)).transpose();
    const DenseMatrix m2 = w.block(0, 0, n, n) + b.transpose() * ups + ups.transpose() * b;
    const DenseMatrix e2 = lemma1_expand(m2, b, p2, ups, xi).dense();
    if ((e2 - w).norm() > 1e-10 * w.norm()) ++failures;
    const DenseMatrix compressed = m2 - b.transpose() * p2 - p2.transpose() * b;
    if (lambda_min(DenseMatrix((compressed + compressed.transpose()) / 2.0)) < -1e-9) ++failures;

    // Congruence with [I; B].
    DenseMatrix t(2 * n, n);
    t << eye, b;
    const DenseMatrix cong = t.transpose() * e2 * t;
    if ((cong - compressed).norm() > 1e-9 * std::max(1.0, compressed.norm())) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("evaluate_system: zero point and single-variable increments") {
  const auto sys = example_thm1(1.0, 4);
  const DenseVector zero = DenseVector::Zero(sys.layout.total_len());
  const auto vals = evaluate_system(sys, zero);
  for (std::size_t j = 0; j < sys.blocks.size(); ++j) CHECK(vals[j].value == sys.blocks[j].constant.dense());
  DenseVector e = zero;
  e[0] = 1.0;
  for (const auto& b : sys.blocks)
    for (const auto& [idx, f] : b.coeffs)
      if (idx == 0) CHECK((b.evaluate(e) - b.evaluate(zero) - f.dense()).norm() == 0.0);
  CHECK_THROWS(evaluate_system(sys, DenseVector::Zero(3)));
}

TEST_CASE("decay_constants: formula substitution") {
  auto d = decay_constants(1.0, 2.0, 2.0);
  CHECK(d.gamma == doctest::Approx(0.25));
  CHECK(d.overshoot_m == doctest::Approx(1.0));
  d = decay_constants(2.0, 1.0, 4.0);
  CHECK(d.gamma == doctest::Approx(0.25));
  CHECK(d.overshoot_m == doctest::Approx(2.0));
}

TEST_CASE("make_certificate and pointwise_check at a feasible point") {
  const auto sys = example_thm1(6.0);
  const auto res = sdp::solve_feasibility(sys);
  REQUIRE(res.feasible());
  const auto cert = make_certificate(sys, *res.y, Theorem::ConstantP);
  CHECK(cert.margin_eps > 0.0);
  CHECK(cert.gamma > 0.0);
  CHECK(cert.overshoot_m >= 1.0);
  const auto vals = evaluate_system(sys, *res.y);
  for (std::size_t j = 0; j < sys.blocks.size(); ++j)
    if (sys.blocks[j].strictness == Strictness::Strict) CHECK(vals[j].lambda_min >= 1e-6 - 1e-7);

  const expr::ParamMap p{{"b", 6.0}};
  const auto samples = mesh::sample_domain(mesh::Interval{0.0, 1.0}, 1000, 7);
  const auto rep = pointwise_check(cert, example_b(), samples, 1.0 / M_PI, example_a(), p, 1e-7);
  CHECK(rep.checked == 1000);
  CHECK(rep.violations == 0);
  CHECK(rep.diffusion_lambda_min >= -1e-9);

  auto bad = cert;
  bad.p = -cert.p;
  CHECK(pointwise_check(bad, example_b(), samples, 1.0 / M_PI, example_a(), p, 1e-7).violations > 0);

  DenseVector broken = *res.y;
  broken.setZero();
  CHECK_THROWS_AS(make_certificate(sys, broken, Theorem::ConstantP), InfeasiblePoint);
}

TEST_CASE("pointwise_check: B equal to every B_k keeps the margin at ε") {
  DenseMatrix bconst(2, 2);
  bconst << -1, 0.5, 0.2, -2;
  const auto bexpr = expr::MatrixExpr::parse({{"-1", "0.5"}, {"0.2", "-2"}});
  std::vector<bounds::CellBounds> cells;
  for (std::size_t k = 1; k <= 4; ++k) cells.push_back(cell(k, bconst, 0.0));
  const auto sys = assemble_thm1(example_a(), cells, 1.0 / M_PI, 2);
  const auto res = sdp::solve_feasibility(sys);
  REQUIRE(res.feasible());
  const auto cert = make_certificate(sys, *res.y, Theorem::ConstantP);
  const auto samples = mesh::sample_domain(mesh::Interval{0.0, 1.0}, 200, 3);
  const auto rep = pointwise_check(cert, bexpr, samples, 1.0 / M_PI, example_a(), {}, 1e-9);
  CHECK(rep.violations == 0);
  CHECK(rep.worst_violation <= 1e-9);
}

TEST_CASE("Theorem 5 certificate interpolates vertex matrices") {
  const expr::ParamMap p{{"b", 6.0}};
  const auto msh = mesh::interval_mesh(0.0, 1.0, 100);
  const auto vv = bounds::vertex_values(example_b(), msh, p);
  const auto cb = bounds::mesh_bounds(example_b(), msh, vv, p, 21, 1.0);
  std::vector<double> rhos;
  for (const auto& c : cb) rhos.push_back(c.rho);
  const auto sys = assemble_thm2(example_a(), msh, vv, rhos, 1.0 / M_PI, 2);
  const auto res = sdp::solve_feasibility(sys);
  REQUIRE(res.feasible());
  const auto cert = make_certificate(sys, *res.y, Theorem::PiecewiseLinearP);
  CHECK(cert.p_vertices.size() == 101);
  mesh::Point mid(1);
  mid << 0.005;
  CHECK((cert.lyapunov_matrix(mid) - 0.5 * (cert.p_vertices[0] + cert.p_vertices[1])).norm() < 1e-12);
  const auto samples = mesh::sample_domain(mesh::Interval{0.0, 1.0}, 1000, 8);
  const auto rep = pointwise_check(cert, example_b(), samples, 1.0 / M_PI, example_a(), p, 1e-7);
  CHECK(rep.violations == 0);
}
