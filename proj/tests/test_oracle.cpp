#include "pdelmi/bounds.hpp"
#include "pdelmi/lmi.hpp"
#include "pdelmi/oracle.hpp"
#include "pdelmi/sdp.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace pdelmi;
using namespace pdelmi::oracle;

namespace {

ProblemSpec scalar_heat(double b) {
  return {DenseMatrix::Ones(1, 1), expr::MatrixExpr::parse({{"b"}}), {{"b", b}}, 0.0, 1.0};
}

ProblemSpec example(double b) {
  DenseMatrix a(2, 2);
  a << 1, 0.1, 0.5, 1;
  return {a, expr::MatrixExpr::parse({{"2*sin(2*pi*x1) + b", "2*tan(x1)"}, {"2*cos(pi*x1)", "2*(2*x1) + b"}}),
          {{"b", b}}, 0.0, 1.0};
}

DenseVector sin_state(const DiscreteSystem& sys) {
  DenseVector z(sys.dim());
  for (std::size_t i = 0; i < sys.grid_points; ++i) z[static_cast<Eigen::Index>(i)] = std::sin(M_PI * sys.x[i]);
  return z;
}

double threshold(std::size_t g, double lo, double hi, double tol, const SpectralOptions& opts = {}) {
  return bisect_threshold([&](double b) { return stability_by_eigs(discretize_1d(scalar_heat(b), g), opts).stable; },
                          lo, hi, tol)
      .threshold;
}

}  // namespace

TEST_CASE("discretize_1d: closed-form tridiagonal spectrum") {
  const auto sys = discretize_1d(scalar_heat(0.0), 3);
  CHECK(sys.dim() == 3);
  CHECK(sys.h == 0.25);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es{DenseMatrix(sys.op)};
  std::vector<double> expected;
  for (int k = 1; k <= 3; ++k) expected.push_back(-(2.0 - 2.0 * std::cos(k * M_PI / 4.0)) / (sys.h * sys.h));
  std::sort(expected.begin(), expected.end());
  for (int k = 0; k < 3; ++k) CHECK(es.eigenvalues()[k] == doctest::Approx(expected[static_cast<std::size_t>(k)]));
  CHECK(sys.x[0] == 0.25);

  CHECK(discretize_1d(example(1.0), 10).dim() == 20);
  CHECK_THROWS(discretize_1d(scalar_heat(0.0), 2));
  const ProblemSpec bad{DenseMatrix::Ones(1, 1), expr::MatrixExpr::parse({{"1/(x1 - 0.5)"}}), {}, 0.0, 1.0};
  CHECK_THROWS_AS(discretize_1d(bad, 3), expr::EvalError);
}

TEST_CASE("stability_by_eigs: scalar heat") {
  const auto v0 = stability_by_eigs(discretize_1d(scalar_heat(0.0), 200));
  CHECK(v0.stable);
  CHECK(v0.method == OracleMethod::Eigen);
  CHECK(v0.decay_estimate == doctest::Approx(-M_PI * M_PI).epsilon(1e-3));
  CHECK_FALSE(stability_by_eigs(discretize_1d(scalar_heat(11.0), 200)).stable);
}

TEST_CASE("stability_by_eigs: spectral shift by b on random small systems") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    DenseMatrix a = DenseMatrix::Identity(2, 2);
    a(0, 1) = 0.3 * u(rng);
    a(1, 0) = 0.3 * u(rng);
    const std::string c00 = std::to_string(u(rng)), c01 = std::to_string(u(rng));
    const double shift = 2.0 * u(rng);
    ProblemSpec base{a, expr::MatrixExpr::parse({{c00 + "*x1", c01}, {"1", "x1^2"}}), {{"s", 0.0}}, 0.0, 1.0};
    ProblemSpec shifted{a, expr::MatrixExpr::parse({{c00 + "*x1 + s", c01}, {"1", "x1^2 + s"}}), {{"s", shift}},
                        0.0, 1.0};
    const double r0 = stability_by_eigs(discretize_1d(base, 40)).decay_estimate;
    const double r1 = stability_by_eigs(discretize_1d(shifted, 40)).decay_estimate;
    CHECK(r1 - r0 == doctest::Approx(shift).epsilon(1e-8));
  }
}

TEST_CASE("stability_by_eigs: propagator estimate agrees with the dense spectrum") {
  SpectralOptions dense, power;
  power.dense_limit = 0;
  for (double b : {3.0, 12.0}) {
    const auto sys = discretize_1d(scalar_heat(b), 300);
    const auto vd = stability_by_eigs(sys, dense);
    const auto vp = stability_by_eigs(sys, power);
    CHECK(vd.method == OracleMethod::Eigen);
    CHECK(vp.method == OracleMethod::Simulate);
    CHECK(vd.stable == vp.stable);
    CHECK(vp.decay_estimate == doctest::Approx(vd.decay_estimate).epsilon(1e-4));
  }
  const auto sys = discretize_1d(example(7.0), 300);
  CHECK(stability_by_eigs(sys, dense).stable == stability_by_eigs(sys, power).stable);
}

TEST_CASE("grid convergence of the scalar threshold toward pi^2") {
  SpectralOptions sparse;
  sparse.dense_limit = 0;
  double previous = 0.0;
  for (std::size_t g : {50, 200, 1000}) {
    const double h = 1.0 / static_cast<double>(g + 1);
    const double exact = (2.0 - 2.0 * std::cos(M_PI * h)) / (h * h);
    const double t = threshold(g, 9.0, 10.5, 1e-4, sparse);
    CHECK(std::abs(t - exact) <= 1e-4);
    CHECK(t >= previous - 1e-4);
    previous = t;
  }
  CHECK(std::abs(previous - M_PI * M_PI) < 1e-2);
}

TEST_CASE("simulate: zero state, decay rate and contraction") {
  const auto sys = discretize_1d(scalar_heat(0.0), 200);
  const auto zero = simulate(sys, DenseVector::Zero(sys.dim()), 1e-3, 0.1);
  for (const auto& p : zero) CHECK(p.norm == 0.0);
  CHECK_THROWS(simulate(sys, DenseVector::Zero(sys.dim()), 0.0, 1.0));
  CHECK_THROWS(simulate(sys, DenseVector::Zero(3), 1e-3, 1.0));

  const auto traj = simulate(sys, sin_state(sys), 1e-4, 0.5);
  CHECK(traj.size() == 5001);
  CHECK(fitted_decay_rate(traj) == doctest::Approx(-M_PI * M_PI).epsilon(0.02));
  for (std::size_t k = 1; k < traj.size(); ++k) CHECK(traj[k].norm <= traj[k - 1].norm);

  DenseMatrix eye = DenseMatrix::Identity(2, 2);
  const ProblemSpec vec{eye, expr::MatrixExpr::zero(2), {}, 0.0, 1.0};
  const auto s2 = discretize_1d(vec, 50);
  DenseVector z0(s2.dim());
  for (Eigen::Index i = 0; i < z0.size(); ++i) z0[i] = std::cos(0.37 * static_cast<double>(i * i));
  const auto t2 = simulate(s2, z0, 1e-3, 0.2);
  for (std::size_t k = 1; k < t2.size(); ++k) CHECK(t2[k].norm <= t2[k - 1].norm * (1.0 + 1e-14));
}

TEST_CASE("bisect_threshold: step functions, bracket errors, parallel equals sequential") {
  const Decider step = [](double b) { return b <= 8.35; };
  auto r = bisect_threshold(step, 0.0, 10.0, 0.01);
  CHECK(std::abs(r.threshold - 8.35) <= 0.01);
  CHECK(step(r.threshold));
  CHECK_FALSE(step(r.threshold + 0.01));
  CHECK(r.probes.size() >= 2);
  CHECK_THROWS_AS(bisect_threshold([](double) { return true; }, 0.0, 1.0, 0.1), BracketInvalid);
  CHECK_THROWS_AS(bisect_threshold([](double) { return false; }, 0.0, 1.0, 0.1), BracketInvalid);
  CHECK_THROWS_AS(bisect_threshold(step, 1.0, 0.0, 0.1), BracketInvalid);

  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 30; ++trial) {
    const double t = u(rng);
    const Decider d = [t](double b) { return b < t; };
    const auto seq = bisect_threshold(d, 0.0, 10.0, 1e-3, 1);
    for (std::size_t w : {2, 3, 7, 16}) {
      const auto par = bisect_threshold(d, 0.0, 10.0, 1e-3, w);
      CHECK(par.threshold == seq.threshold);
      REQUIRE(par.probes.size() == seq.probes.size());
      for (std::size_t k = 0; k < seq.probes.size(); ++k) CHECK(par.probes[k].value == seq.probes[k].value);
    }
  }
}

TEST_CASE("bisect_threshold: scalar-heat LMI decider returns pi^2") {
  const Decider lmi_decider = [](double b) {
    bounds::CellBounds c;
    c.cell_id = 1;
    c.b_center = DenseMatrix::Constant(1, 1, b);
    return sdp::solve_feasibility(lmi::assemble_thm1(DenseMatrix::Ones(1, 1), {c}, 1.0 / M_PI, 1)).feasible();
  };
  const auto r = bisect_threshold(lmi_decider, 0.0, 20.0, 0.01);
  CHECK(std::abs(r.threshold - M_PI * M_PI) <= 0.02);
}

TEST_CASE("lyapunov_decay_check: pass, corrupted rate and zero trajectory") {
  Trajectory zero;
  for (int k = 0; k < 5; ++k) zero.push_back({0.1 * k, 0.0, 0.0});
  CHECK(lyapunov_decay_check(zero, 1.0, 0.05).passed);

  Trajectory t;
  for (int k = 0; k <= 100; ++k) {
    const double tt = 0.01 * k;
    t.push_back({tt, 1.0, std::exp(-2.0 * 1.0 * tt)});
  }
  auto rep = lyapunov_decay_check(t, 1.0, 0.05);
  CHECK(rep.passed);
  CHECK(rep.checked == 101);
  rep = lyapunov_decay_check(t, 10.0, 0.05);
  CHECK_FALSE(rep.passed);
  REQUIRE(rep.first_violation_t.has_value());
  CHECK(*rep.first_violation_t > 0.0);
}

TEST_CASE("simulate with a certificate: V decays at the certified rate") {
  const auto spec = example(6.0);
  const auto part = mesh::uniform_interval_partition(0.0, 1.0, 100, 21);
  const auto sys = lmi::assemble_thm1(spec.a, bounds::partition_bounds(spec.b, part, spec.params, 1.0), 1.0 / M_PI, 2);
  const auto res = sdp::solve_feasibility(sys);
  REQUIRE(res.feasible());
  const auto cert = lmi::make_certificate(sys, *res.y, lmi::Theorem::ConstantP);
  const auto ds = discretize_1d(spec, 200);
  DenseVector z0(ds.dim());
  for (std::size_t i = 0; i < ds.grid_points; ++i) {
    z0[static_cast<Eigen::Index>(2 * i)] = std::sin(M_PI * ds.x[i]);
    z0[static_cast<Eigen::Index>(2 * i + 1)] = std::sin(2 * M_PI * ds.x[i]);
  }
  const auto traj = simulate(ds, z0, 1e-3, 1.0, &cert);
  REQUIRE(traj.front().v.has_value());
  CHECK(lyapunov_decay_check(traj, cert.gamma, 0.05).passed);
  CHECK_FALSE(lyapunov_decay_check(traj, 10.0 * cert.gamma + 10.0, 0.05).passed);

  std::ostringstream csv;
  write_trajectory_csv(csv, traj);
  CHECK(csv.str().rfind("t,norm,V\n", 0) == 0);
}
