#include "pdelmi/oracle.hpp"

#include "pdelmi/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>

namespace pdelmi::oracle {

using Index = Eigen::Index;

DiscreteSystem discretize_1d(const ProblemSpec& problem, std::size_t grid_points) {
  if (grid_points < 3) throw std::invalid_argument("discretize_1d: need at least 3 interior points");
  if (!(problem.lower < problem.upper)) throw std::invalid_argument("discretize_1d: empty interval");
  const auto n = static_cast<std::size_t>(problem.a.rows());
  if (problem.a.cols() != problem.a.rows() || problem.b.size() != n)
    throw std::invalid_argument("discretize_1d: A and B must be square of the same size");

  DiscreteSystem sys;
  sys.grid_points = grid_points;
  sys.n = n;
  sys.h = (problem.upper - problem.lower) / static_cast<double>(grid_points + 1);
  const double inv_h2 = 1.0 / (sys.h * sys.h);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(grid_points * n * n * 4);
  const auto ni = static_cast<Index>(n);
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double xi = problem.lower + static_cast<double>(i + 1) * sys.h;
    sys.x.push_back(xi);
    const double coords[1] = {xi};
    DenseMatrix bx;
    try {
      bx = problem.b.eval({coords, &problem.params});
    } catch (const expr::EvalError& e) {
      throw expr::EvalError(std::string("discretize_1d: B is not finite at node ") + std::to_string(i + 1) + ": " +
                            e.what());
    }
    const Index row = static_cast<Index>(i) * ni;
    for (Index r = 0; r < ni; ++r)
      for (Index c = 0; c < ni; ++c) {
        const double arc = problem.a(r, c);
        const double diag = -2.0 * inv_h2 * arc + bx(r, c);
        if (diag != 0.0) trip.emplace_back(row + r, row + c, diag);
        if (arc == 0.0) continue;
        if (i > 0) trip.emplace_back(row + r, row - ni + c, inv_h2 * arc);
        if (i + 1 < grid_points) trip.emplace_back(row + r, row + ni + c, inv_h2 * arc);
      }
  }
  const auto dim = static_cast<Index>(grid_points * n);
  sys.op.resize(dim, dim);
  sys.op.setFromTriplets(trip.begin(), trip.end());
  sys.op.makeCompressed();
  return sys;
}

const char* to_string(OracleMethod m) { return m == OracleMethod::Eigen ? "eigen" : "simulate"; }

namespace {

/// Smooth start vector with a deterministic perturbation in every component.
DenseVector start_vector(const DiscreteSystem& sys) {
  DenseVector z(sys.dim());
  const auto n = static_cast<Index>(sys.n);
  std::uint64_t state = 0x9E3779B97F4A7C15ull;
  for (std::size_t i = 0; i < sys.grid_points; ++i) {
    const double s = std::sin(M_PI * static_cast<double>(i + 1) / static_cast<double>(sys.grid_points + 1));
    for (Index c = 0; c < n; ++c) {
      state = state * 6364136223846793005ull + 1442695040888963407ull;
      const double noise = static_cast<double>(state >> 11) / 9007199254740992.0 - 0.5;
      z[static_cast<Index>(i) * n + c] = s + 0.1 * noise;
    }
  }
  return z;
}

Eigen::SparseMatrix<double> implicit_euler_matrix(const DiscreteSystem& sys, double dt) {
  Eigen::SparseMatrix<double> id(sys.dim(), sys.dim());
  id.setIdentity();
  Eigen::SparseMatrix<double> m = id - dt * sys.op;
  m.makeCompressed();
  return m;
}

}  // namespace

OracleVerdict stability_by_eigs(const DiscreteSystem& sys, const SpectralOptions& opts) {
  if (sys.dim() == 0) throw std::invalid_argument("stability_by_eigs: empty system");
  if (sys.dim() <= opts.dense_limit) {
    Eigen::EigenSolver<DenseMatrix> es(DenseMatrix(sys.op), false);
    if (es.info() == Eigen::Success) {
      const double rightmost = es.eigenvalues().real().maxCoeff();
      return {rightmost < 0.0, rightmost, OracleMethod::Eigen};
    }
  }

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(implicit_euler_matrix(sys, opts.dt));
  if (lu.info() != Eigen::Success) throw LinearSolveFailure("stability_by_eigs: I - dt*L is singular");
  DenseVector z = start_vector(sys);
  z /= z.norm();
  // Growth is averaged over pairs of steps so a dominant complex pair does
  // not make the estimate oscillate.
  double rho = 0.0;
  for (int k = 0; k < opts.max_steps; ++k) {
    DenseVector w = lu.solve(z);
    w = lu.solve(w);
    const double growth = w.norm();
    if (!std::isfinite(growth) || growth == 0.0) throw LinearSolveFailure("stability_by_eigs: propagator broke down");
    const double next = std::sqrt(growth);
    z = w / growth;
    const bool settled = k > 10 && std::abs(next - rho) <= opts.rel_tol * next;
    rho = next;
    if (settled) break;
  }
  const double rate = (1.0 - 1.0 / rho) / opts.dt;
  return {rho < 1.0, rate, OracleMethod::Simulate};
}

Trajectory simulate(const DiscreteSystem& sys, const DenseVector& z0, double dt, double t_end,
                    const lmi::Certificate* cert) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw std::invalid_argument("simulate: dt and T must be positive");
  if (z0.size() != sys.dim()) throw std::invalid_argument("simulate: initial state has the wrong size");
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(implicit_euler_matrix(sys, dt));
  if (lu.info() != Eigen::Success) throw LinearSolveFailure("simulate: I - dt*L is singular");

  const auto n = static_cast<Index>(sys.n);
  std::vector<DenseMatrix> p_nodes;
  if (cert) {
    p_nodes.resize(sys.grid_points);
    parallel_for(sys.grid_points, [&](std::size_t i) { p_nodes[i] = cert->lyapunov_matrix(mesh::Point::Constant(1, sys.x[i])); });
  }
  auto record = [&](double t, const DenseVector& z) {
    TrajectoryPoint pt{t, std::sqrt(sys.h * z.squaredNorm()), std::nullopt};
    if (cert) {
      double v = 0.0;
      for (std::size_t i = 0; i < sys.grid_points; ++i) {
        const auto zi = z.segment(static_cast<Index>(i) * n, n);
        v += zi.dot(p_nodes[i] * zi);
      }
      pt.v = sys.h * v;
    }
    return pt;
  };

  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  Trajectory traj;
  traj.reserve(steps + 1);
  DenseVector z = z0;
  traj.push_back(record(0.0, z));
  for (std::size_t k = 1; k <= steps; ++k) {
    z = lu.solve(z);
    if (!z.allFinite()) throw LinearSolveFailure("simulate: implicit Euler step produced non-finite values");
    traj.push_back(record(static_cast<double>(k) * dt, z));
  }
  return traj;
}

double fitted_decay_rate(const Trajectory& traj) {
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0, count = 0.0;
  if (traj.empty()) return 0.0;
  const double half = traj.back().t / 2.0;
  for (const auto& p : traj) {
    if (p.t < half || !(p.norm > 0.0)) continue;
    const double y = std::log(p.norm);
    st += p.t;
    sy += y;
    stt += p.t * p.t;
    sty += p.t * y;
    count += 1.0;
  }
  const double denom = count * stt - st * st;
  if (count < 2.0 || denom == 0.0) return 0.0;
  return (count * sty - st * sy) / denom;
}

BisectionResult bisect_threshold(const Decider& decider, double lo, double hi, double tol, std::size_t workers) {
  if (!(tol > 0.0) || !(lo < hi)) throw BracketInvalid("bisection needs lo < hi and tol > 0");
  BisectionResult res;
  bool ends[2] = {false, false};
  const double bracket[2] = {lo, hi};
  parallel_for(2, [&](std::size_t k) { ends[k] = decider(bracket[k]); }, std::min<std::size_t>(workers, 2));
  res.probes.push_back({lo, ends[0]});
  res.probes.push_back({hi, ends[1]});
  if (!ends[0] || ends[1])
    throw BracketInvalid("decider must accept the lower end and reject the upper end of the bracket");

  // Depth of the speculative subtree evaluated per round.
  std::size_t depth = 1;
  while (((std::size_t{1} << (depth + 1)) - 1) <= std::max<std::size_t>(workers, 1)) ++depth;

  while (hi - lo > tol) {
    // Heap-ordered midpoints of the next `depth` levels.
    const std::size_t nodes = (std::size_t{1} << depth) - 1;
    std::vector<double> mids(nodes), los(nodes), his(nodes);
    std::vector<char> live(nodes, 0);
    los[0] = lo;
    his[0] = hi;
    live[0] = 1;
    for (std::size_t k = 0; k < nodes; ++k) {
      if (!live[k]) continue;
      mids[k] = los[k] + (his[k] - los[k]) / 2.0;
      const std::size_t left = 2 * k + 1, right = 2 * k + 2;
      if (right < nodes && his[k] - los[k] > tol) {
        // A rejected midpoint continues in [lo, mid], an accepted one in [mid, hi].
        los[left] = los[k], his[left] = mids[k], live[left] = mids[k] - los[k] > tol;
        los[right] = mids[k], his[right] = his[k], live[right] = his[k] - mids[k] > tol;
      }
    }
    std::vector<char> verdict(nodes, 0);
    std::vector<std::size_t> todo;
    for (std::size_t k = 0; k < nodes; ++k)
      if (live[k]) todo.push_back(k);
    parallel_for(todo.size(), [&](std::size_t i) { verdict[todo[i]] = decider(mids[todo[i]]); }, workers);

    std::size_t k = 0;
    while (k < nodes && live[k] && hi - lo > tol) {
      res.probes.push_back({mids[k], verdict[k] != 0});
      if (verdict[k]) {
        lo = mids[k];
        k = 2 * k + 2;
      } else {
        hi = mids[k];
        k = 2 * k + 1;
      }
    }
  }
  res.threshold = lo;
  return res;
}

DecayReport lyapunov_decay_check(const Trajectory& traj, double gamma, double slack) {
  DecayReport rep;
  if (traj.empty() || !traj.front().v) return rep;
  const double v0 = *traj.front().v;
  for (const auto& p : traj) {
    if (!p.v) continue;
    ++rep.checked;
    const double envelope = v0 * std::exp(-2.0 * gamma * p.t);
    if (envelope > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, *p.v / envelope);
    if (*p.v > envelope * (1.0 + slack) && *p.v > 0.0) {
      rep.passed = false;
      if (!rep.first_violation_t) rep.first_violation_t = p.t;
    }
  }
  return rep;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,norm,V\n";
  char buf[96];
  for (const auto& p : traj) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,", p.t, p.norm);
    out << buf;
    if (p.v) {
      std::snprintf(buf, sizeof buf, "%.10g", *p.v);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace pdelmi::oracle
