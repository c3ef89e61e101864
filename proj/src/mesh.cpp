#include "pdelmi/mesh.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <type_traits>

namespace pdelmi::mesh {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Point point1(double x) {
  Point p(1);
  p[0] = x;
  return p;
}

void ensure_center_sampled(Cell& cell) {
  for (const auto& p : cell.sample_points)
    if (p == cell.center) return;
  cell.sample_points.push_back(cell.center);
}

/// Points of {0, 1/(s-1), ..., 1} in `dims` dimensions, first axis slowest.
std::vector<DenseVector> unit_grid(std::size_t dims, std::size_t s) {
  std::vector<DenseVector> out;
  std::vector<std::size_t> idx(dims, 0);
  for (;;) {
    DenseVector u(static_cast<Eigen::Index>(dims));
    for (std::size_t d = 0; d < dims; ++d)
      u[static_cast<Eigen::Index>(d)] = s == 1 ? 0.5 : static_cast<double>(idx[d]) / static_cast<double>(s - 1);
    out.push_back(std::move(u));
    std::size_t d = dims;
    while (d > 0) {
      if (++idx[d - 1] < s) break;
      idx[d - 1] = 0;
      --d;
    }
    if (d == 0) break;
  }
  return out;
}

std::string describe(const Point& p) {
  std::ostringstream out;
  out << '(';
  for (Eigen::Index i = 0; i < p.size(); ++i) out << (i ? ", " : "") << p[i];
  out << ')';
  return out.str();
}

}  // namespace

std::size_t spatial_dim(const DomainDescriptor& d) {
  return std::visit(overloaded{
                        [](const Interval&) -> std::size_t { return 1; },
                        [](const Box& b) -> std::size_t { return static_cast<std::size_t>(b.lower.size()); },
                        [](const UnitBall3&) -> std::size_t { return 3; },
                        [](const Slab& s) -> std::size_t { return s.m; },
                        [](const OtherDomain& o) -> std::size_t { return o.m; },
                    },
                    d);
}

double diameter(const DomainDescriptor& d) {
  return std::visit(overloaded{
                        [](const Interval& i) { return i.b - i.a; },
                        [](const Box& b) { return (b.upper - b.lower).norm(); },
                        [](const UnitBall3&) { return 2.0; },
                        [](const Slab& s) { return s.width; },
                        [](const OtherDomain&) { return 1.0; },
                    },
                    d);
}

Partition uniform_interval_partition(double a, double b, std::size_t n_cells, std::size_t samples_per_cell) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) throw InvalidGeometry("interval partition: need a < b");
  if (n_cells < 1) throw InvalidGeometry("interval partition: need at least one cell");
  if (samples_per_cell < 2) throw InvalidGeometry("interval partition: need at least two samples per cell");

  const double width = b - a;
  const double n = static_cast<double>(n_cells);
  const double steps = static_cast<double>(samples_per_cell - 1);
  Partition part{1, {}, Interval{a, b}};
  part.cells.reserve(n_cells);
  for (std::size_t k = 0; k < n_cells; ++k) {
    Cell cell;
    cell.id = k + 1;
    cell.center = point1(a + width * (2.0 * static_cast<double>(k) + 1.0) / (2.0 * n));
    cell.volume_hint = width / n;
    for (std::size_t j = 0; j < samples_per_cell; ++j) {
      const double offset = static_cast<double>(k) * steps + static_cast<double>(j);
      cell.sample_points.push_back(point1(a + width * offset / (n * steps)));
    }
    ensure_center_sampled(cell);
    part.cells.push_back(std::move(cell));
  }
  return part;
}

Partition uniform_box_partition(const Point& lower, const Point& upper, std::size_t splits_per_axis,
                                std::size_t samples_per_axis) {
  const auto m = static_cast<std::size_t>(lower.size());
  if (m == 0 || upper.size() != lower.size()) throw InvalidGeometry("box partition: bounds of unequal dimension");
  if (!((upper - lower).array() > 0.0).all()) throw InvalidGeometry("box partition: need lower < upper");
  if (splits_per_axis < 1 || samples_per_axis < 2) throw InvalidGeometry("box partition: bad grid resolution");

  const DenseVector h = (upper - lower) / static_cast<double>(splits_per_axis);
  const auto local = unit_grid(m, samples_per_axis);
  Partition part{m, {}, Box{lower, upper}};
  std::vector<std::size_t> idx(m, 0);
  std::size_t id = 1;
  for (;;) {
    DenseVector corner(static_cast<Eigen::Index>(m));
    for (std::size_t d = 0; d < m; ++d)
      corner[static_cast<Eigen::Index>(d)] = lower[static_cast<Eigen::Index>(d)] +
                                             static_cast<double>(idx[d]) * h[static_cast<Eigen::Index>(d)];
    Cell cell;
    cell.id = id++;
    cell.center = corner + 0.5 * h;
    cell.volume_hint = h.prod();
    for (const auto& u : local) cell.sample_points.push_back(corner + u.cwiseProduct(h));
    ensure_center_sampled(cell);
    part.cells.push_back(std::move(cell));

    std::size_t d = m;
    while (d > 0) {
      if (++idx[d - 1] < splits_per_axis) break;
      idx[d - 1] = 0;
      --d;
    }
    if (d == 0) break;
  }
  return part;
}

Point spherical_to_cartesian(double r, double theta, double phi) {
  Point p(3);
  p << r * std::sin(theta) * std::cos(phi), r * std::sin(theta) * std::sin(phi), r * std::cos(theta);
  return p;
}

Partition spherical_ball_partition(std::size_t n_splits, std::size_t samples_per_axis) {
  if (n_splits < 1) throw InvalidGeometry("ball partition: need at least one split");
  if (samples_per_axis < 2) throw InvalidGeometry("ball partition: need at least two samples per axis");

  const double n = static_cast<double>(n_splits);
  const double dr = 1.0 / n, dtheta = M_PI / n, dphi = 2.0 * M_PI / n;
  const auto local = unit_grid(3, samples_per_axis);

  Partition part{3, {}, UnitBall3{}};
  part.cells.reserve(n_splits * n_splits * n_splits);
  std::size_t id = 1;
  for (std::size_t i = 0; i < n_splits; ++i) {
    const double r0 = static_cast<double>(i) * dr;
    for (std::size_t j = 0; j < n_splits; ++j) {
      const double t0 = static_cast<double>(j) * dtheta;
      for (std::size_t k = 0; k < n_splits; ++k) {
        const double p0 = static_cast<double>(k) * dphi;
        Cell cell;
        cell.id = id++;
        cell.center = spherical_to_cartesian(r0 + 0.5 * dr, t0 + 0.5 * dtheta, p0 + 0.5 * dphi);
        const double r1 = r0 + dr;
        cell.volume_hint = (r1 * r1 * r1 - r0 * r0 * r0) / 3.0 * (std::cos(t0) - std::cos(t0 + dtheta)) * dphi;
        for (const auto& u : local)
          cell.sample_points.push_back(spherical_to_cartesian(r0 + u[0] * dr, t0 + u[1] * dtheta, p0 + u[2] * dphi));
        ensure_center_sampled(cell);
        part.cells.push_back(std::move(cell));
      }
    }
  }
  return part;
}

std::vector<Point> SimplicialMesh::simplex_vertices(std::size_t k) const {
  std::vector<Point> out;
  out.reserve(simplices[k].vertex_ids.size());
  for (std::size_t id : simplices[k].vertex_ids) out.push_back(vertices[id]);
  return out;
}

SimplicialMesh interval_mesh(double a, double b, std::size_t n_cells) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) throw InvalidGeometry("interval mesh: need a < b");
  if (n_cells < 1) throw InvalidGeometry("interval mesh: need at least one cell");

  const double n = static_cast<double>(n_cells);
  const double slope = n / (b - a);
  SimplicialMesh mesh;
  mesh.m = 1;
  mesh.domain = Interval{a, b};
  mesh.structured = true;
  for (std::size_t k = 0; k <= n_cells; ++k)
    mesh.vertices.push_back(point1(k == n_cells ? b : a + (b - a) * static_cast<double>(k) / n));
  for (std::size_t k = 0; k < n_cells; ++k) mesh.simplices.push_back({{k, k + 1}, {point1(-slope), point1(slope)}});
  return mesh;
}

SimplicialMesh box_mesh(const Point& lower, const Point& upper, std::size_t splits_per_axis) {
  const auto m = static_cast<std::size_t>(lower.size());
  if (m < 2 || m > 3 || upper.size() != lower.size())
    throw InvalidGeometry("box mesh: Kuhn triangulation is provided for m = 2 and m = 3");
  if (!((upper - lower).array() > 0.0).all()) throw InvalidGeometry("box mesh: need lower < upper");
  if (splits_per_axis < 1) throw InvalidGeometry("box mesh: need at least one split");

  const std::size_t s = splits_per_axis;
  const std::size_t per_axis = s + 1;
  const DenseVector h = (upper - lower) / static_cast<double>(s);
  const DenseVector inv_h = h.cwiseInverse();

  SimplicialMesh mesh;
  mesh.m = m;
  mesh.domain = Box{lower, upper};
  mesh.structured = true;

  // Grid vertices, first axis slowest.
  std::vector<std::size_t> idx(m, 0);
  auto flat = [&](const std::vector<std::size_t>& g) {
    std::size_t f = 0;
    for (std::size_t d = 0; d < m; ++d) f = f * per_axis + g[d];
    return f;
  };
  for (;;) {
    Point p(static_cast<Eigen::Index>(m));
    for (std::size_t d = 0; d < m; ++d) {
      const auto e = static_cast<Eigen::Index>(d);
      p[e] = idx[d] == s ? upper[e] : lower[e] + (upper[e] - lower[e]) * static_cast<double>(idx[d]) / static_cast<double>(s);
    }
    mesh.vertices.push_back(std::move(p));
    std::size_t d = m;
    while (d > 0) {
      if (++idx[d - 1] < per_axis) break;
      idx[d - 1] = 0;
      --d;
    }
    if (d == 0) break;
  }

  std::vector<std::size_t> perm(m);
  std::fill(idx.begin(), idx.end(), 0);
  for (;;) {
    std::iota(perm.begin(), perm.end(), 0);
    do {
      Simplex simplex;
      std::vector<std::size_t> g = idx;
      simplex.vertex_ids.push_back(flat(g));
      for (std::size_t l = 0; l < m; ++l) {
        ++g[perm[l]];
        simplex.vertex_ids.push_back(flat(g));
      }
      // α_ℓ = s_ℓ − s_{ℓ+1} with s_i = (x − ξ_0)_{π_i} / h_{π_i}.
      simplex.gradients.assign(m + 1, Point::Zero(static_cast<Eigen::Index>(m)));
      for (std::size_t l = 1; l <= m; ++l) {
        const auto axis = static_cast<Eigen::Index>(perm[l - 1]);
        simplex.gradients[l][axis] = inv_h[axis];
        if (l < m) {
          const auto next = static_cast<Eigen::Index>(perm[l]);
          simplex.gradients[l][next] = -inv_h[next];
        }
      }
      Point sum = Point::Zero(static_cast<Eigen::Index>(m));
      for (std::size_t l = 1; l <= m; ++l) sum += simplex.gradients[l];
      simplex.gradients[0] = -sum;
      mesh.simplices.push_back(std::move(simplex));
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::size_t d = m;
    while (d > 0) {
      if (++idx[d - 1] < s) break;
      idx[d - 1] = 0;
      --d;
    }
    if (d == 0) break;
  }
  return mesh;
}

SimplicialMesh mesh_from_simplices(std::size_t m, const std::vector<std::vector<Point>>& simplices,
                                   const DomainDescriptor& domain, double dedup_tol) {
  SimplicialMesh mesh;
  mesh.m = m;
  mesh.domain = domain;
  const double tol = dedup_tol * diameter(domain);
  for (const auto& verts : simplices) {
    if (verts.size() != m + 1) throw InvalidGeometry("mesh_from_simplices: simplex needs m + 1 vertices");
    Simplex simplex;
    for (const auto& v : verts) {
      if (static_cast<std::size_t>(v.size()) != m) throw InvalidGeometry("mesh_from_simplices: vertex dimension");
      std::size_t id = mesh.vertices.size();
      for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        if ((mesh.vertices[i] - v).norm() <= tol) {
          id = i;
          break;
        }
      if (id == mesh.vertices.size()) mesh.vertices.push_back(v);
      simplex.vertex_ids.push_back(id);
    }
    simplex.gradients = simplex_gradients(verts);
    mesh.simplices.push_back(std::move(simplex));
  }
  return mesh;
}

namespace {

DenseMatrix edge_matrix(std::span<const Point> vertices) {
  const auto m = static_cast<Eigen::Index>(vertices.size()) - 1;
  if (m < 1) throw InvalidGeometry("simplex needs at least two vertices");
  DenseMatrix d(m, m);
  for (Eigen::Index l = 1; l <= m; ++l) {
    if (vertices[static_cast<std::size_t>(l)].size() != m) throw InvalidGeometry("simplex vertex dimension mismatch");
    d.col(l - 1) = vertices[static_cast<std::size_t>(l)] - vertices[0];
  }
  return d;
}

void require_nondegenerate(const DenseMatrix& d) {
  const Eigen::JacobiSVD<DenseMatrix> svd(d);
  const auto& sv = svd.singularValues();
  const double smax = sv[0], smin = sv[sv.size() - 1];
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(smin > 1e-12 * smax)) {
    std::ostringstream msg;
    msg << "degenerate simplex (edge-matrix condition number " << cond << ")";
    throw DegenerateSimplex(msg.str(), cond);
  }
}

}  // namespace

std::vector<Point> simplex_gradients(std::span<const Point> vertices) {
  const DenseMatrix d = edge_matrix(vertices);
  require_nondegenerate(d);
  const auto m = d.rows();
  const DenseMatrix dinv_t = d.transpose().fullPivLu().inverse();
  std::vector<Point> grads(static_cast<std::size_t>(m) + 1);
  Point sum = Point::Zero(m);
  for (Eigen::Index l = 1; l <= m; ++l) {
    grads[static_cast<std::size_t>(l)] = dinv_t.col(l - 1);
    sum += grads[static_cast<std::size_t>(l)];
  }
  grads[0] = -sum;
  return grads;
}

DenseVector barycentric(std::span<const Point> vertices, const Point& x) {
  const DenseMatrix d = edge_matrix(vertices);
  require_nondegenerate(d);
  const DenseVector tail = d.fullPivLu().solve(x - vertices[0]);
  DenseVector alpha(d.rows() + 1);
  alpha[0] = 1.0 - tail.sum();
  alpha.tail(d.rows()) = tail;
  return alpha;
}

std::vector<Point> simplex_sample_points(std::span<const Point> vertices, std::size_t per_edge) {
  if (per_edge < 2) throw InvalidGeometry("simplex sampling needs at least two points per edge");
  const std::size_t m = vertices.size() - 1;
  const std::size_t steps = per_edge - 1;
  std::vector<Point> out;
  // Enumerate compositions of `steps` into m + 1 nonnegative parts.
  std::vector<std::size_t> idx(m, 0);
  for (;;) {
    const std::size_t used = std::accumulate(idx.begin(), idx.end(), std::size_t{0});
    if (used <= steps) {
      Point p = static_cast<double>(steps - used) / static_cast<double>(steps) * vertices[0];
      for (std::size_t l = 0; l < m; ++l)
        p += static_cast<double>(idx[l]) / static_cast<double>(steps) * vertices[l + 1];
      out.push_back(std::move(p));
    }
    std::size_t d = m;
    while (d > 0) {
      if (++idx[d - 1] <= steps) break;
      idx[d - 1] = 0;
      --d;
    }
    if (d == 0) break;
  }
  return out;
}

std::vector<MeshViolation> validate_mesh(const SimplicialMesh& mesh, unsigned seed) {
  std::vector<MeshViolation> out;
  const double tol = 1e-9 * diameter(mesh.domain);

  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    for (std::size_t j = i + 1; j < mesh.vertices.size(); ++j)
      if ((mesh.vertices[i] - mesh.vertices[j]).norm() <= tol)
        out.push_back({MeshViolation::Kind::DuplicateVertex, "vertices " + std::to_string(i) + " and " +
                                                                 std::to_string(j) + " coincide at " +
                                                                 describe(mesh.vertices[i])});

  for (std::size_t k = 0; k < mesh.simplices.size(); ++k) {
    const auto verts = mesh.simplex_vertices(k);
    try {
      const DenseMatrix d = edge_matrix(verts);
      require_nondegenerate(d);
      const auto& g = mesh.simplices[k].gradients;
      double err = 0.0;
      Point sum = Point::Zero(static_cast<Eigen::Index>(mesh.m));
      for (std::size_t l = 1; l <= mesh.m; ++l) {
        DenseVector e = DenseVector::Zero(static_cast<Eigen::Index>(mesh.m));
        e[static_cast<Eigen::Index>(l - 1)] = 1.0;
        err = std::max(err, (d.transpose() * g[l] - e).norm());
        sum += g[l];
      }
      err = std::max(err, (g[0] + sum).norm());
      if (err > 1e-9)
        out.push_back({MeshViolation::Kind::GradientMismatch, "simplex " + std::to_string(k) +
                                                                  ": stored gradients do not invert the edge matrix"});
    } catch (const DegenerateSimplex& e) {
      out.push_back({MeshViolation::Kind::Degenerate, "simplex " + std::to_string(k) + ": " + e.what()});
    }
  }

  if (mesh.m == 1) {
    // Two 1-simplices may only meet in a shared endpoint.
    for (std::size_t j = 0; j < mesh.simplices.size(); ++j) {
      const auto& sj = mesh.simplices[j].vertex_ids;
      const double aj = std::min(mesh.vertices[sj[0]][0], mesh.vertices[sj[1]][0]);
      const double bj = std::max(mesh.vertices[sj[0]][0], mesh.vertices[sj[1]][0]);
      for (std::size_t k = j + 1; k < mesh.simplices.size(); ++k) {
        const auto& sk = mesh.simplices[k].vertex_ids;
        const double ak = std::min(mesh.vertices[sk[0]][0], mesh.vertices[sk[1]][0]);
        const double bk = std::max(mesh.vertices[sk[0]][0], mesh.vertices[sk[1]][0]);
        const double lo = std::max(aj, ak), hi = std::min(bj, bk);
        if (hi < lo - tol) continue;
        bool ok = false;
        if (hi - lo <= tol) {
          for (std::size_t a : sj)
            for (std::size_t b : sk)
              if (a == b) ok = true;
        }
        if (!ok)
          out.push_back({MeshViolation::Kind::FaceIntersection,
                         "simplices " + std::to_string(j) + " and " + std::to_string(k) +
                             " intersect in something other than a common face"});
      }
    }
  } else if (mesh.simplices.size() > 1) {
    // Spot check: a random interior point of one simplex must not lie in the
    // interior of another.
    std::mt19937 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, mesh.simplices.size() - 1);
    std::gamma_distribution<double> expo(1.0, 1.0);
    const std::size_t trials = std::min<std::size_t>(200, mesh.simplices.size() * mesh.simplices.size());
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t j = pick(rng), k = pick(rng);
      if (j == k) continue;
      const auto vj = mesh.simplex_vertices(j), vk = mesh.simplex_vertices(k);
      DenseVector w(static_cast<Eigen::Index>(mesh.m) + 1);
      for (Eigen::Index l = 0; l < w.size(); ++l) w[l] = expo(rng);
      w /= w.sum();
      Point x = Point::Zero(static_cast<Eigen::Index>(mesh.m));
      for (std::size_t l = 0; l < vj.size(); ++l) x += w[static_cast<Eigen::Index>(l)] * vj[l];
      try {
        if (barycentric(vk, x).minCoeff() > 1e-9)
          out.push_back({MeshViolation::Kind::FaceIntersection,
                         "simplices " + std::to_string(j) + " and " + std::to_string(k) + " overlap"});
      } catch (const DegenerateSimplex&) {
      }
    }
  }
  return out;
}

std::optional<std::size_t> locate(const SimplicialMesh& mesh, const Point& x, double tol) {
  if (mesh.m == 1) {
    // Interval meshes from interval_mesh are sorted; fall through otherwise.
    for (std::size_t k = 0; k < mesh.simplices.size(); ++k) {
      const auto& ids = mesh.simplices[k].vertex_ids;
      const double a = std::min(mesh.vertices[ids[0]][0], mesh.vertices[ids[1]][0]);
      const double b = std::max(mesh.vertices[ids[0]][0], mesh.vertices[ids[1]][0]);
      const double slack = tol * (b - a);
      if (x[0] >= a - slack && x[0] <= b + slack) return k;
    }
    return std::nullopt;
  }
  for (std::size_t k = 0; k < mesh.simplices.size(); ++k)
    if (barycentric(mesh.simplex_vertices(k), x).minCoeff() >= -tol) return k;
  return std::nullopt;
}

std::vector<Point> sample_domain(const DomainDescriptor& domain, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point> out;
  out.reserve(count);
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Interval>) {
          for (std::size_t k = 0; k < count; ++k) out.push_back(Point::Constant(1, d.a + (d.b - d.a) * unit(rng)));
        } else if constexpr (std::is_same_v<T, Box>) {
          for (std::size_t k = 0; k < count; ++k) {
            Point x(d.lower.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = d.lower[i] + (d.upper[i] - d.lower[i]) * unit(rng);
            out.push_back(std::move(x));
          }
        } else if constexpr (std::is_same_v<T, UnitBall3>) {
          while (out.size() < count) {
            Point x(3);
            for (Eigen::Index i = 0; i < 3; ++i) x[i] = 2.0 * unit(rng) - 1.0;
            if (x.squaredNorm() <= 1.0) out.push_back(std::move(x));
          }
        } else {
          throw InvalidGeometry("random sampling is only available for intervals, boxes and the unit ball");
        }
      },
      domain);
  return out;
}

}  // namespace pdelmi::mesh
