#include "pdelmi/mesh.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace pdelmi;
using namespace pdelmi::mesh;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

std::vector<Point> random_simplex(std::mt19937_64& rng, Eigen::Index m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (true) {
    std::vector<Point> v(static_cast<std::size_t>(m + 1), Point(m));
    for (auto& p : v)
      for (Eigen::Index i = 0; i < m; ++i) p[i] = u(rng);
    DenseMatrix d(m, m);
    for (Eigen::Index l = 1; l <= m; ++l) d.col(l - 1) = v[static_cast<std::size_t>(l)] - v[0];
    if (std::abs(d.determinant()) > 1e-2) return v;
  }
}

}  // namespace

TEST_CASE("uniform_interval_partition: cells, centers and samples") {
  auto p = uniform_interval_partition(0.0, 1.0, 2, 3);
  REQUIRE(p.cells.size() == 2);
  CHECK(p.cells[0].id == 1);
  CHECK(p.cells[1].id == 2);
  CHECK(p.cells[0].center[0] == 0.25);
  CHECK(p.cells[1].center[0] == 0.75);
  std::vector<double> s0, s1;
  for (const auto& s : p.cells[0].sample_points) s0.push_back(s[0]);
  for (const auto& s : p.cells[1].sample_points) s1.push_back(s[0]);
  CHECK(s0 == std::vector<double>{0.0, 0.25, 0.5});
  CHECK(s1 == std::vector<double>{0.5, 0.75, 1.0});

  p = uniform_interval_partition(0.0, 1.0, 100, 21);
  REQUIRE(p.cells.size() == 100);
  const auto& first = p.cells[0].sample_points;
  CHECK(first.front()[0] == 0.0);
  CHECK(first[1][0] == doctest::Approx(1.0 / 2000.0).epsilon(1e-14));
  CHECK(first[20][0] == doctest::Approx(1.0 / 100.0).epsilon(1e-14));

  p = uniform_interval_partition(0.0, 1.0, 1, 2);
  REQUIRE(p.cells.size() == 1);
  std::vector<double> s2;
  for (const auto& s : p.cells[0].sample_points) s2.push_back(s[0]);
  std::sort(s2.begin(), s2.end());
  CHECK(s2 == std::vector<double>{0.0, 0.5, 1.0});

  CHECK_THROWS(uniform_interval_partition(1.0, 0.0, 2, 3));
  CHECK_THROWS(uniform_interval_partition(0.0, 1.0, 0, 3));
}

TEST_CASE("every cell's samples include its center") {
  auto check = [](const Partition& p) {
    for (const auto& c : p.cells) {
      bool found = false;
      for (const auto& s : c.sample_points) found = found || (s - c.center).norm() == 0.0;
      CHECK(found);
    }
  };
  check(uniform_interval_partition(0.0, 1.0, 7, 4));
  check(uniform_box_partition(pt({0, 0}), pt({1, 2}), 3, 4));
  check(spherical_ball_partition(3, 4));
}

TEST_CASE("spherical_ball_partition: counts, center and containment") {
  auto p = spherical_ball_partition(1, 3);
  REQUIRE(p.cells.size() == 1);
  CHECK((p.cells[0].center - spherical_to_cartesian(0.5, M_PI / 2, M_PI)).norm() < 1e-15);
  CHECK(spherical_ball_partition(5, 2).cells.size() == 125);
  for (std::size_t n : {2, 4, 6}) {
    p = spherical_ball_partition(n, 3);
    CHECK(p.cells.size() == n * n * n);
    for (const auto& c : p.cells)
      for (const auto& s : c.sample_points) CHECK(s.norm() < 1.0 + 1e-12);
  }
}

TEST_CASE("interval_mesh: vertices and gradients") {
  auto m = interval_mesh(0.0, 1.0, 100);
  CHECK(m.vertices.size() == 101);
  CHECK(m.simplices.size() == 100);
  for (const auto& s : m.simplices) {
    CHECK(s.gradients[0][0] == -100.0);
    CHECK(s.gradients[1][0] == 100.0);
  }
  for (std::size_t k = 0; k + 1 < m.simplices.size(); ++k)
    CHECK(m.simplices[k].vertex_ids[1] == m.simplices[k + 1].vertex_ids[0]);

  m = interval_mesh(0.0, 1.0, 1);
  CHECK(m.vertices.size() == 2);
  CHECK(m.simplices.size() == 1);
  m = interval_mesh(2.0, 4.0, 2);
  REQUIRE(m.vertices.size() == 3);
  CHECK(m.vertices[0][0] == 2.0);
  CHECK(m.vertices[1][0] == 3.0);
  CHECK(m.vertices[2][0] == 4.0);
}

TEST_CASE("interval_mesh: v0 = -N and v1 = N for uniform meshes over seeded N") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> nd(1, 400);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = nd(rng);
    const auto m = interval_mesh(0.0, 1.0, n);
    CHECK(m.vertices.size() == n + 1);
    for (const auto& s : m.simplices) {
      CHECK(s.gradients[0][0] == -static_cast<double>(n));
      CHECK(s.gradients[1][0] == static_cast<double>(n));
      CHECK(s.gradients[0][0] + s.gradients[1][0] == 0.0);
    }
  }
}

TEST_CASE("simplex_gradients: examples and the defining identities") {
  std::vector<Point> tri = {pt({0, 0}), pt({1, 0}), pt({0, 1})};
  auto g = simplex_gradients(tri);
  CHECK((g[1] - pt({1, 0})).norm() == 0.0);
  CHECK((g[2] - pt({0, 1})).norm() == 0.0);
  CHECK((g[0] - pt({-1, -1})).norm() == 0.0);

  std::vector<Point> seg = {pt({0.37}), pt({0.38})};
  g = simplex_gradients(seg);
  CHECK(g[1][0] == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(g[0][0] == -g[1][0]);

  std::mt19937_64 rng(32);
  for (Eigen::Index m = 1; m <= 3; ++m)
    for (int trial = 0; trial < 100; ++trial) {
      const auto v = random_simplex(rng, m);
      g = simplex_gradients(v);
      Point rest = Point::Zero(m);
      for (std::size_t l = 1; l < g.size(); ++l) rest += g[l];
      CHECK((g[0] + rest).isZero(0.0));
      DenseMatrix d(m, m);
      for (Eigen::Index l = 1; l <= m; ++l) d.col(l - 1) = v[static_cast<std::size_t>(l)] - v[0];
      for (Eigen::Index l = 1; l <= m; ++l) {
        const DenseVector e = d.transpose() * g[static_cast<std::size_t>(l)];
        CHECK((e - DenseVector::Unit(m, l - 1)).norm() < 1e-10);
      }
    }

  std::vector<Point> flat = {pt({0, 0}), pt({1, 1}), pt({2, 2})};
  CHECK_THROWS_AS(simplex_gradients(flat), DegenerateSimplex);
}

TEST_CASE("barycentric: vertices, centroid, reconstruction and affine invariance") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index m = 1; m <= 3; ++m)
    for (int trial = 0; trial < 200; ++trial) {
      const auto v = random_simplex(rng, m);
      const auto k = static_cast<std::size_t>(trial) % v.size();
      DenseVector a = barycentric(v, v[k]);
      CHECK((a - DenseVector::Unit(m + 1, static_cast<Eigen::Index>(k))).norm() < 1e-12);

      Point c = Point::Zero(m);
      for (const auto& p : v) c += p / static_cast<double>(m + 1);
      a = barycentric(v, c);
      CHECK((a.array() - 1.0 / static_cast<double>(m + 1)).abs().maxCoeff() < 1e-12);

      DenseVector w(m + 1);
      for (Eigen::Index i = 0; i <= m; ++i) w[i] = u(rng) + 1e-3;
      w /= w.sum();
      Point x = Point::Zero(m);
      for (Eigen::Index i = 0; i <= m; ++i) x += w[i] * v[static_cast<std::size_t>(i)];
      a = barycentric(v, x);
      Point rec = Point::Zero(m);
      for (Eigen::Index i = 0; i <= m; ++i) rec += a[i] * v[static_cast<std::size_t>(i)];
      CHECK((rec - x).norm() <= 1e-10);
      CHECK(std::abs(a.sum() - 1.0) < 1e-12);
      CHECK(a.minCoeff() >= -1e-12);

      const Point shift = Point::Constant(m, u(rng) * 3.0);
      std::vector<Point> moved = v;
      for (auto& p : moved) p += shift;
      CHECK((barycentric(moved, x + shift) - a).norm() < 1e-12);
    }
}

TEST_CASE("validate_mesh: clean meshes and reported violations") {
  CHECK(validate_mesh(interval_mesh(0.0, 1.0, 10)).empty());
  CHECK(validate_mesh(box_mesh(pt({0, 0}), pt({1, 1}), 3)).empty());
  CHECK(validate_mesh(box_mesh(pt({0, 0, 0}), pt({1, 1, 1}), 2)).empty());

  SimplicialMesh dup;
  dup.m = 1;
  dup.domain = Interval{0.0, 1.0};
  dup.vertices = {pt({0.0}), pt({0.5}), pt({0.5}), pt({1.0})};
  dup.simplices.push_back({{0, 1}, simplex_gradients(std::vector<Point>{pt({0.0}), pt({0.5})})});
  dup.simplices.push_back({{2, 3}, simplex_gradients(std::vector<Point>{pt({0.5}), pt({1.0})})});
  bool saw_dup = false;
  for (const auto& v : validate_mesh(dup)) saw_dup = saw_dup || v.kind == MeshViolation::Kind::DuplicateVertex;
  CHECK(saw_dup);

  SimplicialMesh overlap;
  overlap.m = 1;
  overlap.domain = Interval{0.0, 1.0};
  overlap.vertices = {pt({0.0}), pt({0.6}), pt({0.4}), pt({1.0})};
  overlap.simplices.push_back({{0, 1}, simplex_gradients(std::vector<Point>{pt({0.0}), pt({0.6})})});
  overlap.simplices.push_back({{2, 3}, simplex_gradients(std::vector<Point>{pt({0.4}), pt({1.0})})});
  bool saw_face = false;
  for (const auto& v : validate_mesh(overlap)) saw_face = saw_face || v.kind == MeshViolation::Kind::FaceIntersection;
  CHECK(saw_face);
}

TEST_CASE("box_mesh: Kuhn triangulation counts and gradient sums") {
  const auto m2 = box_mesh(pt({0, 0}), pt({2, 1}), 4);
  CHECK(m2.vertices.size() == 25);
  CHECK(m2.simplices.size() == 16 * 2);
  const auto m3 = box_mesh(pt({0, 0, 0}), pt({1, 1, 1}), 2);
  CHECK(m3.vertices.size() == 27);
  CHECK(m3.simplices.size() == 8 * 6);
  for (const auto& s : m3.simplices) {
    Point sum = Point::Zero(3);
    for (const auto& g : s.gradients) sum += g;
    CHECK(sum.isZero(0.0));
  }
}

TEST_CASE("locate and sample_domain") {
  const auto m = interval_mesh(0.0, 1.0, 10);
  CHECK(locate(m, pt({0.05})).value() == 0);
  CHECK(locate(m, pt({0.95})).value() == 9);
  CHECK_FALSE(locate(m, pt({1.5})).has_value());

  const auto s1 = sample_domain(Interval{0.0, 1.0}, 100, 5);
  const auto s2 = sample_domain(Interval{0.0, 1.0}, 100, 5);
  REQUIRE(s1.size() == 100);
  for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i][0] == s2[i][0]);
  for (const auto& p : sample_domain(UnitBall3{}, 200, 9)) CHECK(p.norm() <= 1.0);
  CHECK_THROWS_AS(sample_domain(OtherDomain{2}, 3, 1), InvalidGeometry);
}
