#include <doctest.h>

#include <cmath>

#include "colang/constraints.hpp"
#include "colang/log.hpp"
#include "colang/rng.hpp"
#include "oracles.hpp"

using namespace colang;

namespace {

Matrix random_orthonormal(Rng& rng, std::size_t r, std::size_t s) {
  // Gram–Schmidt on a Gaussian matrix, independent of the library's QR path.
  Matrix q = standard_normal_matrix(rng, r, s);
  for (std::size_t j = 0; j < s; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < r; ++i) dot += q(i, j) * q(i, k);
      for (std::size_t i = 0; i < r; ++i) q(i, j) -= dot * q(i, k);
    }
    double n = 0.0;
    for (std::size_t i = 0; i < r; ++i) n += q(i, j) * q(i, j);
    n = std::sqrt(n);
    for (std::size_t i = 0; i < r; ++i) q(i, j) /= n;
  }
  return q;
}

}  // namespace

TEST_CASE("circle residual") {
  CHECK(circle_residual({3, 4}, 5) == 0.0);
  CHECK(circle_residual({1, 0}, 1) == 0.0);
  CHECK(circle_residual({1, 1}, 1) == 1.0);
  CircleGroup g{{3, 1}, {4, 1}, {5, 1}};
  const auto res = circle_residual(g);
  CHECK(res[0] == 0.0);
  CHECK(res[1] == 1.0);
  CHECK_FALSE(g.on_manifold());
}

TEST_CASE("orthogonal circle projection") {
  auto p = circle_project_orthogonal({2, 0}, 1);
  CHECK(p.theta == 1.0);
  CHECK(p.xi == 0.0);
  p = circle_project_orthogonal({1, 1}, 2);
  CHECK(p.theta == doctest::Approx(std::sqrt(2.0)));
  CHECK(p.xi == doctest::Approx(std::sqrt(2.0)));
  p = circle_project_orthogonal({-3, 4}, 10);
  CHECK(p.theta == doctest::Approx(-6.0));
  CHECK(p.xi == doctest::Approx(8.0));

  set_log_level(LogLevel::Quiet);
  p = circle_project_orthogonal({0, 0}, 3);
  set_log_level(LogLevel::Warning);
  CHECK(p.theta == 3.0);
  CHECK(p.xi == 0.0);
}

TEST_CASE("orthogonal circle projection is the nearest point (brute force)") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const CirclePoint in{rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const double r = rng.uniform(0.2, 2.0);
    const auto p = circle_project_orthogonal(in, r);
    CHECK(std::abs(circle_residual(p, r)) <= 1e-12 * r * r);
    const double d = std::hypot(p.theta - in.theta, p.xi - in.xi);
    double best = 1e300;
    for (int k = 0; k < 10000; ++k) {
      const double a = rng.uniform(-M_PI, M_PI);
      best = std::min(best, std::hypot(r * std::cos(a) - in.theta, r * std::sin(a) - in.xi));
    }
    CHECK(d <= best + 1e-12);
  }
}

TEST_CASE("oblique circle projection") {
  auto o = circle_project_oblique({1, 0}, {1, 0}, 1);
  CHECK(o.lambda == 0.0);
  CHECK(o.point.theta == 1.0);
  o = circle_project_oblique({1, 0}, {1.5, 0}, 1);
  CHECK(o.lambda == doctest::Approx(0.25));
  CHECK(o.point.theta == doctest::Approx(1.0));
  CHECK(o.point.xi == doctest::Approx(0.0));
  CHECK_THROWS_AS(circle_project_oblique({1, 0}, {0, 2}, 1), NoProjection);

  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = rng.uniform(-M_PI, M_PI);
    const double r = rng.uniform(0.5, 2.0);
    const CirclePoint qn{r * std::cos(a), r * std::sin(a)};
    const CirclePoint bar{qn.theta + 0.05 * r * rng.normal(), qn.xi + 0.05 * r * rng.normal()};
    const auto res = circle_project_oblique(qn, bar, r);
    CHECK(std::abs(circle_residual(res.point, r)) <= 1e-12 * r * r);
    // The correction is parallel to ∇g(qₙ) = 2qₙ.
    const double dx = bar.theta - res.point.theta, dy = bar.xi - res.point.xi;
    CHECK(std::abs(dx * qn.xi - dy * qn.theta) <= 1e-12);
  }
}

TEST_CASE("circle cotangent projection") {
  auto p = circle_cotangent_project({2, 0}, {0.7, -0.3});
  CHECK(p.theta == 0.0);
  CHECK(p.xi == -0.3);
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = rng.uniform(-M_PI, M_PI), r = rng.uniform(0.1, 3);
    const CirclePoint q{r * std::cos(a), r * std::sin(a)};
    const CircleMomentum bar{rng.normal(), rng.normal()};
    const auto once = circle_cotangent_project(q, bar);
    const auto twice = circle_cotangent_project(q, once);
    CHECK(std::abs(q.theta * once.theta + q.xi * once.xi) <= 1e-9);
    CHECK(std::abs(twice.theta - once.theta) <= 1e-14);
    CHECK(std::abs(twice.xi - once.xi) <= 1e-14);
  }
}

TEST_CASE("circle A-step is an exact rotation") {
  auto s = circle_a_step({{1, 0}, {0, 0}}, 0.3);
  CHECK(s.q.theta == 1.0);
  CHECK(s.q.xi == 0.0);

  // Velocity (0, −1) at (1, 0) on the unit circle: a quarter period lands at
  // the point the velocity points to, (0, −1), with velocity (−1, 0).
  s = circle_a_step({{1, 0}, {0, -1}}, M_PI / 2);
  CHECK(s.q.theta == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(s.q.theta) <= 1e-15);
  CHECK(s.q.xi == doctest::Approx(-1.0));
  CHECK(s.p.theta == doctest::Approx(-1.0));
  CHECK(std::abs(s.p.xi) <= 1e-15);

  // Against the analytic geodesic r(cos(a + v t / r), sin(a + v t / r)).
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = rng.uniform(-M_PI, M_PI), r = rng.uniform(0.3, 3), v = rng.normal();
    const double h = rng.uniform(0.01, 1.0);
    CirclePhase in{{r * std::cos(a), r * std::sin(a)}, {-v * std::sin(a), v * std::cos(a)}};
    const auto out = circle_a_step(in, h);
    const double b = a + v * h / r;
    CHECK(out.q.theta == doctest::Approx(r * std::cos(b)).epsilon(1e-12));
    CHECK(out.q.xi == doctest::Approx(r * std::sin(b)).epsilon(1e-12));
    CHECK(std::abs(std::hypot(out.q.theta, out.q.xi) - r) <= 1e-12 * r);
    CHECK(std::abs(out.q.theta * out.p.theta + out.q.xi * out.p.xi) <= 1e-12);
  }
}

TEST_CASE("circle A-step periodicity") {
  const double r = 1.7, v = 0.9;
  const double period = 2 * M_PI * r / v;
  const int n = 1000;
  CirclePhase s{{r, 0}, {0, v}};
  for (int i = 0; i < n; ++i) s = circle_a_step(s, period / n);
  CHECK(std::abs(s.q.theta - r) <= 1e-9);
  CHECK(std::abs(s.q.xi) <= 1e-9);
}

TEST_CASE("slack initialisation") {
  double t = 0.0;
  CHECK(slack_init(t, 1.0) == 1.0);
  t = 0.6;
  CHECK(slack_init(t, 1.0) == doctest::Approx(0.8));
  t = 1.5;
  CHECK(slack_init(t, 1.0) == 0.0);
  CHECK(t == 1.0);
  std::vector<double> theta{-2.0, 0.3}, radii{1.0, 0.5};
  const auto xi = slack_init(theta, radii);
  CHECK(theta[0] == -1.0);
  CircleGroup g{theta, xi, radii};
  CHECK(g.on_manifold());
  CHECK(xi[1] > 0);
}

TEST_CASE("sphere projection") {
  const std::vector<double> row{3.0, 0.0};
  auto s = sphere_project(row, 4.0, 10.0);
  CHECK(s.row[0] == doctest::Approx(6.0));
  CHECK(s.row[1] == 0.0);
  CHECK(s.xi == doctest::Approx(8.0));
  s = sphere_project(std::vector<double>{0.6, 0.0}, 0.8, 1.0);
  CHECK(s.row[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(s.xi == doctest::Approx(0.8).epsilon(1e-15));

  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(5);
    for (double& x : v) x = rng.normal();
    const double r = rng.uniform(0.5, 3);
    const auto p = sphere_project(v, rng.normal(), r);
    SphereGroup g{Matrix(1, 5, p.row), {p.xi}, {r}};
    CHECK(std::abs(sphere_residual(g)[0]) <= 1e-12 * r * r);
  }
  set_log_level(LogLevel::Quiet);
  s = sphere_project(std::vector<double>{0.0, 0.0}, 0.0, 2.0);
  set_log_level(LogLevel::Warning);
  CHECK(s.row[0] == 2.0);
}

TEST_CASE("orthogonality residual") {
  Rng rng(3);
  CHECK(orth_residual(random_orthonormal(rng, 6, 4)) <= 1e-12);
  CHECK(orth_residual(Matrix::identity(4) * 2.0) == doctest::Approx(3.0 * 2.0));
  CHECK(orth_residual(Matrix{{1.2}}) == doctest::Approx(0.44));
  OrthGroup g{Matrix(5, 3)};
  CHECK(g.constraint_count() == 6);
}

TEST_CASE("quasi-Newton projection") {
  Rng rng(21);
  const Matrix qn = random_orthonormal(rng, 8, 5);
  auto fixed = orth_quasi_newton_project(qn, qn, 5, 1e-8);
  CHECK(oracle::max_abs_diff(fixed.q, qn) <= 1e-14);

  // Scalar recurrence q ← q − ½(q² − 1).
  auto scalar = orth_quasi_newton_project(Matrix{{1.0}}, Matrix{{1.2}}, 1, 0.0);
  CHECK(scalar.q(0, 0) == doctest::Approx(0.98).epsilon(1e-15));
  scalar = orth_quasi_newton_project(Matrix{{1.0}}, Matrix{{1.2}}, 2, 0.0);
  CHECK(scalar.q(0, 0) == doctest::Approx(0.98 - 0.5 * (0.98 * 0.98 - 1.0)).epsilon(1e-15));
  scalar = orth_quasi_newton_project(Matrix{{1.0}}, Matrix{{1.2}}, 50, 1e-14);
  CHECK(scalar.q(0, 0) == doctest::Approx(1.0).epsilon(1e-14));

  const Matrix q0 = qn + standard_normal_matrix(rng, 8, 5) * 0.1;
  double prev = orth_residual(q0);
  for (std::size_t k = 1; k <= 6; ++k) {
    const double res = orth_residual(orth_quasi_newton_project(qn, q0, k, 0.0).q);
    CHECK(res < prev);
    prev = res;
  }
  const auto unprojected = orth_quasi_newton_project(qn, q0, 0, 1e-8);
  CHECK(unprojected.q == q0);

  CHECK_THROWS_AS(orth_quasi_newton_project(Matrix{{1.0}}, Matrix{{10.0}}, 20, 1e-8),
                  ProjectionDiverged);
}

TEST_CASE("orthogonality cotangent projection") {
  CHECK(orth_cotangent_project(Matrix{{1.0}}, Matrix{{0.4}}) == Matrix{{0.0}});
  const Matrix skew{{0, 1, -2}, {-1, 0, 3}, {2, -3, 0}};
  CHECK(oracle::max_abs_diff(orth_cotangent_project(Matrix::identity(3), skew), skew) == 0.0);
  const Matrix sym{{1, 2, 0}, {2, 5, 1}, {0, 1, -1}};
  CHECK(frobenius_norm(orth_cotangent_project(Matrix::identity(3), sym)) == 0.0);

  Rng rng(33);
  const Matrix q = random_orthonormal(rng, 7, 4);
  const Matrix a = standard_normal_matrix(rng, 7, 4);
  const Matrix b = standard_normal_matrix(rng, 7, 4);
  const Matrix pa = orth_cotangent_project(q, a);
  CHECK(orth_cotangent_residual(q, pa) <= 1e-8);
  CHECK(oracle::max_abs_diff(orth_cotangent_project(q, pa), pa) <= 1e-14);
  CHECK(std::abs(frobenius_dot(a - pa, pa)) <= 1e-8 * frobenius_dot(a, a));
  const Matrix lin = orth_cotangent_project(q, a * 2.5 + b);
  CHECK(oracle::max_abs_diff(lin, pa * 2.5 + orth_cotangent_project(q, b)) <= 1e-12);
}
