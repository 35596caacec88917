#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "colang/csv.hpp"
#include "colang/metrics.hpp"

using namespace colang;

namespace {

Grid sampled(std::size_t n, double (*f)(double, double), Extent e = {}) {
  Grid g{e, n, Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g.values(i, j) = f(g.x(j), g.y(i));
  }
  return g;
}

// σ(a·x + b·y + c)
MlpModel logistic(double a, double b, double c) {
  return MlpModel({Layer{Matrix{{a, b}}, {c}, Activation::Sigmoid}});
}

}  // namespace

TEST_CASE("evaluate") {
  Dataset d;
  d.points = Matrix{{-1.0, 0.0}, {2.0, 0.0}, {0.5, 0.0}, {-0.2, 0.0}};
  d.labels = {0, 1, 0, 0};
  const MlpModel m = logistic(1.0, 0.0, 0.0);
  const EvalResult r = evaluate(m, d, LossKind::BCE);
  CHECK(r.accuracy == doctest::Approx(0.75));
  double expected = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-d.points(i, 0)));
    expected -= d.labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  CHECK(r.loss == doctest::Approx(expected / 4.0).epsilon(1e-12));

  // p = 0.5 exactly counts as class 1.
  Dataset tie;
  tie.points = Matrix{{0.0, 0.0}};
  tie.labels = {1};
  CHECK(evaluate(m, tie, LossKind::BCE).accuracy == 1.0);
}

TEST_CASE("prediction grid uses cell centres") {
  const MlpModel m({Layer{Matrix{{1.0, 10.0}}, {0.0}, Activation::Identity}});
  const Grid g = prediction_grid(m, {}, 4);
  CHECK(g.dx() == 1.0);
  CHECK(g.x(0) == -1.5);
  CHECK(g.y(3) == 1.5);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(g.values(i, j) == doctest::Approx(g.x(j) + 10.0 * g.y(i)));
  }
  CHECK_THROWS(prediction_grid(MlpModel({3, 1}, Activation::ReLU, Activation::Sigmoid)));
}

TEST_CASE("central gradient") {
  std::vector<double> q(7);
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = 3.0 * (0.5 * i) * (0.5 * i) - (0.5 * i) + 2.0;
  const auto g = central_gradient(q, 0.5, false);
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(g[i] == doctest::Approx(6.0 * (0.5 * i) - 1.0).epsilon(1e-12));

  const std::size_t n = 64;
  std::vector<double> s(n);
  const double step = 2 * M_PI / n;
  for (std::size_t i = 0; i < n; ++i) s[i] = std::sin(step * i);
  const auto gs = central_gradient(s, step, true);
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(gs[i] - std::cos(step * i)) <= step * step);
  CHECK_THROWS(central_gradient(std::vector<double>{1.0, 2.0}, 1.0, false));
}

TEST_CASE("curvature of exact curves") {
  // Parabola y = x² sampled uniformly in x: the stencils are exact.
  Polyline parabola;
  for (int k = -20; k <= 20; ++k) parabola.points.push_back({0.05 * k, 0.0025 * k * k});
  const CurvatureStats ps = polyline_curvature(parabola);
  CHECK(ps.count == parabola.points.size() - 2);
  double sum = 0.0, sq = 0.0, mx = 0.0;
  for (int k = -19; k <= 19; ++k) {
    const double x = 0.05 * k;
    const double kappa = 2.0 / std::pow(1.0 + 4.0 * x * x, 1.5);
    sum += kappa;
    sq += kappa * kappa;
    mx = std::max(mx, kappa);
  }
  const double mean = sum / 39.0;
  CHECK(ps.mean == doctest::Approx(mean).epsilon(1e-10));
  CHECK(ps.std == doctest::Approx(std::sqrt(sq / 39.0 - mean * mean)).epsilon(1e-8));
  CHECK(ps.max == doctest::Approx(2.0).epsilon(1e-10));

  Polyline circle;
  circle.closed = true;
  for (int k = 0; k < 200; ++k) circle.points.push_back({0.5 * std::cos(k * M_PI / 100), 0.5 * std::sin(k * M_PI / 100)});
  const CurvatureStats cs = polyline_curvature(circle);
  CHECK(cs.count == 200);
  CHECK(cs.mean == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(cs.std <= 1e-9);

  Polyline line;
  for (int k = 0; k < 10; ++k) line.points.push_back({double(k), 2.0 * k});
  CHECK(polyline_curvature(line).mean == 0.0);

  Polyline stuck;
  for (int k = 0; k < 6; ++k) stuck.points.push_back({1.0, 1.0});
  const CurvatureStats st = polyline_curvature(stuck);
  CHECK(st.count == 0);
  CHECK(st.skipped == 4);
  CHECK_THROWS(polyline_curvature(Polyline{{{0, 0}, {1, 1}, {2, 2}, {3, 3}}, false}));
}

TEST_CASE("marching squares recovers a circle") {
  const Grid g = sampled(400, [](double x, double y) { return x * x + y * y; });
  const auto contours = marching_squares(g, 1.0);
  REQUIRE(contours.size() == 1);
  CHECK(contours[0].closed);
  for (const auto& p : contours[0].points) CHECK(std::abs(std::hypot(p.x, p.y) - 1.0) <= g.dx() * g.dx());
  const BoundaryCurvature bc = boundary_curvature(g, 1.0);
  REQUIRE(bc.found);
  CHECK(bc.stats.mean == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("marching squares on a straight boundary") {
  const Grid g = sampled(50, [](double x, double y) { return 1.0 / (1.0 + std::exp(-(x + 0.3 * y))); });
  const auto contours = marching_squares(g, kDecisionLevel);
  REQUIRE(contours.size() == 1);
  CHECK_FALSE(contours[0].closed);
  for (const auto& p : contours[0].points) CHECK(std::abs(p.x + 0.3 * p.y) <= 1e-3);
  const auto& pts = contours[0].points;
  CHECK(std::abs(std::abs(pts.front().y) - 2.0) <= g.dy());
  CHECK(std::abs(std::abs(pts.back().y) - 2.0) <= g.dy());
  CHECK(boundary_curvature(g).stats.mean <= 1e-2);
}

TEST_CASE("marching squares saddle rule") {
  Grid g{{-1, 1, -1, 1}, 2, Matrix{{1.0, 0.0}, {0.0, 1.0}}};
  // Centre mean 0.5 ≥ level: the above corners connect through the centre.
  auto c = marching_squares(g, 0.5);
  REQUIRE(c.size() == 2);
  for (const auto& poly : c) {
    REQUIRE(poly.points.size() == 2);
    const Point2 a = poly.points[0], b = poly.points[1];
    // Each segment cuts off one below corner: (x(1), y(0)) or (x(0), y(1)).
    const bool cuts_br = (a.x > 0 || b.x > 0) && (a.y < 0 || b.y < 0);
    const bool cuts_tl = (a.x < 0 || b.x < 0) && (a.y > 0 || b.y > 0);
    CHECK((cuts_br || cuts_tl));
  }
  // Centre mean 0.5 < level 0.6: the below corners connect instead.
  g.values = Matrix{{1.0, 0.0}, {0.0, 1.0}};
  c = marching_squares(g, 0.6);
  REQUIRE(c.size() == 2);
  for (const auto& poly : c) {
    const Point2 a = poly.points[0], b = poly.points[1];
    const bool cuts_bl = (a.x < 0 || b.x < 0) && (a.y < 0 || b.y < 0);
    const bool cuts_tr = (a.x > 0 || b.x > 0) && (a.y > 0 || b.y > 0);
    CHECK((cuts_bl || cuts_tr));
  }
}

TEST_CASE("longest contour") {
  std::vector<Polyline> cs(3);
  cs[0].points.resize(8);
  cs[1].points.resize(12);
  cs[2].points.resize(30);
  CHECK(longest_contour(cs)->points.size() == 30);
  CHECK_FALSE(longest_contour({cs[0]}).has_value());
  const Grid flat = sampled(20, [](double, double) { return 0.0; });
  CHECK_FALSE(boundary_curvature(flat).found);
}

TEST_CASE("cross sections") {
  const MlpModel m = logistic(3.0, -2.0, 0.5);
  const CrossSection h = cross_section_gradients(m, Axis::Horizontal, 401);
  const CrossSection v = cross_section_gradients(m, Axis::Vertical, 401);
  REQUIRE(h.position.size() == 401);
  CHECK(h.position.front() == -2.0);
  CHECK(h.position.back() == doctest::Approx(2.0));
  for (std::size_t k = 0; k < 401; ++k) {
    const double ph = 1.0 / (1.0 + std::exp(-(3.0 * h.position[k] + 0.5)));
    const double pv = 1.0 / (1.0 + std::exp(-(-2.0 * v.position[k] + 0.5)));
    CHECK(h.prediction[k] == doctest::Approx(ph).epsilon(1e-12));
    CHECK(std::abs(h.gradient[k] - 3.0 * ph * (1.0 - ph)) <= 1e-3);
    CHECK(std::abs(v.gradient[k] + 2.0 * pv * (1.0 - pv)) <= 1e-3);
  }
}

TEST_CASE("max abs weight and csv exports") {
  MlpModel m({Layer{Matrix{{0.5, -3.0}}, {7.0}, Activation::Sigmoid}});
  CHECK(max_abs_weight(m, 0) == 3.0);
  CHECK_THROWS_AS(max_abs_weight(m, 1), std::out_of_range);

  const Grid g = prediction_grid(m, {}, 3);
  const auto dir = std::filesystem::temp_directory_path();
  write_grid_csv(g, dir / "colang_grid.csv");
  const CsvTable t = read_csv(dir / "colang_grid.csv");
  REQUIRE(t.rows.size() == 3);
  CHECK(t.header.size() == 3);
  CHECK(std::stod(t.rows[2][1]) == g.values(2, 1));
  write_polyline_csv(Polyline{{{1, 2}, {3, 4}}, false}, dir / "colang_line.csv");
  CHECK(read_csv(dir / "colang_line.csv").rows.size() == 2);
  std::filesystem::remove(dir / "colang_grid.csv");
  std::filesystem::remove(dir / "colang_line.csv");
}

TEST_CASE("curvature is invariant under rigid motions") {
  Polyline p;
  for (int k = 0; k < 60; ++k) {
    const double t = 0.1 * k;
    p.points.push_back({t, std::sin(t) + 0.2 * t * t});
  }
  const CurvatureStats base = polyline_curvature(p);
  const double angle = 0.7, c = std::cos(angle), s = std::sin(angle);
  Polyline moved = p;
  for (auto& q : moved.points) q = {c * q.x - s * q.y + 3.0, s * q.x + c * q.y - 1.5};
  const CurvatureStats m = polyline_curvature(moved);
  CHECK(std::abs(m.mean - base.mean) <= 1e-9);
  CHECK(std::abs(m.std - base.std) <= 1e-9);
  CHECK(std::abs(m.max - base.max) <= 1e-9);
}

TEST_CASE("marching squares points lie within a cell diagonal of the level set") {
  const Grid g = sampled(120, [](double x, double y) { return std::sin(2.0 * x) + y; });
  const double diag = std::hypot(g.dx(), g.dy());
  const auto contours = marching_squares(g, 0.0);
  REQUIRE_FALSE(contours.empty());
  for (const auto& poly : contours) {
    for (const auto& p : poly.points) {
      // Vertical distance bounds the distance to the curve y = −sin 2x.
      CHECK(std::abs(p.y + std::sin(2.0 * p.x)) <= diag);
    }
  }
}
