#include "colang/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "colang/csv.hpp"
#include "colang/log.hpp"

namespace colang {

EvalResult evaluate(const MlpModel& model, const Dataset& data, LossKind kind) {
  check_loss_compatible(model, kind);
  const Matrix pred = forward(model, data.points);
  EvalResult r;
  r.loss = loss_from_predictions(pred, data.labels, kind);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::size_t cls = 0;
    if (pred.cols() == 1) {
      cls = pred(i, 0) >= kDecisionLevel ? 1 : 0;
    } else {
      auto row = pred.row(i);
      cls = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    if (static_cast<double>(cls) == data.labels[i]) ++correct;
  }
  r.accuracy = data.size() ? static_cast<double>(correct) / static_cast<double>(data.size()) : 0.0;
  return r;
}

Grid prediction_grid(const MlpModel& model, const Extent& extent, std::size_t n) {
  if (n < 2) throw std::invalid_argument("prediction grid needs n >= 2");
  if (model.output_dim() != 1 || model.input_dim() != 2) {
    throw std::invalid_argument("prediction grid needs a 2-input scalar-output model");
  }
  Grid grid{extent, n, Matrix(n, n)};
  // One grid row per forward call keeps the activations small.
  Matrix inputs(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      inputs(j, 0) = grid.x(j);
      inputs(j, 1) = grid.y(i);
    }
    const Matrix out = forward(model, inputs);
    for (std::size_t j = 0; j < n; ++j) grid.values(i, j) = out(j, 0);
  }
  return grid;
}

// ------------------------------------------------------ marching squares ---

namespace {

struct Segment {
  std::size_t a;
  std::size_t b;
};

}  // namespace

std::vector<Polyline> marching_squares(const Grid& grid, double level) {
  const std::size_t n = grid.n;
  const Matrix& v = grid.values;
  if (n < 2) return {};
  const std::size_t horizontal = n * (n - 1);
  auto h_edge = [&](std::size_t i, std::size_t j) { return i * (n - 1) + j; };
  auto v_edge = [&](std::size_t i, std::size_t j) { return horizontal + i * n + j; };
  auto above = [&](std::size_t i, std::size_t j) { return v(i, j) >= level; };

  auto edge_point = [&](std::size_t e) {
    std::size_t i0, j0, i1, j1;
    if (e < horizontal) {
      i0 = i1 = e / (n - 1);
      j0 = e % (n - 1);
      j1 = j0 + 1;
    } else {
      const std::size_t k = e - horizontal;
      i0 = k / n;
      j0 = j1 = k % n;
      i1 = i0 + 1;
    }
    const double a = v(i0, j0);
    const double b = v(i1, j1);
    const double t = (level - a) / (b - a);
    return Point2{grid.x(j0) + t * (grid.x(j1) - grid.x(j0)),
                  grid.y(i0) + t * (grid.y(i1) - grid.y(i0))};
  };

  std::vector<Segment> segments;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const bool bl = above(i, j), br = above(i, j + 1), tr = above(i + 1, j + 1),
                 tl = above(i + 1, j);
      const std::size_t bottom = h_edge(i, j), right = v_edge(i, j + 1), top = h_edge(i + 1, j),
                        left = v_edge(i, j);
      std::vector<std::size_t> crossing;
      if (bl != br) crossing.push_back(bottom);
      if (br != tr) crossing.push_back(right);
      if (tr != tl) crossing.push_back(top);
      if (tl != bl) crossing.push_back(left);
      if (crossing.size() == 2) {
        segments.push_back({crossing[0], crossing[1]});
      } else if (crossing.size() == 4) {
        const double centre = 0.25 * (v(i, j) + v(i, j + 1) + v(i + 1, j + 1) + v(i + 1, j));
        // The diagonal pair whose state differs from the centre is cut off.
        if (bl == (centre >= level)) {
          segments.push_back({bottom, right});
          segments.push_back({top, left});
        } else {
          segments.push_back({bottom, left});
          segments.push_back({top, right});
        }
      }
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> incident;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    incident[segments[s].a].push_back(s);
    incident[segments[s].b].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<Polyline> out;

  auto trace = [&](std::size_t start_edge, std::size_t first_segment) {
    std::vector<std::size_t> edges{start_edge};
    std::size_t seg = first_segment;
    std::size_t at = start_edge;
    bool closed = false;
    while (true) {
      used[seg] = true;
      const std::size_t next = segments[seg].a == at ? segments[seg].b : segments[seg].a;
      if (next == start_edge) {
        closed = true;
        break;
      }
      edges.push_back(next);
      at = next;
      std::size_t follow = segments.size();
      for (std::size_t cand : incident[at]) {
        if (!used[cand]) {
          follow = cand;
          break;
        }
      }
      if (follow == segments.size()) break;
      seg = follow;
    }
    Polyline poly;
    poly.closed = closed;
    for (std::size_t e : edges) {
      const Point2 p = edge_point(e);
      if (!poly.points.empty()) {
        const Point2& q = poly.points.back();
        if (q.x == p.x && q.y == p.y) continue;
      }
      poly.points.push_back(p);
    }
    if (closed && poly.points.size() > 1) {
      const Point2& f = poly.points.front();
      const Point2& l = poly.points.back();
      if (f.x == l.x && f.y == l.y) poly.points.pop_back();
    }
    out.push_back(std::move(poly));
  };

  // Open curves start at boundary edges (touched by one segment).
  for (const auto& [edge, segs] : incident) {
    if (segs.size() == 1 && !used[segs[0]]) trace(edge, segs[0]);
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (!used[s]) trace(segments[s].a, s);
  }
  return out;
}

// ------------------------------------------------------------- curvature ---

std::vector<double> central_gradient(std::span<const double> f, double step, bool periodic) {
  const std::size_t n = f.size();
  if (n < 3) throw std::invalid_argument("central_gradient needs at least 3 samples");
  std::vector<double> g(n);
  for (std::size_t i = 1; i + 1 < n; ++i) g[i] = (f[i + 1] - f[i - 1]) / (2.0 * step);
  if (periodic) {
    g[0] = (f[1] - f[n - 1]) / (2.0 * step);
    g[n - 1] = (f[0] - f[n - 2]) / (2.0 * step);
  } else {
    g[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * step);
    g[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * step);
  }
  return g;
}

CurvatureStats polyline_curvature(const Polyline& p) {
  const std::size_t n = p.points.size();
  if (n < 5) throw std::invalid_argument("curvature needs at least 5 points");
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = p.points[i].x;
    y[i] = p.points[i].y;
  }
  const auto x1 = central_gradient(x, 1.0, p.closed);
  const auto y1 = central_gradient(y, 1.0, p.closed);
  const auto x2 = central_gradient(x1, 1.0, p.closed);
  const auto y2 = central_gradient(y1, 1.0, p.closed);

  const std::size_t lo = p.closed ? 0 : 1;
  const std::size_t hi = p.closed ? n : n - 1;
  CurvatureStats s;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    const double speed2 = x1[i] * x1[i] + y1[i] * y1[i];
    const double kappa = std::abs(x2[i] * y1[i] - x1[i] * y2[i]) / std::pow(speed2, 1.5);
    if (!(speed2 > 0.0) || !std::isfinite(kappa)) {
      ++s.skipped;
      continue;
    }
    sum += kappa;
    sum_sq += kappa * kappa;
    s.max = std::max(s.max, kappa);
    ++s.count;
  }
  if (s.skipped > 0) {
    log_warning("curvature: skipped " + std::to_string(s.skipped) + " stationary point(s)");
  }
  if (s.count > 0) {
    const double c = static_cast<double>(s.count);
    s.mean = sum / c;
    s.std = std::sqrt(std::max(0.0, sum_sq / c - s.mean * s.mean));
  }
  return s;
}

std::optional<Polyline> longest_contour(const std::vector<Polyline>& contours,
                                        std::size_t min_points) {
  const Polyline* best = nullptr;
  for (const auto& c : contours) {
    if (c.points.size() < min_points) continue;
    if (!best || c.points.size() > best->points.size()) best = &c;
  }
  if (!best) return std::nullopt;
  return *best;
}

BoundaryCurvature boundary_curvature(const Grid& grid, double level) {
  BoundaryCurvature out;
  auto contour = longest_contour(marching_squares(grid, level));
  if (!contour) return out;
  out.found = true;
  out.contour = std::move(*contour);
  out.stats = polyline_curvature(out.contour);
  return out;
}

// --------------------------------------------------------- cross sections ---

CrossSection cross_section_gradients(const MlpModel& model, Axis axis, std::size_t n, double lo,
                                     double hi) {
  if (n < 3) throw std::invalid_argument("cross section needs n >= 3");
  if (model.output_dim() != 1 || model.input_dim() != 2) {
    throw std::invalid_argument("cross section needs a 2-input scalar-output model");
  }
  CrossSection cs;
  const double step = (hi - lo) / static_cast<double>(n - 1);
  Matrix inputs(n, 2);
  cs.position.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    cs.position[k] = lo + static_cast<double>(k) * step;
    inputs(k, axis == Axis::Horizontal ? 0 : 1) = cs.position[k];
  }
  const Matrix out = forward(model, inputs);
  cs.prediction.assign(out.values().begin(), out.values().end());
  cs.gradient = central_gradient(cs.prediction, step, false);
  return cs;
}

double max_abs_weight(const MlpModel& model, std::size_t layer) {
  if (layer >= model.depth()) {
    throw std::out_of_range("layer " + std::to_string(layer) + " out of range");
  }
  return max_abs(model.layer(layer).weight.values());
}

void write_grid_csv(const Grid& grid, const std::filesystem::path& path) {
  std::vector<std::string> header;
  for (std::size_t j = 0; j < grid.n; ++j) header.push_back("c" + std::to_string(j));
  CsvWriter out(path, header);
  for (std::size_t i = 0; i < grid.n; ++i) {
    for (double v : grid.values.row(i)) out.cell(v);
    out.end_row();
  }
}

void write_polyline_csv(const Polyline& p, const std::filesystem::path& path) {
  CsvWriter out(path, {"x", "y"});
  for (const auto& pt : p.points) out.row({pt.x, pt.y});
}

}  // namespace colang
