#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "colang/data.hpp"
#include "colang/matrix.hpp"
#include "colang/nn.hpp"

namespace colang {

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mean loss and accuracy. Binary heads predict class 1 when p ≥ 0.5,
/// multi-class heads take the argmax.
EvalResult evaluate(const MlpModel& model, const Dataset& data, LossKind kind);

struct Extent {
  double xmin = -2.0;
  double xmax = 2.0;
  double ymin = -2.0;
  double ymax = 2.0;
};

// values(i, j) is the prediction at cell centre (x(j), y(i)).
struct Grid {
  Extent extent;
  std::size_t n = 0;
  Matrix values;

  double dx() const { return (extent.xmax - extent.xmin) / static_cast<double>(n); }
  double dy() const { return (extent.ymax - extent.ymin) / static_cast<double>(n); }
  double x(std::size_t j) const { return extent.xmin + (static_cast<double>(j) + 0.5) * dx(); }
  double y(std::size_t i) const { return extent.ymin + (static_cast<double>(i) + 0.5) * dy(); }
};

inline constexpr std::size_t kDefaultGridResolution = 400;
inline constexpr double kDecisionLevel = 0.5;

/// Scalar-head predictions over an n x n grid of cell centres.
Grid prediction_grid(const MlpModel& model, const Extent& extent = {},
                     std::size_t n = kDefaultGridResolution);

struct Polyline {
  std::vector<Point2> points;
  bool closed = false;
};

/// Level-set segments by linear interpolation along cell edges, chained into
/// polylines. Ambiguous saddle cells are resolved with the cell-centre mean.
std::vector<Polyline> marching_squares(const Grid& grid, double level);

struct CurvatureStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double max = 0.0;
  std::size_t count = 0;
  std::size_t skipped = 0;
};

/// Central-difference derivative with spacing `step`: second-order interior
/// stencil, second-order one-sided stencils at the ends (or wrap-around when
/// periodic). Needs at least three samples.
std::vector<double> central_gradient(std::span<const double> f, double step, bool periodic);

/// |x″y′ − x′y″| / (x′² + y′²)^{3/2} with the point index as curve parameter.
/// Open polylines drop their two endpoints; stationary points are skipped.
CurvatureStats polyline_curvature(const Polyline& p);

/// Longest contour with at least `min_points` points, if any.
std::optional<Polyline> longest_contour(const std::vector<Polyline>& contours,
                                        std::size_t min_points = 10);

struct BoundaryCurvature {
  CurvatureStats stats;
  Polyline contour;
  bool found = false;
};

BoundaryCurvature boundary_curvature(const Grid& grid, double level = kDecisionLevel);

enum class Axis { Horizontal, Vertical };

struct CrossSection {
  std::vector<double> position;
  std::vector<double> prediction;
  std::vector<double> gradient;
};

/// Prediction and its derivative along y = 0 (horizontal) or x = 0 (vertical),
/// sampled at n evenly spaced points of [lo, hi].
CrossSection cross_section_gradients(const MlpModel& model, Axis axis, std::size_t n,
                                     double lo = -2.0, double hi = 2.0);

double max_abs_weight(const MlpModel& model, std::size_t layer);

void write_grid_csv(const Grid& grid, const std::filesystem::path& path);
void write_polyline_csv(const Polyline& p, const std::filesystem::path& path);

}  // namespace colang
