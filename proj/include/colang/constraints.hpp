#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "colang/matrix.hpp"

namespace colang {

// Raised when the oblique circle projection has no real root, i.e. the step
// moved the point too far from the circle along the constraint normal.
class NoProjection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when the quasi-Newton orthogonality projection blows up.
class ProjectionDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-parameter circle constraint θᵢ² + ξᵢ² = rᵢ².
struct CircleGroup {
  std::vector<double> theta;
  std::vector<double> xi;
  std::vector<double> radii;

  std::size_t size() const { return theta.size(); }
  bool on_manifold(double rel_tol = 1e-9) const;
};

/// Row-sum-of-squares constraint ‖wᵢ‖² + ξᵢ² = rᵢ² over the rows of a matrix.
struct SphereGroup {
  Matrix rows;
  std::vector<double> xi;
  std::vector<double> radii;

  bool on_manifold(double rel_tol = 1e-9) const;
};

/// QᵀQ = Iₛ on a tall r x s matrix (s ≤ r).
struct OrthGroup {
  Matrix q;
  std::size_t max_iterations = 5;
  double tol = 1e-8;

  std::size_t constraint_count() const { return q.cols() * (q.cols() + 1) / 2; }
};

struct CirclePoint {
  double theta = 0.0;
  double xi = 0.0;
};

struct CircleMomentum {
  double theta = 0.0;
  double xi = 0.0;
};

// ---------------------------------------------------------------- circle ---

/// gᵢ = θᵢ² + ξᵢ² − rᵢ²
std::vector<double> circle_residual(const CircleGroup& g);
double circle_residual(CirclePoint q, double r);

/// Nearest point of the radius-r circle: r·(cos α, sin α) with α the
/// full-quadrant angle of the input. The origin maps to (r, 0).
CirclePoint circle_project_orthogonal(CirclePoint point, double r);

struct ObliqueProjection {
  CirclePoint point;
  double lambda = 0.0;
};

/// q̄ − λ∇g(qₙ) on the circle, λ the real root nearer qₙ. Throws NoProjection
/// when the quadratic has no real root.
ObliqueProjection circle_project_oblique(CirclePoint current, CirclePoint target, double r);

/// Projection of (p̄ᶜ, p̄^ξ) onto the cotangent line θpᶜ + ξp^ξ = 0.
CircleMomentum circle_cotangent_project(CirclePoint q, CircleMomentum p);

struct CirclePhase {
  CirclePoint q;
  CircleMomentum p;
};

/// Exact geodesic flow on the circle for time h: rotation with angular speed
/// ω = (ξpᶜ − θp^ξ)/r².
CirclePhase circle_a_step(CirclePhase state, double h);

/// ξᵢ = +sqrt(rᵢ² − θᵢ²). θᵢ is clamped to [−rᵢ, rᵢ] first (modified in place).
std::vector<double> slack_init(std::span<double> theta, std::span<const double> radii);
double slack_init(double& theta, double r);

// ---------------------------------------------------------------- sphere ---

struct SpherePoint {
  std::vector<double> row;
  double xi = 0.0;
};

/// Radial rescale of (row, ξ) onto the sphere of radius r. A zero vector maps
/// to (r·e₁, 0).
SpherePoint sphere_project(std::span<const double> row, double xi, double r);
std::vector<double> sphere_residual(const SphereGroup& g);

// ---------------------------------------------------------- orthogonality ---

/// ‖QᵀQ − Iₛ‖_F
double orth_residual(const Matrix& q);

struct QuasiNewtonResult {
  Matrix q;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Q⁽ᵏ⁺¹⁾ = Q⁽ᵏ⁾ − ½ Qₙ((Q⁽ᵏ⁾)ᵀQ⁽ᵏ⁾ − Iₛ), stopped after max_iterations or as
/// soon as ‖QᵀQ − Iₛ‖_F ≤ tol. max_iterations = 0 returns q0 unchanged.
/// Throws ProjectionDiverged on non-finite iterates or three consecutive
/// residual increases.
QuasiNewtonResult orth_quasi_newton_project(const Matrix& q_n, Matrix q0,
                                            std::size_t max_iterations, double tol);

/// Π_Q P̄ = P̄ − ½Q(P̄ᵀQ + QᵀP̄)
Matrix orth_cotangent_project(const Matrix& q, const Matrix& p_bar);

/// ‖PᵀQ + QᵀP‖_F
double orth_cotangent_residual(const Matrix& q, const Matrix& p);

}  // namespace colang
