#include "colang/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "colang/log.hpp"

namespace colang {
namespace {

Matrix symmetric_part_sum(const Matrix& m) {
  // m + mᵀ for a square matrix
  Matrix s(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) s(i, j) = m(i, j) + m(j, i);
  return s;
}

// QᵀQ − I
Matrix gram_defect(const Matrix& q) {
  Matrix g = matmul_tn(q, q);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return g;
}

}  // namespace

bool CircleGroup::on_manifold(double rel_tol) const {
  const auto g = circle_residual(*this);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (std::abs(g[i]) > rel_tol * radii[i] * radii[i]) return false;
  }
  return true;
}

bool SphereGroup::on_manifold(double rel_tol) const {
  const auto g = sphere_residual(*this);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (std::abs(g[i]) > rel_tol * radii[i] * radii[i]) return false;
  }
  return true;
}

std::vector<double> circle_residual(const CircleGroup& g) {
  if (g.xi.size() != g.theta.size() || g.radii.size() != g.theta.size()) {
    throw DimensionError("CircleGroup: theta, xi and radii lengths differ");
  }
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    out[i] = circle_residual({g.theta[i], g.xi[i]}, g.radii[i]);
  }
  return out;
}

double circle_residual(CirclePoint q, double r) { return q.theta * q.theta + q.xi * q.xi - r * r; }

CirclePoint circle_project_orthogonal(CirclePoint point, double r) {
  const double norm = std::sqrt(point.theta * point.theta + point.xi * point.xi);
  if (norm == 0.0) {
    log_warning("circle projection of the origin; using (r, 0)");
    return {r, 0.0};
  }
  const double scale = r / norm;
  return {point.theta * scale, point.xi * scale};
}

ObliqueProjection circle_project_oblique(CirclePoint current, CirclePoint target, double r) {
  // |q̄ − 2λqₙ|² = r²  ⇔  a λ² + b λ + c = 0
  const double a = 4.0 * (current.theta * current.theta + current.xi * current.xi);
  const double b = -4.0 * (target.theta * current.theta + target.xi * current.xi);
  const double c = target.theta * target.theta + target.xi * target.xi - r * r;
  if (a == 0.0) throw NoProjection("oblique projection from the origin");
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) {
    throw NoProjection("oblique circle projection has no real root (step size too large)");
  }
  const double root = std::sqrt(disc);
  double best_lambda = 0.0;
  CirclePoint best;
  double best_dist = INFINITY;
  for (double lambda : {(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)}) {
    const CirclePoint p{target.theta - 2.0 * lambda * current.theta,
                        target.xi - 2.0 * lambda * current.xi};
    const double d = std::hypot(p.theta - current.theta, p.xi - current.xi);
    if (d < best_dist) {
      best_dist = d;
      best = p;
      best_lambda = lambda;
    }
  }
  return {best, best_lambda};
}

CircleMomentum circle_cotangent_project(CirclePoint q, CircleMomentum p) {
  const double r2 = q.theta * q.theta + q.xi * q.xi;
  if (r2 == 0.0) return p;
  const double normal = (q.theta * p.theta + q.xi * p.xi) / r2;
  return {p.theta - q.theta * normal, p.xi - q.xi * normal};
}

CirclePhase circle_a_step(CirclePhase state, double h) {
  const auto [theta, xi] = state.q;
  const double r2 = theta * theta + xi * xi;
  if (r2 == 0.0) return state;
  const double omega = (xi * state.p.theta - theta * state.p.xi) / r2;
  const double c = std::cos(omega * h);
  const double s = std::sin(omega * h);
  CirclePhase out;
  out.q.theta = c * theta + s * xi;
  out.q.xi = -s * theta + c * xi;
  out.p.theta = omega * out.q.xi;
  out.p.xi = -omega * out.q.theta;
  return out;
}

double slack_init(double& theta, double r) {
  theta = std::clamp(theta, -r, r);
  return std::sqrt(std::max(0.0, r * r - theta * theta));
}

std::vector<double> slack_init(std::span<double> theta, std::span<const double> radii) {
  if (theta.size() != radii.size()) throw DimensionError("slack_init: length mismatch");
  std::vector<double> xi(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!(radii[i] > 0.0)) throw std::invalid_argument("slack_init: radii must be positive");
    xi[i] = slack_init(theta[i], radii[i]);
  }
  return xi;
}

SpherePoint sphere_project(std::span<const double> row, double xi, double r) {
  double sq = xi * xi;
  for (double v : row) sq += v * v;
  SpherePoint out{std::vector<double>(row.size(), 0.0), 0.0};
  if (sq == 0.0) {
    log_warning("sphere projection of the zero vector; using (r e1, 0)");
    if (row.empty()) {
      out.xi = r;
    } else {
      out.row[0] = r;
    }
    return out;
  }
  const double scale = r / std::sqrt(sq);
  for (std::size_t j = 0; j < row.size(); ++j) out.row[j] = row[j] * scale;
  out.xi = xi * scale;
  return out;
}

std::vector<double> sphere_residual(const SphereGroup& g) {
  if (g.xi.size() != g.rows.rows() || g.radii.size() != g.rows.rows()) {
    throw DimensionError("SphereGroup: slack/radius count must equal row count");
  }
  std::vector<double> out(g.rows.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double sq = g.xi[i] * g.xi[i];
    for (double v : g.rows.row(i)) sq += v * v;
    out[i] = sq - g.radii[i] * g.radii[i];
  }
  return out;
}

double orth_residual(const Matrix& q) { return frobenius_norm(gram_defect(q)); }

QuasiNewtonResult orth_quasi_newton_project(const Matrix& q_n, Matrix q0,
                                            std::size_t max_iterations, double tol) {
  if (q_n.rows() != q0.rows() || q_n.cols() != q0.cols()) {
    throw DimensionError("orth_quasi_newton_project: shape mismatch " + shape_string(q_n) +
                         " vs " + shape_string(q0));
  }
  QuasiNewtonResult out;
  out.q = std::move(q0);
  if (max_iterations == 0) {
    out.residual = orth_residual(out.q);
    return out;
  }

  Matrix defect = gram_defect(out.q);
  out.residual = frobenius_norm(defect);
  int consecutive_increases = 0;
  while (out.iterations < max_iterations && out.residual > tol) {
    defect *= 0.5;
    out.q -= matmul(q_n, defect);
    ++out.iterations;

    defect = gram_defect(out.q);
    const double next = frobenius_norm(defect);
    if (!std::isfinite(next)) {
      throw ProjectionDiverged("quasi-Newton projection produced non-finite values");
    }
    consecutive_increases = next > out.residual ? consecutive_increases + 1 : 0;
    out.residual = next;
    if (consecutive_increases >= 3) {
      throw ProjectionDiverged("quasi-Newton projection diverged (residual " +
                               std::to_string(next) + "); reduce the step size");
    }
  }
  return out;
}

Matrix orth_cotangent_project(const Matrix& q, const Matrix& p_bar) {
  if (q.rows() != p_bar.rows() || q.cols() != p_bar.cols()) {
    throw DimensionError("orth_cotangent_project: shape mismatch");
  }
  Matrix sym = symmetric_part_sum(matmul_tn(p_bar, q));
  sym *= 0.5;
  return p_bar - matmul(q, sym);
}

double orth_cotangent_residual(const Matrix& q, const Matrix& p) {
  return frobenius_norm(symmetric_part_sum(matmul_tn(p, q)));
}

}  // namespace colang
