#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "colang/constraints.hpp"
#include "colang/nn.hpp"
#include "colang/rng.hpp"

namespace colang {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ConstraintKind { None, Circle, Orthogonal };

/// Constraint applied to the weight matrix of one layer. Biases are never
/// constrained.
struct LayerConstraint {
  ConstraintKind kind = ConstraintKind::None;
  double radius = 0.0;  // circle only
};

struct Hyper {
  double h = 0.1;
  double gamma = 1.0;
  double tau = 0.0;
  double momentum = 0.0;      // sgd-m only
  double weight_decay = 0.0;  // sgd, sgd-m, sgld only
  std::string split = "ABO";
  std::size_t qn_iterations = 5;
  double qn_tol = 1e-8;
};

// Position and momentum of one training trajectory. Weight momenta double as
// the SGD-momentum buffer for the sgd-m baseline.
struct TrajectoryState {
  MlpModel model;
  std::vector<LayerConstraint> constraints;  // one per layer
  std::vector<Matrix> slack;                 // circle layers only, shaped like the weight
  std::vector<Matrix> weight_momentum;
  std::vector<std::vector<double>> bias_momentum;
  std::vector<Matrix> slack_momentum;
  bool momentum_ready = false;
  std::size_t step = 0;

  bool has_constraint(ConstraintKind kind) const;
};

/// Builds a state on the constraint manifold: circle slacks via slack_init
/// (clamping weights into [−r, r]); orthogonal layers must already satisfy
/// QᵀQ = I. Momenta start at zero.
TrajectoryState make_state(MlpModel model, std::vector<LayerConstraint> constraints);

/// p₀ = −h · Π(∇L(θ₀)): the initial gradient mapped into velocity units and
/// projected onto the cotangent space.
void init_momentum(TrajectoryState& state, const Gradients& grads, const Hyper& hyper);

// Largest violations over all constrained layers. Circle values are relative
// (|g|/r²); orthogonality values are Frobenius norms.
struct ConstraintReport {
  double circle = 0.0;
  double orth = 0.0;
  double circle_cotangent = 0.0;
  double orth_cotangent = 0.0;

  double position() const { return std::max(circle, orth); }
};

ConstraintReport constraint_report(const TrajectoryState& state);

using GradProvider = std::function<Gradients(const MlpModel&)>;

// ---------------------------------------------------------- baselines ---

/// θ ← θ − h(g + wd·θ)
void sgd_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper);
/// PyTorch form: buf ← μ·buf + (g + wd·θ) (buf = g on the first call), θ ← θ − h·buf.
void sgd_momentum_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper);
/// θ ← θ − h(g + wd·θ) + sqrt(2τh)·R
void sgld_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper, Rng& rng);

/// Unconstrained Langevin sub-steps on (θ, p).
void langevin_a_step(TrajectoryState& state, const Hyper& hyper);
void langevin_b_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper);
void langevin_o_step(TrajectoryState& state, const Hyper& hyper, Rng& rng);

// ------------------------------------------------- constrained overdamped ---

/// Euler–Maruyama step followed by the per-layer projection: orthogonal
/// circle projection for circle layers, quasi-Newton for orthogonal layers.
void constrained_overdamped_step(TrajectoryState& state, const Gradients& grads,
                                 const Hyper& hyper, Rng& rng);
void ccolod_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper, Rng& rng);
void ocolod_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper, Rng& rng);

// ------------------------------------------------ constrained underdamped ---

/// A: geodesic drift (exact rotation on circles, RATTLE for orthogonality).
void constrained_a_step(TrajectoryState& state, const Hyper& hyper);
/// B: gradient kick projected onto the cotangent space.
void constrained_b_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper);
/// O: exact Ornstein–Uhlenbeck update projected onto the cotangent space.
void constrained_o_step(TrajectoryState& state, const Hyper& hyper, Rng& rng);

void ccolud_a_step(TrajectoryState& state, const Hyper& hyper);
void ccolud_b_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper);
void ccolud_o_step(TrajectoryState& state, const Hyper& hyper, Rng& rng);
void ocolud_a_step(TrajectoryState& state, const Hyper& hyper);
void ocolud_b_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper);
void ocolud_o_step(TrajectoryState& state, const Hyper& hyper, Rng& rng);

/// Applies the letters of `split` left to right, one gradient evaluation per B.
/// Throws ConfigError on letters outside {A, B, O}.
void compose_split(std::string_view split, TrajectoryState& state, const GradProvider& grad,
                   const Hyper& hyper, Rng& rng);

// ------------------------------------------------------------ methods ---

enum class Method { Sgd, SgdMomentum, Sgld, CColod, OColod, CColud, OColud };

Method parse_method(const std::string& name);
std::string to_string(Method m);
bool is_underdamped(Method m);
/// Constraint family a method requires, or None for the baselines.
ConstraintKind required_constraint(Method m);

/// One optimizer step of `method`, drawing minibatch gradients from `grad`.
void train_step(Method method, TrajectoryState& state, const GradProvider& grad,
                const Hyper& hyper, Rng& rng);

}  // namespace colang
