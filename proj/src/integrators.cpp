#include "colang/integrators.hpp"

#include <cmath>
#include <string>

namespace colang {
namespace {

bool is_wide(const Matrix& w) { return w.rows() < w.cols(); }

// Orthogonality constraints act on the tall orientation of the weight matrix.
Matrix to_tall(const Matrix& w) { return is_wide(w) ? w.transposed() : w; }

void store_tall(Matrix& w, Matrix q) { w = is_wide(w) ? q.transposed() : std::move(q); }

void check_grads(const TrajectoryState& state, const Gradients& grads) {
  const auto& layers = state.model.layers();
  if (grads.weight.size() != layers.size() || grads.bias.size() != layers.size()) {
    throw DimensionError("gradient layer count does not match the model");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (grads.weight[l].rows() != layers[l].weight.rows() ||
        grads.weight[l].cols() != layers[l].weight.cols() ||
        grads.bias[l].size() != layers[l].bias.size()) {
      throw DimensionError("gradient shape mismatch in layer " + std::to_string(l));
    }
  }
}

void ensure_momentum(TrajectoryState& state) {
  const auto& layers = state.model.layers();
  if (state.weight_momentum.size() == layers.size()) return;
  state.weight_momentum.clear();
  state.bias_momentum.clear();
  state.slack_momentum.assign(layers.size(), Matrix());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    state.weight_momentum.emplace_back(layers[l].weight.rows(), layers[l].weight.cols());
    state.bias_momentum.emplace_back(layers[l].bias.size(), 0.0);
    if (state.constraints[l].kind == ConstraintKind::Circle) {
      state.slack_momentum[l] = Matrix(layers[l].weight.rows(), layers[l].weight.cols());
    }
  }
}

// Euler–Maruyama on an unconstrained block: v ← v − h·g (+ σR).
void em_update(std::span<double> v, std::span<const double> g, double h, double sigma,
               Rng& rng) {
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = v[k] - h * g[k];
  if (sigma > 0.0) {
    for (double& x : v) x += sigma * rng.normal();
  }
}

void sgd_update(std::span<double> v, std::span<const double> g, double h, double wd) {
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = v[k] - h * (g[k] + wd * v[k]);
}

double overdamped_sigma(const Hyper& hyper) {
  return hyper.tau > 0.0 ? std::sqrt(2.0 * hyper.tau * hyper.h) : 0.0;
}

struct OuCoefficients {
  double decay = 1.0;
  double sigma = 0.0;
  bool identity = false;
};

OuCoefficients ou_coefficients(const Hyper& hyper) {
  OuCoefficients c;
  c.identity = hyper.gamma == 0.0 && hyper.tau == 0.0;
  c.decay = std::exp(-hyper.gamma * hyper.h);
  c.sigma = hyper.tau > 0.0 ? std::sqrt(hyper.tau * (1.0 - std::exp(-2.0 * hyper.gamma * hyper.h)))
                            : 0.0;
  return c;
}

void ou_update(std::span<double> p, const OuCoefficients& c, Rng& rng) {
  for (double& x : p) x = c.decay * x;
  if (c.sigma > 0.0) {
    for (double& x : p) x += c.sigma * rng.normal();
  }
}

void project_circle_momenta(const Matrix& theta, const Matrix& xi, Matrix& p_theta,
                            Matrix& p_xi) {
  auto t = theta.values();
  auto s = xi.values();
  auto pt = p_theta.values();
  auto ps = p_xi.values();
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto p = circle_cotangent_project({t[k], s[k]}, {pt[k], ps[k]});
    pt[k] = p.theta;
    ps[k] = p.xi;
  }
}

void require_family(const TrajectoryState& state, ConstraintKind allowed, const char* method) {
  for (const auto& c : state.constraints) {
    if (c.kind != ConstraintKind::None && c.kind != allowed) {
      throw ConfigError(std::string(method) + " does not support this constraint family");
    }
  }
}

void require_unconstrained(const TrajectoryState& state, const char* method) {
  if (state.has_constraint(ConstraintKind::Circle) ||
      state.has_constraint(ConstraintKind::Orthogonal)) {
    throw ConfigError(std::string(method) + " is an unconstrained method");
  }
}

}  // namespace

bool TrajectoryState::has_constraint(ConstraintKind kind) const {
  for (const auto& c : constraints)
    if (c.kind == kind) return true;
  return false;
}

TrajectoryState make_state(MlpModel model, std::vector<LayerConstraint> constraints) {
  TrajectoryState state;
  state.model = std::move(model);
  const std::size_t depth = state.model.depth();
  if (constraints.empty()) constraints.resize(depth);
  if (constraints.size() != depth) {
    throw ConfigError("expected one constraint entry per layer (" + std::to_string(depth) + ")");
  }
  state.constraints = std::move(constraints);
  state.slack.assign(depth, Matrix());
  for (std::size_t l = 0; l < depth; ++l) {
    auto& layer = state.model.layer(l);
    const auto& c = state.constraints[l];
    if (c.kind == ConstraintKind::Circle) {
      if (!(c.radius > 0.0)) throw ConfigError("circle constraint requires radii > 0");
      Matrix xi(layer.weight.rows(), layer.weight.cols());
      auto w = layer.weight.values();
      auto s = xi.values();
      for (std::size_t k = 0; k < w.size(); ++k) s[k] = slack_init(w[k], c.radius);
      state.slack[l] = std::move(xi);
    } else if (c.kind == ConstraintKind::Orthogonal) {
      const double res = orth_residual(to_tall(layer.weight));
      if (res > 1e-8) {
        throw ConfigError("orthogonal layer " + std::to_string(l) +
                          " is not initialised on the manifold (residual " + std::to_string(res) +
                          ")");
      }
    }
  }
  ensure_momentum(state);
  return state;
}

void init_momentum(TrajectoryState& state, const Gradients& grads, const Hyper& hyper) {
  check_grads(state, grads);
  ensure_momentum(state);
  const double scale = -hyper.h;
  const auto& layers = state.model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix p = grads.weight[l] * scale;
    const auto& c = state.constraints[l];
    if (c.kind == ConstraintKind::Circle) {
      Matrix p_xi(p.rows(), p.cols());
      project_circle_momenta(layers[l].weight, state.slack[l], p, p_xi);
      state.slack_momentum[l] = std::move(p_xi);
    } else if (c.kind == ConstraintKind::Orthogonal) {
      Matrix q = to_tall(layers[l].weight);
      Matrix projected = orth_cotangent_project(q, to_tall(p));
      store_tall(p, std::move(projected));
    }
    state.weight_momentum[l] = std::move(p);
    for (std::size_t j = 0; j < grads.bias[l].size(); ++j) {
      state.bias_momentum[l][j] = scale * grads.bias[l][j];
    }
  }
  state.momentum_ready = true;
}

ConstraintReport constraint_report(const TrajectoryState& state) {
  ConstraintReport report;
  const auto& layers = state.model.layers();
  const bool have_momentum = state.weight_momentum.size() == layers.size();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& c = state.constraints[l];
    if (c.kind == ConstraintKind::Circle) {
      const double r2 = c.radius * c.radius;
      auto w = layers[l].weight.values();
      auto s = state.slack[l].values();
      for (std::size_t k = 0; k < w.size(); ++k) {
        report.circle = std::max(report.circle, std::abs(circle_residual({w[k], s[k]}, c.radius)) / r2);
        if (have_momentum) {
          const double pt = state.weight_momentum[l].values()[k];
          const double ps = state.slack_momentum[l].values()[k];
          report.circle_cotangent = std::max(report.circle_cotangent, std::abs(w[k] * pt + s[k] * ps));
        }
      }
    } else if (c.kind == ConstraintKind::Orthogonal) {
      const Matrix q = to_tall(layers[l].weight);
      report.orth = std::max(report.orth, orth_residual(q));
      if (have_momentum) {
        report.orth_cotangent = std::max(
            report.orth_cotangent, orth_cotangent_residual(q, to_tall(state.weight_momentum[l])));
      }
    }
  }
  return report;
}

// ---------------------------------------------------------- baselines ---

void sgd_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper) {
  check_grads(state, grads);
  auto& layers = state.model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    sgd_update(layers[l].weight.values(), grads.weight[l].values(), hyper.h, hyper.weight_decay);
    sgd_update(layers[l].bias, grads.bias[l], hyper.h, hyper.weight_decay);
  }
  ++state.step;
}

void sgd_momentum_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper) {
  check_grads(state, grads);
  ensure_momentum(state);
  auto& layers = state.model.layers();
  const bool first = !state.momentum_ready;
  auto update = [&](std::span<double> v, std::span<const double> g, std::span<double> buf) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double d = g[k] + hyper.weight_decay * v[k];
      buf[k] = first ? d : hyper.momentum * buf[k] + d;
      v[k] = v[k] - hyper.h * buf[k];
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight.values(), grads.weight[l].values(), state.weight_momentum[l].values());
    update(layers[l].bias, grads.bias[l], state.bias_momentum[l]);
  }
  state.momentum_ready = true;
  ++state.step;
}

void sgld_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper, Rng& rng) {
  check_grads(state, grads);
  auto& layers = state.model.layers();
  const double sigma = overdamped_sigma(hyper);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (auto v : {layers[l].weight.values(), std::span<double>(layers[l].bias)}) {
      const auto g = v.data() == layers[l].bias.data() ? std::span<const double>(grads.bias[l])
                                                       : grads.weight[l].values();
      sgd_update(v, g, hyper.h, hyper.weight_decay);
      if (sigma > 0.0) {
        for (double& x : v) x += sigma * rng.normal();
      }
    }
  }
  ++state.step;
}

void langevin_a_step(TrajectoryState& state, const Hyper& hyper) {
  ensure_momentum(state);
  auto& layers = state.model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto w = layers[l].weight.values();
    auto pw = state.weight_momentum[l].values();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = w[k] + hyper.h * pw[k];
    auto& b = layers[l].bias;
    const auto& pb = state.bias_momentum[l];
    for (std::size_t k = 0; k < b.size(); ++k) b[k] = b[k] + hyper.h * pb[k];
  }
}

void langevin_b_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper) {
  check_grads(state, grads);
  ensure_momentum(state);
  for (std::size_t l = 0; l < state.model.depth(); ++l) {
    auto pw = state.weight_momentum[l].values();
    auto gw = grads.weight[l].values();
    for (std::size_t k = 0; k < pw.size(); ++k) pw[k] = pw[k] - hyper.h * gw[k];
    auto& pb = state.bias_momentum[l];
    for (std::size_t k = 0; k < pb.size(); ++k) pb[k] = pb[k] - hyper.h * grads.bias[l][k];
  }
}

void langevin_o_step(TrajectoryState& state, const Hyper& hyper, Rng& rng) {
  ensure_momentum(state);
  const auto c = ou_coefficients(hyper);
  if (c.identity) return;
  for (std::size_t l = 0; l < state.model.depth(); ++l) {
    ou_update(state.weight_momentum[l].values(), c, rng);
    ou_update(state.bias_momentum[l], c, rng);
  }
}

// ------------------------------------------------- constrained overdamped ---

void constrained_overdamped_step(TrajectoryState& state, const Gradients& grads,
                                 const Hyper& hyper, Rng& rng) {
  check_grads(state, grads);
  auto& layers = state.model.layers();
  const double sigma = overdamped_sigma(hyper);
  std::vector<double> noise_theta;
  std::vector<double> noise_xi;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& weight = layers[l].weight;
    const auto& c = state.constraints[l];
    switch (c.kind) {
      case ConstraintKind::None:
        em_update(weight.values(), grads.weight[l].values(), hyper.h, sigma, rng);
        break;
      case ConstraintKind::Circle: {
        auto w = weight.values();
        auto s = state.slack[l].values();
        auto g = grads.weight[l].values();
        noise_theta.assign(w.size(), 0.0);
        noise_xi.assign(w.size(), 0.0);
        if (sigma > 0.0) {
          rng.fill_normal(noise_theta);
          rng.fill_normal(noise_xi);
        }
        for (std::size_t k = 0; k < w.size(); ++k) {
          // ∇_ξ V = 0: the slack only feels the noise.
          const CirclePoint bar{w[k] - hyper.h * g[k] + sigma * noise_theta[k],
                                s[k] + sigma * noise_xi[k]};
          const auto q = circle_project_orthogonal(bar, c.radius);
          w[k] = q.theta;
          s[k] = q.xi;
        }
        break;
      }
      case ConstraintKind::Orthogonal: {
        const Matrix q_n = to_tall(weight);
        Matrix q0 = q_n - to_tall(grads.weight[l]) * hyper.h;
        if (sigma > 0.0) q0 += standard_normal_matrix(rng, q0.rows(), q0.cols()) * sigma;
        auto result = orth_quasi_newton_project(q_n, std::move(q0), hyper.qn_iterations, hyper.qn_tol);
        store_tall(weight, std::move(result.q));
        break;
      }
    }
    em_update(layers[l].bias, grads.bias[l], hyper.h, sigma, rng);
  }
  ++state.step;
}

void ccolod_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper, Rng& rng) {
  require_family(state, ConstraintKind::Circle, "c-colod");
  constrained_overdamped_step(state, grads, hyper, rng);
}

void ocolod_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper, Rng& rng) {
  require_family(state, ConstraintKind::Orthogonal, "o-colod");
  constrained_overdamped_step(state, grads, hyper, rng);
}

// ------------------------------------------------ constrained underdamped ---

void constrained_a_step(TrajectoryState& state, const Hyper& hyper) {
  ensure_momentum(state);
  auto& layers = state.model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& weight = layers[l].weight;
    auto& p = state.weight_momentum[l];
    const auto& c = state.constraints[l];
    switch (c.kind) {
      case ConstraintKind::None: {
        auto w = weight.values();
        auto pw = p.values();
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = w[k] + hyper.h * pw[k];
        break;
      }
      case ConstraintKind::Circle: {
        auto w = weight.values();
        auto s = state.slack[l].values();
        auto pw = p.values();
        auto ps = state.slack_momentum[l].values();
        for (std::size_t k = 0; k < w.size(); ++k) {
          const auto next = circle_a_step({{w[k], s[k]}, {pw[k], ps[k]}}, hyper.h);
          w[k] = next.q.theta;
          s[k] = next.q.xi;
          pw[k] = next.p.theta;
          ps[k] = next.p.xi;
        }
        break;
      }
      case ConstraintKind::Orthogonal: {
        // RATTLE: drift, quasi-Newton position projection, momentum recovery
        // from the realised displacement, cotangent projection at Q_{n+1}.
        const Matrix q_n = to_tall(weight);
        Matrix p_n = to_tall(p);
        Matrix q_bar = q_n + p_n * hyper.h;
        auto result = orth_quasi_newton_project(q_n, q_bar, hyper.qn_iterations, hyper.qn_tol);
        Matrix p_bar = p_n + (result.q - q_bar) * (1.0 / hyper.h);
        Matrix p_next = orth_cotangent_project(result.q, p_bar);
        store_tall(weight, std::move(result.q));
        store_tall(p, std::move(p_next));
        break;
      }
    }
    auto& b = layers[l].bias;
    const auto& pb = state.bias_momentum[l];
    for (std::size_t k = 0; k < b.size(); ++k) b[k] = b[k] + hyper.h * pb[k];
  }
}

void constrained_b_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper) {
  check_grads(state, grads);
  ensure_momentum(state);
  auto& layers = state.model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& p = state.weight_momentum[l];
    const auto& c = state.constraints[l];
    switch (c.kind) {
      case ConstraintKind::None: {
        auto pw = p.values();
        auto gw = grads.weight[l].values();
        for (std::size_t k = 0; k < pw.size(); ++k) pw[k] = pw[k] - hyper.h * gw[k];
        break;
      }
      case ConstraintKind::Circle: {
        auto pw = p.values();
        auto gw = grads.weight[l].values();
        for (std::size_t k = 0; k < pw.size(); ++k) pw[k] = pw[k] - hyper.h * gw[k];
        project_circle_momenta(layers[l].weight, state.slack[l], p, state.slack_momentum[l]);
        break;
      }
      case ConstraintKind::Orthogonal: {
        const Matrix q = to_tall(layers[l].weight);
        Matrix p_bar = to_tall(p) - to_tall(grads.weight[l]) * hyper.h;
        store_tall(p, orth_cotangent_project(q, p_bar));
        break;
      }
    }
    auto& pb = state.bias_momentum[l];
    for (std::size_t k = 0; k < pb.size(); ++k) pb[k] = pb[k] - hyper.h * grads.bias[l][k];
  }
}

void constrained_o_step(TrajectoryState& state, const Hyper& hyper, Rng& rng) {
  ensure_momentum(state);
  const auto coeff = ou_coefficients(hyper);
  if (coeff.identity) return;
  auto& layers = state.model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& p = state.weight_momentum[l];
    const auto& c = state.constraints[l];
    switch (c.kind) {
      case ConstraintKind::None:
        ou_update(p.values(), coeff, rng);
        break;
      case ConstraintKind::Circle:
        ou_update(p.values(), coeff, rng);
        ou_update(state.slack_momentum[l].values(), coeff, rng);
        project_circle_momenta(layers[l].weight, state.slack[l], p, state.slack_momentum[l]);
        break;
      case ConstraintKind::Orthogonal: {
        Matrix p_bar = to_tall(p);
        ou_update(p_bar.values(), coeff, rng);
        store_tall(p, orth_cotangent_project(to_tall(layers[l].weight), p_bar));
        break;
      }
    }
    ou_update(state.bias_momentum[l], coeff, rng);
  }
}

void ccolud_a_step(TrajectoryState& state, const Hyper& hyper) {
  require_family(state, ConstraintKind::Circle, "c-colud");
  constrained_a_step(state, hyper);
}
void ccolud_b_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper) {
  require_family(state, ConstraintKind::Circle, "c-colud");
  constrained_b_step(state, grads, hyper);
}
void ccolud_o_step(TrajectoryState& state, const Hyper& hyper, Rng& rng) {
  require_family(state, ConstraintKind::Circle, "c-colud");
  constrained_o_step(state, hyper, rng);
}
void ocolud_a_step(TrajectoryState& state, const Hyper& hyper) {
  require_family(state, ConstraintKind::Orthogonal, "o-colud");
  constrained_a_step(state, hyper);
}
void ocolud_b_step(TrajectoryState& state, const Gradients& grads, const Hyper& hyper) {
  require_family(state, ConstraintKind::Orthogonal, "o-colud");
  constrained_b_step(state, grads, hyper);
}
void ocolud_o_step(TrajectoryState& state, const Hyper& hyper, Rng& rng) {
  require_family(state, ConstraintKind::Orthogonal, "o-colud");
  constrained_o_step(state, hyper, rng);
}

void compose_split(std::string_view split, TrajectoryState& state, const GradProvider& grad,
                   const Hyper& hyper, Rng& rng) {
  for (char letter : split) {
    if (letter != 'A' && letter != 'B' && letter != 'O') {
      throw ConfigError(std::string("unknown splitting letter '") + letter + "'");
    }
  }
  for (char letter : split) {
    switch (letter) {
      case 'A':
        constrained_a_step(state, hyper);
        break;
      case 'B':
        constrained_b_step(state, grad(state.model), hyper);
        break;
      default:
        constrained_o_step(state, hyper, rng);
        break;
    }
  }
  if (!split.empty()) ++state.step;
}

// ------------------------------------------------------------ methods ---

Method parse_method(const std::string& name) {
  if (name == "sgd") return Method::Sgd;
  if (name == "sgd-m") return Method::SgdMomentum;
  if (name == "sgld") return Method::Sgld;
  if (name == "c-colod") return Method::CColod;
  if (name == "o-colod") return Method::OColod;
  if (name == "c-colud") return Method::CColud;
  if (name == "o-colud") return Method::OColud;
  throw ConfigError("unknown optimizer '" + name + "'");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Sgd:
      return "sgd";
    case Method::SgdMomentum:
      return "sgd-m";
    case Method::Sgld:
      return "sgld";
    case Method::CColod:
      return "c-colod";
    case Method::OColod:
      return "o-colod";
    case Method::CColud:
      return "c-colud";
    case Method::OColud:
      return "o-colud";
  }
  return "?";
}

bool is_underdamped(Method m) { return m == Method::CColud || m == Method::OColud; }

ConstraintKind required_constraint(Method m) {
  switch (m) {
    case Method::CColod:
    case Method::CColud:
      return ConstraintKind::Circle;
    case Method::OColod:
    case Method::OColud:
      return ConstraintKind::Orthogonal;
    default:
      return ConstraintKind::None;
  }
}

void train_step(Method method, TrajectoryState& state, const GradProvider& grad,
                const Hyper& hyper, Rng& rng) {
  switch (method) {
    case Method::Sgd:
      require_unconstrained(state, "sgd");
      sgd_step(state, grad(state.model), hyper);
      break;
    case Method::SgdMomentum:
      require_unconstrained(state, "sgd-m");
      sgd_momentum_step(state, grad(state.model), hyper);
      break;
    case Method::Sgld:
      require_unconstrained(state, "sgld");
      sgld_step(state, grad(state.model), hyper, rng);
      break;
    case Method::CColod:
      ccolod_step(state, grad(state.model), hyper, rng);
      break;
    case Method::OColod:
      ocolod_step(state, grad(state.model), hyper, rng);
      break;
    case Method::CColud:
      require_family(state, ConstraintKind::Circle, "c-colud");
      compose_split(hyper.split, state, grad, hyper, rng);
      break;
    case Method::OColud:
      require_family(state, ConstraintKind::Orthogonal, "o-colud");
      compose_split(hyper.split, state, grad, hyper, rng);
      break;
  }
}

}  // namespace colang
