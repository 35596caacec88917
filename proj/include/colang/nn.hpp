#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "colang/matrix.hpp"
#include "colang/rng.hpp"

namespace colang {

enum class Activation { ReLU, Identity, Sigmoid };
enum class LossKind { BCE, CrossEntropy };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct Layer {
  Matrix weight;             // d_out x d_in
  std::vector<double> bias;  // d_out
  Activation activation = Activation::Identity;
};

// Feedforward network z^L ∘ ... ∘ z^1 with z^l(x) = act(W^l x + b^l).
class MlpModel {
 public:
  MlpModel() = default;
  /// widths = {d0, d1, ..., dL}. Hidden layers use `hidden`, the last layer `output`.
  MlpModel(const std::vector<std::size_t>& widths, Activation hidden, Activation output);
  explicit MlpModel(std::vector<Layer> layers);

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  Layer& layer(std::size_t l) { return layers_.at(l); }
  const Layer& layer(std::size_t l) const { return layers_.at(l); }

  std::size_t depth() const { return layers_.size(); }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

 private:
  void check_chain() const;

  std::vector<Layer> layers_;
};

struct Batch {
  Matrix inputs;               // N x d0
  std::vector<double> labels;  // {0,1} for BCE, class index for cross-entropy
};

// Mirrors the shapes of an MlpModel.
struct Gradients {
  std::vector<Matrix> weight;
  std::vector<std::vector<double>> bias;

  static Gradients zeros_like(const MlpModel& model);
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

/// Probability clamp used by the BCE loss.
inline constexpr double kBceEpsilon = 1e-12;

Matrix forward(const MlpModel& model, const Matrix& inputs);

/// Mean loss of predictions against labels.
double loss_from_predictions(const Matrix& predictions, std::span<const double> labels,
                             LossKind kind);
double loss(const MlpModel& model, const Batch& batch, LossKind kind);

/// Exact gradient of the mean loss. For the sigmoid/BCE pairing the output
/// delta is the analytic (p - y) / N, i.e. the derivative of the unclamped loss.
LossAndGradients backprop(const MlpModel& model, const Batch& batch, LossKind kind);

/// ∇ₓ p(x) = F^L W^L ... F^1 W^1 for a scalar-output model.
std::vector<double> input_gradient(const MlpModel& model, std::span<const double> x);

/// W, b ~ U(-1/sqrt(N_in), 1/sqrt(N_in)) per layer.
void init_standard(Rng& rng, MlpModel& model);

/// Orthogonal weights for the selected layers: Householder QR of a Gaussian
/// matrix in tall orientation, columns sign-fixed by diag(R). Biases untouched.
void init_orthogonal(Rng& rng, MlpModel& model, std::span<const std::size_t> layers);

/// Throws std::invalid_argument when the model head does not match the loss.
void check_loss_compatible(const MlpModel& model, LossKind kind);

}  // namespace colang
