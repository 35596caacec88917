#include "colang/nn.hpp"

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace colang {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::ReLU:
      return x > 0.0 ? x : 0.0;
    case Activation::Sigmoid:
      return sigmoid(x);
    case Activation::Identity:
      break;
  }
  return x;
}

// Derivative expressed through the pre-activation; ReLU'(0) = 0.
double activation_slope(Activation a, double pre) {
  switch (a) {
    case Activation::ReLU:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: {
      const double s = sigmoid(pre);
      return s * (1.0 - s);
    }
    case Activation::Identity:
      break;
  }
  return 1.0;
}

// pre = inputs W^T + b
Matrix affine(const Layer& layer, const Matrix& inputs) {
  Matrix pre = matmul_nt(inputs, layer.weight);
  for (std::size_t i = 0; i < pre.rows(); ++i) {
    auto row = pre.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
  }
  return pre;
}

Matrix apply(Activation a, Matrix pre) {
  if (a == Activation::Identity) return pre;
  for (double& v : pre.values()) v = activate(a, v);
  return pre;
}

void check_inputs(const MlpModel& model, const Matrix& inputs) {
  if (model.depth() == 0) throw std::invalid_argument("model has no layers");
  if (inputs.cols() != model.input_dim()) {
    throw DimensionError("inputs have " + std::to_string(inputs.cols()) +
                         " columns, model expects " + std::to_string(model.input_dim()));
  }
}

void check_labels(std::size_t rows, std::span<const double> labels) {
  if (labels.size() != rows) {
    throw DimensionError("label count " + std::to_string(labels.size()) +
                         " does not match batch size " + std::to_string(rows));
  }
  if (rows == 0) throw std::invalid_argument("empty batch");
}

std::size_t class_index(double label, std::size_t classes) {
  const auto k = static_cast<long long>(std::llround(label));
  if (k < 0 || static_cast<std::size_t>(k) >= classes || static_cast<double>(k) != label) {
    throw std::invalid_argument("invalid class label " + std::to_string(label));
  }
  return static_cast<std::size_t>(k);
}

std::vector<double> softmax_row(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - m);
    sum += out[j];
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "identity" || name == "linear") return Activation::Identity;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::ReLU:
      return "relu";
    case Activation::Sigmoid:
      return "sigmoid";
    case Activation::Identity:
      break;
  }
  return "identity";
}

MlpModel::MlpModel(const std::vector<std::size_t>& widths, Activation hidden, Activation output) {
  if (widths.size() < 2) throw std::invalid_argument("MlpModel needs at least two widths");
  for (std::size_t l = 1; l < widths.size(); ++l) {
    if (widths[l] == 0 || widths[l - 1] == 0) throw std::invalid_argument("zero layer width");
    Layer layer;
    layer.weight = Matrix(widths[l], widths[l - 1]);
    layer.bias.assign(widths[l], 0.0);
    layer.activation = l + 1 == widths.size() ? output : hidden;
    layers_.push_back(std::move(layer));
  }
}

MlpModel::MlpModel(std::vector<Layer> layers) : layers_(std::move(layers)) { check_chain(); }

void MlpModel::check_chain() const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw DimensionError("layer " + std::to_string(l) + ": bias length mismatch");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw DimensionError("layer " + std::to_string(l) + ": input width " +
                           std::to_string(layer.weight.cols()) + " does not chain to " +
                           std::to_string(layers_[l - 1].weight.rows()));
    }
  }
}

std::size_t MlpModel::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
std::size_t MlpModel::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.rows(); }

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

Gradients Gradients::zeros_like(const MlpModel& model) {
  Gradients g;
  for (const auto& layer : model.layers()) {
    g.weight.emplace_back(layer.weight.rows(), layer.weight.cols());
    g.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

void check_loss_compatible(const MlpModel& model, LossKind kind) {
  if (model.depth() == 0) throw std::invalid_argument("model has no layers");
  const Activation head = model.layers().back().activation;
  if (kind == LossKind::BCE) {
    if (head != Activation::Sigmoid || model.output_dim() != 1) {
      throw std::invalid_argument("BCE loss requires a single sigmoid output");
    }
  } else if (head != Activation::Identity || model.output_dim() < 2) {
    throw std::invalid_argument("cross-entropy loss requires an identity head with >= 2 outputs");
  }
}

Matrix forward(const MlpModel& model, const Matrix& inputs) {
  check_inputs(model, inputs);
  Matrix z = inputs;
  for (const auto& layer : model.layers()) z = apply(layer.activation, affine(layer, z));
  return z;
}

double loss_from_predictions(const Matrix& predictions, std::span<const double> labels,
                             LossKind kind) {
  check_labels(predictions.rows(), labels);
  const auto n = static_cast<double>(predictions.rows());
  double total = 0.0;
  if (kind == LossKind::BCE) {
    if (predictions.cols() != 1) throw DimensionError("BCE expects a single output column");
    for (std::size_t i = 0; i < predictions.rows(); ++i) {
      const double p = std::clamp(predictions(i, 0), kBceEpsilon, 1.0 - kBceEpsilon);
      const double y = labels[i];
      total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
  } else {
    for (std::size_t i = 0; i < predictions.rows(); ++i) {
      const auto row = predictions.row(i);
      const std::size_t k = class_index(labels[i], row.size());
      const double m = *std::max_element(row.begin(), row.end());
      double sum = 0.0;
      for (double v : row) sum += std::exp(v - m);
      total += m + std::log(sum) - row[k];
    }
  }
  return total / n;
}

double loss(const MlpModel& model, const Batch& batch, LossKind kind) {
  check_loss_compatible(model, kind);
  return loss_from_predictions(forward(model, batch.inputs), batch.labels, kind);
}

LossAndGradients backprop(const MlpModel& model, const Batch& batch, LossKind kind) {
  check_loss_compatible(model, kind);
  check_inputs(model, batch.inputs);
  check_labels(batch.inputs.rows(), batch.labels);

  const auto& layers = model.layers();
  const std::size_t depth = layers.size();
  std::vector<Matrix> pre(depth);
  std::vector<Matrix> post(depth + 1);
  post[0] = batch.inputs;
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l] = affine(layers[l], post[l]);
    post[l + 1] = apply(layers[l].activation, pre[l]);
  }

  LossAndGradients out;
  out.loss = loss_from_predictions(post[depth], batch.labels, kind);
  out.grads = Gradients::zeros_like(model);

  const std::size_t n = batch.inputs.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix& prediction = post[depth];
  Matrix delta(n, prediction.cols());
  if (kind == LossKind::BCE) {
    for (std::size_t i = 0; i < n; ++i) delta(i, 0) = (prediction(i, 0) - batch.labels[i]) * inv_n;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      auto probs = softmax_row(prediction.row(i));
      probs[class_index(batch.labels[i], probs.size())] -= 1.0;
      for (std::size_t j = 0; j < probs.size(); ++j) delta(i, j) = probs[j] * inv_n;
    }
  }

  for (std::size_t l = depth; l-- > 0;) {
    out.grads.weight[l] = matmul_tn(delta, post[l]);
    auto& db = out.grads.bias[l];
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = delta.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) db[j] += row[j];
    }
    if (l == 0) break;
    Matrix next = matmul(delta, layers[l].weight);
    const Activation act = layers[l - 1].activation;
    if (act != Activation::Identity) {
      auto v = next.values();
      auto a = pre[l - 1].values();
      for (std::size_t k = 0; k < v.size(); ++k) v[k] *= activation_slope(act, a[k]);
    }
    delta = std::move(next);
  }
  return out;
}

std::vector<double> input_gradient(const MlpModel& model, std::span<const double> x) {
  if (model.output_dim() != 1) {
    throw std::invalid_argument("input_gradient requires a scalar-output model");
  }
  Matrix point(1, x.size(), std::vector<double>(x.begin(), x.end()));
  check_inputs(model, point);

  const auto& layers = model.layers();
  std::vector<Matrix> pre(layers.size());
  Matrix z = point;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    pre[l] = affine(layers[l], z);
    z = apply(layers[l].activation, pre[l]);
  }

  // Row vector v = F^L W^L ... F^l W^l, accumulated from the output side.
  Matrix v(1, 1, 1.0);
  for (std::size_t l = layers.size(); l-- > 0;) {
    auto vals = v.values();
    auto a = pre[l].values();
    for (std::size_t k = 0; k < vals.size(); ++k) vals[k] *= activation_slope(layers[l].activation, a[k]);
    v = matmul(v, layers[l].weight);
  }
  return {v.values().begin(), v.values().end()};
}

void init_standard(Rng& rng, MlpModel& model) {
  for (auto& layer : model.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
    for (double& b : layer.bias) b = rng.uniform(-bound, bound);
  }
}

void init_orthogonal(Rng& rng, MlpModel& model, std::span<const std::size_t> layers) {
  using Dense = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (std::size_t index : layers) {
    Matrix& w = model.layer(index).weight;
    const bool wide = w.rows() < w.cols();
    const std::size_t tall = std::max(w.rows(), w.cols());
    const std::size_t thin = std::min(w.rows(), w.cols());
    if (thin == 0) throw std::invalid_argument("init_orthogonal: empty layer");

    Matrix gaussian = standard_normal_matrix(rng, tall, thin);
    Eigen::Map<const Dense> a(gaussian.values().data(), static_cast<Eigen::Index>(tall),
                              static_cast<Eigen::Index>(thin));
    Eigen::HouseholderQR<Dense> qr(a);
    Dense q = qr.householderQ() * Dense::Identity(static_cast<Eigen::Index>(tall),
                                                  static_cast<Eigen::Index>(thin));
    const Dense& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }

    Matrix tall_q(tall, thin);
    for (std::size_t i = 0; i < tall; ++i)
      for (std::size_t j = 0; j < thin; ++j)
        tall_q(i, j) = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    w = wide ? tall_q.transposed() : std::move(tall_q);
  }
}

}  // namespace colang
