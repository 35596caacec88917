#include "colang/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "colang/csv.hpp"

namespace colang {
namespace {

template <class PointFn>
Dataset make_spiral(std::size_t n_per_class, double sigma, Rng& rng, Split split, PointFn point) {
  if (n_per_class == 0) throw std::invalid_argument("spiral: n_per_class must be >= 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("spiral: sigma must be >= 0");
  Dataset data;
  data.split = split;
  data.points = Matrix(2 * n_per_class, 2);
  data.labels.resize(2 * n_per_class);
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = rng.uniform();
    Point2 p = point(t, label);
    if (sigma > 0.0) {
      p.x += sigma * rng.normal();
      p.y += sigma * rng.normal();
    }
    data.points(i, 0) = p.x;
    data.points(i, 1) = p.y;
    data.labels[i] = label;
  }
  return data;
}

}  // namespace

Point2 spiral4_point(double t, int label) {
  const double s = std::sqrt(t);
  const double phase = 8.0 * s * M_PI + (label ? M_PI : 0.0);
  return {2.0 * s * std::cos(phase), 2.0 * s * std::sin(phase)};
}

Point2 spiral2_point(double t, int label) {
  const double s = std::sqrt(t);
  const double phase = 4.0 * s * M_PI + (label ? M_PI : 0.0);
  return {s * std::cos(phase), s * std::sin(phase)};
}

Dataset spiral4(std::size_t n_per_class, double sigma, Rng& rng, Split split) {
  return make_spiral(n_per_class, sigma, rng, split, spiral4_point);
}

Dataset spiral2(std::size_t n_per_class, double sigma, Rng& rng, Split split) {
  return make_spiral(n_per_class, sigma, rng, split, spiral2_point);
}

std::size_t batch_size(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("minibatch fraction must lie in (0, 1]");
  }
  // Guard against 0.02 * 100 evaluating to 2.0000000000000004.
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

Batch minibatch(const Dataset& data, double fraction, Rng& rng) {
  const std::size_t n = data.size();
  const std::size_t k = batch_size(n, fraction);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher–Yates: the first k slots form the sample.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  Batch batch{Matrix(k, data.points.cols()), std::vector<double>(k)};
  for (std::size_t i = 0; i < k; ++i) {
    auto src = data.points.row(idx[i]);
    std::copy(src.begin(), src.end(), batch.inputs.row(i).begin());
    batch.labels[i] = data.labels[idx[i]];
  }
  return batch;
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  CsvWriter out(path, {"x", "y", "label"});
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.cell(data.points(i, 0)).cell(data.points(i, 1)).cell(static_cast<long long>(data.labels[i]));
    out.end_row();
  }
}

}  // namespace colang
