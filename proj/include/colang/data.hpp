#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "colang/matrix.hpp"
#include "colang/nn.hpp"
#include "colang/rng.hpp"

namespace colang {

enum class Split { Train, Test };

struct Dataset {
  Matrix points;               // N x 2
  std::vector<double> labels;  // 0 or 1
  Split split = Split::Train;

  std::size_t size() const { return labels.size(); }
  Batch as_batch() const { return {points, labels}; }
};

inline constexpr double kSpiral4Sigma = 0.02;
inline constexpr double kSpiral2Sigma = 0.05;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Noise-free spiral arms. Class 1 is the second arm, shifted by π.
Point2 spiral4_point(double t, int label);
Point2 spiral2_point(double t, int label);

/// Two-class spirals with n_per_class points per class, t ~ U(0, 1), plus
/// isotropic Gaussian noise of scale sigma. Points alternate class 0, class 1.
Dataset spiral4(std::size_t n_per_class, double sigma, Rng& rng, Split split = Split::Train);
Dataset spiral2(std::size_t n_per_class, double sigma, Rng& rng, Split split = Split::Train);

/// Number of samples drawn per minibatch: ⌈fraction · n⌉.
std::size_t batch_size(std::size_t n, double fraction);

/// Distinct indices uniformly without replacement, in random order.
Batch minibatch(const Dataset& data, double fraction, Rng& rng);

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace colang
