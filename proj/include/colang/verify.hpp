#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "colang/constraints.hpp"
#include "colang/integrators.hpp"
#include "colang/rng.hpp"

namespace colang {

// Counts of the angle α = atan2(ξ, θ) over equal bins of [−π, π).
struct AngleHistogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  explicit AngleHistogram(std::size_t bins = 50);
  std::size_t bins() const { return counts.size(); }
  void add(double alpha);
  void merge(const AngleHistogram& other);
  std::vector<double> frequencies() const;
};

struct CircleSamplerConfig {
  double beta = 1.0;
  double r = 1.0;
  double h = 0.01;
  std::size_t samples = 1'000'000;
  std::size_t burn_in = 0;  // steps discarded before recording
  std::size_t thin = 100;   // steps between recorded samples
  bool zero_potential = false;
  std::size_t bins = 50;
};

/// One c-CoLod step of the single-parameter circle system (θ, ξ) with loss
/// gradient `grad` on θ: Euler–Maruyama with ∇_ξV = 0, then orthogonal
/// projection. Draws the θ noise before the ξ noise.
CirclePoint circle_colod_step(CirclePoint q, double grad, double h, double tau, double r, Rng& rng);

/// Runs c-CoLod for V(q) = q₁ (or V = 0) at τ = 1/β from (r, 0) and records
/// `samples` angles after burn-in, one every `thin` steps.
AngleHistogram sample_circle_potential(const CircleSamplerConfig& config, Rng& rng);

/// Unnormalised invariant density of α under V = q₁: exp(−βr cos α).
double circle_target_density(double alpha, double beta_r);

/// Composite Simpson rule on [a, b] with `intervals` (rounded up to even).
double simpson(const std::function<double(double)>& f, double a, double b, std::size_t intervals);

/// Bin probabilities of the invariant angle law, normalised by Simpson
/// quadrature with 10⁴ intervals on [−π, π].
std::vector<double> circle_bin_probabilities(double beta_r, std::span<const double> edges);

/// ⟨φ⟩ under the invariant angle law.
double circle_expectation(const std::function<double(double)>& phi, double beta_r);

/// Σ |f̂ₖ − pₖ|
double l1_distance(std::span<const double> empirical, std::span<const double> target);

/// Largest |count − N/K| expressed in multinomial standard deviations.
double max_uniform_deviation_sigmas(const AngleHistogram& hist);

struct ErgodicResult {
  std::vector<double> running;  // running average after each recorded sample
  std::vector<double> series;   // the recorded observable values
  double final_value = 0.0;
};

/// Time average of φ(α) along one c-CoLod chain (one value per `thin` steps).
ErgodicResult ergodic_average(const std::function<double(double)>& phi,
                              const CircleSamplerConfig& config, Rng& rng);

/// Integrated autocorrelation time 1 + 2Σρₖ with Sokal's adaptive window
/// (smallest M with M ≥ c·τ(M)).
double integrated_autocorrelation(std::span<const double> series, double c = 5.0);

struct CltCheck {
  double variance_short = 0.0;  // Var[√T (⟨φ⟩_T)] across runs
  double variance_long = 0.0;   // same for 4T
  double ratio = 0.0;           // long / short
};

/// Independent chains of T and 4T recorded samples (seeded from `seed`),
/// run on `threads` workers.
CltCheck clt_variance_check(const std::function<double(double)>& phi,
                            const CircleSamplerConfig& config, std::size_t runs,
                            std::uint64_t seed, std::size_t threads = 1);

struct DriftSample {
  std::size_t step = 0;
  double position = 0.0;   // ‖QᵀQ − I‖_F
  double cotangent = 0.0;  // ‖PᵀQ + QᵀP‖_F
};

/// o-CoLud on V(Q) = ½‖Q − A‖_F² with a random target A, starting from an
/// orthogonal Q; residuals every `record_every` steps.
std::vector<DriftSample> orth_drift(std::size_t rows, std::size_t cols, const Hyper& hyper,
                                    std::size_t steps, Rng& rng, std::size_t record_every = 100,
                                    bool zero_loss = false);

/// Least-squares slope of y against x.
double linear_slope(std::span<const double> x, std::span<const double> y);

void write_histogram_csv(const AngleHistogram& hist, std::span<const double> target,
                         const std::filesystem::path& path);

}  // namespace colang
