#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "colang/config.hpp"
#include "colang/data.hpp"
#include "colang/metrics.hpp"
#include "colang/nn.hpp"

namespace colang {

struct MetricsRow {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double residual = 0.0;        // max constraint residual, 0 when unconstrained
  double max_abs_output = 0.0;  // max |W| of the output layer
};

// Everything a single training job needs, independent of the config format.
struct TrainSpec {
  DataConfig data;
  std::vector<std::size_t> widths{2, 500, 1};
  Activation activation = Activation::ReLU;
  std::string init = "standard";
  OptimizerConfig optimizer;
  std::size_t epochs = 100;
  std::size_t eval_every = 10;
};

TrainSpec make_train_spec(const RunConfig& config, const OptimizerConfig& optimizer);

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
  bool failed = false;
  std::string error;
  std::size_t failed_epoch = 0;
  MlpModel model;
  EvalResult train;
  EvalResult test;
  double wall_ms = 0.0;
};

struct Datasets {
  Dataset train;
  Dataset test;
};

/// Train and test sets from independent sub-streams of `seed`.
Datasets make_datasets(const DataConfig& data, std::uint64_t seed);

/// Initialised model for a seed: standard init, then orthogonal init on the
/// layers the optimizer constrains (or on all layers when init = orthogonal).
MlpModel make_model(const TrainSpec& spec, std::uint64_t seed);

/// Full training run. Integrator errors end the run with failed = true.
SeedRun train_seed(const TrainSpec& spec, std::uint64_t seed);

/// Runs fn(k) for k in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

std::vector<SeedRun> train_seeds(const TrainSpec& spec, const std::vector<std::uint64_t>& seeds,
                                 std::size_t threads);

struct GradcheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // entries whose stencil crosses a ReLU kink
};

/// Relative error |a − b| / max(|a|, |b|, floor) used by the gradient check.
inline constexpr double kGradcheckFloor = 1e-4;

/// Backprop against central differences on a random network and batch.
GradcheckReport gradcheck(const GradcheckConfig& config, std::uint64_t seed);

/// Runs the configured experiment, writing CSV files under config.run.output.
/// Returns the process exit code.
int run_experiment(const RunConfig& config, std::ostream& log);

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

/// Per-epoch mean and sample standard deviation over the successful seeds.
void write_aggregate_csv(const std::vector<SeedRun>& runs, const std::filesystem::path& path);

}  // namespace colang
