#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "colang/integrators.hpp"
#include "colang/nn.hpp"

namespace colang {

enum class Experiment { Train, CurvatureStudy, OrthoDepthStudy, SampleVerify, Gradcheck };

Experiment parse_experiment(const std::string& name);
std::string to_string(Experiment e);

struct DataConfig {
  std::string dataset = "spiral2";  // spiral2 | spiral4
  std::size_t train_size = 100;
  std::size_t test_size = 2000;
  std::optional<double> sigma;  // defaults to the dataset's noise level
  double batch_fraction = 0.02;

  double noise() const;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{500};
  Activation activation = Activation::ReLU;
  std::string init = "standard";  // standard | orthogonal
};

struct OptimizerConfig {
  Method method = Method::Sgd;
  Hyper hyper;
  std::optional<double> radius;         // every layer
  std::map<std::size_t, double> radii;  // per layer, r0 = input layer
  std::string orth_layers = "all";      // all | hidden

  /// Per-layer constraints for a network with `layers` weight matrices.
  std::vector<LayerConstraint> constraints(std::size_t layers) const;
  bool has_radii(std::size_t layers) const;
};

struct Variant {
  std::string name;  // empty for a single-variant run
  OptimizerConfig optimizer;
};

struct RunSettings {
  std::size_t epochs = 100;
  std::size_t eval_every = 10;
  std::uint64_t seed = 0;
  std::size_t seed_count = 1;
  std::vector<std::uint64_t> seed_list;  // overrides seed/seed_count when set
  std::size_t threads = 1;
  std::filesystem::path output = "out";
  std::size_t grid_resolution = 400;
  bool export_grids = false;
  std::size_t cross_section_points = 401;

  std::vector<std::uint64_t> seeds() const;
};

struct StudyConfig {
  std::vector<std::size_t> depths{1, 2, 3, 4, 5, 6, 7, 8};
  std::size_t width = 100;
};

struct SamplerConfig {
  double beta = 1.0;
  double radius = 1.0;
  double h = 0.01;
  std::size_t samples = 1'000'000;
  std::size_t burn_in = 10'000;
  std::size_t thin = 100;
  std::size_t bins = 50;
  std::size_t clt_runs = 200;
  std::size_t clt_samples = 1'000;
};

struct GradcheckConfig {
  std::vector<std::size_t> widths{2, 8, 8, 1};
  std::size_t batch = 16;
  std::size_t trials = 1;
  double epsilon = 1e-5;
  double threshold = 1e-4;
  bool zero_weights = false;
  bool corrupt = false;  // perturb one analytic entry to exercise the failure path
};

struct RunConfig {
  Experiment experiment = Experiment::Train;
  DataConfig data;
  ModelConfig model;
  OptimizerConfig optimizer;
  std::vector<Variant> variants;  // [variant NAME] sections; empty means `optimizer` alone
  RunSettings run;
  StudyConfig study;
  SamplerConfig sampler;
  GradcheckConfig gradcheck;

  /// Variants to run: the declared ones, or the base optimizer as one unnamed variant.
  std::vector<Variant> effective_variants() const;
};

// Parse failures carry the offending line (0 when the problem is file-level).
class ConfigParseError : public ConfigError {
 public:
  ConfigParseError(const std::string& message, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_string(const std::string& text);

/// Cross-field checks (required radii, split letters, positive step size).
void validate(const RunConfig& config);

}  // namespace colang
