#include "colang/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <thread>

#include "colang/csv.hpp"
#include "colang/log.hpp"
#include "colang/verify.hpp"

namespace colang {

TrainSpec make_train_spec(const RunConfig& config, const OptimizerConfig& optimizer) {
  TrainSpec spec;
  spec.data = config.data;
  spec.widths = {2};
  spec.widths.insert(spec.widths.end(), config.model.hidden.begin(), config.model.hidden.end());
  spec.widths.push_back(1);
  spec.activation = config.model.activation;
  spec.init = config.model.init;
  spec.optimizer = optimizer;
  spec.epochs = config.run.epochs;
  spec.eval_every = config.run.eval_every;
  return spec;
}

Datasets make_datasets(const DataConfig& data, std::uint64_t seed) {
  Rng train_rng = Rng::stream(seed, Stream::TrainData);
  Rng test_rng = Rng::stream(seed, Stream::TestData);
  const double sigma = data.noise();
  auto gen = data.dataset == "spiral4" ? spiral4 : spiral2;
  return {gen(data.train_size / 2, sigma, train_rng, Split::Train),
          gen(data.test_size / 2, sigma, test_rng, Split::Test)};
}

MlpModel make_model(const TrainSpec& spec, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, Stream::Init);
  MlpModel model(spec.widths, spec.activation, Activation::Sigmoid);
  init_standard(rng, model);
  const auto constraints = spec.optimizer.constraints(model.depth());
  std::vector<std::size_t> orth;
  for (std::size_t l = 0; l < model.depth(); ++l) {
    if (spec.init == "orthogonal" || constraints[l].kind == ConstraintKind::Orthogonal) {
      orth.push_back(l);
    }
  }
  if (!orth.empty()) init_orthogonal(rng, model, orth);
  return model;
}

namespace {

bool parameters_finite(const MlpModel& model) {
  for (const auto& layer : model.layers()) {
    if (!all_finite(layer.weight.values()) || !all_finite(layer.bias)) return false;
  }
  return true;
}

}  // namespace

SeedRun train_seed(const TrainSpec& spec, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  SeedRun run;
  run.seed = seed;
  const Datasets data = make_datasets(spec.data, seed);
  Rng batch_rng = Rng::stream(seed, Stream::Batch);
  Rng noise_rng = Rng::stream(seed, Stream::Noise);
  const Method method = spec.optimizer.method;
  const Hyper& hyper = spec.optimizer.hyper;

  MlpModel model = make_model(spec, seed);
  const std::size_t depth = model.depth();
  TrajectoryState state = make_state(std::move(model), spec.optimizer.constraints(depth));
  const GradProvider grad = [&](const MlpModel& m) {
    return backprop(m, minibatch(data.train, spec.data.batch_fraction, batch_rng), LossKind::BCE).grads;
  };
  const std::size_t steps_per_epoch =
      (data.train.size() + batch_size(data.train.size(), spec.data.batch_fraction) - 1) /
      batch_size(data.train.size(), spec.data.batch_fraction);

  auto record = [&](std::size_t epoch) {
    MetricsRow row;
    row.seed = seed;
    row.epoch = epoch;
    run.train = evaluate(state.model, data.train, LossKind::BCE);
    run.test = evaluate(state.model, data.test, LossKind::BCE);
    row.train_loss = run.train.loss;
    row.test_loss = run.test.loss;
    row.test_acc = run.test.accuracy;
    row.residual = constraint_report(state).position();
    row.max_abs_output = max_abs_weight(state.model, depth - 1);
    run.rows.push_back(row);
  };

  std::size_t epoch = 0;
  try {
    if (is_underdamped(method)) {
      init_momentum(state, backprop(state.model, data.train.as_batch(), LossKind::BCE).grads, hyper);
    }
    record(0);
    for (epoch = 1; epoch <= spec.epochs; ++epoch) {
      for (std::size_t s = 0; s < steps_per_epoch; ++s) train_step(method, state, grad, hyper, noise_rng);
      if (!parameters_finite(state.model)) throw std::runtime_error("non-finite parameters");
      if (epoch % spec.eval_every == 0 || epoch == spec.epochs) record(epoch);
    }
  } catch (const std::exception& ex) {
    run.failed = true;
    run.error = ex.what();
    run.failed_epoch = epoch;
  }
  run.model = std::move(state.model);
  run.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return run;
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < count; k = next++) fn(k);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

std::vector<SeedRun> train_seeds(const TrainSpec& spec, const std::vector<std::uint64_t>& seeds,
                                 std::size_t threads) {
  std::vector<SeedRun> runs(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t k) { runs[k] = train_seed(spec, seeds[k]); });
  return runs;
}

// ------------------------------------------------------------- gradcheck ---

namespace {

// Sign pattern of every hidden ReLU pre-activation.
std::vector<bool> relu_pattern(const MlpModel& model, const Matrix& inputs) {
  std::vector<bool> pattern;
  Matrix a = inputs;
  for (const auto& layer : model.layers()) {
    Matrix z = matmul_nt(a, layer.weight);
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += layer.bias[j];
    if (layer.activation == Activation::ReLU) {
      for (double v : z.values()) pattern.push_back(v > 0.0);
      for (double& v : z.values()) v = std::max(v, 0.0);
    } else if (layer.activation == Activation::Sigmoid) {
      for (double& v : z.values()) v = 1.0 / (1.0 + std::exp(-v));
    }
    a = std::move(z);
  }
  return pattern;
}

}  // namespace

GradcheckReport gradcheck(const GradcheckConfig& config, std::uint64_t seed) {
  GradcheckReport report;
  Rng rng = Rng::stream(seed, Stream::Init);
  for (std::size_t trial = 0; trial < std::max<std::size_t>(config.trials, 1); ++trial) {
    const std::size_t out_dim = config.widths.back();
    const LossKind kind = out_dim == 1 ? LossKind::BCE : LossKind::CrossEntropy;
    MlpModel model(config.widths, Activation::ReLU,
                   kind == LossKind::BCE ? Activation::Sigmoid : Activation::Identity);
    init_standard(rng, model);
    if (config.zero_weights) {
      for (auto& layer : model.layers()) {
        layer.weight = Matrix(layer.weight.rows(), layer.weight.cols());
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
      }
    }
    Batch batch{standard_normal_matrix(rng, config.batch, config.widths.front()),
                std::vector<double>(config.batch)};
    for (double& y : batch.labels) y = static_cast<double>(rng.below(std::max<std::size_t>(out_dim, 2)));

    Gradients analytic = backprop(model, batch, kind).grads;
    if (config.corrupt) analytic.weight[0](0, 0) += 1e-2;
    const auto base_pattern = relu_pattern(model, batch.inputs);
    const double eps = config.epsilon;

    auto check = [&](double& param, double g) {
      const double saved = param;
      param = saved + eps;
      const bool kink_plus = relu_pattern(model, batch.inputs) != base_pattern;
      const double lp = loss(model, batch, kind);
      param = saved - eps;
      const bool kink_minus = relu_pattern(model, batch.inputs) != base_pattern;
      const double lm = loss(model, batch, kind);
      param = saved;
      if (kink_plus || kink_minus) {
        ++report.skipped;
        return;
      }
      const double fd = (lp - lm) / (2.0 * eps);
      const double denom = std::max({std::abs(g), std::abs(fd), kGradcheckFloor});
      report.max_relative_error = std::max(report.max_relative_error, std::abs(g - fd) / denom);
      ++report.checked;
    };
    for (std::size_t l = 0; l < model.depth(); ++l) {
      auto& layer = model.layer(l);
      for (std::size_t i = 0; i < layer.weight.rows(); ++i)
        for (std::size_t j = 0; j < layer.weight.cols(); ++j)
          check(layer.weight(i, j), analytic.weight[l](i, j));
      for (std::size_t i = 0; i < layer.bias.size(); ++i) check(layer.bias[i], analytic.bias[l][i]);
    }
  }
  return report;
}

// ---------------------------------------------------------------- output ---

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  CsvWriter out(path, {"seed", "epoch", "train_loss", "test_loss", "test_acc", "max_residual",
                       "max_abs_output_weight"});
  for (const auto& r : rows) {
    out.cell(static_cast<long long>(r.seed)).cell(r.epoch);
    out.cell(r.train_loss).cell(r.test_loss).cell(r.test_acc).cell(r.residual).cell(r.max_abs_output);
    out.end_row();
  }
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double s = 0.0;
    for (double x : v) s += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(s / static_cast<double>(v.size() - 1));
  }
  return m;
}

}  // namespace

void write_aggregate_csv(const std::vector<SeedRun>& runs, const std::filesystem::path& path) {
  std::map<std::size_t, std::vector<const MetricsRow*>> by_epoch;
  for (const auto& run : runs) {
    if (run.failed) continue;
    for (const auto& row : run.rows) by_epoch[row.epoch].push_back(&row);
  }
  CsvWriter out(path, {"epoch", "n_seeds", "train_loss_mean", "train_loss_std", "test_loss_mean",
                       "test_loss_std", "test_acc_mean", "test_acc_std", "max_residual_mean",
                       "max_residual_std"});
  for (const auto& [epoch, rows] : by_epoch) {
    out.cell(epoch).cell(rows.size());
    auto column = [&](double MetricsRow::*field) {
      std::vector<double> v;
      for (const auto* r : rows) v.push_back(r->*field);
      const auto ms = mean_std(v);
      out.cell(ms.mean).cell(ms.std);
    };
    column(&MetricsRow::train_loss);
    column(&MetricsRow::test_loss);
    column(&MetricsRow::test_acc);
    column(&MetricsRow::residual);
    out.end_row();
  }
}

namespace {

std::filesystem::path variant_dir(const std::filesystem::path& root, const Variant& v) {
  auto dir = v.name.empty() ? root : root / v.name;
  std::filesystem::create_directories(dir);
  return dir;
}

void write_seed_outputs(const std::vector<SeedRun>& runs, const std::filesystem::path& dir,
                        std::ostream& log) {
  CsvWriter failures(dir / "failures.csv", {"seed", "epoch", "error"});
  CsvWriter timing(dir / "timing.csv", {"seed", "wall_ms"});
  for (const auto& run : runs) {
    write_metrics_csv(run.rows, dir / ("metrics_seed" + std::to_string(run.seed) + ".csv"));
    timing.cell(static_cast<long long>(run.seed)).cell(run.wall_ms);
    timing.end_row();
    if (run.failed) {
      std::string msg = run.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      failures.cell(static_cast<long long>(run.seed)).cell(run.failed_epoch).cell(msg);
      failures.end_row();
      log << "seed " << run.seed << " failed at epoch " << run.failed_epoch << ": " << run.error
          << '\n';
    }
  }
  write_aggregate_csv(runs, dir / "aggregate.csv");
}

void log_summary(const std::vector<SeedRun>& runs, const std::string& label, std::ostream& log) {
  std::vector<double> acc;
  for (const auto& r : runs)
    if (!r.failed) acc.push_back(r.test.accuracy);
  const auto ms = mean_std(acc);
  log << (label.empty() ? std::string("run") : label) << ": " << acc.size() << "/" << runs.size()
      << " seeds ok, test accuracy " << format_double(ms.mean) << " +- " << format_double(ms.std)
      << '\n';
}

int run_train(const RunConfig& config, bool curvature, std::ostream& log) {
  const auto seeds = config.run.seeds();
  for (const auto& variant : config.effective_variants()) {
    const TrainSpec spec = make_train_spec(config, variant.optimizer);
    const auto dir = variant_dir(config.run.output, variant);
    auto runs = train_seeds(spec, seeds, config.run.threads);
    write_seed_outputs(runs, dir, log);
    log_summary(runs, variant.name, log);
    if (!curvature) continue;

    std::vector<BoundaryCurvature> curv(runs.size());
    std::vector<CrossSection> horizontal(runs.size()), vertical(runs.size());
    std::vector<Grid> grids(runs.size());
    parallel_for(runs.size(), config.run.threads, [&](std::size_t k) {
      if (runs[k].failed) return;
      grids[k] = prediction_grid(runs[k].model, Extent{}, config.run.grid_resolution);
      curv[k] = boundary_curvature(grids[k]);
      horizontal[k] = cross_section_gradients(runs[k].model, Axis::Horizontal,
                                              config.run.cross_section_points);
      vertical[k] = cross_section_gradients(runs[k].model, Axis::Vertical,
                                            config.run.cross_section_points);
      if (!config.run.export_grids) grids[k] = Grid{};
    });

    CsvWriter table(dir / "curvature.csv",
                    {"seed", "found", "mean", "std", "max", "points", "skipped"});
    CsvWriter sections(dir / "cross_sections.csv",
                       {"seed", "axis", "position", "prediction", "gradient"});
    std::vector<double> means;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      if (runs[k].failed) continue;
      const auto& c = curv[k];
      table.cell(static_cast<long long>(runs[k].seed)).cell(c.found ? 1 : 0);
      table.cell(c.stats.mean).cell(c.stats.std).cell(c.stats.max).cell(c.stats.count).cell(c.stats.skipped);
      table.end_row();
      if (c.found) means.push_back(c.stats.mean);
      for (auto [axis, cs] : {std::pair{"horizontal", &horizontal[k]}, std::pair{"vertical", &vertical[k]}}) {
        for (std::size_t i = 0; i < cs->position.size(); ++i) {
          sections.cell(static_cast<long long>(runs[k].seed)).cell(std::string(axis));
          sections.cell(cs->position[i]).cell(cs->prediction[i]).cell(cs->gradient[i]);
          sections.end_row();
        }
      }
      if (config.run.export_grids) {
        const std::string suffix = "_seed" + std::to_string(runs[k].seed) + ".csv";
        write_grid_csv(grids[k], dir / ("grid" + suffix));
        write_polyline_csv(c.contour, dir / ("contour" + suffix));
      }
    }
    const auto ms = mean_std(means);
    log << "  mean curvature over " << means.size() << " seeds: " << format_double(ms.mean)
        << " +- " << format_double(ms.std) << '\n';
  }
  return 0;
}

int run_depth_study(const RunConfig& config, std::ostream& log) {
  const auto seeds = config.run.seeds();
  CsvWriter rows(config.run.output / "depth_study.csv",
                 {"variant", "depth", "seed", "failed", "train_loss", "test_loss", "test_acc"});
  CsvWriter summary(config.run.output / "depth_summary.csv",
                    {"variant", "depth", "n_seeds", "test_acc_mean", "test_acc_std"});
  for (const auto& variant : config.effective_variants()) {
    const std::string name = variant.name.empty() ? to_string(variant.optimizer.method) : variant.name;
    for (std::size_t depth : config.study.depths) {
      RunConfig c = config;
      c.model.hidden.assign(depth, config.study.width);
      const TrainSpec spec = make_train_spec(c, variant.optimizer);
      auto runs = train_seeds(spec, seeds, config.run.threads);
      const auto dir = config.run.output / name / ("depth" + std::to_string(depth));
      std::filesystem::create_directories(dir);
      write_seed_outputs(runs, dir, log);
      std::vector<double> acc;
      for (const auto& r : runs) {
        rows.cell(name).cell(depth).cell(static_cast<long long>(r.seed)).cell(r.failed ? 1 : 0);
        rows.cell(r.train.loss).cell(r.test.loss).cell(r.test.accuracy);
        rows.end_row();
        if (!r.failed) acc.push_back(r.test.accuracy);
      }
      const auto ms = mean_std(acc);
      summary.cell(name).cell(depth).cell(acc.size()).cell(ms.mean).cell(ms.std);
      summary.end_row();
      log << name << " depth " << depth << ": test accuracy " << format_double(ms.mean) << " +- "
          << format_double(ms.std) << '\n';
    }
  }
  return 0;
}

int run_sample_verify(const RunConfig& config, std::ostream& log) {
  const auto& s = config.sampler;
  const std::uint64_t seed = config.run.seeds().front();
  CircleSamplerConfig c;
  c.beta = s.beta;
  c.r = s.radius;
  c.h = s.h;
  c.samples = s.samples;
  c.burn_in = s.burn_in;
  c.thin = s.thin;
  c.bins = s.bins;

  Rng rng = Rng::stream(seed, Stream::Noise);
  const auto hist = sample_circle_potential(c, rng);
  const auto target = circle_bin_probabilities(s.beta * s.radius, hist.edges);
  const double l1 = l1_distance(hist.frequencies(), target);
  write_histogram_csv(hist, target, config.run.output / "histogram.csv");

  CircleSamplerConfig flat = c;
  flat.zero_potential = true;
  Rng flat_rng = Rng::stream(seed + 1, Stream::Noise);
  const auto uniform = sample_circle_potential(flat, flat_rng);
  const double sigmas = max_uniform_deviation_sigmas(uniform);
  std::vector<double> uniform_target(uniform.bins(), 1.0 / static_cast<double>(uniform.bins()));
  write_histogram_csv(uniform, uniform_target, config.run.output / "histogram_uniform.csv");

  CircleSamplerConfig clt = c;
  clt.samples = s.clt_samples;
  const auto check = clt_variance_check([](double a) { return std::cos(a); }, clt, s.clt_runs,
                                        seed + 2, config.run.threads);

  CsvWriter out(config.run.output / "verify.csv", {"metric", "value"});
  out.cell(std::string("l1_distance")).cell(l1).end_row();
  out.cell(std::string("uniform_max_sigma")).cell(sigmas).end_row();
  out.cell(std::string("clt_variance_short")).cell(check.variance_short).end_row();
  out.cell(std::string("clt_variance_long")).cell(check.variance_long).end_row();
  out.cell(std::string("clt_ratio")).cell(check.ratio).end_row();
  log << "histogram L1 distance " << format_double(l1) << ", uniform max deviation "
      << format_double(sigmas) << " sigma, CLT variance ratio " << format_double(check.ratio)
      << '\n';
  return 0;
}

int run_gradcheck(const RunConfig& config, std::ostream& log) {
  int code = 0;
  CsvWriter out(config.run.output / "gradcheck.csv",
                {"seed", "max_relative_error", "checked", "skipped"});
  for (auto seed : config.run.seeds()) {
    const auto r = gradcheck(config.gradcheck, seed);
    out.cell(static_cast<long long>(seed)).cell(r.max_relative_error).cell(r.checked).cell(r.skipped);
    out.end_row();
    log << "seed " << seed << ": max relative error " << format_double(r.max_relative_error) << " ("
        << r.checked << " entries, " << r.skipped << " skipped at kinks)\n";
    if (!(r.max_relative_error <= config.gradcheck.threshold)) code = 1;
  }
  return code;
}

}  // namespace

int run_experiment(const RunConfig& config, std::ostream& log) {
  validate(config);
  std::filesystem::create_directories(config.run.output);
  switch (config.experiment) {
    case Experiment::Train:
      return run_train(config, false, log);
    case Experiment::CurvatureStudy:
      return run_train(config, true, log);
    case Experiment::OrthoDepthStudy:
      return run_depth_study(config, log);
    case Experiment::SampleVerify:
      return run_sample_verify(config, log);
    case Experiment::Gradcheck:
      return run_gradcheck(config, log);
  }
  return 2;
}

}  // namespace colang
