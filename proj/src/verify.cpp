#include "colang/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "colang/csv.hpp"

namespace colang {

AngleHistogram::AngleHistogram(std::size_t bins) : edges(bins + 1), counts(bins, 0) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  for (std::size_t k = 0; k <= bins; ++k) {
    edges[k] = -M_PI + 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(bins);
  }
}

void AngleHistogram::add(double alpha) {
  const double u = (alpha + M_PI) / (2.0 * M_PI);
  auto k = static_cast<std::size_t>(std::floor(u * static_cast<double>(bins())));
  k = std::min(k, bins() - 1);  // α = π folds into the last bin
  ++counts[k];
  ++total;
}

void AngleHistogram::merge(const AngleHistogram& other) {
  if (other.bins() != bins()) throw std::invalid_argument("histogram bin mismatch");
  for (std::size_t k = 0; k < bins(); ++k) counts[k] += other.counts[k];
  total += other.total;
}

std::vector<double> AngleHistogram::frequencies() const {
  std::vector<double> f(bins(), 0.0);
  if (total == 0) return f;
  for (std::size_t k = 0; k < bins(); ++k) {
    f[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
  }
  return f;
}

CirclePoint circle_colod_step(CirclePoint q, double grad, double h, double tau, double r,
                              Rng& rng) {
  CirclePoint bar{q.theta - h * grad, q.xi};
  if (tau > 0.0) {
    const double sigma = std::sqrt(2.0 * tau * h);
    bar.theta += sigma * rng.normal();
    bar.xi += sigma * rng.normal();
  }
  return circle_project_orthogonal(bar, r);
}

namespace {

void check_sampler(const CircleSamplerConfig& c) {
  if (!(c.beta > 0.0 && c.r > 0.0 && c.h > 0.0)) {
    throw std::invalid_argument("sampler needs beta, r, h > 0");
  }
  if (c.thin == 0) throw std::invalid_argument("sampler thinning must be >= 1");
}

template <class Record>
void run_chain(const CircleSamplerConfig& c, Rng& rng, Record record) {
  check_sampler(c);
  const double tau = 1.0 / c.beta;
  const double grad = c.zero_potential ? 0.0 : 1.0;
  CirclePoint q{c.r, 0.0};
  for (std::size_t s = 0; s < c.burn_in; ++s) q = circle_colod_step(q, grad, c.h, tau, c.r, rng);
  for (std::size_t n = 0; n < c.samples; ++n) {
    for (std::size_t s = 0; s < c.thin; ++s) q = circle_colod_step(q, grad, c.h, tau, c.r, rng);
    record(std::atan2(q.xi, q.theta));
  }
}

}  // namespace

AngleHistogram sample_circle_potential(const CircleSamplerConfig& config, Rng& rng) {
  AngleHistogram hist(config.bins);
  run_chain(config, rng, [&](double alpha) { hist.add(alpha); });
  return hist;
}

double circle_target_density(double alpha, double beta_r) {
  return std::exp(-beta_r * std::cos(alpha));
}

double simpson(const std::function<double(double)>& f, double a, double b,
               std::size_t intervals) {
  if (intervals < 2) intervals = 2;
  if (intervals % 2) ++intervals;
  const double step = (b - a) / static_cast<double>(intervals);
  double sum = f(a) + f(b);
  for (std::size_t i = 1; i < intervals; ++i) {
    sum += (i % 2 ? 4.0 : 2.0) * f(a + static_cast<double>(i) * step);
  }
  return sum * step / 3.0;
}

std::vector<double> circle_bin_probabilities(double beta_r, std::span<const double> edges) {
  auto density = [beta_r](double a) { return circle_target_density(a, beta_r); };
  const double z = simpson(density, -M_PI, M_PI, 10'000);
  const std::size_t bins = edges.size() - 1;
  const std::size_t per_bin = std::max<std::size_t>(2, 10'000 / bins);
  std::vector<double> p(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    p[k] = simpson(density, edges[k], edges[k + 1], per_bin) / z;
  }
  return p;
}

double circle_expectation(const std::function<double(double)>& phi, double beta_r) {
  auto density = [beta_r](double a) { return circle_target_density(a, beta_r); };
  const double z = simpson(density, -M_PI, M_PI, 10'000);
  return simpson([&](double a) { return phi(a) * density(a); }, -M_PI, M_PI, 10'000) / z;
}

double l1_distance(std::span<const double> empirical, std::span<const double> target) {
  if (empirical.size() != target.size()) throw std::invalid_argument("l1_distance: size mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < empirical.size(); ++k) d += std::abs(empirical[k] - target[k]);
  return d;
}

double max_uniform_deviation_sigmas(const AngleHistogram& hist) {
  const double n = static_cast<double>(hist.total);
  const double p = 1.0 / static_cast<double>(hist.bins());
  const double sd = std::sqrt(n * p * (1.0 - p));
  double worst = 0.0;
  for (auto c : hist.counts) worst = std::max(worst, std::abs(static_cast<double>(c) - n * p) / sd);
  return worst;
}

ErgodicResult ergodic_average(const std::function<double(double)>& phi,
                              const CircleSamplerConfig& config, Rng& rng) {
  ErgodicResult out;
  out.running.reserve(config.samples);
  out.series.reserve(config.samples);
  double sum = 0.0;
  run_chain(config, rng, [&](double alpha) {
    const double v = phi(alpha);
    out.series.push_back(v);
    sum += v;
    out.running.push_back(sum / static_cast<double>(out.series.size()));
  });
  out.final_value = out.running.empty() ? 0.0 : out.running.back();
  return out;
}

double integrated_autocorrelation(std::span<const double> series, double c) {
  const std::size_t n = series.size();
  if (n < 2) return 1.0;
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(n);
  if (c0 == 0.0) return 1.0;
  double tau = 1.0;
  for (std::size_t lag = 1; lag < n; ++lag) {
    double ck = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) ck += (series[i] - mean) * (series[i + lag] - mean);
    ck /= static_cast<double>(n);
    tau += 2.0 * ck / c0;
    if (static_cast<double>(lag) >= c * tau) break;
  }
  return std::max(tau, 1.0);
}

CltCheck clt_variance_check(const std::function<double(double)>& phi,
                            const CircleSamplerConfig& config, std::size_t runs,
                            std::uint64_t seed, std::size_t threads) {
  if (runs < 2) throw std::invalid_argument("clt check needs at least two runs");
  threads = std::max<std::size_t>(1, threads);
  std::vector<double> short_avg(runs), long_avg(runs);
  auto worker = [&](std::size_t first) {
    for (std::size_t k = first; k < runs; k += threads) {
      CircleSamplerConfig c = config;
      Rng rng = Rng::stream(seed + 2 * k, Stream::Noise);
      short_avg[k] = ergodic_average(phi, c, rng).final_value;
      c.samples = 4 * config.samples;
      Rng rng_long = Rng::stream(seed + 2 * k + 1, Stream::Noise);
      long_avg[k] = ergodic_average(phi, c, rng_long).final_value;
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& t : pool) t.join();

  auto variance = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  };
  const double t_short = static_cast<double>(config.samples * config.thin) * config.h;
  CltCheck out;
  out.variance_short = t_short * variance(short_avg);
  out.variance_long = 4.0 * t_short * variance(long_avg);
  out.ratio = out.variance_long / out.variance_short;
  return out;
}

std::vector<DriftSample> orth_drift(std::size_t rows, std::size_t cols, const Hyper& hyper,
                                    std::size_t steps, Rng& rng, std::size_t record_every,
                                    bool zero_loss) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("orth_drift needs positive dims");
  if (record_every == 0) record_every = 1;
  Layer layer{Matrix(rows, cols), std::vector<double>(rows, 0.0), Activation::Identity};
  MlpModel model({layer});
  const std::size_t which[] = {0};
  init_orthogonal(rng, model, which);
  const Matrix target = zero_loss ? model.layer(0).weight : standard_normal_matrix(rng, rows, cols);

  TrajectoryState state = make_state(std::move(model), {{ConstraintKind::Orthogonal, 0.0}});
  GradProvider grad = [&](const MlpModel& m) {
    Gradients g = Gradients::zeros_like(m);
    if (!zero_loss) g.weight[0] = m.layer(0).weight - target;
    return g;
  };
  init_momentum(state, grad(state.model), hyper);

  std::vector<DriftSample> out;
  auto record = [&](std::size_t step) {
    const auto rep = constraint_report(state);
    out.push_back({step, rep.orth, rep.orth_cotangent});
  };
  record(0);
  for (std::size_t s = 1; s <= steps; ++s) {
    compose_split(hyper.split, state, grad, hyper, rng);
    if (s % record_every == 0) record(s);
  }
  return out;
}

double linear_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("linear_slope needs matching series");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

void write_histogram_csv(const AngleHistogram& hist, std::span<const double> target,
                         const std::filesystem::path& path) {
  CsvWriter out(path, {"bin_lo", "bin_hi", "count", "frequency", "target"});
  const auto freq = hist.frequencies();
  for (std::size_t k = 0; k < hist.bins(); ++k) {
    out.cell(hist.edges[k]).cell(hist.edges[k + 1]).cell(static_cast<long long>(hist.counts[k]));
    out.cell(freq[k]).cell(k < target.size() ? target[k] : 0.0);
    out.end_row();
  }
}

}  // namespace colang
