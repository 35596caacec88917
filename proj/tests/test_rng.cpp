#include <doctest.h>

#include <cmath>
#include <set>

#include "colang/rng.hpp"

using namespace colang;

TEST_CASE("same seed, same sequence") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    differs = differs || x != c();
  }
  CHECK(differs);
  Rng m1(7), m2(7);
  CHECK(standard_normal_matrix(m1, 3, 4) == standard_normal_matrix(m2, 3, 4));
}

TEST_CASE("sub-streams are distinct and reproducible") {
  std::set<std::uint64_t> first;
  for (auto s : {Stream::Init, Stream::Batch, Stream::Noise, Stream::TrainData, Stream::TestData}) {
    Rng a = Rng::stream(99, s);
    Rng b = Rng::stream(99, s);
    const auto x = a();
    CHECK(x == b());
    first.insert(x);
  }
  CHECK(first.size() == 5);
}

TEST_CASE("standard normal moments over 1e6 draws") {
  Rng rng(2024);
  const Matrix m = standard_normal_matrix(rng, 1000, 1000);
  double sum = 0.0, sq = 0.0;
  for (double v : m.values()) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(m.size());
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) <= 0.005);
  CHECK(std::abs(var - 1.0) <= 0.01);
}

TEST_CASE("uniform and bounded integers") {
  Rng rng(3);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(std::abs(sum / n - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / n) * 1.5);

  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);
}
