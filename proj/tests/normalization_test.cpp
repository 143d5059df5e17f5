#include <doctest.h>

#include <algorithm>
#include <vector>

#include <tiered/errors.hpp>
#include <tiered/normalization.hpp>
#include <tiered/rng.hpp>

#include "test_oracles.hpp"

using namespace tiered;

TEST_SUITE("normalization") {
  TEST_CASE("fit on {0, 2} gives mean 1, stddev 1") {
    const std::vector<double> s{0.0, 2.0};
    const NormalizationStats stats = fit_normalization(s, "pair");
    CHECK(stats.mean == doctest::Approx(1.0));
    CHECK(stats.stddev == doctest::Approx(1.0));
    CHECK(stats.sample_count == 2);
    CHECK(stats.source == "pair");
  }

  TEST_CASE("constant samples are a degenerate calibration") {
    const std::vector<double> s{5.0, 5.0, 5.0};
    CHECK_THROWS_AS(fit_normalization(s), DegenerateDataError);
  }

  TEST_CASE("fewer than two samples cannot be fitted") {
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(fit_normalization(one), DegenerateDataError);
    CHECK_THROWS_AS(fit_normalization(std::vector<double>{}), DegenerateDataError);
  }

  TEST_CASE("non-finite samples are rejected") {
    const std::vector<double> s{1.0, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(fit_normalization(s), Error);
  }

  TEST_CASE("fit over seeded standard-normal draws recovers (0, 1)") {
    Rng rng = make_rng(11, "norm-fit");
    std::vector<double> s;
    for (int i = 0; i < 1000; ++i) s.push_back(gaussian(rng, 1.0));
    const NormalizationStats stats = fit_normalization(s);
    CHECK(std::abs(stats.mean) < 0.1);
    CHECK(std::abs(stats.stddev - 1.0) < 0.1);
  }

  TEST_CASE("z-score at the mean is zero") {
    NormalizationStats stats;
    stats.mean = 2.0;
    stats.stddev = 1.0;
    CHECK(z_normalize(2.0, stats) == doctest::Approx(0.0));
  }

  TEST_CASE("z-score shifts by whole stddevs") {
    NormalizationStats stats;
    stats.mean = 2.0;
    stats.stddev = 1.0;
    CHECK(z_normalize(3.5, stats) == doctest::Approx(1.5));
  }

  TEST_CASE("normalizing the fitting set round-trips to mean 0, stddev 1") {
    const std::vector<double> s{1.0, 2.0, 3.0, 4.0};
    const NormalizationStats stats = fit_normalization(s);
    std::vector<double> z;
    for (double v : s) z.push_back(z_normalize(v, stats));
    CHECK(std::abs(oracle::mean(z)) < 1e-9);
    CHECK(std::abs(oracle::population_stddev(z) - 1.0) < 1e-9);
  }

  TEST_CASE("z-score rejects invalid stats and non-finite input") {
    NormalizationStats bad;
    bad.stddev = 0.0;
    CHECK_THROWS_AS(z_normalize(1.0, bad), Error);
    NormalizationStats ok;
    CHECK_THROWS_AS(z_normalize(std::numeric_limits<double>::infinity(), ok), Error);
  }

  TEST_CASE("empirical quantile returns the lower order statistic") {
    const std::vector<double> s{10.0, 2.0, 8.0, 4.0, 6.0};  // sorted: 2 4 6 8 10
    CHECK(empirical_quantile(s, 0.0) == doctest::Approx(2.0));
    CHECK(empirical_quantile(s, 0.5) == doctest::Approx(6.0));   // floor(2.5) = 2
    CHECK(empirical_quantile(s, 0.75) == doctest::Approx(8.0));  // floor(3.75) = 3
    CHECK(empirical_quantile(s, 1.0) == doctest::Approx(10.0));  // clamped to last
  }

  TEST_CASE("empirical quantile needs at least one sample") {
    CHECK_THROWS_AS(empirical_quantile(std::vector<double>{}, 0.5), DegenerateDataError);
  }

  TEST_CASE("quantile result is always an actual sample value") {
    Rng rng = make_rng(12, "quantile-member");
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> s;
      const int n = 1 + static_cast<int>(rng() % 40);
      for (int i = 0; i < n; ++i) s.push_back(gaussian(rng, 3.0));
      const double q = empirical_quantile(s, uniform01(rng));
      CHECK(std::count(s.begin(), s.end(), q) > 0);
    }
  }

  TEST_CASE("top-30% threshold of {1..10} is 8") {
    std::vector<double> s;
    for (int i = 1; i <= 10; ++i) s.push_back(static_cast<double>(i));
    const double t = quantile_threshold(s, 0.3);
    CHECK(t == doctest::Approx(8.0));
    CHECK(std::count_if(s.begin(), s.end(), [t](double v) { return v >= t; }) == 3);
  }

  TEST_CASE("top-half threshold of a symmetric set sits at the median region") {
    const std::vector<double> s{-2.0, -1.0, 0.0, 1.0, 2.0};
    CHECK(quantile_threshold(s, 0.5) == doctest::Approx(0.0));
  }

  TEST_CASE("top-30% of a large standard-normal sample is near 0.524") {
    Rng rng = make_rng(13, "norm-quantile");
    std::vector<double> s;
    for (int i = 0; i < 10000; ++i) s.push_back(gaussian(rng, 1.0));
    CHECK(std::abs(quantile_threshold(s, 0.3) - 0.524) < 0.05);
  }

  TEST_CASE("threshold equals a sort-based recount on random samples") {
    Rng rng = make_rng(14, "quantile-oracle");
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> s;
      const int n = 2 + static_cast<int>(rng() % 200);
      for (int i = 0; i < n; ++i) s.push_back(gaussian(rng, 2.0));
      const double top = 0.05 + 0.9 * uniform01(rng);

      std::vector<double> sorted = s;
      std::sort(sorted.begin(), sorted.end());
      const auto idx = std::min<std::size_t>(
          sorted.size() - 1, static_cast<std::size_t>((1.0 - top) * static_cast<double>(n)));
      CHECK(quantile_threshold(s, top) == sorted[idx]);
    }
  }

  TEST_CASE("top fraction must lie strictly inside (0, 1)") {
    const std::vector<double> s{1.0, 2.0};
    CHECK_THROWS_AS(quantile_threshold(s, 0.0), ConfigError);
    CHECK_THROWS_AS(quantile_threshold(s, 1.0), ConfigError);
    CHECK_THROWS_AS(quantile_threshold(s, -0.1), ConfigError);
  }
}
