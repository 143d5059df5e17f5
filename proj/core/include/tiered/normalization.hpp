#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace tiered {

// Frozen first and second moments of a calibration sample. Once fitted the
// stats never move: every trajectory scored later is normalized against the
// same frozen values, so scores from different training stages stay on one
// scale. `source` records where the sample came from (seed, size) purely for
// provenance in artifacts.
struct NormalizationStats {
  double mean = 0.0;
  double stddev = 1.0;  // population standard deviation, > 0
  std::int64_t sample_count = 0;
  std::string source;
};

// Fits population mean/stddev over the sample. Throws DegenerateDataError
// when fewer than two values are given or when all values are equal (the
// z-score would be undefined); throws Error on non-finite input.
NormalizationStats fit_normalization(std::span<const double> samples,
                                     std::string source = {});

// (raw - mean) / stddev. Throws Error on non-finite raw input or invalid
// stats (stddev <= 0).
double z_normalize(double raw, const NormalizationStats& stats);

// Empirical quantile at `fraction` in [0, 1]: sorts a copy ascending and
// returns the order statistic at index floor(fraction * n), clamped to the
// last element. No interpolation — when the cut falls between two adjacent
// order statistics the lower one is returned, and the result is always an
// actual sample value. Throws DegenerateDataError on an empty sample.
double empirical_quantile(std::span<const double> samples, double fraction);

// Value v such that approximately `top_fraction` of the samples lie at or
// above v; equals empirical_quantile(samples, 1 - top_fraction). With
// samples {1..10} and top_fraction 0.3, returns 8: exactly three samples
// (8, 9, 10) are >= 8. Throws ConfigError unless top_fraction is in (0, 1).
double quantile_threshold(std::span<const double> samples, double top_fraction);

}  // namespace tiered
