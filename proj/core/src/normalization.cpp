#include "tiered/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tiered/errors.hpp"

namespace tiered {

NormalizationStats fit_normalization(std::span<const double> samples, std::string source) {
  if (samples.size() < 2)
    throw DegenerateDataError("calibration needs at least 2 samples, got " +
                              std::to_string(samples.size()));
  double sum = 0.0;
  for (double v : samples) {
    if (!std::isfinite(v)) throw Error("calibration sample is not finite");
    sum += v;
  }
  const double mean = sum / static_cast<double>(samples.size());
  double sq = 0.0;
  for (double v : samples) sq += (v - mean) * (v - mean);
  const double stddev = std::sqrt(sq / static_cast<double>(samples.size()));
  if (stddev == 0.0)
    throw DegenerateDataError("calibration sample has zero variance; cannot z-normalize");
  NormalizationStats stats;
  stats.mean = mean;
  stats.stddev = stddev;
  stats.sample_count = static_cast<std::int64_t>(samples.size());
  stats.source = std::move(source);
  return stats;
}

double z_normalize(double raw, const NormalizationStats& stats) {
  if (!std::isfinite(raw)) throw Error("cannot normalize a non-finite reward");
  if (!(stats.stddev > 0.0) || !std::isfinite(stats.stddev) || !std::isfinite(stats.mean))
    throw Error("normalization stats are invalid (stddev must be finite and > 0)");
  return (raw - stats.mean) / stats.stddev;
}

double empirical_quantile(std::span<const double> samples, double fraction) {
  if (samples.empty()) throw DegenerateDataError("quantile of an empty sample");
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ConfigError("quantile fraction must be in [0, 1]");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  auto index = static_cast<std::size_t>(fraction * static_cast<double>(sorted.size()));
  if (index >= sorted.size()) index = sorted.size() - 1;
  return sorted[index];
}

double quantile_threshold(std::span<const double> samples, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction < 1.0))
    throw ConfigError("top_fraction must be in (0, 1), got " + std::to_string(top_fraction));
  return empirical_quantile(samples, 1.0 - top_fraction);
}

}  // namespace tiered
