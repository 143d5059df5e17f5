#pragma once

// Naive reference implementations used to cross-check the library. Everything
// here trades speed for obviousness and shares no code with core/ beyond the
// public types it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <tiered/selection.hpp>
#include <tiered/trajectory.hpp>

namespace oracle {

// Mid-ranks (ties share the average rank), 1-based.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks(a), ranks(b));
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double population_stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  return std::sqrt(sq / static_cast<double>(v.size()));
}

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Eq.-style win rate: wins_a / (wins_a + wins_b), ties dropped. Returns -1
// when every outcome ties (the library throws there instead).
inline double win_rate(std::span<const tiered::Outcome> outcomes) {
  std::int64_t a = 0, b = 0;
  for (tiered::Outcome o : outcomes) {
    if (o == tiered::Outcome::WinA) ++a;
    if (o == tiered::Outcome::WinB) ++b;
  }
  if (a + b == 0) return -1.0;
  return static_cast<double>(a) / static_cast<double>(a + b);
}

struct InconsistencyRecount {
  std::int64_t compared = 0;
  std::int64_t divergent = 0;
  std::int64_t holistic_ties = 0;
  double rate() const { return static_cast<double>(divergent) / static_cast<double>(compared); }
};

// Pair-by-pair recount of the inconsistency statistic: drop holistic ties,
// then count pairs where the aspect's strict preference opposes the holistic
// preference. Aspect ties count as consistent.
inline InconsistencyRecount recount_inconsistency(std::span<const tiered::ComparisonPair> pairs,
                                                  const std::string& aspect) {
  InconsistencyRecount out;
  for (const auto& p : pairs) {
    if (p.holistic_a == p.holistic_b) {
      ++out.holistic_ties;
      continue;
    }
    ++out.compared;
    const bool holistic_prefers_a = p.holistic_a > p.holistic_b;
    const double sa = p.aspect_scores_a.at(aspect);
    const double sb = p.aspect_scores_b.at(aspect);
    if (sa == sb) continue;
    const bool aspect_prefers_a = sa > sb;
    if (aspect_prefers_a != holistic_prefers_a) ++out.divergent;
  }
  return out;
}

// Win rate of side A under one aspect's scores, ties dropped; -1 when all tie.
inline double recount_aspect_win_rate(std::span<const tiered::ComparisonPair> pairs,
                                      const std::string& aspect) {
  std::int64_t a = 0, b = 0;
  for (const auto& p : pairs) {
    const double sa = p.aspect_scores_a.at(aspect);
    const double sb = p.aspect_scores_b.at(aspect);
    if (sa > sb) ++a;
    if (sa < sb) ++b;
  }
  if (a + b == 0) return -1.0;
  return static_cast<double>(a) / static_cast<double>(a + b);
}

inline double recount_holistic_win_rate(std::span<const tiered::ComparisonPair> pairs) {
  std::int64_t a = 0, b = 0;
  for (const auto& p : pairs) {
    if (p.holistic_a > p.holistic_b) ++a;
    if (p.holistic_a < p.holistic_b) ++b;
  }
  if (a + b == 0) return -1.0;
  return static_cast<double>(a) / static_cast<double>(a + b);
}

// A well-formed trajectory over random tokens, segmented in fixed chunks.
inline tiered::Trajectory random_trajectory(tiered::Rng& rng, int vocab_size, int max_len,
                                            int segment_len) {
  tiered::Trajectory traj;
  traj.prompt_id = rng();
  const int len = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_len));
  for (int t = 0; t < len; ++t)
    traj.tokens.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(vocab_size)));
  traj.logprobs.assign(traj.tokens.size(), -1.0);
  for (std::size_t begin = 0; begin < traj.tokens.size();
       begin += static_cast<std::size_t>(segment_len))
    traj.segments.emplace_back(
        begin, std::min(begin + static_cast<std::size_t>(segment_len), traj.tokens.size()));
  return traj;
}

}  // namespace oracle
