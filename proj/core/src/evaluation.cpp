#include "tiered/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "tiered/errors.hpp"

namespace tiered {

const char* to_string(Direction d) {
  return d == Direction::HigherWins ? "higher_wins" : "lower_wins";
}

namespace {

std::vector<ScoredGeneration> sorted_by_prompt(std::span<const ScoredGeneration> side,
                                               const char* label) {
  std::vector<ScoredGeneration> out(side.begin(), side.end());
  std::sort(out.begin(), out.end(),
            [](const ScoredGeneration& a, const ScoredGeneration& b) {
              return a.prompt_id < b.prompt_id;
            });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].prompt_id == out[i - 1].prompt_id)
      throw Error(std::string("duplicate prompt id ") + std::to_string(out[i].prompt_id) +
                  " on side " + label);
  return out;
}

}  // namespace

std::vector<Outcome> pairwise_outcomes(std::span<const ScoredGeneration> side_a,
                                       std::span<const ScoredGeneration> side_b,
                                       Direction direction) {
  if (side_a.size() != side_b.size())
    throw Error("pairwise comparison needs equally sized sides, got " +
                std::to_string(side_a.size()) + " vs " + std::to_string(side_b.size()));
  if (side_a.empty()) throw Error("pairwise comparison of empty sides");
  const auto a = sorted_by_prompt(side_a, "A");
  const auto b = sorted_by_prompt(side_b, "B");
  std::vector<Outcome> outcomes;
  outcomes.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].prompt_id != b[i].prompt_id)
      throw Error("prompt sets are misaligned: side A has " + std::to_string(a[i].prompt_id) +
                  " where side B has " + std::to_string(b[i].prompt_id));
    double sa = a[i].score, sb = b[i].score;
    if (direction == Direction::LowerWins) std::swap(sa, sb);
    outcomes.push_back(sa > sb ? Outcome::WinA : (sa < sb ? Outcome::WinB : Outcome::Tie));
  }
  return outcomes;
}

double pairwise_win_rate(std::span<const ScoredGeneration> side_a,
                         std::span<const ScoredGeneration> side_b, Direction direction) {
  const std::vector<Outcome> outcomes = pairwise_outcomes(side_a, side_b, direction);
  return win_rate(outcomes);
}

const WinRateCell& MethodMatrix::cell(const std::string& metric, std::size_t row,
                                      std::size_t col) const {
  const auto it = tables.find(metric);
  if (it == tables.end()) throw Error("no table for metric '" + metric + "'");
  return it->second.at(row * methods.size() + col);
}

MethodMatrix build_matrix(std::span<const std::string> methods,
                          std::span<const std::uint64_t> seeds,
                          std::span<const std::string> metrics,
                          std::span<const PairwiseSeries> series) {
  if (methods.size() < 2) throw Error("a method matrix needs at least two methods");
  if (seeds.empty()) throw Error("a method matrix needs at least one seed");
  const std::size_t n = methods.size();

  MethodMatrix matrix;
  matrix.methods.assign(methods.begin(), methods.end());
  matrix.seeds.assign(seeds.begin(), seeds.end());
  for (const auto& metric : metrics) {
    matrix.tables[metric].assign(n * n, WinRateCell{});
    for (auto& cell : matrix.tables[metric])
      cell.per_seed.assign(seeds.size(), std::nullopt);
  }

  std::map<std::string, std::vector<bool>> filled;
  for (const auto& metric : metrics) filled[metric].assign(n * n, false);

  for (const auto& s : series) {
    if (!matrix.tables.count(s.metric)) throw Error("series for unknown metric '" + s.metric + "'");
    if (s.row >= n || s.col >= n || s.row >= s.col)
      throw Error("series for metric '" + s.metric + "' must address the upper triangle");
    if (s.per_seed.size() != seeds.size())
      throw Error("series for metric '" + s.metric + "' carries " +
                  std::to_string(s.per_seed.size()) + " seeds, expected " +
                  std::to_string(seeds.size()));
    const std::size_t idx = s.row * n + s.col;
    if (filled[s.metric][idx])
      throw Error("duplicate series for metric '" + s.metric + "'");
    filled[s.metric][idx] = true;

    WinRateCell& upper = matrix.tables[s.metric][idx];
    WinRateCell& lower = matrix.tables[s.metric][s.col * n + s.row];
    upper.per_seed = s.per_seed;
    for (std::size_t k = 0; k < seeds.size(); ++k)
      lower.per_seed[k] = s.per_seed[k] ? std::optional<double>(1.0 - *s.per_seed[k])
                                        : std::nullopt;
  }

  for (const auto& metric : metrics)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (!filled[metric][i * n + j])
          throw Error("missing series for metric '" + metric + "' pair (" +
                      matrix.methods[i] + ", " + matrix.methods[j] + ")");

  for (auto& [metric, cells] : matrix.tables) {
    for (auto& cell : cells) {
      std::vector<double> defined;
      for (const auto& v : cell.per_seed)
        if (v) defined.push_back(*v);
      if (defined.empty()) continue;
      cell.defined = true;
      double sum = 0.0;
      for (double v : defined) sum += v;
      cell.mean = sum / static_cast<double>(defined.size());
      double sq = 0.0;
      for (double v : defined) sq += (v - cell.mean) * (v - cell.mean);
      cell.stddev = std::sqrt(sq / static_cast<double>(defined.size()));
    }
    auto& averages = matrix.row_averages[metric];
    averages.assign(n, std::nullopt);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const WinRateCell& cell = cells[i * n + j];
        if (!cell.defined) continue;
        sum += cell.mean;
        ++count;
      }
      if (count > 0) averages[i] = sum / static_cast<double>(count);
    }
  }
  return matrix;
}

}  // namespace tiered
