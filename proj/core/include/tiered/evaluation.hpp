#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tiered/selection.hpp"

namespace tiered {

// Whether a larger or smaller metric value wins a pairwise comparison
// (error-rate style metrics compare with LowerWins).
enum class Direction { HigherWins, LowerWins };

const char* to_string(Direction d);

// One generation's score under a single metric.
struct ScoredGeneration {
  std::uint64_t prompt_id = 0;
  double score = 0.0;
};

// Per-prompt outcomes of side A vs side B. Both sides must cover exactly
// the same prompt ids; entries are matched by id, and a mismatch throws
// Error. Outcomes come back in ascending prompt order.
std::vector<Outcome> pairwise_outcomes(std::span<const ScoredGeneration> side_a,
                                       std::span<const ScoredGeneration> side_b,
                                       Direction direction);

// win_rate over pairwise_outcomes: ties dropped, all-tie input raises
// DegenerateDataError.
double pairwise_win_rate(std::span<const ScoredGeneration> side_a,
                         std::span<const ScoredGeneration> side_b, Direction direction);

// One cell of a method-vs-method table: the win rate of the row method over
// the column method, averaged across seeds (mean +- population stddev).
// `defined` is false when every seed's comparison was all-tie.
struct WinRateCell {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<std::optional<double>> per_seed;
  bool defined = false;
};

// All pairwise tables for one evaluation: per metric, an n-methods-square
// table plus a per-row average column. Antisymmetric by construction:
// cell(i,j) + cell(j,i) = 1 per seed wherever both are defined.
struct MethodMatrix {
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  // metric -> row-major n*n cells; the diagonal is left undefined.
  std::map<std::string, std::vector<WinRateCell>> tables;
  // metric -> per-row mean of the defined off-diagonal cells.
  std::map<std::string, std::vector<std::optional<double>>> row_averages;

  const WinRateCell& cell(const std::string& metric, std::size_t row, std::size_t col) const;
};

// Per-seed win rates for an ordered method pair under one metric. Fill
// row < col only; the matrix derives the mirrored cell.
struct PairwiseSeries {
  std::string metric;
  std::size_t row = 0;
  std::size_t col = 0;
  std::vector<std::optional<double>> per_seed;  // aligned with MethodMatrix::seeds
};

// Assembles the matrix from upper-triangle series. Every (metric, row, col)
// with row < col must be present exactly once and carry one entry per seed;
// a missing or misshapen series throws Error. Cells with at least one
// defined seed get mean/stddev over the defined seeds.
MethodMatrix build_matrix(std::span<const std::string> methods,
                          std::span<const std::uint64_t> seeds,
                          std::span<const std::string> metrics,
                          std::span<const PairwiseSeries> series);

}  // namespace tiered
