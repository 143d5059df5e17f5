#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tiered/trajectory.hpp"

namespace tiered {

// Result of one A-vs-B comparison. In a greedy-vs-sampling pair, side A is
// the greedy decode by convention.
enum class Outcome { WinA, WinB, Tie };

const char* to_string(Outcome o);

// Fraction of wins for side A with ties disregarded entirely:
// wins_a / (wins_a + wins_b). Throws DegenerateDataError when every outcome
// is a tie (the rate is undefined, which is distinct from a rate of 0.5).
double win_rate(std::span<const Outcome> outcomes);

// Fraction of slices judged correct. Throws DegenerateDataError on an empty
// slice list.
double slice_correct_rate(std::span<const bool> slice_correct);

// Errors per token. Throws DegenerateDataError when token_count is zero.
double grammar_error_rate(std::int64_t error_count, std::int64_t token_count);

// Collapses one aspect signal to a single comparable scalar, higher is
// better. Token- and segment-dense signals compare by their slice correct
// rate (a unit counts as correct when its raw value is >= 0, i.e. not
// penalized); sequence-dense signals compare by their raw value.
double aspect_comparison_score(const RewardSignal& signal);

// One greedy-vs-sampling comparison: two generations for the same prompt
// scored by the holistic reward and by every candidate aspect. Aspect
// scores are scalars from aspect_comparison_score, keyed by aspect name.
struct ComparisonPair {
  std::uint64_t prompt_id = 0;
  double holistic_a = 0.0;
  double holistic_b = 0.0;
  std::map<std::string, double> aspect_scores_a;
  std::map<std::string, double> aspect_scores_b;
};

struct InconsistencyCounts {
  std::int64_t compared = 0;       // pairs surviving the holistic tie drop
  std::int64_t divergent = 0;      // compared pairs where the aspect strictly opposes
  std::int64_t holistic_ties = 0;  // pairs dropped before comparing
};

struct InconsistencyResult {
  double rate = 0.0;  // divergent / compared, in [0, 1]
  InconsistencyCounts counts;
};

// How often an aspect's strict preference opposes the holistic preference.
// Pairs where the holistic scores tie are dropped first; among the rest, a
// pair is divergent only when the aspect strictly prefers the opposite side
// (an aspect tie counts as consistent). Throws Error when `aspect` is
// missing from any pair and DegenerateDataError when no pair survives the
// tie drop.
InconsistencyResult inconsistency(std::span<const ComparisonPair> pairs,
                                  const std::string& aspect);

// Per-candidate statistics gathered while selecting. win_rate_greedy is the
// win rate of the greedy side under this aspect's scores (nullopt when every
// pair ties on the aspect, leaving the rate undefined).
struct AspectSelectionStats {
  std::string name;
  double inconsistency = 0.0;
  InconsistencyCounts counts;
  std::optional<double> win_rate_greedy;
};

struct SelectionReport {
  std::int64_t total_pairs = 0;
  std::optional<double> holistic_win_rate_greedy;
  std::vector<AspectSelectionStats> aspects;  // sorted by selection order
  std::vector<std::string> chosen;            // first max_selected of the ranking
};

// Ranks candidate aspects by ascending inconsistency with the holistic
// preference and keeps the best max_selected. Ties on inconsistency break
// toward the candidate whose greedy win rate sits closest to the holistic
// greedy win rate; any remaining ties break by name so the result is
// deterministic and independent of candidate order. Throws ConfigError when
// candidates are empty or max_selected < 1.
SelectionReport select_rewards(std::span<const ComparisonPair> pairs,
                               std::span<const std::string> candidates,
                               int max_selected = 1);

}  // namespace tiered
