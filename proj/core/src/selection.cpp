#include "tiered/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tiered/errors.hpp"

namespace tiered {

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::WinA: return "win_a";
    case Outcome::WinB: return "win_b";
    case Outcome::Tie: return "tie";
  }
  return "?";
}

double win_rate(std::span<const Outcome> outcomes) {
  std::int64_t wins_a = 0, wins_b = 0;
  for (Outcome o : outcomes) {
    if (o == Outcome::WinA) ++wins_a;
    else if (o == Outcome::WinB) ++wins_b;
  }
  if (wins_a + wins_b == 0)
    throw DegenerateDataError("win rate undefined: all " + std::to_string(outcomes.size()) +
                              " outcomes are ties");
  return static_cast<double>(wins_a) / static_cast<double>(wins_a + wins_b);
}

double slice_correct_rate(std::span<const bool> slice_correct) {
  if (slice_correct.empty())
    throw DegenerateDataError("slice correct rate undefined on zero slices");
  std::int64_t correct = 0;
  for (bool c : slice_correct)
    if (c) ++correct;
  return static_cast<double>(correct) / static_cast<double>(slice_correct.size());
}

double grammar_error_rate(std::int64_t error_count, std::int64_t token_count) {
  if (token_count <= 0)
    throw DegenerateDataError("grammar error rate undefined on zero tokens");
  if (error_count < 0 || error_count > token_count)
    throw Error("error count " + std::to_string(error_count) + " out of range for " +
                std::to_string(token_count) + " tokens");
  return static_cast<double>(error_count) / static_cast<double>(token_count);
}

double aspect_comparison_score(const RewardSignal& signal) {
  if (signal.density == Density::Sequence) {
    if (signal.values.size() != 1)
      throw Error("sequence signal '" + signal.name + "' must carry exactly one value");
    return signal.values[0];
  }
  if (signal.values.empty())
    throw DegenerateDataError("signal '" + signal.name + "' has no slices to score");
  std::int64_t correct = 0;
  for (double v : signal.values)
    if (v >= 0.0) ++correct;
  return static_cast<double>(correct) / static_cast<double>(signal.values.size());
}

namespace {

double aspect_score(const std::map<std::string, double>& scores, const std::string& aspect) {
  auto it = scores.find(aspect);
  if (it == scores.end())
    throw Error("aspect '" + aspect + "' is missing from a comparison pair");
  return it->second;
}

// Win rate that reports nullopt instead of throwing on an all-tie list; the
// public win_rate keeps the throwing contract, selection ranking needs the
// soft form.
std::optional<double> win_rate_soft(std::span<const Outcome> outcomes) {
  std::int64_t wins_a = 0, wins_b = 0;
  for (Outcome o : outcomes) {
    if (o == Outcome::WinA) ++wins_a;
    else if (o == Outcome::WinB) ++wins_b;
  }
  if (wins_a + wins_b == 0) return std::nullopt;
  return static_cast<double>(wins_a) / static_cast<double>(wins_a + wins_b);
}

int sign_of(double a, double b) { return a > b ? 1 : (a < b ? -1 : 0); }

}  // namespace

InconsistencyResult inconsistency(std::span<const ComparisonPair> pairs,
                                  const std::string& aspect) {
  InconsistencyResult r;
  for (const auto& p : pairs) {
    const int holistic = sign_of(p.holistic_a, p.holistic_b);
    const int by_aspect =
        sign_of(aspect_score(p.aspect_scores_a, aspect), aspect_score(p.aspect_scores_b, aspect));
    if (holistic == 0) {
      ++r.counts.holistic_ties;
      continue;
    }
    ++r.counts.compared;
    if (by_aspect != 0 && by_aspect != holistic) ++r.counts.divergent;
  }
  if (r.counts.compared == 0)
    throw DegenerateDataError("inconsistency undefined: every pair ties on the holistic reward");
  r.rate = static_cast<double>(r.counts.divergent) / static_cast<double>(r.counts.compared);
  return r;
}

SelectionReport select_rewards(std::span<const ComparisonPair> pairs,
                               std::span<const std::string> candidates,
                               int max_selected) {
  if (candidates.empty()) throw ConfigError("select_rewards needs at least one candidate");
  if (max_selected < 1) throw ConfigError("max_selected must be >= 1");

  SelectionReport report;
  report.total_pairs = static_cast<std::int64_t>(pairs.size());

  std::vector<Outcome> holistic_outcomes(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const int s = sign_of(pairs[i].holistic_a, pairs[i].holistic_b);
    holistic_outcomes[i] = s > 0 ? Outcome::WinA : (s < 0 ? Outcome::WinB : Outcome::Tie);
  }
  report.holistic_win_rate_greedy = win_rate_soft(holistic_outcomes);

  for (const auto& name : candidates) {
    AspectSelectionStats stats;
    stats.name = name;
    const InconsistencyResult r = inconsistency(pairs, name);
    stats.inconsistency = r.rate;
    stats.counts = r.counts;
    std::vector<Outcome> aspect_outcomes(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const int s = sign_of(aspect_score(pairs[i].aspect_scores_a, name),
                            aspect_score(pairs[i].aspect_scores_b, name));
      aspect_outcomes[i] = s > 0 ? Outcome::WinA : (s < 0 ? Outcome::WinB : Outcome::Tie);
    }
    stats.win_rate_greedy = win_rate_soft(aspect_outcomes);
    report.aspects.push_back(std::move(stats));
  }

  // Candidates whose win rate tracks the holistic win rate most closely make
  // the better tie-break: their pairwise behaviour looks the most like the
  // signal we are trying to stay consistent with. An undefined win rate
  // ranks last among equals.
  const double holistic_wr = report.holistic_win_rate_greedy.value_or(0.5);
  auto win_gap = [holistic_wr](const AspectSelectionStats& s) {
    if (!s.win_rate_greedy) return std::numeric_limits<double>::infinity();
    return std::abs(*s.win_rate_greedy - holistic_wr);
  };
  std::sort(report.aspects.begin(), report.aspects.end(),
            [&](const AspectSelectionStats& a, const AspectSelectionStats& b) {
              if (a.inconsistency != b.inconsistency) return a.inconsistency < b.inconsistency;
              const double ga = win_gap(a), gb = win_gap(b);
              if (ga != gb) return ga < gb;
              return a.name < b.name;
            });

  const auto keep = std::min<std::size_t>(report.aspects.size(),
                                          static_cast<std::size_t>(max_selected));
  for (std::size_t i = 0; i < keep; ++i) report.chosen.push_back(report.aspects[i].name);
  return report;
}

}  // namespace tiered
