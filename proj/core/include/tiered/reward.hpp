#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tiered/normalization.hpp"
#include "tiered/trajectory.hpp"

namespace tiered {

// How raw aspect values are squashed before they are summed into the
// combined reward. Sigmoid keeps every aspect contribution positive and
// bounded so that adding aspects can only help a gated trajectory; None
// passes raw values through (used by the aspect-only baseline).
enum class Shaping { Sigmoid, None };

const char* to_string(Shaping s);

// Parameters of the two-tier combination. The holistic reward acts as the
// top tier: only trajectories whose normalized holistic score reaches
// `threshold` (boundary included) earn their aspect contributions; everyone
// else is scored by the weighted holistic term alone. `threshold` lives in
// post-normalization (z-score) units.
struct HierarchicalRewardConfig {
  double threshold = 0.0;
  double holistic_weight = 5.0;
  std::map<std::string, double> aspect_weights;  // name -> positive scalar
  Shaping shaping = Shaping::Sigmoid;
  // Names of the aspects that actually enter the sum, in order. Every entry
  // must have a weight in aspect_weights.
  std::vector<std::string> selected_aspects;
};

// Throws ConfigError when weights are non-positive, a selected aspect has no
// weight, a selected aspect is duplicated, or threshold is non-finite.
void validate_reward_config(const HierarchicalRewardConfig& cfg);

// Full breakdown of one combined reward, kept for logging and analysis.
// Invariants: gated == (holistic_normalized >= threshold), and final_reward
// == holistic_weight * holistic_normalized + sum of aspect_contributions.
// When not gated, every aspect contribution is zero.
struct CombinedReward {
  double final_reward = 0.0;
  double holistic_normalized = 0.0;
  std::map<std::string, double> aspect_contributions;
  bool gated = false;
};

// Logistic squashing 1 / (1 + exp(-raw)). Maps every finite value into
// (0, 1) and saturates at the extremes; never throws.
double shape_sigmoid(double raw);

// Collapses one signal to a scalar: shapes each value (per token, per
// segment, or the single sequence value) and sums. With Shaping::None the
// raw values are summed unchanged. Throws when the signal does not match
// the trajectory.
double aggregate_signal(const RewardSignal& signal, const Trajectory& traj, Shaping shaping);

// The core operation: z-normalizes the raw holistic reward against frozen
// stats, applies the threshold gate, and — only when gated — adds the
// weighted aggregate of every selected aspect. Throws Error on non-finite
// holistic input or when a selected aspect is missing from `aspects`.
CombinedReward combine(double holistic_raw, std::span<const RewardSignal> aspects,
                       const Trajectory& traj, const HierarchicalRewardConfig& cfg,
                       const NormalizationStats& stats);

// Distributes an already-combined reward over token positions: token-dense
// aspect contributions land on their own positions, while the holistic term
// and any coarser-grained contributions land on the terminal token. The
// vector always sums to combined.final_reward (up to rounding).
std::vector<double> per_token_rewards(const CombinedReward& combined,
                                      std::span<const RewardSignal> aspects,
                                      const Trajectory& traj,
                                      const HierarchicalRewardConfig& cfg);

}  // namespace tiered
