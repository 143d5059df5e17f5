#include "tiered/reward.hpp"

#include <cmath>
#include <set>

#include "tiered/errors.hpp"

namespace tiered {

const char* to_string(Shaping s) {
  return s == Shaping::Sigmoid ? "sigmoid" : "none";
}

void validate_reward_config(const HierarchicalRewardConfig& cfg) {
  if (!std::isfinite(cfg.threshold))
    throw ConfigError("reward threshold must be finite");
  if (!(cfg.holistic_weight > 0.0) || !std::isfinite(cfg.holistic_weight))
    throw ConfigError("holistic_weight must be a positive finite scalar");
  for (const auto& [name, w] : cfg.aspect_weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw ConfigError("aspect weight for '" + name + "' must be a positive finite scalar");
  std::set<std::string> seen;
  for (const auto& name : cfg.selected_aspects) {
    if (!cfg.aspect_weights.count(name))
      throw ConfigError("selected aspect '" + name + "' has no weight");
    if (!seen.insert(name).second)
      throw ConfigError("selected aspect '" + name + "' appears twice");
  }
}

double shape_sigmoid(double raw) {
  // Splitting on sign keeps exp() off large positive arguments, so the
  // result saturates to 0/1 instead of overflowing.
  if (raw >= 0.0) return 1.0 / (1.0 + std::exp(-raw));
  const double e = std::exp(raw);
  return e / (1.0 + e);
}

namespace {

double shape_value(double v, Shaping shaping) {
  return shaping == Shaping::Sigmoid ? shape_sigmoid(v) : v;
}

const RewardSignal& find_signal(std::span<const RewardSignal> aspects, const std::string& name) {
  for (const auto& s : aspects)
    if (s.name == name) return s;
  throw Error("selected aspect '" + name + "' is missing from the trajectory's signals");
}

}  // namespace

double aggregate_signal(const RewardSignal& signal, const Trajectory& traj, Shaping shaping) {
  validate_trajectory(traj);
  validate_signal(signal, traj);
  double sum = 0.0;
  for (double v : signal.values) sum += shape_value(v, shaping);
  return sum;
}

CombinedReward combine(double holistic_raw, std::span<const RewardSignal> aspects,
                       const Trajectory& traj, const HierarchicalRewardConfig& cfg,
                       const NormalizationStats& stats) {
  validate_reward_config(cfg);
  CombinedReward out;
  out.holistic_normalized = z_normalize(holistic_raw, stats);
  out.gated = out.holistic_normalized >= cfg.threshold;
  out.final_reward = cfg.holistic_weight * out.holistic_normalized;
  for (const auto& name : cfg.selected_aspects) {
    double contribution = 0.0;
    if (out.gated) {
      const RewardSignal& signal = find_signal(aspects, name);
      contribution = cfg.aspect_weights.at(name) * aggregate_signal(signal, traj, cfg.shaping);
    }
    out.aspect_contributions[name] = contribution;
    out.final_reward += contribution;
  }
  return out;
}

std::vector<double> per_token_rewards(const CombinedReward& combined,
                                      std::span<const RewardSignal> aspects,
                                      const Trajectory& traj,
                                      const HierarchicalRewardConfig& cfg) {
  validate_trajectory(traj);
  std::vector<double> out(traj.tokens.size(), 0.0);
  // The holistic term is only observable once the sequence is complete, so
  // it sits on the terminal token; the loop below moves token-dense aspect
  // contributions back onto their own positions.
  double terminal = combined.final_reward;
  if (combined.gated) {
    for (const auto& name : cfg.selected_aspects) {
      const RewardSignal& signal = find_signal(aspects, name);
      if (signal.density != Density::Token) continue;
      validate_signal(signal, traj);
      const double w = cfg.aspect_weights.at(name);
      for (std::size_t t = 0; t < signal.values.size(); ++t) {
        const double r = w * shape_value(signal.values[t], cfg.shaping);
        out[t] += r;
        terminal -= r;
      }
    }
  }
  out.back() += terminal;
  return out;
}

}  // namespace tiered
