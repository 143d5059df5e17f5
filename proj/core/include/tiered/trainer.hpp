#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tiered/environment.hpp"
#include "tiered/policy.hpp"
#include "tiered/reward.hpp"

namespace tiered {

// The four ways a training run can turn reward signals into the scalar the
// optimizer sees. Hierarchical is the full two-tier combination; the other
// three are the ablation baselines it is compared against.
enum class Method { Hierarchical, HolisticOnly, AspectOnly, WeightedSum };

const char* to_string(Method m);
Method method_from_string(const std::string& name);

struct TrainConfig {
  int batch_size = 32;        // trajectories collected per optimizer iteration
  int minibatch_size = 16;    // trajectories per gradient step
  int ppo_epochs = 4;         // optimization passes over each batch
  double clip_epsilon = 0.2;
  double learning_rate = 0.13;
  double value_learning_rate = 0.1;
  double kl_coeff = 0.02;     // weight of the KL(new || reference) penalty
  double discount = 1.0;
  std::int64_t total_episodes = 10000;
  int rollouts_per_prompt = 1;  // repeated samples per prompt within a batch
  int eval_every = 10;          // iterations between greedy evaluations
  int eval_prompts = 320;
  double init_logit_sigma = 0.5;
  double init_eos_bias = 0.5;  // added to every context's eos logit at init
  std::uint64_t seed = 1;
};

void validate_train_config(const TrainConfig& cfg);

// Per-context scalar state-value baseline, regressed on observed returns.
struct ValueTable {
  std::vector<double> v;  // one entry per policy context
};

ValueTable zero_values(int context_count);

// One scored rollout plus the per-token quantities PPO consumes.
struct Rollout {
  Trajectory traj;
  int start_context = 0;
  double holistic_raw = 0.0;
  CombinedReward reward;           // breakdown under the active method
  std::vector<double> returns;     // discounted terminal reward per token
  std::vector<double> baselines;   // value-table estimate per token
  std::vector<double> advantages;  // whitened per batch
};

struct RolloutBatch {
  std::vector<Rollout> rollouts;
  std::size_t token_count() const;
};

// Context of token t within a rollout: the start context for t = 0, the
// previous token otherwise.
int context_at(const Rollout& rollout, std::size_t t);

struct AdvantageStats {
  double mean = 0.0;
  double stddev = 0.0;
  bool whitened = false;  // false when zero variance forced the fallback
};

// Fills returns (terminal reward propagated back by `discount`), baselines
// (current value-table estimates) and advantages (returns minus baselines,
// whitened to zero mean / unit variance across the whole batch; a
// zero-variance batch falls back to the unwhitened values).
AdvantageStats compute_advantages(RolloutBatch& batch, const ValueTable& values,
                                  const TrainConfig& cfg);

struct ObjectiveEval {
  // Mean over tokens of min(rho * A, clip(rho, 1 +- eps) * A) minus
  // kl_coeff * KL(policy || reference) at each visited context.
  double objective = 0.0;
  std::vector<double> grad;  // d objective / d logits, laid out like PolicyParams::logits
  double mean_kl = 0.0;
  double clip_fraction = 0.0;  // fraction of tokens where the clip was active
};

// Clipped-surrogate objective and its exact gradient over the tokens of the
// chosen trajectories. Pure: mutates nothing, and the advantages stored in
// the batch are treated as constants.
ObjectiveEval policy_objective(const PolicyParams& params, const PolicyParams& ref,
                               const RolloutBatch& batch,
                               std::span<const std::size_t> traj_indices,
                               const TrainConfig& cfg);

struct UpdateStats {
  double mean_kl = 0.0;          // averaged over all gradient steps
  double clip_fraction = 0.0;
  double mean_value_error = 0.0; // |return - baseline| before the update
};

// One PPO update: ppo_epochs passes over the batch in shuffled minibatches,
// taking a gradient-ascent step on the clipped surrogate and a squared-error
// regression step on the value table per minibatch. Increments
// params.version once. Throws Error if any step produces a non-finite
// gradient, identifying the offending minibatch.
UpdateStats ppo_update(PolicyParams& params, ValueTable& values, const PolicyParams& ref,
                       const RolloutBatch& batch, const TrainConfig& cfg, Rng& rng);

// Builds the reward breakdown a given method trains on:
//   Hierarchical - combine() as configured;
//   HolisticOnly - combine() with no aspects selected;
//   WeightedSum  - combine() with the gate forced open;
//   AspectOnly   - the raw (unshaped) aggregate of the first selected aspect,
//                  recorded in the same breakdown structure.
CombinedReward score_trajectory(Method method, const Trajectory& traj, double holistic_raw,
                                std::span<const RewardSignal> signals,
                                const HierarchicalRewardConfig& reward_cfg,
                                const NormalizationStats& stats);

// Everything a training run needs beyond the optimizer knobs.
struct TrainInputs {
  Method method = Method::Hierarchical;
  EnvSpec env;
  HierarchicalRewardConfig reward;
  NormalizationStats stats;
  // Specs of reward.selected_aspects, in the same order.
  std::vector<AspectSpec> selected_specs;
  // Aspect whose comparison score is tracked in logs and evaluations.
  AspectSpec report_aspect;
  double q_star = 0.5;
};

struct IterationLog {
  std::int64_t iteration = 0;
  std::int64_t episodes = 0;  // cumulative, after this iteration
  double mean_reward = 0.0;   // training scalar
  double mean_holistic_raw = 0.0;
  double mean_holistic_normalized = 0.0;
  double mean_aspect_rate = 0.0;
  double mean_length = 0.0;
  double gated_fraction = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
};

struct EvalPoint {
  std::int64_t iteration = 0;
  std::int64_t episodes = 0;
  double mean_quality = 0.0;
  double mean_holistic = 0.0;
  double superior_rate = 0.0;
  double aspect_rate = 0.0;
  double mean_length = 0.0;
};

struct TrainResult {
  PolicyParams params;
  ValueTable values;
  std::vector<IterationLog> iterations;
  std::vector<EvalPoint> evals;  // first entry logged before any update
};

// Held-out evaluation prompts live at this offset so their ids (and
// therefore their noise substreams) never collide with training prompts.
inline constexpr std::uint64_t kEvalPromptBase = 1'000'000'000ull;

struct EvalSummary {
  double mean_quality = 0.0;
  double mean_holistic = 0.0;
  double superior_rate = 0.0;
  double aspect_rate = 0.0;
  double mean_length = 0.0;
};

// Greedy-decodes eval_prompts held-out prompts and summarizes them.
EvalSummary greedy_eval(const PolicyParams& params, const EnvSpec& env,
                        const AspectSpec& report_aspect, double q_star, int eval_prompts);

// Called once per scored rollout, in episode order, before the batch's
// optimizer update; used to stream trajectory logs.
using RolloutSink = std::function<void(const Rollout&)>;

// Runs the full training loop: sample a batch from the current policy
// (prompt e / rollouts_per_prompt for episode e, pure sampling), score it
// under the method, compute advantages against the value table, and apply
// one PPO update; greedy evaluations run before training, every eval_every
// iterations, and after the last one. Deterministic given (inputs, cfg):
// every random draw comes from substreams keyed by cfg.seed or env.seed.
TrainResult train(const TrainInputs& inputs, const TrainConfig& cfg,
                  const RolloutSink& sink = nullptr);

}  // namespace tiered
