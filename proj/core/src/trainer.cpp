#include "tiered/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "tiered/errors.hpp"
#include "tiered/selection.hpp"

namespace tiered {

const char* to_string(Method m) {
  switch (m) {
    case Method::Hierarchical: return "hierarchical";
    case Method::HolisticOnly: return "holistic_only";
    case Method::AspectOnly: return "aspect_only";
    case Method::WeightedSum: return "weighted_sum";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "hierarchical") return Method::Hierarchical;
  if (name == "holistic_only") return Method::HolisticOnly;
  if (name == "aspect_only") return Method::AspectOnly;
  if (name == "weighted_sum") return Method::WeightedSum;
  throw ConfigError("unknown training method '" + name +
                    "' (expected hierarchical, holistic_only, aspect_only or weighted_sum)");
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.minibatch_size < 1 || cfg.minibatch_size > cfg.batch_size)
    throw ConfigError("minibatch_size must be in [1, batch_size]");
  if (cfg.ppo_epochs < 1) throw ConfigError("ppo_epochs must be >= 1");
  if (!(cfg.clip_epsilon > 0.0 && cfg.clip_epsilon < 1.0))
    throw ConfigError("clip_epsilon must be in (0, 1)");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (cfg.value_learning_rate < 0.0) throw ConfigError("value_learning_rate must be >= 0");
  if (cfg.kl_coeff < 0.0) throw ConfigError("kl_coeff must be >= 0");
  if (!(cfg.discount > 0.0 && cfg.discount <= 1.0))
    throw ConfigError("discount must be in (0, 1]");
  if (cfg.total_episodes < 0) throw ConfigError("total_episodes must be >= 0");
  if (cfg.rollouts_per_prompt < 1) throw ConfigError("rollouts_per_prompt must be >= 1");
  if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (cfg.eval_prompts < 1) throw ConfigError("eval_prompts must be >= 1");
  if (cfg.init_logit_sigma < 0.0) throw ConfigError("init_logit_sigma must be >= 0");
  if (!std::isfinite(cfg.init_eos_bias)) throw ConfigError("init_eos_bias must be finite");
}

ValueTable zero_values(int context_count) {
  if (context_count < 1) throw Error("value table needs at least one context");
  ValueTable t;
  t.v.assign(static_cast<std::size_t>(context_count), 0.0);
  return t;
}

std::size_t RolloutBatch::token_count() const {
  std::size_t n = 0;
  for (const auto& r : rollouts) n += r.traj.tokens.size();
  return n;
}

int context_at(const Rollout& rollout, std::size_t t) {
  return t == 0 ? rollout.start_context : rollout.traj.tokens[t - 1];
}

AdvantageStats compute_advantages(RolloutBatch& batch, const ValueTable& values,
                                  const TrainConfig& cfg) {
  if (batch.rollouts.empty()) throw Error("cannot compute advantages on an empty batch");
  double sum = 0.0;
  std::size_t count = 0;
  for (auto& r : batch.rollouts) {
    const std::size_t len = r.traj.tokens.size();
    r.returns.resize(len);
    r.baselines.resize(len);
    r.advantages.resize(len);
    for (std::size_t t = 0; t < len; ++t) {
      // The whole scalar reward is attributed to the terminal token and
      // propagated back; with discount 1 every token sees the full reward.
      r.returns[t] =
          r.reward.final_reward * std::pow(cfg.discount, static_cast<double>(len - 1 - t));
      const int ctx = context_at(r, t);
      r.baselines[t] = values.v.at(static_cast<std::size_t>(ctx));
      r.advantages[t] = r.returns[t] - r.baselines[t];
      sum += r.advantages[t];
      ++count;
    }
  }
  AdvantageStats stats;
  stats.mean = sum / static_cast<double>(count);
  double sq = 0.0;
  for (const auto& r : batch.rollouts)
    for (double a : r.advantages) sq += (a - stats.mean) * (a - stats.mean);
  stats.stddev = std::sqrt(sq / static_cast<double>(count));
  if (stats.stddev > 1e-12) {
    stats.whitened = true;
    for (auto& r : batch.rollouts)
      for (double& a : r.advantages) a = (a - stats.mean) / stats.stddev;
  }
  return stats;
}

namespace {

// Softmax rows, log-probs and the KL against the reference are reused by
// every token sharing a context, so one evaluation caches them per context.
struct ContextCache {
  std::vector<double> probs;
  std::vector<double> ref_probs;
  double kl = 0.0;
};

const ContextCache& cached_context(std::map<int, ContextCache>& cache, int ctx,
                                   const PolicyParams& params, const PolicyParams& ref) {
  auto it = cache.find(ctx);
  if (it != cache.end()) return it->second;
  ContextCache entry;
  entry.probs = softmax_row(params, ctx);
  entry.ref_probs = softmax_row(ref, ctx);
  for (int k = 0; k < params.vocab_size; ++k) {
    const double p = entry.probs[static_cast<std::size_t>(k)];
    entry.kl += p * std::log(p / entry.ref_probs[static_cast<std::size_t>(k)]);
  }
  return cache.emplace(ctx, std::move(entry)).first->second;
}

}  // namespace

ObjectiveEval policy_objective(const PolicyParams& params, const PolicyParams& ref,
                               const RolloutBatch& batch,
                               std::span<const std::size_t> traj_indices,
                               const TrainConfig& cfg) {
  if (traj_indices.empty()) throw Error("policy objective over an empty minibatch");
  ObjectiveEval eval;
  eval.grad.assign(params.logits.size(), 0.0);
  std::map<int, ContextCache> cache;
  std::size_t tokens = 0;
  std::size_t clipped_tokens = 0;

  for (std::size_t idx : traj_indices) {
    const Rollout& r = batch.rollouts.at(idx);
    if (r.advantages.size() != r.traj.tokens.size())
      throw Error("rollout is missing advantages; run compute_advantages first");
    for (std::size_t t = 0; t < r.traj.tokens.size(); ++t) {
      const int ctx = context_at(r, t);
      const int tok = r.traj.tokens[t];
      const double adv = r.advantages[t];
      const ContextCache& c = cached_context(cache, ctx, params, ref);
      const double logp = std::log(c.probs[static_cast<std::size_t>(tok)]);
      const double rho = std::exp(logp - r.traj.logprobs[t]);
      const double unclipped = rho * adv;
      const double clipped =
          std::clamp(rho, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * adv;
      double* grad_row = eval.grad.data() + static_cast<std::size_t>(ctx) * params.vocab_size;
      if (unclipped <= clipped) {
        // The unclipped branch is active: gradient flows through rho.
        // d(rho * A)/d logit_j = rho * A * (1[j == tok] - p_j).
        for (int k = 0; k < params.vocab_size; ++k)
          grad_row[k] -= unclipped * c.probs[static_cast<std::size_t>(k)];
        grad_row[tok] += unclipped;
        eval.objective += unclipped;
      } else {
        // Clip active: the surrogate is flat in the policy at this token.
        eval.objective += clipped;
        ++clipped_tokens;
      }
      if (cfg.kl_coeff != 0.0) {
        eval.objective -= cfg.kl_coeff * c.kl;
        for (int k = 0; k < params.vocab_size; ++k) {
          const double p = c.probs[static_cast<std::size_t>(k)];
          const double dkl =
              p * (std::log(p / c.ref_probs[static_cast<std::size_t>(k)]) - c.kl);
          grad_row[k] -= cfg.kl_coeff * dkl;
        }
      }
      eval.mean_kl += c.kl;
      ++tokens;
    }
  }

  const double inv = 1.0 / static_cast<double>(tokens);
  eval.objective *= inv;
  eval.mean_kl *= inv;
  eval.clip_fraction = static_cast<double>(clipped_tokens) * inv;
  for (double& g : eval.grad) g *= inv;
  return eval;
}

UpdateStats ppo_update(PolicyParams& params, ValueTable& values, const PolicyParams& ref,
                       const RolloutBatch& batch, const TrainConfig& cfg, Rng& rng) {
  if (batch.rollouts.empty()) throw Error("ppo_update on an empty batch");
  if (values.v.size() != static_cast<std::size_t>(params.context_count()))
    throw Error("value table size does not match the policy's context count");

  UpdateStats stats;
  std::size_t steps = 0;
  for (const auto& r : batch.rollouts)
    for (std::size_t t = 0; t < r.traj.tokens.size(); ++t)
      stats.mean_value_error += std::abs(r.returns[t] - r.baselines[t]);
  stats.mean_value_error /= static_cast<double>(batch.token_count());

  std::vector<std::size_t> order(batch.rollouts.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.minibatch_size)) {
      const std::size_t end =
          std::min(begin + static_cast<std::size_t>(cfg.minibatch_size), order.size());
      const std::span<const std::size_t> chunk(order.data() + begin, end - begin);
      const ObjectiveEval eval = policy_objective(params, ref, batch, chunk, cfg);
      for (double g : eval.grad)
        if (!std::isfinite(g))
          throw Error("non-finite gradient in minibatch " + std::to_string(begin / cfg.minibatch_size) +
                      " of epoch " + std::to_string(epoch));
      for (std::size_t i = 0; i < params.logits.size(); ++i)
        params.logits[i] += cfg.learning_rate * eval.grad[i];

      // Squared-error regression of the per-context values toward the
      // minibatch's observed returns: one averaged step per context keeps
      // the update independent of token order.
      std::map<int, std::pair<double, std::size_t>> residuals;
      for (std::size_t idx : chunk) {
        const Rollout& r = batch.rollouts[idx];
        for (std::size_t t = 0; t < r.traj.tokens.size(); ++t) {
          auto& [sum, count] = residuals[context_at(r, t)];
          sum += r.returns[t] - values.v[static_cast<std::size_t>(context_at(r, t))];
          ++count;
        }
      }
      for (const auto& [ctx, acc] : residuals)
        values.v[static_cast<std::size_t>(ctx)] +=
            cfg.value_learning_rate * acc.first / static_cast<double>(acc.second);

      stats.mean_kl += eval.mean_kl;
      stats.clip_fraction += eval.clip_fraction;
      ++steps;
    }
  }
  stats.mean_kl /= static_cast<double>(steps);
  stats.clip_fraction /= static_cast<double>(steps);
  params.version += 1;
  return stats;
}

CombinedReward score_trajectory(Method method, const Trajectory& traj, double holistic_raw,
                                std::span<const RewardSignal> signals,
                                const HierarchicalRewardConfig& reward_cfg,
                                const NormalizationStats& stats) {
  switch (method) {
    case Method::Hierarchical:
      return combine(holistic_raw, signals, traj, reward_cfg, stats);
    case Method::HolisticOnly: {
      HierarchicalRewardConfig cfg = reward_cfg;
      cfg.selected_aspects.clear();
      return combine(holistic_raw, signals, traj, cfg, stats);
    }
    case Method::WeightedSum: {
      HierarchicalRewardConfig cfg = reward_cfg;
      cfg.threshold = std::numeric_limits<double>::lowest();  // gate always open
      return combine(holistic_raw, signals, traj, cfg, stats);
    }
    case Method::AspectOnly: {
      if (reward_cfg.selected_aspects.empty())
        throw ConfigError("aspect_only training needs at least one selected aspect");
      const std::string& name = reward_cfg.selected_aspects.front();
      const RewardSignal* signal = nullptr;
      for (const auto& s : signals)
        if (s.name == name) signal = &s;
      if (!signal) throw Error("selected aspect '" + name + "' is missing from the signals");
      CombinedReward out;
      out.holistic_normalized = z_normalize(holistic_raw, stats);
      out.gated = false;
      out.final_reward = aggregate_signal(*signal, traj, Shaping::None);
      out.aspect_contributions[name] = out.final_reward;
      return out;
    }
  }
  throw Error("unknown training method");
}

EvalSummary greedy_eval(const PolicyParams& params, const EnvSpec& env,
                        const AspectSpec& report_aspect, double q_star, int eval_prompts) {
  if (eval_prompts < 1) throw ConfigError("eval_prompts must be >= 1");
  EvalSummary s;
  Rng dummy(0);  // greedy decoding draws nothing
  std::int64_t superior = 0;
  for (int j = 0; j < eval_prompts; ++j) {
    const std::uint64_t pid = kEvalPromptBase + static_cast<std::uint64_t>(j);
    const Trajectory traj = sample_for_prompt(params, DecodeMode::Greedy, env, pid, dummy);
    const double q = quality(traj, env);
    s.mean_quality += q;
    s.mean_holistic += holistic_reward(traj, env);
    s.aspect_rate += aspect_comparison_score(aspect_reward(traj, report_aspect, env));
    s.mean_length += static_cast<double>(traj.tokens.size());
    if (q >= q_star) ++superior;
  }
  const double inv = 1.0 / static_cast<double>(eval_prompts);
  s.mean_quality *= inv;
  s.mean_holistic *= inv;
  s.aspect_rate *= inv;
  s.mean_length *= inv;
  s.superior_rate = static_cast<double>(superior) * inv;
  return s;
}

namespace {

void validate_train_inputs(const TrainInputs& inputs) {
  validate_env_spec(inputs.env);
  validate_reward_config(inputs.reward);
  if (inputs.selected_specs.size() != inputs.reward.selected_aspects.size())
    throw ConfigError("selected_specs must match reward.selected_aspects");
  for (std::size_t i = 0; i < inputs.selected_specs.size(); ++i)
    if (inputs.selected_specs[i].name != inputs.reward.selected_aspects[i])
      throw ConfigError("selected_specs order does not match reward.selected_aspects");
  if (inputs.method == Method::AspectOnly && inputs.selected_specs.empty())
    throw ConfigError("aspect_only training needs a selected aspect");
  if (inputs.report_aspect.name.empty())
    throw ConfigError("training needs a report aspect for logging");
}

}  // namespace

TrainResult train(const TrainInputs& inputs, const TrainConfig& cfg, const RolloutSink& sink) {
  validate_train_config(cfg);
  validate_train_inputs(inputs);

  TrainResult result;
  result.params = initial_policy(inputs.env, cfg.init_logit_sigma, cfg.init_eos_bias);
  result.values = zero_values(result.params.context_count());
  const PolicyParams ref = result.params;

  auto record_eval = [&](std::int64_t iteration, std::int64_t episodes) {
    const EvalSummary s = greedy_eval(result.params, inputs.env, inputs.report_aspect,
                                      inputs.q_star, cfg.eval_prompts);
    result.evals.push_back({iteration, episodes, s.mean_quality, s.mean_holistic,
                            s.superior_rate, s.aspect_rate, s.mean_length});
  };
  record_eval(0, 0);

  std::int64_t episodes_done = 0;
  std::int64_t iteration = 0;
  while (episodes_done < cfg.total_episodes) {
    const int batch_size = static_cast<int>(
        std::min<std::int64_t>(cfg.batch_size, cfg.total_episodes - episodes_done));
    RolloutBatch batch;
    batch.rollouts.reserve(static_cast<std::size_t>(batch_size));

    IterationLog log;
    log.iteration = iteration + 1;
    for (int b = 0; b < batch_size; ++b) {
      const std::int64_t episode = episodes_done + b;
      const std::uint64_t pid =
          static_cast<std::uint64_t>(episode / cfg.rollouts_per_prompt);
      Rng rng = make_rng(cfg.seed, "rollout", {static_cast<std::uint64_t>(episode)});
      Rollout r;
      r.traj = sample_for_prompt(result.params, DecodeMode::PureSampling, inputs.env, pid, rng);
      r.start_context = prompt_start_context(pid, inputs.env);
      r.holistic_raw = holistic_reward(r.traj, inputs.env);
      std::vector<RewardSignal> signals;
      signals.reserve(inputs.selected_specs.size());
      for (const auto& spec : inputs.selected_specs)
        signals.push_back(aspect_reward(r.traj, spec, inputs.env));
      r.reward = score_trajectory(inputs.method, r.traj, r.holistic_raw, signals, inputs.reward,
                                  inputs.stats);

      log.mean_reward += r.reward.final_reward;
      log.mean_holistic_raw += r.holistic_raw;
      log.mean_holistic_normalized += r.reward.holistic_normalized;
      log.mean_aspect_rate +=
          aspect_comparison_score(aspect_reward(r.traj, inputs.report_aspect, inputs.env));
      log.mean_length += static_cast<double>(r.traj.tokens.size());
      log.gated_fraction += r.reward.gated ? 1.0 : 0.0;

      batch.rollouts.push_back(std::move(r));
    }

    compute_advantages(batch, result.values, cfg);
    if (sink)
      for (const auto& r : batch.rollouts) sink(r);

    Rng update_rng = make_rng(cfg.seed, "ppo-shuffle", {static_cast<std::uint64_t>(iteration)});
    const UpdateStats update =
        ppo_update(result.params, result.values, ref, batch, cfg, update_rng);

    const double inv = 1.0 / static_cast<double>(batch_size);
    log.mean_reward *= inv;
    log.mean_holistic_raw *= inv;
    log.mean_holistic_normalized *= inv;
    log.mean_aspect_rate *= inv;
    log.mean_length *= inv;
    log.gated_fraction *= inv;
    log.mean_kl = update.mean_kl;
    log.clip_fraction = update.clip_fraction;

    episodes_done += batch_size;
    ++iteration;
    log.episodes = episodes_done;
    result.iterations.push_back(log);

    if (iteration % cfg.eval_every == 0 || episodes_done >= cfg.total_episodes)
      record_eval(iteration, episodes_done);
  }
  return result;
}

}  // namespace tiered
