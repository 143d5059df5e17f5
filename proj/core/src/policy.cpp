#include "tiered/policy.hpp"

#include <algorithm>
#include <cmath>

#include "tiered/errors.hpp"

namespace tiered {

PolicyParams zero_policy(int vocab_size) {
  if (vocab_size < 2) throw ConfigError("policy vocab_size must be >= 2");
  PolicyParams p;
  p.vocab_size = vocab_size;
  p.logits.assign(static_cast<std::size_t>(vocab_size + 1) * vocab_size, 0.0);
  return p;
}

PolicyParams initial_policy(const EnvSpec& spec, double logit_sigma, double eos_bias) {
  if (logit_sigma < 0.0) throw ConfigError("initial-policy logit sigma must be >= 0");
  if (!std::isfinite(eos_bias)) throw ConfigError("initial-policy eos bias must be finite");
  PolicyParams p = zero_policy(spec.vocab_size);
  Rng rng = make_rng(spec.seed, "init-policy");
  for (double& l : p.logits) l = gaussian(rng, logit_sigma);
  for (int ctx = 0; ctx < p.context_count(); ++ctx)
    p.row(ctx)[spec.eos_token] += eos_bias;
  return p;
}

void validate_policy(const PolicyParams& params) {
  if (params.vocab_size < 2) throw Error("policy vocab_size must be >= 2");
  const auto want = static_cast<std::size_t>(params.context_count()) * params.vocab_size;
  if (params.logits.size() != want)
    throw Error("policy logits table has " + std::to_string(params.logits.size()) +
                " entries, expected " + std::to_string(want));
  for (double l : params.logits)
    if (!std::isfinite(l)) throw Error("policy logits must be finite");
}

std::vector<double> softmax_row(const PolicyParams& params, int context) {
  if (context < 0 || context >= params.context_count())
    throw Error("context " + std::to_string(context) + " out of range");
  const double* row = params.row(context);
  const double max_logit = *std::max_element(row, row + params.vocab_size);
  std::vector<double> probs(static_cast<std::size_t>(params.vocab_size));
  double sum = 0.0;
  for (int k = 0; k < params.vocab_size; ++k) {
    probs[static_cast<std::size_t>(k)] = std::exp(row[k] - max_logit);
    sum += probs[static_cast<std::size_t>(k)];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

double token_logprob(const PolicyParams& params, int context, int token) {
  if (token < 0 || token >= params.vocab_size)
    throw Error("token " + std::to_string(token) + " out of range");
  const std::vector<double> probs = softmax_row(params, context);
  return std::log(probs[static_cast<std::size_t>(token)]);
}

const char* to_string(DecodeMode m) {
  return m == DecodeMode::Greedy ? "greedy" : "pure_sampling";
}

int prompt_start_context(std::uint64_t prompt_id, const EnvSpec& spec) {
  return static_cast<int>(prompt_id % static_cast<std::uint64_t>(spec.vocab_size));
}

namespace {

int pick_token(const std::vector<double>& probs, DecodeMode mode, Rng& rng) {
  if (mode == DecodeMode::Greedy) {
    // Strict > keeps the scan on the first maximum, i.e. exact ties resolve
    // to the lowest token id.
    int best = 0;
    for (int k = 1; k < static_cast<int>(probs.size()); ++k)
      if (probs[static_cast<std::size_t>(k)] > probs[static_cast<std::size_t>(best)]) best = k;
    return best;
  }
  const double u = uniform01(rng);
  double cdf = 0.0;
  for (int k = 0; k < static_cast<int>(probs.size()); ++k) {
    cdf += probs[static_cast<std::size_t>(k)];
    if (u < cdf) return k;
  }
  return static_cast<int>(probs.size()) - 1;  // guard against rounding at u ~ 1
}

}  // namespace

Trajectory sample_trajectory(const PolicyParams& params, DecodeMode mode, const EnvSpec& spec,
                             std::uint64_t prompt_id, std::optional<int> start_context, Rng& rng) {
  validate_policy(params);
  if (params.vocab_size != spec.vocab_size)
    throw Error("policy vocabulary does not match the environment");

  Trajectory traj;
  traj.prompt_id = prompt_id;
  int context = start_context.value_or(params.bos_context());
  if (context < 0 || context >= params.context_count())
    throw Error("start context " + std::to_string(context) + " out of range");

  while (static_cast<int>(traj.tokens.size()) < spec.max_len) {
    const std::vector<double> probs = softmax_row(params, context);
    const int tok = pick_token(probs, mode, rng);
    traj.tokens.push_back(tok);
    traj.logprobs.push_back(std::log(probs[static_cast<std::size_t>(tok)]));
    if (tok == spec.eos_token) break;
    context = tok;
  }
  traj.terminal = true;

  for (std::size_t begin = 0; begin < traj.tokens.size();
       begin += static_cast<std::size_t>(spec.segment_len))
    traj.segments.emplace_back(
        begin, std::min(begin + static_cast<std::size_t>(spec.segment_len), traj.tokens.size()));
  return traj;
}

Trajectory sample_for_prompt(const PolicyParams& params, DecodeMode mode, const EnvSpec& spec,
                             std::uint64_t prompt_id, Rng& rng) {
  return sample_trajectory(params, mode, spec, prompt_id, prompt_start_context(prompt_id, spec),
                           rng);
}

}  // namespace tiered
