#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tiered/environment.hpp"
#include "tiered/rng.hpp"
#include "tiered/trajectory.hpp"

namespace tiered {

// A first-order Markov softmax policy over the environment's vocabulary:
// one logits row per context, where the context is the previous token (rows
// 0..vocab_size-1) or begin-of-sequence (row vocab_size). Small enough that
// gradients are exact and training runs in seconds, rich enough to express
// nontrivial behaviour like alternating between tokens.
struct PolicyParams {
  int vocab_size = 0;
  std::vector<double> logits;  // (vocab_size + 1) * vocab_size, row-major
  std::int64_t version = 0;    // incremented once per optimizer update

  int context_count() const { return vocab_size + 1; }
  int bos_context() const { return vocab_size; }
  double* row(int context) { return logits.data() + static_cast<std::size_t>(context) * vocab_size; }
  const double* row(int context) const {
    return logits.data() + static_cast<std::size_t>(context) * vocab_size;
  }
};

// All-zero logits: uniform next-token distribution in every context.
PolicyParams zero_policy(int vocab_size);

// The shared starting point of every run, standing in for a pretrained
// model: logits drawn from N(0, logit_sigma^2) on a substream keyed only by
// spec.seed, so calibration, selection, and every (method, seed) training
// run all begin from the same policy. eos_bias is added to the eos-token
// logit of every context, giving the untrained model a pretrained model's
// tendency to stop early rather than ramble to the length cap.
PolicyParams initial_policy(const EnvSpec& spec, double logit_sigma, double eos_bias);

void validate_policy(const PolicyParams& params);

// Softmax of one context row (numerically stable; sums to 1).
std::vector<double> softmax_row(const PolicyParams& params, int context);

// log P(token | context) under the policy.
double token_logprob(const PolicyParams& params, int context, int token);

enum class DecodeMode { PureSampling, Greedy };

const char* to_string(DecodeMode m);

// Maps a prompt id onto its start context. Prompts condition generation
// only through this: two generations for the same prompt start from the
// same context row.
int prompt_start_context(std::uint64_t prompt_id, const EnvSpec& spec);

// Generates one trajectory: starting from `start_context` (begin-of-sequence
// row when nullopt), repeatedly samples the next token from the softmax row
// of the previous token — or takes the argmax under Greedy, breaking exact
// ties toward the lowest token id — until eos_token is emitted or max_len is
// reached. The emitted EOS is part of the trajectory, so tokens are never
// empty. Records the policy logprob of every emitted token and attaches
// segment structure in chunks of spec.segment_len.
Trajectory sample_trajectory(const PolicyParams& params, DecodeMode mode, const EnvSpec& spec,
                             std::uint64_t prompt_id, std::optional<int> start_context, Rng& rng);

// Convenience wrapper using the prompt's own start context.
Trajectory sample_for_prompt(const PolicyParams& params, DecodeMode mode, const EnvSpec& spec,
                             std::uint64_t prompt_id, Rng& rng);

}  // namespace tiered
