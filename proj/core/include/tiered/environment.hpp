#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tiered/trajectory.hpp"

namespace tiered {

// A synthetic generation task with a known ground-truth quality score, small
// enough to train against on a desk machine while still exercising the full
// reward path. Tokens are ids in [0, vocab_size); generation stops at
// eos_token or max_len.
struct EnvSpec {
  int vocab_size = 16;
  int max_len = 24;
  int eos_token = 0;
  // Tokens that carry quality weight — the actual content of a good
  // generation.
  std::vector<int> good_tokens = {1, 2, 3, 4, 5, 6};
  // Tokens the style-level aspects accept as well-formed: the good tokens
  // plus filler tokens that read clean but carry no quality weight. The gap
  // between the two sets is what makes a style aspect an imperfect guide —
  // optimizing it alone can fill generations with well-formed filler.
  std::vector<int> clean_tokens = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  // Per-token contribution to quality, indexed by token id. Defaults (set by
  // default_env_spec) put weight 1.5 on each good token, so quality saturates
  // at its cap once two thirds of a repeat-free generation is good content —
  // past that point the scalar score is blind to further polish.
  std::vector<double> quality_weights;
  // Deducted per immediately repeated token, before length normalization.
  double repetition_penalty = 0.5;
  // Stddev of the Gaussian observation noise on the holistic reward.
  double holistic_noise_sigma = 0.3;
  // Quantile of quality over a reference sample that defines the superior
  // area threshold q*. Near the top of the scale, where the quality cap puts
  // q* at the saturation point and the superior area becomes the set of
  // generations the scalar score can no longer tell apart from ideal.
  double superior_quantile = 0.995;
  int reference_sample_size = 2000;
  // Tokens per segment when trajectories carry slice structure.
  int segment_len = 6;
  // Root seed of the environment's own randomness (holistic noise, the
  // initial policy, the reference sample). Independent of training seeds so
  // every run scores trajectories identically.
  std::uint64_t seed = 7;

  bool is_good(int token) const;
  bool is_clean(int token) const;
};

// Default spec with the quality weights filled in.
EnvSpec default_env_spec();

// The default weight table for a given vocabulary: weight 1.5 on each good
// token, 0 elsewhere. Above unit weight so that quality (clamped to [0, 1])
// saturates before a generation is perfectly clean.
std::vector<double> derive_quality_weights(int vocab_size, std::span<const int> good_tokens);

// Throws ConfigError on out-of-range fields (empty good set, weights sized
// wrong, eos outside the vocabulary, non-positive lengths...).
void validate_env_spec(const EnvSpec& spec);

// How a candidate aspect relates to ground-truth quality.
//   Consistent  - correlates positively (accepts the clean-token set, which
//                 includes quality-free filler, so the correlation is real
//                 but imperfect)
//   Orthogonal  - depends only on a feature independent of quality (the
//                 parity of the slice's first content token)
//   Conflicting - anti-correlates (rewards exactly what quality penalizes)
//   Length      - sequence length relative to a reference average
enum class AspectKind { Consistent, Orthogonal, Conflicting, Length };

const char* to_string(AspectKind k);

struct AspectSpec {
  std::string name;
  Density density = Density::Token;
  AspectKind kind = AspectKind::Consistent;
  // Average token count used by Length aspects (value = len / reference).
  double length_reference = 12.0;
};

// The default candidate catalog: one aspect per kind, spread across the
// three densities.
std::vector<AspectSpec> default_aspects();

// Ground-truth quality in [0, 1]: the length-normalized sum of quality
// weights minus repetition_penalty per immediately repeated token, clamped.
// Under the default weights a repeat-free trajectory scores exactly 1 once
// two thirds of its tokens are good.
double quality(const Trajectory& traj, const EnvSpec& spec);

// quality + Gaussian(0, holistic_noise_sigma) observation noise. The noise
// is drawn from a substream keyed by (spec.seed, prompt_id, trajectory
// hash), so the same generation always receives the same score — across
// methods, seeds, and reruns — while distinct generations get independent
// noise.
double holistic_reward(const Trajectory& traj, const EnvSpec& spec);

// Evaluates one candidate aspect on a trajectory. Magnitudes follow the
// density: token-dense values are 0 (clean) or -1 (penalized), segment- and
// sequence-dense values are +0.5 (correct) or -0.5 (wrong), and Length
// yields the single value len / length_reference. Deterministic — aspect
// signals carry no observation noise.
RewardSignal aspect_reward(const Trajectory& traj, const AspectSpec& aspect, const EnvSpec& spec);

// Superior-area threshold: the superior_quantile of ground-truth quality
// over a reference sample of trajectories (same order-statistic convention
// as quantile_threshold).
double superior_threshold(std::span<const double> reference_quality, double superior_quantile);

// Fraction of trajectories whose quality reaches q_star.
double superior_area_rate(std::span<const Trajectory> trajs, const EnvSpec& spec, double q_star);

}  // namespace tiered
