#include "tiered/environment.hpp"

#include <algorithm>
#include <cmath>

#include "tiered/errors.hpp"
#include "tiered/normalization.hpp"
#include "tiered/rng.hpp"

namespace tiered {

bool EnvSpec::is_good(int token) const {
  return std::find(good_tokens.begin(), good_tokens.end(), token) != good_tokens.end();
}

bool EnvSpec::is_clean(int token) const {
  return std::find(clean_tokens.begin(), clean_tokens.end(), token) != clean_tokens.end();
}

std::vector<double> derive_quality_weights(int vocab_size, std::span<const int> good_tokens) {
  // Weight 1.5 saturates quality (clamped at 1) once two thirds of a
  // repeat-free generation is good content. The saturation both widens the
  // quality spread across random trajectories — so preferences survive the
  // holistic observation noise — and leaves a top region where the scalar
  // score carries no gradient and only aspect signals can steer.
  std::vector<double> weights(static_cast<std::size_t>(vocab_size), 0.0);
  for (int tok : good_tokens)
    if (tok >= 0 && tok < vocab_size) weights[static_cast<std::size_t>(tok)] = 1.5;
  return weights;
}

EnvSpec default_env_spec() {
  EnvSpec spec;
  spec.quality_weights = derive_quality_weights(spec.vocab_size, spec.good_tokens);
  return spec;
}

void validate_env_spec(const EnvSpec& spec) {
  if (spec.vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (spec.max_len < 1) throw ConfigError("max_len must be >= 1");
  if (spec.eos_token < 0 || spec.eos_token >= spec.vocab_size)
    throw ConfigError("eos_token out of vocabulary range");
  if (spec.good_tokens.empty()) throw ConfigError("good_tokens must be nonempty");
  for (int t : spec.good_tokens)
    if (t < 0 || t >= spec.vocab_size)
      throw ConfigError("good token " + std::to_string(t) + " out of vocabulary range");
  if (spec.clean_tokens.empty()) throw ConfigError("clean_tokens must be nonempty");
  for (int t : spec.clean_tokens)
    if (t < 0 || t >= spec.vocab_size)
      throw ConfigError("clean token " + std::to_string(t) + " out of vocabulary range");
  if (spec.quality_weights.size() != static_cast<std::size_t>(spec.vocab_size))
    throw ConfigError("quality_weights must carry one entry per vocabulary token");
  for (double w : spec.quality_weights)
    if (!std::isfinite(w)) throw ConfigError("quality weights must be finite");
  if (spec.repetition_penalty < 0.0) throw ConfigError("repetition_penalty must be >= 0");
  if (spec.holistic_noise_sigma < 0.0) throw ConfigError("holistic_noise_sigma must be >= 0");
  if (!(spec.superior_quantile > 0.0 && spec.superior_quantile < 1.0))
    throw ConfigError("superior_quantile must be in (0, 1)");
  if (spec.reference_sample_size < 2) throw ConfigError("reference_sample_size must be >= 2");
  if (spec.segment_len < 1) throw ConfigError("segment_len must be >= 1");
}

const char* to_string(AspectKind k) {
  switch (k) {
    case AspectKind::Consistent: return "consistent";
    case AspectKind::Orthogonal: return "orthogonal";
    case AspectKind::Conflicting: return "conflicting";
    case AspectKind::Length: return "length";
  }
  return "?";
}

std::vector<AspectSpec> default_aspects() {
  return {
      {"grammar", Density::Segment, AspectKind::Consistent, 12.0},
      {"parity", Density::Sequence, AspectKind::Orthogonal, 12.0},
      {"contrarian", Density::Segment, AspectKind::Conflicting, 12.0},
      {"length", Density::Sequence, AspectKind::Length, 12.0},
  };
}

double quality(const Trajectory& traj, const EnvSpec& spec) {
  validate_trajectory(traj);
  double sum = 0.0;
  int repeats = 0;
  for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
    const int tok = traj.tokens[t];
    if (tok < 0 || tok >= spec.vocab_size)
      throw Error("token " + std::to_string(tok) + " out of vocabulary range");
    sum += spec.quality_weights[static_cast<std::size_t>(tok)];
    if (t > 0 && tok == traj.tokens[t - 1]) ++repeats;
  }
  const double raw =
      (sum - spec.repetition_penalty * repeats) / static_cast<double>(traj.tokens.size());
  return std::clamp(raw, 0.0, 1.0);
}

double holistic_reward(const Trajectory& traj, const EnvSpec& spec) {
  const double q = quality(traj, spec);
  Rng rng = make_rng(spec.seed, "holistic", {traj.prompt_id, trajectory_hash(traj)});
  return q + gaussian(rng, spec.holistic_noise_sigma);
}

namespace {

bool majority_good(const Trajectory& traj, std::size_t begin, std::size_t end,
                   const EnvSpec& spec) {
  std::size_t good = 0;
  for (std::size_t t = begin; t < end; ++t)
    if (spec.is_good(traj.tokens[t])) ++good;
  return 2 * good >= (end - begin);
}

bool majority_clean(const Trajectory& traj, std::size_t begin, std::size_t end,
                    const EnvSpec& spec) {
  std::size_t clean = 0;
  for (std::size_t t = begin; t < end; ++t)
    if (spec.is_clean(traj.tokens[t])) ++clean;
  return 2 * clean >= (end - begin);
}

// Parity of the slice's first content token. Counting parity over whole
// slices couples the score to trajectory length through the eos token, and
// length is not quality-neutral; a single-token probe has no length channel.
bool opening_even(const Trajectory& traj, std::size_t begin, std::size_t end,
                  const EnvSpec& spec) {
  for (std::size_t t = begin; t < end; ++t)
    if (traj.tokens[t] != spec.eos_token) return traj.tokens[t] % 2 == 0;
  return true;
}

double slice_value(const Trajectory& traj, std::size_t begin, std::size_t end,
                   AspectKind kind, const EnvSpec& spec) {
  switch (kind) {
    case AspectKind::Consistent: return majority_clean(traj, begin, end, spec) ? 0.5 : -0.5;
    case AspectKind::Conflicting: return majority_good(traj, begin, end, spec) ? -0.5 : 0.5;
    case AspectKind::Orthogonal: return opening_even(traj, begin, end, spec) ? 0.5 : -0.5;
    case AspectKind::Length: break;
  }
  throw Error("length aspects must use sequence density");
}

}  // namespace

RewardSignal aspect_reward(const Trajectory& traj, const AspectSpec& aspect, const EnvSpec& spec) {
  validate_trajectory(traj);
  RewardSignal signal;
  signal.name = aspect.name;
  signal.density = aspect.density;

  if (aspect.kind == AspectKind::Length) {
    if (aspect.density != Density::Sequence)
      throw ConfigError("length aspect '" + aspect.name + "' must use sequence density");
    if (!(aspect.length_reference > 0.0))
      throw ConfigError("length aspect '" + aspect.name + "' needs a positive length_reference");
    signal.values = {static_cast<double>(traj.tokens.size()) / aspect.length_reference};
    return signal;
  }

  switch (aspect.density) {
    case Density::Token:
      signal.values.reserve(traj.tokens.size());
      for (int tok : traj.tokens) {
        bool clean = false;
        switch (aspect.kind) {
          case AspectKind::Consistent: clean = spec.is_clean(tok); break;
          case AspectKind::Conflicting: clean = !spec.is_good(tok); break;
          case AspectKind::Orthogonal: clean = tok % 2 == 0; break;
          case AspectKind::Length: break;  // unreachable, handled above
        }
        signal.values.push_back(clean ? 0.0 : -1.0);
      }
      break;
    case Density::Segment:
      if (traj.segments.empty())
        throw Error("aspect '" + aspect.name + "' is segment-dense but the trajectory has no segments");
      signal.values.reserve(traj.segments.size());
      for (const auto& [begin, end] : traj.segments)
        signal.values.push_back(slice_value(traj, begin, end, aspect.kind, spec));
      break;
    case Density::Sequence:
      signal.values = {slice_value(traj, 0, traj.tokens.size(), aspect.kind, spec)};
      break;
  }
  return signal;
}

double superior_threshold(std::span<const double> reference_quality, double superior_quantile) {
  if (!(superior_quantile > 0.0 && superior_quantile < 1.0))
    throw ConfigError("superior_quantile must be in (0, 1)");
  return empirical_quantile(reference_quality, superior_quantile);
}

double superior_area_rate(std::span<const Trajectory> trajs, const EnvSpec& spec, double q_star) {
  if (trajs.empty()) throw DegenerateDataError("superior-area rate undefined on zero trajectories");
  std::int64_t superior = 0;
  for (const auto& t : trajs)
    if (quality(t, spec) >= q_star) ++superior;
  return static_cast<double>(superior) / static_cast<double>(trajs.size());
}

}  // namespace tiered
