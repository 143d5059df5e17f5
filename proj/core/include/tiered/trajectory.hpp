#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace tiered {

// One generated token sequence plus the metadata every downstream consumer
// (reward combination, selection, evaluation) needs. Token values are ids
// into a small synthetic vocabulary; logprobs are recorded under the
// distribution the sequence was sampled from.
struct Trajectory {
  std::uint64_t prompt_id = 0;
  std::vector<int> tokens;
  std::vector<double> logprobs;
  // Optional partition of [0, tokens.size()) into contiguous [begin, end)
  // slices ("sentences"); empty means the trajectory carries no slice
  // structure. Required by segment-dense reward signals.
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  // True when generation finished on its own terms: EOS emitted or the
  // length limit hit.
  bool terminal = true;

  std::size_t size() const { return tokens.size(); }
};

// Granularity at which a reward signal annotates a trajectory.
enum class Density { Token, Segment, Sequence };

const char* to_string(Density d);

// One aspect reward attached to a trajectory. The expected length of
// `values` depends on the density: one per token, one per segment, or a
// single scalar for the whole sequence.
struct RewardSignal {
  std::string name;
  Density density = Density::Sequence;
  std::vector<double> values;
};

// Throws tiered::Error unless the trajectory is well formed: tokens
// nonempty, logprobs empty or matching tokens in length, and segments (when
// present) a gap-free in-order partition of the token range.
void validate_trajectory(const Trajectory& traj);

// Number of values a signal of the given density must carry for `traj`.
std::size_t expected_value_count(Density density, const Trajectory& traj);

// Throws tiered::Error when the signal's value count does not match the
// trajectory under the signal's density.
void validate_signal(const RewardSignal& signal, const Trajectory& traj);

// Stable identity of the token sequence (FNV-1a over prompt_id and tokens).
// Keys per-trajectory noise substreams, so it must stay fixed forever.
std::uint64_t trajectory_hash(const Trajectory& traj);

}  // namespace tiered
