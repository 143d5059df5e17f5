#include "tiered/trajectory.hpp"

#include <array>
#include <cstring>

#include "tiered/errors.hpp"
#include "tiered/rng.hpp"

namespace tiered {

const char* to_string(Density d) {
  switch (d) {
    case Density::Token: return "token";
    case Density::Segment: return "segment";
    case Density::Sequence: return "sequence";
  }
  return "?";
}

void validate_trajectory(const Trajectory& traj) {
  if (traj.tokens.empty()) throw Error("trajectory has no tokens");
  if (!traj.logprobs.empty() && traj.logprobs.size() != traj.tokens.size())
    throw Error("trajectory logprobs length " + std::to_string(traj.logprobs.size()) +
                " does not match token count " + std::to_string(traj.tokens.size()));
  if (traj.segments.empty()) return;
  std::size_t cursor = 0;
  for (const auto& [begin, end] : traj.segments) {
    if (begin != cursor || end <= begin)
      throw Error("trajectory segments are not an in-order partition");
    cursor = end;
  }
  if (cursor != traj.tokens.size())
    throw Error("trajectory segments do not cover all tokens");
}

std::size_t expected_value_count(Density density, const Trajectory& traj) {
  switch (density) {
    case Density::Token: return traj.tokens.size();
    case Density::Segment: return traj.segments.size();
    case Density::Sequence: return 1;
  }
  return 0;
}

void validate_signal(const RewardSignal& signal, const Trajectory& traj) {
  if (signal.density == Density::Segment && traj.segments.empty())
    throw Error("signal '" + signal.name + "' is segment-dense but the trajectory has no segments");
  const std::size_t want = expected_value_count(signal.density, traj);
  if (signal.values.size() != want)
    throw Error("signal '" + signal.name + "' carries " + std::to_string(signal.values.size()) +
                " values, expected " + std::to_string(want) + " for " +
                to_string(signal.density) + " density");
}

std::uint64_t trajectory_hash(const Trajectory& traj) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= static_cast<unsigned char>(v >> (8 * i));
      h *= 0x100000001b3ull;
    }
  };
  feed(traj.prompt_id);
  for (int tok : traj.tokens) feed(static_cast<std::uint64_t>(tok));
  return h;
}

}  // namespace tiered
