#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tiered/environment.hpp"
#include "tiered/rng.hpp"
#include "tiered/trajectory.hpp"

namespace tiered {

// Preference of one judging pass, expressed in terms of the underlying
// generations: the labels track generations, never positions, so a pass
// that saw the pair in swapped order is already translated back.
enum class PassPreference { PrefA, PrefB, Invalid };

// Verdict after both passes. A pair only counts when both passes agree on
// the same underlying generation; disagreement or any Invalid pass discards
// the pair, removing position bias at the cost of throughput.
enum class JudgeResolution { WinA, WinB, Discarded };

const char* to_string(PassPreference p);
const char* to_string(JudgeResolution r);

JudgeResolution resolve_passes(PassPreference first_pass, PassPreference second_pass);

struct JudgeVerdict {
  std::uint64_t pair_id = 0;
  PassPreference first_pass = PassPreference::Invalid;
  PassPreference second_pass = PassPreference::Invalid;
  JudgeResolution resolved = JudgeResolution::Discarded;
  std::string note;  // failure reason when a pass went Invalid or transport gave up
};

// Where the judge prompt's pieces go in a rendered request. The template is
// a plain text file with the named placeholders {instruction}, {output_1}
// and {output_2}.
std::string render_judge_prompt(const std::string& tmpl, const std::string& instruction,
                                const std::string& output_1, const std::string& output_2);

// Strict parse of one pass's reply: the trimmed content must be exactly "1"
// (prefer the first-listed output) or "2"; anything else is Invalid.
enum class PositionChoice { First, Second, Invalid };
PositionChoice parse_choice(const std::string& content);

struct JudgeClientConfig {
  std::string endpoint;      // base URL, e.g. http://127.0.0.1:8080
  std::string model;
  std::string api_key_env;   // env var holding the bearer token; empty = no auth
  std::string template_path; // judge prompt template file
  int max_in_flight = 4;     // concurrent pairs
  double timeout_seconds = 30.0;
  int retry_max = 5;         // attempts per request, transport errors only
  int backoff_base_ms = 250; // doubled per retry, capped at 8x
};

struct JudgePair {
  std::uint64_t pair_id = 0;
  std::string instruction;
  std::string generation_a;
  std::string generation_b;
};

// Talks to an OpenAI-style chat-completions endpoint. Each pair costs two
// requests: one with (a, b) as (output_1, output_2) and one swapped.
// Transport errors retry with capped exponential backoff and discard the
// pair once attempts run out; malformed or out-of-protocol replies mark the
// pass Invalid without retrying.
class JudgeClient {
 public:
  explicit JudgeClient(JudgeClientConfig config);
  ~JudgeClient();
  JudgeClient(const JudgeClient&) = delete;
  JudgeClient& operator=(const JudgeClient&) = delete;

  JudgeVerdict judge_pair(const JudgePair& pair) const;
  // Runs pairs concurrently up to max_in_flight; results come back indexed
  // like the input regardless of completion order.
  std::vector<JudgeVerdict> judge_pairs(std::span<const JudgePair> pairs) const;

  const JudgeClientConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Renders a synthetic trajectory as text for judge prompts.
std::string trajectory_text(const Trajectory& traj);

// Drop-in judge for offline runs: each pass independently prefers the
// generation with higher ground-truth quality plus fresh Gaussian(0,
// sigma_j) noise per generation; exact score ties make the pass Invalid.
// With sigma_j = 0 the verdict reduces to a deterministic quality
// comparison, with equal-quality pairs Discarded.
JudgeVerdict simulated_judge(std::uint64_t pair_id, const Trajectory& a, const Trajectory& b,
                             const EnvSpec& spec, double sigma_j, Rng& rng);

}  // namespace tiered
