#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tiered/environment.hpp"
#include "tiered/judge.hpp"
#include "tiered/reward.hpp"
#include "tiered/trainer.hpp"

namespace tiered {

// The combination threshold is either given directly in z-score units or
// derived during calibration as the value separating the top `top_fraction`
// of the normalized calibration sample.
struct ThresholdSpec {
  std::optional<double> value;
  double top_fraction = 0.3;
};

struct RewardConfigSection {
  ThresholdSpec threshold;
  double holistic_weight = 5.0;
  Shaping shaping = Shaping::Sigmoid;
  // Explicit weights; aspects without an entry weigh 1.0.
  std::map<std::string, double> aspect_weights;
};

struct SelectionConfig {
  int pairs = 1000;
  int max_selected = 1;
  // Aspect names eligible for selection; empty means every configured aspect.
  std::vector<std::string> candidates;
};

enum class JudgeMode { Simulated, Http, None };

const char* to_string(JudgeMode m);
JudgeMode judge_mode_from_string(const std::string& name);

struct EvalConfigSection {
  std::vector<std::string> metrics = {"holistic", "quality", "aspect_rate"};
  JudgeMode judge_mode = JudgeMode::Simulated;
  double judge_sigma = 0.05;  // simulated-judge noise
  JudgeClientConfig judge_http;
};

// Everything one invocation needs, parsed from a single JSON config file.
// Parsing is strict: unknown keys anywhere are hard errors, so a typo can
// never silently fall back to a default.
struct RunConfig {
  std::string output_dir = "out";
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  Method method = Method::Hierarchical;
  // Methods covered by `all` and by report tables.
  std::vector<Method> methods = {Method::Hierarchical, Method::HolisticOnly,
                                 Method::AspectOnly, Method::WeightedSum};
  EnvSpec env;
  std::vector<AspectSpec> aspects;
  RewardConfigSection reward;
  int calibration_size = 2000;
  SelectionConfig selection;
  TrainConfig train;
  EvalConfigSection eval;
};

RunConfig default_run_config();

// Cross-field validation (aspect names unique, candidates known, seeds
// nonempty, metrics known...); throws ConfigError.
void validate_run_config(const RunConfig& cfg);

// Parses and validates a JSON config file. Throws ConfigError on missing
// files, malformed JSON, type mismatches, out-of-range values, or unknown
// keys (reported with their full path).
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical JSON rendering of a config (every key explicit). Loading the
// rendered text yields the identical config.
std::string render_run_config(const RunConfig& cfg);

Density density_from_string(const std::string& name);
AspectKind aspect_kind_from_string(const std::string& name);
Shaping shaping_from_string(const std::string& name);

}  // namespace tiered
