#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tiered/config.hpp"
#include "tiered/evaluation.hpp"
#include "tiered/normalization.hpp"
#include "tiered/trainer.hpp"

namespace tiered {

inline constexpr const char* kLibraryVersion = "0.1.0";

// Reference-sample prompts use this id offset; distinct from both training
// prompts (small ids) and held-out evaluation prompts (kEvalPromptBase).
inline constexpr std::uint64_t kReferencePromptBase = 2'000'000'000ull;

// A parsed config plus the raw bytes it came from. Commands persist the
// bytes verbatim and stamp artifacts with their hash, so an output
// directory can always be traced back to the exact file that produced it.
struct LoadedConfig {
  RunConfig cfg;
  std::string raw_bytes;
  std::string origin;  // path or description, for messages and manifests
};

LoadedConfig load_config_file(const std::filesystem::path& path);
LoadedConfig config_from_text(std::string text, std::string origin);

// 16-hex-digit FNV-1a over the raw config bytes.
std::string config_hash(const LoadedConfig& config);

// Exclusive lock on an output directory, implemented as an atomically
// created .lock directory. A second concurrent command on the same output
// directory fails fast instead of interleaving writes.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& output_dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path lock_path_;
};

// Environment-level calibration shared by every seed and method: the
// superior-area threshold and the reference average length, both measured
// on a reference sample drawn from the initial policy with env-seeded
// substreams.
struct EnvReference {
  double q_star = 0.0;
  double mean_reference_length = 0.0;
  int reference_sample_size = 0;
  double superior_quantile = 0.0;
};

// Per-seed calibration artifact: frozen normalization stats plus the
// combination threshold (given or derived from the top fraction).
struct CalibrationArtifact {
  std::uint64_t seed = 0;
  NormalizationStats stats;
  double threshold = 0.0;
  std::optional<double> top_fraction;  // empty when the threshold was explicit
};

// Paths of everything a pipeline run writes.
struct OutputPaths {
  std::filesystem::path root;

  std::filesystem::path config_copy() const { return root / "config.json"; }
  std::filesystem::path env_ref() const { return root / "env_ref.json"; }
  std::filesystem::path calibration(std::uint64_t seed) const;
  std::filesystem::path selection(std::uint64_t seed) const;
  std::filesystem::path run_dir(Method method, std::uint64_t seed) const;
  std::filesystem::path train_manifest(Method method) const;
  std::filesystem::path manifest(const std::string& command) const;
  std::filesystem::path eval_summary(Method method) const;
  std::filesystem::path report_dir() const { return root / "report"; }
};

OutputPaths output_paths(const RunConfig& cfg);

// Loaders for artifacts written by earlier stages; throw Error when the
// artifact is missing or unreadable (run the producing command first).
EnvReference load_env_ref(const OutputPaths& paths);
CalibrationArtifact load_calibration(const OutputPaths& paths, std::uint64_t seed);
SelectionReport load_selection(const OutputPaths& paths, std::uint64_t seed);

// One line of an eval_greedy.jsonl artifact: a held-out greedy generation
// with its per-metric scores.
struct EvalRecord {
  std::uint64_t prompt_id = 0;
  std::vector<int> tokens;
  double quality = 0.0;
  double holistic = 0.0;
  double aspect_rate = 0.0;
};

std::vector<EvalRecord> load_eval_records(const OutputPaths& paths, Method method,
                                          std::uint64_t seed);

// The pipeline commands. Each acquires the output lock, writes its
// artifacts and a manifest, and throws on failure (ConfigError for bad
// inputs, DegenerateDataError for statistically unusable data, Error
// otherwise). cmd_train stops at the first failing seed but records every
// completed seed plus the failure in the manifest before rethrowing.
void cmd_calibrate(const LoadedConfig& config);
void cmd_select(const LoadedConfig& config);
void cmd_train(const LoadedConfig& config);
void cmd_evaluate(const LoadedConfig& config);
void cmd_report(const LoadedConfig& config);
// calibrate, select, train for every configured method, evaluate, report.
void cmd_all(const LoadedConfig& config);

}  // namespace tiered
