#include "tiered/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tiered/errors.hpp"
#include "tiered/judge.hpp"
#include "tiered/policy.hpp"
#include "tiered/rng.hpp"
#include "tiered/selection.hpp"

namespace tiered {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error("failed while reading " + path.string());
  return buf.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error("failed while writing " + path.string());
}

// Canonical rendering shared by JSON artifacts and CSV tables, so the same
// number is always spelled the same way (shortest round-trip form).
std::string render_number(double x) { return json(x).dump(); }

json parse_json_file(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    throw Error(path.string() + " not found; run `" + std::string(producer) + "` first");
  }
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(path.string() + " is not valid JSON");
  return j;
}

std::string relative_to(const fs::path& path, const fs::path& root) {
  return fs::relative(path, root).generic_string();
}

// ---------------------------------------------------------------------------
// Artifact serialization

json trajectory_json(const Trajectory& traj) {
  return json{{"prompt_id", traj.prompt_id}, {"tokens", traj.tokens}};
}

json combined_reward_json(const CombinedReward& reward) {
  json aspects = json::object();
  for (const auto& [name, value] : reward.aspect_contributions) aspects[name] = value;
  return json{{"final", reward.final_reward},
              {"holistic_normalized", reward.holistic_normalized},
              {"gated", reward.gated},
              {"aspects", aspects}};
}

json checkpoint_json(const PolicyParams& params, const ValueTable& values,
                     const std::string& hash) {
  return json{{"kind", "policy_checkpoint"},
              {"config_hash", hash},
              {"vocab_size", params.vocab_size},
              {"rows", params.context_count()},
              {"cols", params.vocab_size},
              {"version", params.version},
              {"logits", params.logits},
              {"values", values.v}};
}

Trajectory trajectory_from_tokens(std::uint64_t prompt_id, std::vector<int> tokens,
                                  const EnvSpec& env) {
  Trajectory traj;
  traj.prompt_id = prompt_id;
  traj.tokens = std::move(tokens);
  traj.logprobs.assign(traj.tokens.size(), 0.0);
  for (std::size_t begin = 0; begin < traj.tokens.size();
       begin += static_cast<std::size_t>(env.segment_len)) {
    std::size_t end = std::min(traj.tokens.size(), begin + static_cast<std::size_t>(env.segment_len));
    traj.segments.emplace_back(begin, end);
  }
  traj.terminal = true;
  return traj;
}

// ---------------------------------------------------------------------------
// Shared per-seed summaries

struct SeedSummary {
  std::uint64_t seed = 0;
  int prompts = 0;
  double mean_quality = 0.0;
  double mean_holistic = 0.0;
  double mean_aspect_rate = 0.0;
  double superior_rate = 0.0;
  double mean_length = 0.0;
};

SeedSummary summarize_records(std::uint64_t seed, const std::vector<EvalRecord>& records,
                              double q_star) {
  if (records.empty()) throw Error("no evaluation records for seed " + std::to_string(seed));
  SeedSummary s;
  s.seed = seed;
  s.prompts = static_cast<int>(records.size());
  for (const EvalRecord& r : records) {
    s.mean_quality += r.quality;
    s.mean_holistic += r.holistic;
    s.mean_aspect_rate += r.aspect_rate;
    s.superior_rate += (r.quality >= q_star) ? 1.0 : 0.0;
    s.mean_length += static_cast<double>(r.tokens.size());
  }
  const double n = static_cast<double>(records.size());
  s.mean_quality /= n;
  s.mean_holistic /= n;
  s.mean_aspect_rate /= n;
  s.superior_rate /= n;
  s.mean_length /= n;
  return s;
}

json seed_summary_json(const SeedSummary& s) {
  return json{{"seed", s.seed},
              {"prompts", s.prompts},
              {"mean_quality", s.mean_quality},
              {"mean_holistic", s.mean_holistic},
              {"mean_aspect_rate", s.mean_aspect_rate},
              {"superior_rate", s.superior_rate},
              {"mean_length", s.mean_length}};
}

SeedSummary mean_summary(const std::vector<SeedSummary>& per_seed) {
  SeedSummary m;
  if (per_seed.empty()) throw Error("no per-seed summaries to average");
  for (const SeedSummary& s : per_seed) {
    m.prompts += s.prompts;
    m.mean_quality += s.mean_quality;
    m.mean_holistic += s.mean_holistic;
    m.mean_aspect_rate += s.mean_aspect_rate;
    m.superior_rate += s.superior_rate;
    m.mean_length += s.mean_length;
  }
  const double n = static_cast<double>(per_seed.size());
  m.mean_quality /= n;
  m.mean_holistic /= n;
  m.mean_aspect_rate /= n;
  m.superior_rate /= n;
  m.mean_length /= n;
  return m;
}

// ---------------------------------------------------------------------------
// Config plumbing

void ensure_config_copy(const OutputPaths& paths, const LoadedConfig& config) {
  const fs::path copy = paths.config_copy();
  if (fs::exists(copy)) {
    if (read_text_file(copy) != config.raw_bytes) {
      throw ConfigError("config mismatch: " + copy.string() +
                        " was written by a different config; use a fresh output_dir or "
                        "remove the old outputs");
    }
    return;
  }
  write_text_file(copy, config.raw_bytes);
}

const AspectSpec& find_aspect(const RunConfig& cfg, const std::string& name) {
  for (const AspectSpec& a : cfg.aspects) {
    if (a.name == name) return a;
  }
  throw Error("aspect '" + name + "' is not configured");
}

std::vector<std::string> candidate_names(const RunConfig& cfg) {
  if (!cfg.selection.candidates.empty()) return cfg.selection.candidates;
  std::vector<std::string> names;
  names.reserve(cfg.aspects.size());
  for (const AspectSpec& a : cfg.aspects) names.push_back(a.name);
  return names;
}

void write_manifest(const OutputPaths& paths, const std::string& command, json manifest) {
  manifest["command"] = command;
  manifest["tool_version"] = kLibraryVersion;
  write_text_file(paths.manifest(command), manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// calibrate

void calibrate_impl(const LoadedConfig& config, const OutputPaths& paths,
                    const std::string& hash) {
  const RunConfig& cfg = config.cfg;
  const PolicyParams policy = initial_policy(cfg.env, cfg.train.init_logit_sigma, cfg.train.init_eos_bias);
  std::vector<std::string> artifacts;

  // Environment reference: q* and the average reference length, measured on
  // a sample that belongs to the environment (env.seed substreams), shared
  // by every training seed and method.
  {
    std::vector<double> qualities;
    double length_sum = 0.0;
    qualities.reserve(static_cast<std::size_t>(cfg.env.reference_sample_size));
    for (int i = 0; i < cfg.env.reference_sample_size; ++i) {
      Rng rng = make_rng(cfg.env.seed, "reference", {static_cast<std::uint64_t>(i)});
      const std::uint64_t pid = kReferencePromptBase + static_cast<std::uint64_t>(i);
      Trajectory traj = sample_for_prompt(policy, DecodeMode::PureSampling, cfg.env, pid, rng);
      qualities.push_back(quality(traj, cfg.env));
      length_sum += static_cast<double>(traj.size());
    }
    EnvReference ref;
    ref.q_star = superior_threshold(qualities, cfg.env.superior_quantile);
    ref.mean_reference_length = length_sum / static_cast<double>(qualities.size());
    ref.reference_sample_size = cfg.env.reference_sample_size;
    ref.superior_quantile = cfg.env.superior_quantile;
    json j{{"config_hash", hash},
           {"q_star", ref.q_star},
           {"mean_reference_length", ref.mean_reference_length},
           {"reference_sample_size", ref.reference_sample_size},
           {"superior_quantile", ref.superior_quantile}};
    write_text_file(paths.env_ref(), j.dump(2) + "\n");
    artifacts.push_back(relative_to(paths.env_ref(), paths.root));
  }

  for (std::uint64_t seed : cfg.seeds) {
    std::vector<double> sample;
    sample.reserve(static_cast<std::size_t>(cfg.calibration_size));
    for (int i = 0; i < cfg.calibration_size; ++i) {
      Rng rng = make_rng(seed, "calibration", {static_cast<std::uint64_t>(i)});
      Trajectory traj = sample_for_prompt(policy, DecodeMode::PureSampling, cfg.env,
                                          static_cast<std::uint64_t>(i), rng);
      sample.push_back(holistic_reward(traj, cfg.env));
    }
    NormalizationStats stats = fit_normalization(
        sample, "calibration seed=" + std::to_string(seed) +
                    " size=" + std::to_string(cfg.calibration_size));

    double threshold = 0.0;
    std::optional<double> top_fraction;
    if (cfg.reward.threshold.value.has_value()) {
      threshold = *cfg.reward.threshold.value;
    } else {
      std::vector<double> normalized;
      normalized.reserve(sample.size());
      for (double raw : sample) normalized.push_back(z_normalize(raw, stats));
      threshold = quantile_threshold(normalized, cfg.reward.threshold.top_fraction);
      top_fraction = cfg.reward.threshold.top_fraction;
    }

    json j{{"config_hash", hash},
           {"seed", seed},
           {"mean", stats.mean},
           {"stddev", stats.stddev},
           {"sample_count", stats.sample_count},
           {"source", stats.source},
           {"threshold", threshold}};
    if (top_fraction.has_value()) j["top_fraction"] = *top_fraction;
    write_text_file(paths.calibration(seed), j.dump(2) + "\n");
    artifacts.push_back(relative_to(paths.calibration(seed), paths.root));
  }

  write_manifest(paths, "calibrate",
                 json{{"config_hash", hash},
                      {"config_origin", config.origin},
                      {"seeds", cfg.seeds},
                      {"status", "ok"},
                      {"artifacts", artifacts}});
}

// ---------------------------------------------------------------------------
// select

void select_impl(const LoadedConfig& config, const OutputPaths& paths, const std::string& hash) {
  const RunConfig& cfg = config.cfg;
  const PolicyParams policy = initial_policy(cfg.env, cfg.train.init_logit_sigma, cfg.train.init_eos_bias);
  const std::vector<std::string> candidates = candidate_names(cfg);
  std::vector<std::string> artifacts;

  for (std::uint64_t seed : cfg.seeds) {
    std::vector<ComparisonPair> pairs;
    pairs.reserve(static_cast<std::size_t>(cfg.selection.pairs));
    for (int i = 0; i < cfg.selection.pairs; ++i) {
      const std::uint64_t pid = static_cast<std::uint64_t>(i);
      Rng greedy_rng(0);  // greedy decoding draws nothing
      Trajectory greedy =
          sample_for_prompt(policy, DecodeMode::Greedy, cfg.env, pid, greedy_rng);
      Rng sample_rng = make_rng(seed, "selection", {static_cast<std::uint64_t>(i)});
      Trajectory sampled =
          sample_for_prompt(policy, DecodeMode::PureSampling, cfg.env, pid, sample_rng);

      ComparisonPair pair;
      pair.prompt_id = pid;
      pair.holistic_a = holistic_reward(greedy, cfg.env);
      pair.holistic_b = holistic_reward(sampled, cfg.env);
      for (const std::string& name : candidates) {
        const AspectSpec& aspect = find_aspect(cfg, name);
        pair.aspect_scores_a[name] = aspect_comparison_score(aspect_reward(greedy, aspect, cfg.env));
        pair.aspect_scores_b[name] =
            aspect_comparison_score(aspect_reward(sampled, aspect, cfg.env));
      }
      pairs.push_back(std::move(pair));
    }

    SelectionReport report = select_rewards(pairs, candidates, cfg.selection.max_selected);

    json aspects = json::array();
    for (const AspectSelectionStats& a : report.aspects) {
      json row{{"name", a.name},
               {"inconsistency", a.inconsistency},
               {"compared", a.counts.compared},
               {"divergent", a.counts.divergent},
               {"holistic_ties", a.counts.holistic_ties}};
      row["win_rate_greedy"] =
          a.win_rate_greedy.has_value() ? json(*a.win_rate_greedy) : json(nullptr);
      aspects.push_back(std::move(row));
    }
    json j{{"config_hash", hash},
           {"seed", seed},
           {"total_pairs", report.total_pairs},
           {"holistic_win_rate_greedy", report.holistic_win_rate_greedy.has_value()
                                            ? json(*report.holistic_win_rate_greedy)
                                            : json(nullptr)},
           {"aspects", aspects},
           {"chosen", report.chosen}};
    write_text_file(paths.selection(seed), j.dump(2) + "\n");
    artifacts.push_back(relative_to(paths.selection(seed), paths.root));
  }

  write_manifest(paths, "select",
                 json{{"config_hash", hash},
                      {"config_origin", config.origin},
                      {"seeds", cfg.seeds},
                      {"candidates", candidates},
                      {"status", "ok"},
                      {"artifacts", artifacts}});
}

// ---------------------------------------------------------------------------
// train

struct TrainSetup {
  TrainInputs inputs;
  TrainConfig train;
};

TrainSetup make_train_setup(const RunConfig& cfg, Method method, std::uint64_t seed,
                            const CalibrationArtifact& calib, const SelectionReport& selection,
                            const EnvReference& env_ref) {
  if (selection.chosen.empty()) throw Error("selection chose no aspects");

  HierarchicalRewardConfig reward;
  reward.threshold = calib.threshold;
  reward.holistic_weight = cfg.reward.holistic_weight;
  reward.shaping = cfg.reward.shaping;
  reward.selected_aspects = selection.chosen;
  reward.aspect_weights = cfg.reward.aspect_weights;
  for (const std::string& name : selection.chosen) {
    reward.aspect_weights.try_emplace(name, 1.0);
  }
  validate_reward_config(reward);

  TrainInputs inputs;
  inputs.method = method;
  inputs.env = cfg.env;
  inputs.reward = reward;
  inputs.stats = calib.stats;
  for (const std::string& name : selection.chosen) {
    inputs.selected_specs.push_back(find_aspect(cfg, name));
  }
  inputs.report_aspect = inputs.selected_specs.front();
  inputs.q_star = env_ref.q_star;

  TrainConfig train = cfg.train;
  train.seed = seed;
  return TrainSetup{std::move(inputs), train};
}

void train_one(const RunConfig& cfg, Method method, std::uint64_t seed, const OutputPaths& paths,
               const std::string& hash, const EnvReference& env_ref,
               std::vector<std::string>& artifacts) {
  const CalibrationArtifact calib = load_calibration(paths, seed);
  const SelectionReport selection = load_selection(paths, seed);
  TrainSetup setup = make_train_setup(cfg, method, seed, calib, selection, env_ref);

  const fs::path dir = paths.run_dir(method, seed);
  fs::create_directories(dir);

  const PolicyParams init = initial_policy(cfg.env, cfg.train.init_logit_sigma, cfg.train.init_eos_bias);
  write_text_file(dir / "checkpoint_init.json",
                  checkpoint_json(init, zero_values(init.context_count()), hash).dump(2) + "\n");

  std::ofstream traj_log(dir / "trajectories.jsonl", std::ios::binary | std::ios::trunc);
  if (!traj_log) throw Error("cannot write " + (dir / "trajectories.jsonl").string());
  RolloutSink sink = [&traj_log](const Rollout& rollout) {
    json line = trajectory_json(rollout.traj);
    line["logprobs"] = rollout.traj.logprobs;
    line["holistic_raw"] = rollout.holistic_raw;
    line["reward"] = combined_reward_json(rollout.reward);
    traj_log << line.dump() << '\n';
  };

  TrainResult result = train(setup.inputs, setup.train, sink);
  traj_log.flush();
  if (!traj_log) throw Error("failed while writing trajectories for seed " + std::to_string(seed));
  traj_log.close();

  write_text_file(dir / "checkpoint_final.json",
                  checkpoint_json(result.params, result.values, hash).dump(2) + "\n");

  {
    std::ostringstream lines;
    for (const IterationLog& it : result.iterations) {
      lines << json{{"iteration", it.iteration},
                    {"episodes", it.episodes},
                    {"mean_reward", it.mean_reward},
                    {"mean_holistic_raw", it.mean_holistic_raw},
                    {"mean_holistic_normalized", it.mean_holistic_normalized},
                    {"mean_aspect_rate", it.mean_aspect_rate},
                    {"mean_length", it.mean_length},
                    {"gated_fraction", it.gated_fraction},
                    {"mean_kl", it.mean_kl},
                    {"clip_fraction", it.clip_fraction}}
                   .dump()
            << '\n';
    }
    write_text_file(dir / "training_log.jsonl", lines.str());
  }
  {
    std::ostringstream lines;
    for (const EvalPoint& e : result.evals) {
      lines << json{{"iteration", e.iteration},
                    {"episodes", e.episodes},
                    {"mean_quality", e.mean_quality},
                    {"mean_holistic", e.mean_holistic},
                    {"superior_rate", e.superior_rate},
                    {"aspect_rate", e.aspect_rate},
                    {"mean_length", e.mean_length}}
                   .dump()
            << '\n';
    }
    write_text_file(dir / "evals.jsonl", lines.str());
  }

  // Held-out greedy generations under the trained policy, one line per
  // prompt; the report builds every cross-method table from these.
  {
    std::ostringstream lines;
    for (int p = 0; p < cfg.train.eval_prompts; ++p) {
      const std::uint64_t pid = kEvalPromptBase + static_cast<std::uint64_t>(p);
      Rng greedy_rng(0);
      Trajectory traj =
          sample_for_prompt(result.params, DecodeMode::Greedy, cfg.env, pid, greedy_rng);
      const double q = quality(traj, cfg.env);
      const double h = holistic_reward(traj, cfg.env);
      const double rate = aspect_comparison_score(
          aspect_reward(traj, setup.inputs.report_aspect, cfg.env));
      json line = trajectory_json(traj);
      line["length"] = traj.size();
      line["quality"] = q;
      line["holistic"] = h;
      line["aspect_rate"] = rate;
      lines << line.dump() << '\n';
    }
    write_text_file(dir / "eval_greedy.jsonl", lines.str());
  }

  for (const char* name :
       {"checkpoint_init.json", "checkpoint_final.json", "trajectories.jsonl",
        "training_log.jsonl", "evals.jsonl", "eval_greedy.jsonl"}) {
    artifacts.push_back(relative_to(dir / name, paths.root));
  }
}

void train_method_impl(const LoadedConfig& config, const OutputPaths& paths,
                       const std::string& hash, Method method) {
  const RunConfig& cfg = config.cfg;
  const EnvReference env_ref = load_env_ref(paths);

  std::vector<std::string> artifacts;
  std::vector<std::uint64_t> completed;
  json failed = json::array();
  std::exception_ptr first_failure;

  for (std::uint64_t seed : cfg.seeds) {
    try {
      train_one(cfg, method, seed, paths, hash, env_ref, artifacts);
      completed.push_back(seed);
    } catch (const std::exception& e) {
      failed.push_back(json{{"seed", seed}, {"error", e.what()}});
      first_failure = std::current_exception();
      break;  // later seeds depend on nothing here, but a broken setup would just repeat
    }
  }

  json manifest{{"config_hash", hash},
                {"config_origin", config.origin},
                {"method", to_string(method)},
                {"seeds", cfg.seeds},
                {"completed_seeds", completed},
                {"status", failed.empty() ? "ok" : "partial"},
                {"artifacts", artifacts}};
  if (!failed.empty()) manifest["failed_seeds"] = failed;
  write_manifest(paths, std::string("train_") + to_string(method), std::move(manifest));

  if (first_failure) std::rethrow_exception(first_failure);
}

// ---------------------------------------------------------------------------
// evaluate

void evaluate_impl(const LoadedConfig& config, const OutputPaths& paths,
                   const std::string& hash) {
  const RunConfig& cfg = config.cfg;
  const EnvReference env_ref = load_env_ref(paths);
  std::vector<std::string> artifacts;

  for (Method method : cfg.methods) {
    std::vector<SeedSummary> per_seed;
    json seeds_json = json::array();
    for (std::uint64_t seed : cfg.seeds) {
      std::vector<EvalRecord> records = load_eval_records(paths, method, seed);
      SeedSummary s = summarize_records(seed, records, env_ref.q_star);
      seeds_json.push_back(seed_summary_json(s));
      per_seed.push_back(s);
    }
    SeedSummary mean = mean_summary(per_seed);
    json j{{"config_hash", hash},
           {"method", to_string(method)},
           {"q_star", env_ref.q_star},
           {"per_seed", seeds_json},
           {"mean",
            json{{"mean_quality", mean.mean_quality},
                 {"mean_holistic", mean.mean_holistic},
                 {"mean_aspect_rate", mean.mean_aspect_rate},
                 {"superior_rate", mean.superior_rate},
                 {"mean_length", mean.mean_length}}}};
    write_text_file(paths.eval_summary(method), j.dump(2) + "\n");
    artifacts.push_back(relative_to(paths.eval_summary(method), paths.root));
  }

  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  write_manifest(paths, "evaluate",
                 json{{"config_hash", hash},
                      {"config_origin", config.origin},
                      {"methods", methods},
                      {"seeds", cfg.seeds},
                      {"status", "ok"},
                      {"artifacts", artifacts}});
}

// ---------------------------------------------------------------------------
// report

std::vector<ScoredGeneration> metric_scores(const std::vector<EvalRecord>& records,
                                            const std::string& metric) {
  std::vector<ScoredGeneration> out;
  out.reserve(records.size());
  for (const EvalRecord& r : records) {
    double score = 0.0;
    if (metric == "quality") {
      score = r.quality;
    } else if (metric == "holistic") {
      score = r.holistic;
    } else if (metric == "aspect_rate") {
      score = r.aspect_rate;
    } else {
      throw Error("unknown report metric '" + metric + "'");
    }
    out.push_back(ScoredGeneration{r.prompt_id, score});
  }
  return out;
}

std::optional<double> soft_win_rate(std::span<const Outcome> outcomes) {
  try {
    return win_rate(outcomes);
  } catch (const DegenerateDataError&) {
    return std::nullopt;  // every comparison tied; the rate is undefined
  }
}

std::optional<double> judged_win_rate(const std::vector<EvalRecord>& a,
                                      const std::vector<EvalRecord>& b, std::uint64_t seed,
                                      std::size_t row, std::size_t col, const RunConfig& cfg,
                                      const JudgeClient* client) {
  if (a.size() != b.size()) throw Error("judge comparison sides differ in size");
  std::vector<Outcome> outcomes;
  outcomes.reserve(a.size());

  if (client != nullptr) {
    std::vector<JudgePair> pairs;
    pairs.reserve(a.size());
    for (std::size_t p = 0; p < a.size(); ++p) {
      if (a[p].prompt_id != b[p].prompt_id) throw Error("judge comparison prompts misaligned");
      JudgePair pair;
      pair.pair_id = a[p].prompt_id;
      pair.instruction = "Produce the most fluent, non-repetitive token sequence for prompt " +
                         std::to_string(a[p].prompt_id) + ".";
      pair.generation_a = trajectory_text(trajectory_from_tokens(a[p].prompt_id, a[p].tokens, cfg.env));
      pair.generation_b = trajectory_text(trajectory_from_tokens(b[p].prompt_id, b[p].tokens, cfg.env));
      pairs.push_back(std::move(pair));
    }
    for (const JudgeVerdict& v : client->judge_pairs(pairs)) {
      switch (v.resolved) {
        case JudgeResolution::WinA: outcomes.push_back(Outcome::WinA); break;
        case JudgeResolution::WinB: outcomes.push_back(Outcome::WinB); break;
        case JudgeResolution::Discarded: outcomes.push_back(Outcome::Tie); break;
      }
    }
  } else {
    for (std::size_t p = 0; p < a.size(); ++p) {
      if (a[p].prompt_id != b[p].prompt_id) throw Error("judge comparison prompts misaligned");
      Trajectory ta = trajectory_from_tokens(a[p].prompt_id, a[p].tokens, cfg.env);
      Trajectory tb = trajectory_from_tokens(b[p].prompt_id, b[p].tokens, cfg.env);
      Rng rng = make_rng(seed, "judge-sim",
                         {static_cast<std::uint64_t>(row), static_cast<std::uint64_t>(col),
                          a[p].prompt_id});
      JudgeVerdict v = simulated_judge(a[p].prompt_id, ta, tb, cfg.env, cfg.eval.judge_sigma, rng);
      switch (v.resolved) {
        case JudgeResolution::WinA: outcomes.push_back(Outcome::WinA); break;
        case JudgeResolution::WinB: outcomes.push_back(Outcome::WinB); break;
        case JudgeResolution::Discarded: outcomes.push_back(Outcome::Tie); break;
      }
    }
  }
  return soft_win_rate(outcomes);
}

std::string csv_cell(const std::optional<double>& value) {
  return value.has_value() ? render_number(*value) : std::string();
}

void report_impl(const LoadedConfig& config, const OutputPaths& paths, const std::string& hash) {
  const RunConfig& cfg = config.cfg;
  const EnvReference env_ref = load_env_ref(paths);

  std::vector<std::string> method_names;
  for (Method m : cfg.methods) method_names.push_back(to_string(m));

  std::vector<std::string> metrics = cfg.eval.metrics;
  const bool with_judge = cfg.eval.judge_mode != JudgeMode::None;
  if (with_judge) metrics.push_back("judge");

  std::unique_ptr<JudgeClient> client;
  if (cfg.eval.judge_mode == JudgeMode::Http) {
    client = std::make_unique<JudgeClient>(cfg.eval.judge_http);
  }

  // (method index, seed index) -> records, loaded once.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<EvalRecord>> records;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
      records[{m, s}] = load_eval_records(paths, cfg.methods[m], cfg.seeds[s]);
    }
  }

  std::vector<PairwiseSeries> series;
  for (const std::string& metric : metrics) {
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
      for (std::size_t j = i + 1; j < cfg.methods.size(); ++j) {
        PairwiseSeries s;
        s.metric = metric;
        s.row = i;
        s.col = j;
        for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
          const std::vector<EvalRecord>& a = records.at({i, k});
          const std::vector<EvalRecord>& b = records.at({j, k});
          if (metric == "judge") {
            s.per_seed.push_back(
                judged_win_rate(a, b, cfg.seeds[k], i, j, cfg, client.get()));
          } else {
            s.per_seed.push_back(soft_win_rate(
                pairwise_outcomes(metric_scores(a, metric), metric_scores(b, metric),
                                  Direction::HigherWins)));
          }
        }
        series.push_back(std::move(s));
      }
    }
  }

  MethodMatrix matrix = build_matrix(method_names, cfg.seeds, metrics, series);

  // win_rates.json
  json tables = json::object();
  for (const std::string& metric : metrics) {
    json cells = json::array();
    const std::size_t n = method_names.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const WinRateCell& cell = matrix.cell(metric, i, j);
        json per_seed = json::array();
        for (const auto& v : cell.per_seed) per_seed.push_back(v ? json(*v) : json(nullptr));
        cells.push_back(json{{"row", method_names[i]},
                             {"col", method_names[j]},
                             {"defined", cell.defined},
                             {"mean", cell.mean},
                             {"stddev", cell.stddev},
                             {"per_seed", per_seed}});
      }
    }
    json rows = json::array();
    for (const auto& avg : matrix.row_averages.at(metric)) {
      rows.push_back(avg ? json(*avg) : json(nullptr));
    }
    tables[metric] = json{{"cells", cells}, {"row_averages", rows}};
  }
  json win_rates{{"config_hash", hash},
                 {"methods", method_names},
                 {"seeds", cfg.seeds},
                 {"metrics", tables}};
  fs::create_directories(paths.report_dir());
  write_text_file(paths.report_dir() / "win_rates.json", win_rates.dump(2) + "\n");

  // win_rates.csv — one off-diagonal cell per line.
  {
    std::ostringstream csv;
    csv << "metric,row,col,mean,stddev";
    for (std::uint64_t seed : cfg.seeds) csv << ",seed_" << seed;
    csv << "\n";
    for (const std::string& metric : metrics) {
      const std::size_t n = method_names.size();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          const WinRateCell& cell = matrix.cell(metric, i, j);
          csv << metric << ',' << method_names[i] << ',' << method_names[j] << ','
              << (cell.defined ? render_number(cell.mean) : std::string()) << ','
              << (cell.defined ? render_number(cell.stddev) : std::string());
          for (const auto& v : cell.per_seed) csv << ',' << csv_cell(v);
          csv << "\n";
        }
      }
    }
    write_text_file(paths.report_dir() / "win_rates.csv", csv.str());
  }

  // summary.json / summary.csv — per-method scalar means across seeds.
  {
    json methods_json = json::object();
    std::ostringstream csv;
    csv << "method,mean_quality,mean_holistic,mean_aspect_rate,superior_rate,mean_length\n";
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      std::vector<SeedSummary> per_seed;
      json seeds_json = json::array();
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
        SeedSummary one = summarize_records(cfg.seeds[s], records.at({m, s}), env_ref.q_star);
        per_seed.push_back(one);
        seeds_json.push_back(seed_summary_json(one));
      }
      SeedSummary mean = mean_summary(per_seed);
      methods_json[method_names[m]] =
          json{{"per_seed", seeds_json},
               {"mean_quality", mean.mean_quality},
               {"mean_holistic", mean.mean_holistic},
               {"mean_aspect_rate", mean.mean_aspect_rate},
               {"superior_rate", mean.superior_rate},
               {"mean_length", mean.mean_length}};
      csv << method_names[m] << ',' << render_number(mean.mean_quality) << ','
          << render_number(mean.mean_holistic) << ',' << render_number(mean.mean_aspect_rate)
          << ',' << render_number(mean.superior_rate) << ',' << render_number(mean.mean_length)
          << "\n";
    }
    json summary{{"config_hash", hash},
                 {"q_star", env_ref.q_star},
                 {"methods", methods_json}};
    write_text_file(paths.report_dir() / "summary.json", summary.dump(2) + "\n");
    write_text_file(paths.report_dir() / "summary.csv", csv.str());
  }

  json metrics_json = json::array();
  for (const std::string& metric : metrics) metrics_json.push_back(metric);
  write_manifest(paths, "report",
                 json{{"config_hash", hash},
                      {"config_origin", config.origin},
                      {"methods", method_names},
                      {"seeds", cfg.seeds},
                      {"metrics", metrics_json},
                      {"judge_mode", to_string(cfg.eval.judge_mode)},
                      {"status", "ok"},
                      {"artifacts",
                       json::array({"report/win_rates.json", "report/win_rates.csv",
                                    "report/summary.json", "report/summary.csv"})}});
}

}  // namespace

// ---------------------------------------------------------------------------
// Public surface

LoadedConfig load_config_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_text(buf.str(), path.string());
}

LoadedConfig config_from_text(std::string text, std::string origin) {
  LoadedConfig loaded;
  loaded.cfg = parse_run_config_text(text, origin);
  loaded.raw_bytes = std::move(text);
  loaded.origin = std::move(origin);
  return loaded;
}

std::string config_hash(const LoadedConfig& config) {
  std::uint64_t h = fnv1a64(config.raw_bytes);
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

OutputLock::OutputLock(const fs::path& output_dir) {
  fs::create_directories(output_dir);
  lock_path_ = output_dir / ".lock";
  if (!fs::create_directory(lock_path_)) {
    throw Error("output directory " + output_dir.string() +
                " is locked (another command may be running; if a crashed run left it behind, "
                "remove " + lock_path_.string() + ")");
  }
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(lock_path_, ec);
}

OutputPaths output_paths(const RunConfig& cfg) { return OutputPaths{fs::path(cfg.output_dir)}; }

fs::path OutputPaths::calibration(std::uint64_t seed) const {
  return root / "calibration" / ("seed_" + std::to_string(seed) + ".json");
}

fs::path OutputPaths::selection(std::uint64_t seed) const {
  return root / "selection" / ("seed_" + std::to_string(seed) + ".json");
}

fs::path OutputPaths::run_dir(Method method, std::uint64_t seed) const {
  return root / "runs" / to_string(method) / ("seed_" + std::to_string(seed));
}

fs::path OutputPaths::train_manifest(Method method) const {
  return manifest(std::string("train_") + to_string(method));
}

fs::path OutputPaths::manifest(const std::string& command) const {
  return root / "manifests" / (command + ".json");
}

fs::path OutputPaths::eval_summary(Method method) const {
  return root / "eval" / to_string(method) / "summary.json";
}

EnvReference load_env_ref(const OutputPaths& paths) {
  json j = parse_json_file(paths.env_ref(), "calibrate");
  try {
    EnvReference ref;
    ref.q_star = j.at("q_star").get<double>();
    ref.mean_reference_length = j.at("mean_reference_length").get<double>();
    ref.reference_sample_size = j.at("reference_sample_size").get<int>();
    ref.superior_quantile = j.at("superior_quantile").get<double>();
    return ref;
  } catch (const json::exception& e) {
    throw Error(paths.env_ref().string() + " is malformed: " + e.what());
  }
}

CalibrationArtifact load_calibration(const OutputPaths& paths, std::uint64_t seed) {
  const fs::path path = paths.calibration(seed);
  json j = parse_json_file(path, "calibrate");
  try {
    CalibrationArtifact art;
    art.seed = j.at("seed").get<std::uint64_t>();
    art.stats.mean = j.at("mean").get<double>();
    art.stats.stddev = j.at("stddev").get<double>();
    art.stats.sample_count = j.at("sample_count").get<std::int64_t>();
    art.stats.source = j.at("source").get<std::string>();
    art.threshold = j.at("threshold").get<double>();
    if (j.contains("top_fraction")) art.top_fraction = j.at("top_fraction").get<double>();
    return art;
  } catch (const json::exception& e) {
    throw Error(path.string() + " is malformed: " + e.what());
  }
}

SelectionReport load_selection(const OutputPaths& paths, std::uint64_t seed) {
  const fs::path path = paths.selection(seed);
  json j = parse_json_file(path, "select");
  try {
    SelectionReport report;
    report.total_pairs = j.at("total_pairs").get<std::int64_t>();
    if (!j.at("holistic_win_rate_greedy").is_null()) {
      report.holistic_win_rate_greedy = j.at("holistic_win_rate_greedy").get<double>();
    }
    for (const json& row : j.at("aspects")) {
      AspectSelectionStats a;
      a.name = row.at("name").get<std::string>();
      a.inconsistency = row.at("inconsistency").get<double>();
      a.counts.compared = row.at("compared").get<std::int64_t>();
      a.counts.divergent = row.at("divergent").get<std::int64_t>();
      a.counts.holistic_ties = row.at("holistic_ties").get<std::int64_t>();
      if (!row.at("win_rate_greedy").is_null()) {
        a.win_rate_greedy = row.at("win_rate_greedy").get<double>();
      }
      report.aspects.push_back(std::move(a));
    }
    report.chosen = j.at("chosen").get<std::vector<std::string>>();
    return report;
  } catch (const json::exception& e) {
    throw Error(path.string() + " is malformed: " + e.what());
  }
}

std::vector<EvalRecord> load_eval_records(const OutputPaths& paths, Method method,
                                          std::uint64_t seed) {
  const fs::path path = paths.run_dir(method, seed) / "eval_greedy.jsonl";
  if (!fs::exists(path)) {
    throw Error(path.string() + " not found; run `train` for method " +
                std::string(to_string(method)) + " first");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<EvalRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(path.string() + ":" + std::to_string(line_no) + " is not valid JSON");
    }
    try {
      EvalRecord r;
      r.prompt_id = j.at("prompt_id").get<std::uint64_t>();
      r.tokens = j.at("tokens").get<std::vector<int>>();
      r.quality = j.at("quality").get<double>();
      r.holistic = j.at("holistic").get<double>();
      r.aspect_rate = j.at("aspect_rate").get<double>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + " is malformed: " + e.what());
    }
  }
  return records;
}

void cmd_calibrate(const LoadedConfig& config) {
  OutputPaths paths = output_paths(config.cfg);
  OutputLock lock(paths.root);
  ensure_config_copy(paths, config);
  calibrate_impl(config, paths, config_hash(config));
}

void cmd_select(const LoadedConfig& config) {
  OutputPaths paths = output_paths(config.cfg);
  OutputLock lock(paths.root);
  ensure_config_copy(paths, config);
  select_impl(config, paths, config_hash(config));
}

void cmd_train(const LoadedConfig& config) {
  OutputPaths paths = output_paths(config.cfg);
  OutputLock lock(paths.root);
  ensure_config_copy(paths, config);
  train_method_impl(config, paths, config_hash(config), config.cfg.method);
}

void cmd_evaluate(const LoadedConfig& config) {
  OutputPaths paths = output_paths(config.cfg);
  OutputLock lock(paths.root);
  ensure_config_copy(paths, config);
  evaluate_impl(config, paths, config_hash(config));
}

void cmd_report(const LoadedConfig& config) {
  OutputPaths paths = output_paths(config.cfg);
  OutputLock lock(paths.root);
  ensure_config_copy(paths, config);
  report_impl(config, paths, config_hash(config));
}

void cmd_all(const LoadedConfig& config) {
  OutputPaths paths = output_paths(config.cfg);
  OutputLock lock(paths.root);
  ensure_config_copy(paths, config);
  const std::string hash = config_hash(config);

  calibrate_impl(config, paths, hash);
  select_impl(config, paths, hash);
  for (Method method : config.cfg.methods) {
    train_method_impl(config, paths, hash, method);
  }
  evaluate_impl(config, paths, hash);
  report_impl(config, paths, hash);

  json stages = json::array({"calibrate", "select"});
  for (Method method : config.cfg.methods) {
    stages.push_back(std::string("train_") + to_string(method));
  }
  stages.push_back("evaluate");
  stages.push_back("report");
  write_manifest(paths, "all",
                 json{{"config_hash", hash},
                      {"config_origin", config.origin},
                      {"seeds", config.cfg.seeds},
                      {"status", "ok"},
                      {"stages", stages}});
}

}  // namespace tiered
