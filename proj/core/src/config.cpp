#include "tiered/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tiered/errors.hpp"

namespace tiered {

using nlohmann::json;

const char* to_string(JudgeMode m) {
  switch (m) {
    case JudgeMode::Simulated: return "simulated";
    case JudgeMode::Http: return "http";
    case JudgeMode::None: return "none";
  }
  return "?";
}

JudgeMode judge_mode_from_string(const std::string& name) {
  if (name == "simulated") return JudgeMode::Simulated;
  if (name == "http") return JudgeMode::Http;
  if (name == "none") return JudgeMode::None;
  throw ConfigError("unknown judge mode '" + name + "' (expected simulated, http or none)");
}

Density density_from_string(const std::string& name) {
  if (name == "token") return Density::Token;
  if (name == "segment") return Density::Segment;
  if (name == "sequence") return Density::Sequence;
  throw ConfigError("unknown density '" + name + "' (expected token, segment or sequence)");
}

AspectKind aspect_kind_from_string(const std::string& name) {
  if (name == "consistent") return AspectKind::Consistent;
  if (name == "orthogonal") return AspectKind::Orthogonal;
  if (name == "conflicting") return AspectKind::Conflicting;
  if (name == "length") return AspectKind::Length;
  throw ConfigError("unknown aspect kind '" + name +
                    "' (expected consistent, orthogonal, conflicting or length)");
}

Shaping shaping_from_string(const std::string& name) {
  if (name == "sigmoid") return Shaping::Sigmoid;
  if (name == "none") return Shaping::None;
  throw ConfigError("unknown shaping '" + name + "' (expected sigmoid or none)");
}

namespace {

// Strict view over one JSON object: every key must be consumed exactly once
// and finish() rejects leftovers, so unknown keys fail loudly with their
// full path instead of silently meaning nothing.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  std::string child_path(const std::string& key) const { return path_ + "." + key; }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(child_path(key) + " must be a number");
    return v.get<double>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(child_path(key) + " must be an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0 &&
                                   !v.is_number_unsigned()))
      throw ConfigError(child_path(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(child_path(key) + " must be a string");
    return v.get<std::string>();
  }

  void finish() {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key " + child_path(key));
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<int> int_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + " must be an array of integers");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw ConfigError(path + " must contain only integers");
    out.push_back(e.get<int>());
  }
  return out;
}

std::vector<double> double_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(path + " must contain only numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::string> string_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw ConfigError(path + " must contain only strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

EnvSpec parse_env(const json& j, const std::string& path) {
  EnvSpec spec = default_env_spec();
  ObjectReader r(j, path);
  spec.vocab_size = static_cast<int>(r.integer("vocab_size", spec.vocab_size));
  spec.max_len = static_cast<int>(r.integer("max_len", spec.max_len));
  spec.eos_token = static_cast<int>(r.integer("eos_token", spec.eos_token));
  if (r.has("good_tokens")) spec.good_tokens = int_list(r.at("good_tokens"), r.child_path("good_tokens"));
  if (r.has("clean_tokens"))
    spec.clean_tokens = int_list(r.at("clean_tokens"), r.child_path("clean_tokens"));
  if (r.has("quality_weights"))
    spec.quality_weights = double_list(r.at("quality_weights"), r.child_path("quality_weights"));
  else
    spec.quality_weights = derive_quality_weights(spec.vocab_size, spec.good_tokens);
  spec.repetition_penalty = r.number("repetition_penalty", spec.repetition_penalty);
  spec.holistic_noise_sigma = r.number("holistic_noise_sigma", spec.holistic_noise_sigma);
  spec.superior_quantile = r.number("superior_quantile", spec.superior_quantile);
  spec.reference_sample_size =
      static_cast<int>(r.integer("reference_sample_size", spec.reference_sample_size));
  spec.segment_len = static_cast<int>(r.integer("segment_len", spec.segment_len));
  spec.seed = r.unsigned_integer("seed", spec.seed);
  r.finish();
  return spec;
}

std::vector<AspectSpec> parse_aspects(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + " must be an array of aspect objects");
  std::vector<AspectSpec> out;
  std::size_t i = 0;
  for (const auto& e : j) {
    const std::string p = path + "[" + std::to_string(i++) + "]";
    ObjectReader r(e, p);
    AspectSpec a;
    a.name = r.text("name", "");
    if (a.name.empty()) throw ConfigError(p + ".name must be a nonempty string");
    a.density = density_from_string(r.text("density", "token"));
    a.kind = aspect_kind_from_string(r.text("kind", "consistent"));
    a.length_reference = r.number("length_reference", a.length_reference);
    r.finish();
    out.push_back(std::move(a));
  }
  return out;
}

RewardConfigSection parse_reward(const json& j, const std::string& path) {
  RewardConfigSection s;
  ObjectReader r(j, path);
  if (r.has("threshold")) {
    const json& t = r.at("threshold");
    if (t.is_number()) {
      s.threshold.value = t.get<double>();
    } else {
      ObjectReader tr(t, r.child_path("threshold"));
      s.threshold.top_fraction = tr.number("top_fraction", s.threshold.top_fraction);
      tr.finish();
    }
  }
  s.holistic_weight = r.number("holistic_weight", s.holistic_weight);
  s.shaping = shaping_from_string(r.text("shaping", "sigmoid"));
  if (r.has("aspect_weights")) {
    const json& w = r.at("aspect_weights");
    if (!w.is_object()) throw ConfigError(r.child_path("aspect_weights") + " must be an object");
    for (const auto& [name, value] : w.items()) {
      if (!value.is_number())
        throw ConfigError(r.child_path("aspect_weights") + "." + name + " must be a number");
      s.aspect_weights[name] = value.get<double>();
    }
  }
  r.finish();
  return s;
}

SelectionConfig parse_selection(const json& j, const std::string& path) {
  SelectionConfig s;
  ObjectReader r(j, path);
  s.pairs = static_cast<int>(r.integer("pairs", s.pairs));
  s.max_selected = static_cast<int>(r.integer("max_selected", s.max_selected));
  if (r.has("candidates"))
    s.candidates = string_list(r.at("candidates"), r.child_path("candidates"));
  r.finish();
  return s;
}

TrainConfig parse_train(const json& j, const std::string& path) {
  TrainConfig t;
  ObjectReader r(j, path);
  t.batch_size = static_cast<int>(r.integer("batch_size", t.batch_size));
  t.minibatch_size = static_cast<int>(r.integer("minibatch_size", t.minibatch_size));
  t.ppo_epochs = static_cast<int>(r.integer("ppo_epochs", t.ppo_epochs));
  t.clip_epsilon = r.number("clip_epsilon", t.clip_epsilon);
  t.learning_rate = r.number("learning_rate", t.learning_rate);
  t.value_learning_rate = r.number("value_learning_rate", t.value_learning_rate);
  t.kl_coeff = r.number("kl_coeff", t.kl_coeff);
  t.discount = r.number("discount", t.discount);
  t.total_episodes = r.integer("total_episodes", t.total_episodes);
  t.rollouts_per_prompt = static_cast<int>(r.integer("rollouts_per_prompt", t.rollouts_per_prompt));
  t.eval_every = static_cast<int>(r.integer("eval_every", t.eval_every));
  t.eval_prompts = static_cast<int>(r.integer("eval_prompts", t.eval_prompts));
  t.init_logit_sigma = r.number("init_logit_sigma", t.init_logit_sigma);
  t.init_eos_bias = r.number("init_eos_bias", t.init_eos_bias);
  r.finish();
  return t;
}

JudgeClientConfig parse_judge_http(const json& j, const std::string& path) {
  JudgeClientConfig c;
  ObjectReader r(j, path);
  c.endpoint = r.text("endpoint", c.endpoint);
  c.model = r.text("model", c.model);
  c.api_key_env = r.text("api_key_env", c.api_key_env);
  c.template_path = r.text("template_path", c.template_path);
  c.max_in_flight = static_cast<int>(r.integer("max_in_flight", c.max_in_flight));
  c.timeout_seconds = r.number("timeout_seconds", c.timeout_seconds);
  c.retry_max = static_cast<int>(r.integer("retry_max", c.retry_max));
  c.backoff_base_ms = static_cast<int>(r.integer("backoff_base_ms", c.backoff_base_ms));
  r.finish();
  return c;
}

EvalConfigSection parse_eval(const json& j, const std::string& path) {
  EvalConfigSection s;
  s.judge_http.template_path = "templates/judge_prompt.txt";
  ObjectReader r(j, path);
  if (r.has("metrics")) s.metrics = string_list(r.at("metrics"), r.child_path("metrics"));
  if (r.has("judge")) {
    ObjectReader jr(r.at("judge"), r.child_path("judge"));
    s.judge_mode = judge_mode_from_string(jr.text("mode", to_string(s.judge_mode)));
    s.judge_sigma = jr.number("sigma", s.judge_sigma);
    if (jr.has("http")) s.judge_http = parse_judge_http(jr.at("http"), jr.child_path("http"));
    jr.finish();
  }
  r.finish();
  return s;
}

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.env = default_env_spec();
  cfg.aspects = default_aspects();
  cfg.eval.judge_http.template_path = "templates/judge_prompt.txt";
  return cfg;
}

void validate_run_config(const RunConfig& cfg) {
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (cfg.seeds.empty()) throw ConfigError("seeds must not be empty");
  {
    std::set<std::uint64_t> unique(cfg.seeds.begin(), cfg.seeds.end());
    if (unique.size() != cfg.seeds.size()) throw ConfigError("seeds must be distinct");
  }
  if (cfg.methods.empty()) throw ConfigError("methods must not be empty");
  {
    std::set<Method> unique(cfg.methods.begin(), cfg.methods.end());
    if (unique.size() != cfg.methods.size()) throw ConfigError("methods must be distinct");
  }
  validate_env_spec(cfg.env);
  if (cfg.aspects.empty()) throw ConfigError("at least one aspect must be configured");
  std::set<std::string> names;
  for (const auto& a : cfg.aspects) {
    if (a.name.empty()) throw ConfigError("aspect names must be nonempty");
    if (!names.insert(a.name).second)
      throw ConfigError("duplicate aspect name '" + a.name + "'");
    if (a.kind == AspectKind::Length && a.density != Density::Sequence)
      throw ConfigError("length aspect '" + a.name + "' must use sequence density");
    if (!(a.length_reference > 0.0))
      throw ConfigError("aspect '" + a.name + "' length_reference must be > 0");
  }
  if (!cfg.reward.threshold.value &&
      !(cfg.reward.threshold.top_fraction > 0.0 && cfg.reward.threshold.top_fraction < 1.0))
    throw ConfigError("reward.threshold.top_fraction must be in (0, 1)");
  if (cfg.reward.threshold.value && !std::isfinite(*cfg.reward.threshold.value))
    throw ConfigError("reward.threshold must be finite");
  if (!(cfg.reward.holistic_weight > 0.0))
    throw ConfigError("reward.holistic_weight must be > 0");
  for (const auto& [name, w] : cfg.reward.aspect_weights) {
    if (!names.count(name))
      throw ConfigError("reward.aspect_weights names unknown aspect '" + name + "'");
    if (!(w > 0.0)) throw ConfigError("weight of aspect '" + name + "' must be > 0");
  }
  if (cfg.calibration_size < 2) throw ConfigError("calibration.size must be >= 2");
  if (cfg.selection.pairs < 1) throw ConfigError("selection.pairs must be >= 1");
  if (cfg.selection.max_selected < 1) throw ConfigError("selection.max_selected must be >= 1");
  for (const auto& c : cfg.selection.candidates)
    if (!names.count(c)) throw ConfigError("selection.candidates names unknown aspect '" + c + "'");
  validate_train_config(cfg.train);
  if (cfg.eval.metrics.empty()) throw ConfigError("eval.metrics must not be empty");
  const std::set<std::string> known_metrics = {"holistic", "quality", "aspect_rate"};
  for (const auto& m : cfg.eval.metrics)
    if (!known_metrics.count(m))
      throw ConfigError("unknown eval metric '" + m +
                        "' (expected holistic, quality or aspect_rate)");
  if (cfg.eval.judge_sigma < 0.0) throw ConfigError("eval.judge.sigma must be >= 0");
}

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": malformed JSON: " + e.what());
  }
  RunConfig cfg = default_run_config();
  try {
    ObjectReader r(j, origin);
    cfg.output_dir = r.text("output_dir", cfg.output_dir);
    if (r.has("seeds")) {
      const json& s = r.at("seeds");
      if (!s.is_array()) throw ConfigError(r.child_path("seeds") + " must be an array");
      cfg.seeds.clear();
      for (const auto& e : s) {
        if (!e.is_number_integer() || e.get<std::int64_t>() < 0)
          throw ConfigError(r.child_path("seeds") + " must contain non-negative integers");
        cfg.seeds.push_back(e.get<std::uint64_t>());
      }
    }
    if (r.has("method")) cfg.method = method_from_string(r.text("method", ""));
    if (r.has("methods")) {
      cfg.methods.clear();
      for (const auto& m : string_list(r.at("methods"), r.child_path("methods")))
        cfg.methods.push_back(method_from_string(m));
    }
    if (r.has("env")) cfg.env = parse_env(r.at("env"), r.child_path("env"));
    if (r.has("aspects")) cfg.aspects = parse_aspects(r.at("aspects"), r.child_path("aspects"));
    if (r.has("reward")) cfg.reward = parse_reward(r.at("reward"), r.child_path("reward"));
    if (r.has("calibration")) {
      ObjectReader cr(r.at("calibration"), r.child_path("calibration"));
      cfg.calibration_size = static_cast<int>(cr.integer("size", cfg.calibration_size));
      cr.finish();
    }
    if (r.has("selection"))
      cfg.selection = parse_selection(r.at("selection"), r.child_path("selection"));
    if (r.has("train")) cfg.train = parse_train(r.at("train"), r.child_path("train"));
    if (r.has("eval")) cfg.eval = parse_eval(r.at("eval"), r.child_path("eval"));
    r.finish();
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  validate_run_config(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str(), path.string());
}

std::string render_run_config(const RunConfig& cfg) {
  json j;
  j["output_dir"] = cfg.output_dir;
  j["seeds"] = cfg.seeds;
  j["method"] = to_string(cfg.method);
  {
    json methods = json::array();
    for (Method m : cfg.methods) methods.push_back(to_string(m));
    j["methods"] = methods;
  }
  j["env"] = {
      {"vocab_size", cfg.env.vocab_size},
      {"max_len", cfg.env.max_len},
      {"eos_token", cfg.env.eos_token},
      {"good_tokens", cfg.env.good_tokens},
      {"clean_tokens", cfg.env.clean_tokens},
      {"quality_weights", cfg.env.quality_weights},
      {"repetition_penalty", cfg.env.repetition_penalty},
      {"holistic_noise_sigma", cfg.env.holistic_noise_sigma},
      {"superior_quantile", cfg.env.superior_quantile},
      {"reference_sample_size", cfg.env.reference_sample_size},
      {"segment_len", cfg.env.segment_len},
      {"seed", cfg.env.seed},
  };
  {
    json aspects = json::array();
    for (const auto& a : cfg.aspects)
      aspects.push_back({{"name", a.name},
                         {"density", to_string(a.density)},
                         {"kind", to_string(a.kind)},
                         {"length_reference", a.length_reference}});
    j["aspects"] = aspects;
  }
  {
    json reward;
    if (cfg.reward.threshold.value)
      reward["threshold"] = *cfg.reward.threshold.value;
    else
      reward["threshold"] = {{"top_fraction", cfg.reward.threshold.top_fraction}};
    reward["holistic_weight"] = cfg.reward.holistic_weight;
    reward["shaping"] = to_string(cfg.reward.shaping);
    reward["aspect_weights"] = cfg.reward.aspect_weights;
    j["reward"] = reward;
  }
  j["calibration"] = {{"size", cfg.calibration_size}};
  j["selection"] = {{"pairs", cfg.selection.pairs},
                    {"max_selected", cfg.selection.max_selected},
                    {"candidates", cfg.selection.candidates}};
  j["train"] = {
      {"batch_size", cfg.train.batch_size},
      {"minibatch_size", cfg.train.minibatch_size},
      {"ppo_epochs", cfg.train.ppo_epochs},
      {"clip_epsilon", cfg.train.clip_epsilon},
      {"learning_rate", cfg.train.learning_rate},
      {"value_learning_rate", cfg.train.value_learning_rate},
      {"kl_coeff", cfg.train.kl_coeff},
      {"discount", cfg.train.discount},
      {"total_episodes", cfg.train.total_episodes},
      {"rollouts_per_prompt", cfg.train.rollouts_per_prompt},
      {"eval_every", cfg.train.eval_every},
      {"eval_prompts", cfg.train.eval_prompts},
      {"init_logit_sigma", cfg.train.init_logit_sigma},
      {"init_eos_bias", cfg.train.init_eos_bias},
  };
  j["eval"] = {
      {"metrics", cfg.eval.metrics},
      {"judge",
       {{"mode", to_string(cfg.eval.judge_mode)},
        {"sigma", cfg.eval.judge_sigma},
        {"http",
         {{"endpoint", cfg.eval.judge_http.endpoint},
          {"model", cfg.eval.judge_http.model},
          {"api_key_env", cfg.eval.judge_http.api_key_env},
          {"template_path", cfg.eval.judge_http.template_path},
          {"max_in_flight", cfg.eval.judge_http.max_in_flight},
          {"timeout_seconds", cfg.eval.judge_http.timeout_seconds},
          {"retry_max", cfg.eval.judge_http.retry_max},
          {"backoff_base_ms", cfg.eval.judge_http.backoff_base_ms}}}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace tiered
