#include <doctest.h>

#include <cctype>
#include <string>
#include <vector>

#include <tiered/config.hpp>
#include <tiered/errors.hpp>
#include <tiered/pipeline.hpp>

using namespace tiered;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_run_config_text(text, "inline");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool mentions(const std::string& text, const std::string& needle) {
  return message_of(text).find(needle) != std::string::npos;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("the default configuration is internally consistent") {
    const RunConfig cfg = default_run_config();
    CHECK_NOTHROW(validate_run_config(cfg));
    CHECK(cfg.env.vocab_size == 16);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(cfg.method == Method::Hierarchical);
    CHECK(cfg.methods.size() == 4);
    REQUIRE(cfg.aspects.size() == 4);
    CHECK(cfg.aspects[0].name == "grammar");
    CHECK(cfg.aspects[1].name == "parity");
    CHECK(cfg.aspects[2].name == "contrarian");
    CHECK(cfg.aspects[3].name == "length");
    CHECK(cfg.calibration_size == 2000);
    CHECK_FALSE(cfg.reward.threshold.value.has_value());
    CHECK(cfg.reward.threshold.top_fraction == doctest::Approx(0.3));
    CHECK(cfg.eval.judge_http.template_path == "templates/judge_prompt.txt");
  }

  TEST_CASE("rendered configs load back to the identical rendering") {
    const RunConfig cfg = default_run_config();
    const std::string text = render_run_config(cfg);
    const RunConfig reloaded = parse_run_config_text(text, "render");
    CHECK(render_run_config(reloaded) == text);
  }

  TEST_CASE("round trips preserve non-default settings") {
    RunConfig cfg = default_run_config();
    cfg.output_dir = "elsewhere/run7";
    cfg.seeds = {42, 9};
    cfg.method = Method::WeightedSum;
    cfg.methods = {Method::WeightedSum, Method::HolisticOnly};
    cfg.env.holistic_noise_sigma = 0.7;
    cfg.reward.threshold.value = -0.25;
    cfg.reward.holistic_weight = 2.5;
    cfg.reward.shaping = Shaping::None;
    cfg.reward.aspect_weights = {{"grammar", 2.0}, {"length", 0.5}};
    cfg.calibration_size = 64;
    cfg.selection.pairs = 17;
    cfg.selection.candidates = {"grammar", "parity"};
    cfg.train.total_episodes = 48;
    cfg.train.kl_coeff = 0.0;
    cfg.eval.judge_mode = JudgeMode::Http;
    cfg.eval.judge_sigma = 0.0;
    cfg.eval.judge_http.endpoint = "http://127.0.0.1:9999";
    cfg.eval.judge_http.model = "референс";
    cfg.eval.judge_http.api_key_env = "KEY_VAR";

    const std::string text = render_run_config(cfg);
    const RunConfig back = parse_run_config_text(text, "round");
    CHECK(back.output_dir == cfg.output_dir);
    CHECK(back.seeds == cfg.seeds);
    CHECK(back.method == Method::WeightedSum);
    CHECK(back.methods == cfg.methods);
    CHECK(back.env.holistic_noise_sigma == doctest::Approx(0.7));
    REQUIRE(back.reward.threshold.value.has_value());
    CHECK(*back.reward.threshold.value == doctest::Approx(-0.25));
    CHECK(back.reward.shaping == Shaping::None);
    CHECK(back.reward.aspect_weights == cfg.reward.aspect_weights);
    CHECK(back.selection.candidates == cfg.selection.candidates);
    CHECK(back.train.kl_coeff == 0.0);
    CHECK(back.eval.judge_mode == JudgeMode::Http);
    CHECK(back.eval.judge_http.model == cfg.eval.judge_http.model);
    CHECK(render_run_config(back) == text);
  }

  TEST_CASE("an empty object means all defaults") {
    const RunConfig cfg = parse_run_config_text("{}", "empty");
    CHECK(render_run_config(cfg) == render_run_config(default_run_config()));
  }

  TEST_CASE("partial sections override only what they name") {
    const RunConfig cfg = parse_run_config_text(
        R"({"train": {"total_episodes": 80}, "env": {"holistic_noise_sigma": 0.1}})", "partial");
    CHECK(cfg.train.total_episodes == 80);
    CHECK(cfg.train.batch_size == default_run_config().train.batch_size);
    CHECK(cfg.env.holistic_noise_sigma == doctest::Approx(0.1));
    CHECK(cfg.env.vocab_size == 16);
  }

  TEST_CASE("omitted quality weights derive from the good-token set") {
    const RunConfig cfg = parse_run_config_text(
        R"({"env": {"vocab_size": 8, "good_tokens": [1, 2], "clean_tokens": [1, 2, 3]}})",
        "derive");
    REQUIRE(cfg.env.quality_weights.size() == 8);
    for (int tok = 0; tok < 8; ++tok) {
      const double expect = (tok == 1 || tok == 2) ? 1.5 : 0.0;
      CHECK(cfg.env.quality_weights[static_cast<std::size_t>(tok)] == expect);
    }
    CHECK(cfg.env.quality_weights == derive_quality_weights(8, std::vector<int>{1, 2}));
  }

  TEST_CASE("explicit quality weights are taken verbatim") {
    const RunConfig cfg = parse_run_config_text(
        R"({"env": {"vocab_size": 4, "good_tokens": [1], "clean_tokens": [1],
                    "quality_weights": [0.0, 2.0, 0.25, 0.5], "max_len": 6, "segment_len": 3}})",
        "verbatim");
    CHECK(cfg.env.quality_weights == std::vector<double>{0.0, 2.0, 0.25, 0.5});
  }

  TEST_CASE("unknown keys are rejected with their full path") {
    CHECK(mentions(R"({"bogus": 1})", "unknown key inline.bogus"));
    CHECK(mentions(R"({"env": {"bogus": 1}})", "unknown key inline.env.bogus"));
    CHECK(mentions(R"({"train": {"lr": 0.1}})", "unknown key inline.train.lr"));
    CHECK(mentions(R"({"eval": {"judge": {"noise": 0.1}}})",
                   "unknown key inline.eval.judge.noise"));
    CHECK(mentions(R"({"eval": {"judge": {"http": {"url": "x"}}}})",
                   "unknown key inline.eval.judge.http.url"));
    CHECK(mentions(R"({"aspects": [{"name": "a", "weird": 1}]})",
                   "unknown key inline.aspects[0].weird"));
    CHECK(mentions(R"({"reward": {"threshold": {"value": 1.0}}})",
                   "unknown key inline.reward.threshold.value"));
    CHECK(mentions(R"({"calibration": {"count": 10}})",
                   "unknown key inline.calibration.count"));
    CHECK(mentions(R"({"selection": {"n_pairs": 10}})",
                   "unknown key inline.selection.n_pairs"));
  }

  TEST_CASE("malformed JSON reports the origin") {
    const std::string msg = message_of("{not json");
    CHECK(msg.find("inline") != std::string::npos);
    CHECK(msg.find("malformed JSON") != std::string::npos);
  }

  TEST_CASE("type mismatches name the offending path") {
    CHECK(mentions(R"({"output_dir": 7})", "inline.output_dir must be a string"));
    CHECK(mentions(R"({"env": {"vocab_size": "big"}})",
                   "inline.env.vocab_size must be an integer"));
    CHECK(mentions(R"({"env": {"vocab_size": 2.5}})",
                   "inline.env.vocab_size must be an integer"));
    CHECK(mentions(R"({"env": {"repetition_penalty": "none"}})",
                   "inline.env.repetition_penalty must be a number"));
    CHECK(mentions(R"({"env": {"good_tokens": [1, "two"]}})", "only integers"));
    CHECK(mentions(R"({"env": {"quality_weights": [1, false]}})", "only numbers"));
    CHECK(mentions(R"({"env": 3})", "inline.env must be an object"));
    CHECK(mentions(R"({"seeds": "nope"})", "inline.seeds must be an array"));
    CHECK(mentions(R"({"seeds": [-1]})", "non-negative integers"));
    CHECK(mentions(R"({"env": {"seed": -4}})", "non-negative integer"));
    CHECK(mentions(R"({"methods": [1]})", "only strings"));
    CHECK(mentions(R"({"reward": {"aspect_weights": 3}})",
                   "inline.reward.aspect_weights must be an object"));
    CHECK(mentions(R"({"reward": {"aspect_weights": {"grammar": "big"}}})",
                   "inline.reward.aspect_weights.grammar must be a number"));
    CHECK(mentions(R"({"aspects": {"name": "a"}})", "must be an array"));
  }

  TEST_CASE("semantic validation rejects inconsistent configs") {
    CHECK(mentions(R"({"output_dir": ""})", "output_dir must not be empty"));
    CHECK(mentions(R"({"seeds": []})", "seeds must not be empty"));
    CHECK(mentions(R"({"seeds": [4, 4]})", "seeds must be distinct"));
    CHECK(mentions(R"({"methods": []})", "methods must not be empty"));
    CHECK(mentions(R"({"methods": ["hierarchical", "hierarchical"]})",
                   "methods must be distinct"));
    CHECK(mentions(R"({"method": "pairwise"})", "unknown training method"));
    CHECK(mentions(R"({"aspects": []})", "at least one aspect"));
    CHECK(mentions(R"({"aspects": [{"name": ""}]})", "name must be a nonempty string"));
    CHECK(mentions(
        R"({"aspects": [{"name": "a", "kind": "consistent"}, {"name": "a", "kind": "length", "density": "sequence"}]})",
        "duplicate aspect name 'a'"));
    CHECK(mentions(R"({"aspects": [{"name": "len", "kind": "length", "density": "token"}]})",
                   "must use sequence density"));
    CHECK(mentions(
        R"({"aspects": [{"name": "len", "kind": "length", "density": "sequence", "length_reference": 0}]})",
        "length_reference must be > 0"));
    CHECK(mentions(R"({"reward": {"threshold": {"top_fraction": 1.5}}})",
                   "top_fraction must be in (0, 1)"));
    CHECK(mentions(R"({"reward": {"holistic_weight": 0}})", "holistic_weight must be > 0"));
    CHECK(mentions(R"({"reward": {"aspect_weights": {"ghost": 1.0}}})",
                   "names unknown aspect 'ghost'"));
    CHECK(mentions(R"({"reward": {"aspect_weights": {"grammar": 0.0}}})", "must be > 0"));
    CHECK(mentions(R"({"calibration": {"size": 1}})", "calibration.size must be >= 2"));
    CHECK(mentions(R"({"selection": {"pairs": 0}})", "selection.pairs must be >= 1"));
    CHECK(mentions(R"({"selection": {"max_selected": 0}})",
                   "selection.max_selected must be >= 1"));
    CHECK(mentions(R"({"selection": {"candidates": ["ghost"]}})",
                   "names unknown aspect 'ghost'"));
    CHECK(mentions(R"({"eval": {"metrics": []}})", "eval.metrics must not be empty"));
    CHECK(mentions(R"({"eval": {"metrics": ["bleu"]}})", "unknown eval metric 'bleu'"));
    CHECK(mentions(R"({"eval": {"judge": {"sigma": -0.1}}})", "sigma must be >= 0"));
    CHECK(mentions(R"({"env": {"vocab_size": 1}})", "vocab_size must be >= 2"));
    CHECK(mentions(R"({"train": {"batch_size": 0}})", "batch_size"));
  }

  TEST_CASE("a numeric threshold bypasses calibration-derived gating") {
    const RunConfig fixed = parse_run_config_text(R"({"reward": {"threshold": -2.0}})", "num");
    REQUIRE(fixed.reward.threshold.value.has_value());
    CHECK(*fixed.reward.threshold.value == doctest::Approx(-2.0));

    const RunConfig derived =
        parse_run_config_text(R"({"reward": {"threshold": {"top_fraction": 0.25}}})", "frac");
    CHECK_FALSE(derived.reward.threshold.value.has_value());
    CHECK(derived.reward.threshold.top_fraction == doctest::Approx(0.25));
  }

  TEST_CASE("judge http sections parse into client configuration") {
    const RunConfig cfg = parse_run_config_text(
        R"({"eval": {"judge": {"mode": "http", "http": {
              "endpoint": "http://127.0.0.1:8080", "model": "ref-judge",
              "api_key_env": "JUDGE_KEY", "template_path": "templates/judge_prompt.txt",
              "max_in_flight": 2, "timeout_seconds": 3.5, "retry_max": 7,
              "backoff_base_ms": 10}}}})",
        "judge");
    CHECK(cfg.eval.judge_mode == JudgeMode::Http);
    CHECK(cfg.eval.judge_http.endpoint == "http://127.0.0.1:8080");
    CHECK(cfg.eval.judge_http.model == "ref-judge");
    CHECK(cfg.eval.judge_http.api_key_env == "JUDGE_KEY");
    CHECK(cfg.eval.judge_http.max_in_flight == 2);
    CHECK(cfg.eval.judge_http.timeout_seconds == doctest::Approx(3.5));
    CHECK(cfg.eval.judge_http.retry_max == 7);
    CHECK(cfg.eval.judge_http.backoff_base_ms == 10);
  }

  TEST_CASE("enum names parse back to their values") {
    for (const Density d : {Density::Token, Density::Segment, Density::Sequence})
      CHECK(density_from_string(to_string(d)) == d);
    for (const AspectKind k : {AspectKind::Consistent, AspectKind::Orthogonal,
                               AspectKind::Conflicting, AspectKind::Length})
      CHECK(aspect_kind_from_string(to_string(k)) == k);
    for (const Shaping s : {Shaping::Sigmoid, Shaping::None})
      CHECK(shaping_from_string(to_string(s)) == s);
    for (const JudgeMode m : {JudgeMode::Simulated, JudgeMode::Http, JudgeMode::None})
      CHECK(judge_mode_from_string(to_string(m)) == m);
  }

  TEST_CASE("unknown enum names list the accepted values") {
    CHECK_THROWS_WITH_AS(density_from_string("word"),
                         "unknown density 'word' (expected token, segment or sequence)",
                         ConfigError);
    CHECK_THROWS_WITH_AS(
        aspect_kind_from_string("helpful"),
        "unknown aspect kind 'helpful' (expected consistent, orthogonal, conflicting or length)",
        ConfigError);
    CHECK_THROWS_WITH_AS(shaping_from_string("tanh"),
                         "unknown shaping 'tanh' (expected sigmoid or none)", ConfigError);
    CHECK_THROWS_WITH_AS(judge_mode_from_string("oracle"),
                         "unknown judge mode 'oracle' (expected simulated, http or none)",
                         ConfigError);
  }

  TEST_CASE("loading a missing file fails with its path") {
    try {
      load_run_config("/nonexistent/config.json");
      CHECK(false);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("/nonexistent/config.json") != std::string::npos);
    }
  }

  TEST_CASE("config hashes fingerprint the raw bytes") {
    const LoadedConfig a = config_from_text("{}", "a");
    const LoadedConfig b = config_from_text("{}", "b");
    const LoadedConfig c = config_from_text("{ }", "c");  // same meaning, different bytes
    const std::string ha = config_hash(a);
    REQUIRE(ha.size() == 16);
    for (const char ch : ha) CHECK(std::isxdigit(static_cast<unsigned char>(ch)));
    CHECK(ha == config_hash(b));
    CHECK(ha != config_hash(c));
  }
}
