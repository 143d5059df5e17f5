#include "tiered/judge.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tiered/errors.hpp"

namespace tiered {

const char* to_string(PassPreference p) {
  switch (p) {
    case PassPreference::PrefA: return "pref_a";
    case PassPreference::PrefB: return "pref_b";
    case PassPreference::Invalid: return "invalid";
  }
  return "?";
}

const char* to_string(JudgeResolution r) {
  switch (r) {
    case JudgeResolution::WinA: return "win_a";
    case JudgeResolution::WinB: return "win_b";
    case JudgeResolution::Discarded: return "discarded";
  }
  return "?";
}

JudgeResolution resolve_passes(PassPreference first_pass, PassPreference second_pass) {
  if (first_pass == PassPreference::PrefA && second_pass == PassPreference::PrefA)
    return JudgeResolution::WinA;
  if (first_pass == PassPreference::PrefB && second_pass == PassPreference::PrefB)
    return JudgeResolution::WinB;
  return JudgeResolution::Discarded;
}

std::string render_judge_prompt(const std::string& tmpl, const std::string& instruction,
                                const std::string& output_1, const std::string& output_2) {
  std::string out = tmpl;
  const std::pair<std::string, const std::string*> slots[] = {
      {"{instruction}", &instruction}, {"{output_1}", &output_1}, {"{output_2}", &output_2}};
  for (const auto& [placeholder, value] : slots) {
    std::size_t pos = 0;
    while ((pos = out.find(placeholder, pos)) != std::string::npos) {
      out.replace(pos, placeholder.size(), *value);
      pos += value->size();
    }
  }
  return out;
}

PositionChoice parse_choice(const std::string& content) {
  const auto begin = content.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return PositionChoice::Invalid;
  const auto end = content.find_last_not_of(" \t\r\n");
  const std::string token = content.substr(begin, end - begin + 1);
  if (token == "1") return PositionChoice::First;
  if (token == "2") return PositionChoice::Second;
  return PositionChoice::Invalid;
}

std::string trajectory_text(const Trajectory& traj) {
  std::ostringstream out;
  for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
    if (i) out << ' ';
    out << 't' << traj.tokens[i];
  }
  return out.str();
}

struct JudgeClient::Impl {
  JudgeClientConfig cfg;
  std::string tmpl;

  struct PassOutcome {
    PositionChoice choice = PositionChoice::Invalid;
    std::string note;
  };

  // One chat-completions request with retries on transport-level failures
  // (no response, 429, 5xx). Anything the server answers decisively is
  // final: a bad status or an unparseable body is a protocol failure, not a
  // reason to retry.
  PassOutcome request_pass(const std::string& instruction, const std::string& first,
                           const std::string& second) const {
    nlohmann::json body = {
        {"model", cfg.model},
        {"messages",
         nlohmann::json::array(
             {{{"role", "user"},
               {"content", render_judge_prompt(tmpl, instruction, first, second)}}})},
        {"temperature", 0},
        {"max_tokens", 4},
    };
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!cfg.api_key_env.empty()) {
      if (const char* key = std::getenv(cfg.api_key_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    PassOutcome out;
    for (int attempt = 0; attempt < cfg.retry_max; ++attempt) {
      if (attempt > 0) {
        const int factor = 1 << std::min(attempt - 1, 3);
        std::this_thread::sleep_for(std::chrono::milliseconds(cfg.backoff_base_ms * factor));
      }
      httplib::Client client(cfg.endpoint);
      client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
      client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
      httplib::Result res =
          client.Post("/v1/chat/completions", headers, payload, "application/json");
      if (!res) {
        out.note = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        out.note = "retryable status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        out.note = "unexpected status " + std::to_string(res->status);
        return out;
      }
      try {
        const nlohmann::json reply = nlohmann::json::parse(res->body);
        const std::string content =
            reply.at("choices").at(0).at("message").at("content").get<std::string>();
        out.choice = parse_choice(content);
        if (out.choice == PositionChoice::Invalid)
          out.note = "unparseable choice: '" + content + "'";
        else
          out.note.clear();
        return out;
      } catch (const nlohmann::json::exception& e) {
        out.note = std::string("malformed response body: ") + e.what();
        return out;
      }
    }
    out.note = "retries exhausted: " + out.note;
    return out;
  }
};

JudgeClient::JudgeClient(JudgeClientConfig config) : impl_(std::make_unique<Impl>()) {
  if (config.endpoint.empty()) throw ConfigError("judge endpoint must not be empty");
  if (config.max_in_flight < 1) throw ConfigError("judge max_in_flight must be >= 1");
  if (config.retry_max < 1) throw ConfigError("judge retry_max must be >= 1");
  std::ifstream in(config.template_path);
  if (!in) throw ConfigError("cannot read judge template '" + config.template_path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  impl_->tmpl = buf.str();
  impl_->cfg = std::move(config);
}

JudgeClient::~JudgeClient() = default;

const JudgeClientConfig& JudgeClient::config() const { return impl_->cfg; }

JudgeVerdict JudgeClient::judge_pair(const JudgePair& pair) const {
  JudgeVerdict verdict;
  verdict.pair_id = pair.pair_id;

  // First pass sees (a, b); a "1" there means generation A. The second pass
  // sees the swapped order, so its positions translate in reverse.
  const Impl::PassOutcome p1 =
      impl_->request_pass(pair.instruction, pair.generation_a, pair.generation_b);
  verdict.first_pass = p1.choice == PositionChoice::First    ? PassPreference::PrefA
                       : p1.choice == PositionChoice::Second ? PassPreference::PrefB
                                                             : PassPreference::Invalid;
  const Impl::PassOutcome p2 =
      impl_->request_pass(pair.instruction, pair.generation_b, pair.generation_a);
  verdict.second_pass = p2.choice == PositionChoice::First    ? PassPreference::PrefB
                        : p2.choice == PositionChoice::Second ? PassPreference::PrefA
                                                              : PassPreference::Invalid;

  if (!p1.note.empty()) verdict.note = "pass 1: " + p1.note;
  if (!p2.note.empty()) {
    if (!verdict.note.empty()) verdict.note += "; ";
    verdict.note += "pass 2: " + p2.note;
  }
  verdict.resolved = resolve_passes(verdict.first_pass, verdict.second_pass);
  return verdict;
}

std::vector<JudgeVerdict> JudgeClient::judge_pairs(std::span<const JudgePair> pairs) const {
  std::vector<JudgeVerdict> verdicts(pairs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pairs.size()) return;
      verdicts[i] = judge_pair(pairs[i]);
    }
  };
  const std::size_t thread_count =
      std::min<std::size_t>(static_cast<std::size_t>(impl_->cfg.max_in_flight), pairs.size());
  if (thread_count <= 1) {
    worker();
    return verdicts;
  }
  std::vector<std::thread> threads;
  threads.reserve(thread_count);
  for (std::size_t i = 0; i < thread_count; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return verdicts;
}

JudgeVerdict simulated_judge(std::uint64_t pair_id, const Trajectory& a, const Trajectory& b,
                             const EnvSpec& spec, double sigma_j, Rng& rng) {
  if (sigma_j < 0.0) throw ConfigError("judge noise sigma must be >= 0");
  const double qa = quality(a, spec);
  const double qb = quality(b, spec);
  // Draw order is part of the determinism contract: pass 1 draws noise for
  // (a, b), then pass 2 draws fresh noise for (a, b).
  auto pass = [&]() {
    const double score_a = qa + gaussian(rng, sigma_j);
    const double score_b = qb + gaussian(rng, sigma_j);
    if (score_a > score_b) return PassPreference::PrefA;
    if (score_a < score_b) return PassPreference::PrefB;
    return PassPreference::Invalid;
  };
  JudgeVerdict verdict;
  verdict.pair_id = pair_id;
  verdict.first_pass = pass();
  verdict.second_pass = pass();
  verdict.resolved = resolve_passes(verdict.first_pass, verdict.second_pass);
  return verdict;
}

}  // namespace tiered
