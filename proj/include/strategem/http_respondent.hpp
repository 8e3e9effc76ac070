#ifndef STRATEGEM_HTTP_RESPONDENT_HPP
#define STRATEGEM_HTTP_RESPONDENT_HPP

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "strategem/core.hpp"
#include "strategem/respondent.hpp"

namespace strategem {

inline constexpr const char* kApiKeyEnv = "STRATEGEM_API_KEY";

struct RetryPolicy {
  std::uint32_t max_attempts = 3;
  /// Delay before retry n (1-based) is backoff_ms[min(n, size) - 1].
  std::vector<std::uint32_t> backoff_ms{500, 2000, 8000};

  std::uint32_t delay_before(std::uint32_t retry) const {
    if (backoff_ms.empty() || retry == 0) return 0;
    return backoff_ms[std::min<std::size_t>(retry, backoff_ms.size()) - 1];
  }
};

struct HttpRespondentConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-4o-mini";
  double temperature = 0.0;
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
  std::uint32_t timeout_ms = 60000;
  std::string prompt_template_id{kDirectLetterTemplate};

  void validate() const {
    if (base_url.empty()) throw ValidationError("http respondent: empty base_url");
    if (model_name.empty()) throw ValidationError("http respondent: empty model name");
    if (max_in_flight < 1) throw ValidationError("http respondent: max_in_flight must be >= 1");
    if (retry.max_attempts < 1) throw ValidationError("http respondent: max_attempts must be >= 1");
    if (!(temperature >= 0.0)) throw ValidationError("http respondent: negative temperature");
    if (prompt_template_id != kDirectLetterTemplate) {
      throw ValidationError("unknown prompt template '" + prompt_template_id + "'");
    }
  }
};

/// Append-only JSONL of raw replies keyed by trial id.
class ResponseCache {
 public:
  struct Entry {
    std::string trial_id;
    int http_status = 0;
    std::string raw;
  };

  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        break;  // torn trailing line from an interrupted run
      }
      Entry e{j.at("trial_id").get<std::string>(), j.at("http_status").get<int>(), j.at("raw").get<std::string>()};
      entries_.emplace(e.trial_id, e);
    }
  }

  std::optional<Entry> find(const std::string& trial_id) const {
    std::lock_guard lock(mu_);
    if (auto it = entries_.find(trial_id); it != entries_.end()) return it->second;
    return std::nullopt;
  }

  void append(const Entry& e) {
    std::lock_guard lock(mu_);
    if (!entries_.emplace(e.trial_id, e).second) return;
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    nlohmann::json j{{"trial_id", e.trial_id}, {"http_status", e.http_status}, {"raw", e.raw}};
    out << j.dump() << '\n';
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, Entry> entries_;
};

namespace detail {

/// Split "https://host:port/v1" into ("https://host:port", "/v1").
inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("base_url needs a scheme: '" + url + "'");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string path = url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, slash), path};
}

class InFlightLimit {
 public:
  explicit InFlightLimit(std::size_t n) : free_(n) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t free_;
};

}  // namespace detail

/// OpenAI-compatible chat-completions client.
class HttpRespondent final : public Respondent {
 public:
  HttpRespondent(HttpRespondentConfig config, ResponseCache* cache = nullptr, std::optional<std::string> api_key = {})
      : config_(std::move(config)), cache_(cache), limit_(config_.max_in_flight) {
    config_.validate();
    if (api_key) {
      api_key_ = *api_key;
    } else if (const char* env = std::getenv(kApiKeyEnv)) {
      api_key_ = env;
    }
    std::tie(host_, prefix_) = detail::split_base_url(config_.base_url);
  }

  const HttpRespondentConfig& config() const noexcept { return config_; }
  std::size_t max_in_flight() const override { return config_.max_in_flight; }
  /// Highest number of requests observed in flight at once.
  std::size_t peak_in_flight() const {
    std::lock_guard lock(stats_mu_);
    return peak_;
  }
  std::size_t requests_sent() const {
    std::lock_guard lock(stats_mu_);
    return sent_;
  }

  TrialOutcome respond(const TrialSpec& trial, const Question& question) override {
    if (cache_) {
      if (auto hit = cache_->find(trial.trial_id)) return interpret(trial, hit->raw);
    }
    if (api_key_.empty()) {
      throw RespondentError(RespondentError::Kind::Auth, std::string("missing credential: set ") + kApiKeyEnv);
    }
    const std::string prompt = render_prompt(question, trial.arrangement, config_.prompt_template_id);
    nlohmann::json body{{"model", config_.model_name},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                        {"temperature", config_.temperature}};
    const std::string payload = body.dump();

    std::optional<RespondentError> last;
    for (std::uint32_t attempt = 0; attempt < config_.retry.max_attempts; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.retry.delay_before(attempt)));
      }
      const auto start = std::chrono::steady_clock::now();
      auto reply = send(payload);
      const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      if (!reply) {
        last.emplace(RespondentError::Kind::Transport, "no response: " + reply.error);
        continue;
      }
      if (reply.status == 401 || reply.status == 403) {
        throw RespondentError(RespondentError::Kind::Auth, "HTTP " + std::to_string(reply.status));
      }
      if (reply.status == 429) {
        last.emplace(RespondentError::Kind::RateLimited, "HTTP 429");
        continue;
      }
      if (reply.status >= 500) {
        last.emplace(RespondentError::Kind::Transport, "HTTP " + std::to_string(reply.status));
        continue;
      }
      if (reply.status != 200) {
        throw RespondentError(RespondentError::Kind::Transport, "HTTP " + std::to_string(reply.status));
      }
      std::string content;
      try {
        content = nlohmann::json::parse(reply.body).at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        last.emplace(RespondentError::Kind::Transport, std::string("malformed completion body: ") + e.what());
        continue;
      }
      if (cache_) cache_->append({trial.trial_id, reply.status, content});
      auto out = interpret(trial, content);
      out.latency_ms = static_cast<std::uint64_t>(latency.count());
      return out;
    }
    throw RespondentError(last->kind(), last->what() + std::string(" after ") +
                                            std::to_string(config_.retry.max_attempts) + " attempt(s)");
  }

 private:
  struct Reply {
    int status = 0;
    std::string body;
    std::string error;
    explicit operator bool() const { return status != 0; }
  };

  Reply send(const std::string& payload) {
    limit_.acquire();
    {
      std::lock_guard lock(stats_mu_);
      ++in_flight_;
      ++sent_;
      peak_ = std::max(peak_, in_flight_);
    }
    Reply reply;
    {
      httplib::Client client(host_);
      const auto secs = static_cast<time_t>(config_.timeout_ms / 1000);
      const auto usecs = static_cast<time_t>((config_.timeout_ms % 1000) * 1000);
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
      auto res = client.Post(prefix_ + "/chat/completions", headers, payload, "application/json");
      if (res) {
        reply.status = res->status;
        reply.body = res->body;
      } else {
        reply.error = httplib::to_string(res.error());
      }
    }
    {
      std::lock_guard lock(stats_mu_);
      --in_flight_;
    }
    limit_.release();
    return reply;
  }

  TrialOutcome interpret(const TrialSpec& trial, const std::string& raw) const {
    const auto pos = parse_answer_letter(raw, trial.arrangement.option_count());
    if (!pos) throw ParseFailure("no unambiguous option letter in reply", raw);
    return TrialOutcome{trial.trial_id, *pos, role_of(trial.arrangement, *pos), raw, std::nullopt};
  }

  HttpRespondentConfig config_;
  ResponseCache* cache_;
  detail::InFlightLimit limit_;
  std::string api_key_;
  std::string host_;
  std::string prefix_;
  mutable std::mutex stats_mu_;
  std::size_t in_flight_ = 0;
  std::size_t peak_ = 0;
  std::size_t sent_ = 0;
};

}  // namespace strategem

#endif  // STRATEGEM_HTTP_RESPONDENT_HPP
