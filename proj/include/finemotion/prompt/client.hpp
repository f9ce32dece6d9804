#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/prompt/template.hpp"

namespace finemotion::prompt {

struct LlmRequest {
  std::string prompt;
  std::string coarse;
  int attempt = 1;
  std::string source_id;
};

// Implementations are called from several worker threads at once and throw
// PromptError(TransportError) when no response could be obtained.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const LlmRequest& request) = 0;
};

struct LlmClientConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-3.5-turbo-0301";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 2;
  int concurrency = 4;
  int requests_per_minute = 60;
  std::optional<std::filesystem::path> offline_fixtures;

  void validate() const;
  nlohmann::json to_json() const;
  static LlmClientConfig from_json(const nlohmann::json& j);
};

// Replays canned responses from `<dir>/responses.jsonl`, one line
// {"coarse": ..., "responses": [...]} per description; a line may carry
// "source_id" instead, which takes precedence over the coarse text. Attempt
// k gets the k-th response (the last one repeats). Unknown descriptions are
// a transport failure.
using FixtureMap = std::map<std::string, std::vector<std::string>>;

class FixtureClient : public LlmClient {
 public:
  explicit FixtureClient(const std::filesystem::path& dir);
  explicit FixtureClient(FixtureMap by_coarse, FixtureMap by_source_id = {});
  std::string complete(const LlmRequest& request) override;

  static void write(const FixtureMap& by_coarse, const std::filesystem::path& dir);

 private:
  FixtureMap by_coarse_;
  FixtureMap by_source_id_;
};

// Chat-completions client over HTTP(S). The key is read from the
// environment variable named in the config.
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(LlmClientConfig cfg);
  std::string complete(const LlmRequest& request) override;

 private:
  LlmClientConfig cfg_;
  std::string api_key_;
};

// Fixture client when offline_fixtures is set, otherwise HTTP.
std::unique_ptr<LlmClient> make_client(const LlmClientConfig& cfg);

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_until(time_point t) = 0;
};

class SteadyClock : public Clock {
 public:
  time_point now() override;
  void sleep_until(time_point t) override;
};

// Sliding one-minute window: acquire() blocks until fewer than `per_minute`
// requests were issued in the last 60 s, then records the issue time.
class RateLimiter {
 public:
  RateLimiter(int per_minute, Clock& clock);
  void acquire();

 private:
  int per_minute_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> issued_;
};

}  // namespace finemotion::prompt
