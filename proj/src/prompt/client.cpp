#include "finemotion/prompt/client.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <httplib.h>

namespace finemotion::prompt {

void LlmClientConfig::validate() const {
  if (max_retries < 0) throw PromptError(PromptErrc::BadTemplate, "max_retries must be >= 0");
  if (concurrency < 1) throw PromptError(PromptErrc::BadTemplate, "concurrency must be >= 1");
  if (requests_per_minute < 1) throw PromptError(PromptErrc::BadTemplate, "requests_per_minute must be >= 1");
  if (timeout.count() <= 0) throw PromptError(PromptErrc::BadTemplate, "timeout must be positive");
}

nlohmann::json LlmClientConfig::to_json() const {
  nlohmann::json j = {{"endpoint", endpoint},
                      {"model", model},
                      {"api_key_env", api_key_env},
                      {"temperature", temperature},
                      {"timeout_ms", timeout.count()},
                      {"max_retries", max_retries},
                      {"concurrency", concurrency},
                      {"requests_per_minute", requests_per_minute}};
  if (offline_fixtures) j["offline_fixtures"] = offline_fixtures->string();
  return j;
}

LlmClientConfig LlmClientConfig::from_json(const nlohmann::json& j) {
  LlmClientConfig c;
  c.endpoint = j.value("endpoint", c.endpoint);
  c.model = j.value("model", c.model);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.temperature = j.value("temperature", c.temperature);
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
  c.max_retries = j.value("max_retries", c.max_retries);
  c.concurrency = j.value("concurrency", c.concurrency);
  c.requests_per_minute = j.value("requests_per_minute", c.requests_per_minute);
  if (j.contains("offline_fixtures")) c.offline_fixtures = j.at("offline_fixtures").get<std::string>();
  c.validate();
  return c;
}

FixtureClient::FixtureClient(FixtureMap by_coarse, FixtureMap by_source_id)
    : by_coarse_(std::move(by_coarse)), by_source_id_(std::move(by_source_id)) {}

FixtureClient::FixtureClient(const std::filesystem::path& dir) {
  const auto file = dir / "responses.jsonl";
  std::ifstream in(file);
  if (!in) throw PromptError(PromptErrc::Io, "cannot read " + file.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    auto responses = j.at("responses").get<std::vector<std::string>>();
    if (j.contains("source_id"))
      by_source_id_[j.at("source_id").get<std::string>()] = std::move(responses);
    else
      by_coarse_[j.at("coarse").get<std::string>()] = std::move(responses);
  }
}

std::string FixtureClient::complete(const LlmRequest& request) {
  const std::vector<std::string>* found = nullptr;
  if (auto it = by_source_id_.find(request.source_id); it != by_source_id_.end())
    found = &it->second;
  else if (auto jt = by_coarse_.find(request.coarse); jt != by_coarse_.end())
    found = &jt->second;
  if (!found || found->empty())
    throw PromptError(PromptErrc::TransportError, "no fixture for '" + request.coarse + "'");
  const auto& list = *found;
  return list[std::min<std::size_t>(static_cast<std::size_t>(std::max(request.attempt, 1) - 1), list.size() - 1)];
}

void FixtureClient::write(const FixtureMap& by_coarse, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "responses.jsonl", std::ios::binary);
  if (!out) throw PromptError(PromptErrc::Io, "cannot write " + (dir / "responses.jsonl").string());
  for (const auto& [coarse, list] : by_coarse) out << nlohmann::json{{"coarse", coarse}, {"responses", list}}.dump() << '\n';
}

HttpLlmClient::HttpLlmClient(LlmClientConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
}

std::string HttpLlmClient::complete(const LlmRequest& request) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(cfg_.endpoint, m, url))
    throw PromptError(PromptErrc::TransportError, "bad endpoint '" + cfg_.endpoint + "'");
  const std::string path = m[2].matched ? m[2].str() : "/";
  httplib::Client http(m[1].str());
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  http.set_read_timeout(secs.count(), 0);
  http.set_connection_timeout(secs.count(), 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const nlohmann::json body = {{"model", cfg_.model},
                               {"temperature", cfg_.temperature},
                               {"messages", {{{"role", "user"}, {"content", request.prompt}}}}};
  auto res = http.Post(path, headers, body.dump(), "application/json");
  if (!res) throw PromptError(PromptErrc::TransportError, "request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw PromptError(PromptErrc::TransportError, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  try {
    return nlohmann::json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw PromptError(PromptErrc::TransportError, std::string("malformed completion: ") + e.what());
  }
}

std::unique_ptr<LlmClient> make_client(const LlmClientConfig& cfg) {
  if (cfg.offline_fixtures) return std::make_unique<FixtureClient>(*cfg.offline_fixtures);
  return std::make_unique<HttpLlmClient>(cfg);
}

Clock::time_point SteadyClock::now() { return std::chrono::steady_clock::now(); }
void SteadyClock::sleep_until(time_point t) { std::this_thread::sleep_until(t); }

RateLimiter::RateLimiter(int per_minute, Clock& clock) : per_minute_(per_minute), clock_(clock) {
  if (per_minute < 1) throw PromptError(PromptErrc::BadTemplate, "requests_per_minute must be >= 1");
}

void RateLimiter::acquire() {
  // Holding the lock while sleeping keeps issue times in FIFO order.
  std::lock_guard lock(mu_);
  const auto window = std::chrono::minutes(1);
  auto now = clock_.now();
  while (!issued_.empty() && now - issued_.front() >= window) issued_.pop_front();
  if (static_cast<int>(issued_.size()) >= per_minute_) {
    clock_.sleep_until(issued_.front() + window);
    now = clock_.now();
    while (!issued_.empty() && now - issued_.front() >= window) issued_.pop_front();
  }
  issued_.push_back(now);
}

}  // namespace finemotion::prompt
