#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/prompt/client.hpp"
#include "finemotion/prompt/record.hpp"
#include "finemotion/prompt/template.hpp"
#include "finemotion/stepmark/pseudocode.hpp"
#include "finemotion/stepmark/stepmark.hpp"
#include "finemotion/stepmark/verdict.hpp"

namespace finemotion::prompt {

struct LlmExchange {
  std::string source_id;
  std::string template_id;
  std::string coarse_in;
  std::string prompt;
  std::string raw_response;  // empty on a transport failure
  int attempt = 1;
  std::string timestamp;  // UTC, ISO 8601
  std::string model;
  double temperature = 0.0;
  stepmark::ResponseVerdict verdict;

  nlohmann::json to_json() const;
};

struct ExpansionResult {
  stepmark::StepMarkedText fine;  // pseudo-code stripped
  std::optional<stepmark::PseudoCodeBlock> pseudocode;
  std::vector<LlmExchange> exchanges;
};

// Code ExhaustedRetries, or TransportError when the last attempt failed in
// transport. Carries every exchange made for the item.
class ExpansionFailure : public PromptError {
 public:
  ExpansionFailure(PromptErrc code, stepmark::Verdict last, std::vector<LlmExchange> exchanges);
  stepmark::Verdict last_verdict() const noexcept { return last_; }
  const std::vector<LlmExchange>& exchanges() const noexcept { return exchanges_; }

 private:
  stepmark::Verdict last_;
  std::vector<LlmExchange> exchanges_;
};

struct ExpandOptions {
  int max_retries = 2;
  std::string model;
  double temperature = 0.0;
  RateLimiter* limiter = nullptr;
};

// Up to 1 + max_retries attempts. SorryLike, NonConforming and transport
// failures are retried; a response whose pseudo-code fails validation counts
// as NonConforming. Throws ExpansionFailure.
ExpansionResult expand_one(std::string_view coarse, const PromptTemplate& t, LlmClient& client,
                           const ExpandOptions& opts = {}, std::string_view source_id = {});

struct CoarseItem {
  std::string source_id;
  std::string coarse;
};
std::vector<CoarseItem> read_coarse_items(const std::filesystem::path& jsonl);

class ExpansionSink {
 public:
  virtual ~ExpansionSink() = default;
  virtual void write(const ExpansionRecord& record) = 0;
};

class JsonlSink : public ExpansionSink {
 public:
  JsonlSink(const std::filesystem::path& path, bool append);
  void write(const ExpansionRecord& record) override;

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct ExpansionReport {
  int valid = 0;
  int sorry_dropped = 0;
  int nonconforming_dropped = 0;
  int transport_failed = 0;
  int resumed = 0;  // skipped because the checkpoint already had them

  nlohmann::json to_json() const;
  friend bool operator==(const ExpansionReport&, const ExpansionReport&) = default;
};

struct CorpusRunOptions {
  LlmClientConfig client;
  std::optional<std::filesystem::path> checkpoint;  // JSON {source_id: status}
  std::optional<std::filesystem::path> exchange_log;  // JSON Lines, appended
  int checkpoint_every = 32;
  Clock* clock = nullptr;  // SteadyClock when null
  std::function<void(int done, int total)> on_progress;
};

// Bounded worker pool under the concurrency and rate caps. Records reach the
// sink in input order; checkpoint statuses are "valid", "sorry",
// "nonconforming" or "transport", and only transport failures are retried
// on a resumed run. Throws PromptError(SinkWriteError) when the sink fails.
ExpansionReport expand_corpus(std::span<const CoarseItem> items, const PromptTemplate& t, LlmClient& client,
                              ExpansionSink& sink, const CorpusRunOptions& opts);

}  // namespace finemotion::prompt
