#include "finemotion/prompt/expand.hpp"

#include <atomic>
#include <ctime>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace finemotion::prompt {
namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string verdict_detail(std::string_view prefix, const std::exception& e) { return std::string(prefix) + e.what(); }

using Checkpoint = std::map<std::string, std::string>;

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Checkpoint c;
  if (!std::filesystem::exists(path)) return c;
  std::ifstream in(path);
  try {
    c = nlohmann::json::parse(in).get<Checkpoint>();
  } catch (const nlohmann::json::exception& e) {
    throw PromptError(PromptErrc::Io, "bad checkpoint " + path.string() + ": " + e.what());
  }
  return c;
}

void write_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << nlohmann::json(c).dump(1) << '\n';
    if (!out) throw PromptError(PromptErrc::Io, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct Outcome {
  std::string status;
  std::optional<ExpansionRecord> record;
  std::vector<LlmExchange> exchanges;
};

std::string status_of(const ExpansionFailure& f) {
  if (f.code() == PromptErrc::TransportError) return "transport";
  return f.last_verdict() == stepmark::Verdict::SorryLike ? "sorry" : "nonconforming";
}

}  // namespace

nlohmann::json LlmExchange::to_json() const {
  return {{"source_id", source_id},
          {"template", template_id},
          {"coarse_in", coarse_in},
          {"prompt", prompt},
          {"raw_response", raw_response},
          {"attempt", attempt},
          {"timestamp", timestamp},
          {"model", model},
          {"temperature", temperature},
          {"verdict", stepmark::to_string(verdict.verdict)},
          {"detail", verdict.detail}};
}

ExpansionFailure::ExpansionFailure(PromptErrc code, stepmark::Verdict last, std::vector<LlmExchange> exchanges)
    : PromptError(code, "expansion failed after " + std::to_string(exchanges.size()) + " attempt(s), last verdict " +
                            stepmark::to_string(last) +
                            (exchanges.empty() ? std::string() : ": " + exchanges.back().verdict.detail)),
      last_(last),
      exchanges_(std::move(exchanges)) {}

ExpansionResult expand_one(std::string_view coarse, const PromptTemplate& t, LlmClient& client,
                           const ExpandOptions& opts, std::string_view source_id) {
  const std::string prompt = render_prompt(t, coarse);
  ExpansionResult result;
  bool transport_failed = false;
  stepmark::Verdict last = stepmark::Verdict::NonConforming;
  for (int attempt = 1; attempt <= 1 + opts.max_retries; ++attempt) {
    if (opts.limiter) opts.limiter->acquire();
    LlmExchange ex{std::string(source_id), t.id, std::string(coarse), prompt, {}, attempt, utc_timestamp(),
                   opts.model, opts.temperature, {}};
    try {
      ex.raw_response = client.complete({prompt, std::string(coarse), attempt, std::string(source_id)});
      transport_failed = false;
    } catch (const PromptError& e) {
      if (e.code() != PromptErrc::TransportError) throw;
      transport_failed = true;
      ex.verdict = {stepmark::Verdict::NonConforming, verdict_detail("transport: ", e)};
      result.exchanges.push_back(std::move(ex));
      continue;
    }
    ex.verdict = stepmark::classify_response(ex.raw_response);
    if (ex.verdict.verdict == stepmark::Verdict::Valid) {
      try {
        const auto split = stepmark::split_response(ex.raw_response);
        auto fine = stepmark::parse_stepmarks(split.description);
        fine.validate();
        if (t.requires_pseudocode) {
          if (!split.pseudocode) throw stepmark::StepmarkError(stepmark::StepmarkErrc::GrammarError, "missing pseudo-code");
          result.pseudocode = stepmark::validate_pseudocode(*split.pseudocode, fine);
        }
        fine.coarse = std::string(coarse);
        fine.source_id = std::string(source_id);
        result.fine = std::move(fine);
        result.exchanges.push_back(std::move(ex));
        return result;
      } catch (const stepmark::StepmarkError& e) {
        ex.verdict = {stepmark::Verdict::NonConforming, verdict_detail("", e)};
      }
    }
    last = ex.verdict.verdict;
    result.exchanges.push_back(std::move(ex));
  }
  throw ExpansionFailure(transport_failed ? PromptErrc::TransportError : PromptErrc::ExhaustedRetries,
                         transport_failed ? stepmark::Verdict::NonConforming : last, std::move(result.exchanges));
}

std::vector<CoarseItem> read_coarse_items(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw PromptError(PromptErrc::Io, "cannot read " + jsonl.string());
  std::vector<CoarseItem> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("source_id").get<std::string>(), j.at("coarse").get<std::string>()});
  }
  return out;
}

JsonlSink::JsonlSink(const std::filesystem::path& path, bool append)
    : path_(path), out_(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc)) {
  if (!out_) throw PromptError(PromptErrc::SinkWriteError, "cannot open " + path.string());
}

void JsonlSink::write(const ExpansionRecord& record) {
  out_ << record.to_json().dump() << '\n';
  out_.flush();
  if (!out_) throw PromptError(PromptErrc::SinkWriteError, "write failed for " + path_.string());
}

nlohmann::json ExpansionReport::to_json() const {
  return {{"valid", valid},
          {"sorry_dropped", sorry_dropped},
          {"nonconforming_dropped", nonconforming_dropped},
          {"transport_failed", transport_failed},
          {"resumed", resumed}};
}

ExpansionReport expand_corpus(std::span<const CoarseItem> items, const PromptTemplate& t, LlmClient& client,
                              ExpansionSink& sink, const CorpusRunOptions& opts) {
  opts.client.validate();
  SteadyClock steady;
  RateLimiter limiter(opts.client.requests_per_minute, opts.clock ? *opts.clock : steady);
  const ExpandOptions expand_opts{opts.client.max_retries, opts.client.model, opts.client.temperature, &limiter};

  ExpansionReport report;
  Checkpoint checkpoint = opts.checkpoint ? read_checkpoint(*opts.checkpoint) : Checkpoint{};
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto it = checkpoint.find(items[i].source_id);
    if (it != checkpoint.end() && it->second != "transport")
      ++report.resumed;
    else
      todo.push_back(i);
  }

  std::optional<std::ofstream> log;
  if (opts.exchange_log) {
    log.emplace(*opts.exchange_log, std::ios::binary | std::ios::app);
    if (!*log) throw PromptError(PromptErrc::Io, "cannot open " + opts.exchange_log->string());
  }

  std::vector<std::optional<Outcome>> outcomes(todo.size());
  std::mutex emit_mu;
  std::size_t emitted = 0;
  int since_flush = 0;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr error;

  auto flush_checkpoint = [&] {
    if (opts.checkpoint) write_checkpoint(checkpoint, *opts.checkpoint);
    since_flush = 0;
  };

  // Called with emit_mu held: writes the finished prefix in input order.
  auto emit_ready = [&] {
    while (emitted < outcomes.size() && outcomes[emitted]) {
      Outcome& o = *outcomes[emitted];
      const CoarseItem& item = items[todo[emitted]];
      if (o.record) {
        try {
          sink.write(*o.record);
        } catch (const PromptError&) {
          throw;
        } catch (const std::exception& e) {
          throw PromptError(PromptErrc::SinkWriteError, e.what());
        }
      }
      if (log) {
        for (const auto& ex : o.exchanges) *log << ex.to_json().dump() << '\n';
        log->flush();
      }
      if (o.status == "valid") ++report.valid;
      else if (o.status == "sorry") ++report.sorry_dropped;
      else if (o.status == "nonconforming") ++report.nonconforming_dropped;
      else ++report.transport_failed;
      checkpoint[item.source_id] = o.status;
      o = {};
      ++emitted;
      if (++since_flush >= opts.checkpoint_every) flush_checkpoint();
      if (opts.on_progress) opts.on_progress(static_cast<int>(emitted), static_cast<int>(outcomes.size()));
    }
  };

  auto worker = [&] {
    while (!abort) {
      const std::size_t k = next++;
      if (k >= todo.size()) return;
      const CoarseItem& item = items[todo[k]];
      Outcome o;
      try {
        auto r = expand_one(item.coarse, t, client, expand_opts, item.source_id);
        o.status = "valid";
        o.record = ExpansionRecord{item.source_id, item.source_id.substr(0, item.source_id.find('#')), item.coarse,
                                   stepmark::serialize(r.fine), t.id};
        o.exchanges = std::move(r.exchanges);
      } catch (const ExpansionFailure& f) {
        o.status = status_of(f);
        o.exchanges = f.exchanges();
      } catch (...) {
        std::lock_guard lock(emit_mu);
        if (!error) error = std::current_exception();
        abort = true;
        return;
      }
      std::lock_guard lock(emit_mu);
      outcomes[k] = std::move(o);
      try {
        emit_ready();
      } catch (...) {
        if (!error) error = std::current_exception();
        abort = true;
        return;
      }
    }
  };

  const int n_threads = static_cast<int>(std::min<std::size_t>(opts.client.concurrency, todo.size()));
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  flush_checkpoint();
  if (error) std::rethrow_exception(error);
  return report;
}

}  // namespace finemotion::prompt
