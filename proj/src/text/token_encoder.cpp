#include "finemotion/text/token_encoder.hpp"

#include <cctype>
#include <cmath>

#include "finemotion/nn/checkpoint.hpp"
#include "finemotion/text/positional.hpp"

namespace finemotion::text {
namespace {

constexpr std::string_view kStartToken = "<|startoftext|>";
constexpr std::string_view kEndToken = "<|endoftext|>";

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 1469598103934665603ULL) {
  std::uint64_t h = seed;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Word tokens clipped so that [S] + words + [E] fits in max_tokens.
std::vector<std::string> clipped_tokens(std::string_view text, int max_tokens, int& dropped) {
  std::vector<std::string> toks = tokenize(text);
  const int room = std::max(0, max_tokens - 2);
  dropped = std::max(0, static_cast<int>(toks.size()) - room);
  if (dropped > 0) toks.resize(static_cast<std::size_t>(room));
  return toks;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || ch == '\'' || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      flush();
    } else {
      flush();
      out.emplace_back(1, ch);
    }
  }
  flush();
  return out;
}

HashStubEncoder::HashStubEncoder(int width, int max_tokens) : width_(width), max_tokens_(max_tokens) {
  if (width < 1 || max_tokens < 3) throw TextError(TextErrc::ShapeMismatch, "bad stub encoder dimensions");
}

nlohmann::json HashStubEncoder::describe() const {
  return {{"profile", profile()}, {"width", width_}, {"max_tokens", max_tokens_}};
}

nn::RowVector HashStubEncoder::token_vector(std::string_view token) const {
  std::uint64_t state = fnv1a(token);
  nn::RowVector v(width_);
  for (int i = 0; i < width_; ++i) {
    // Uniform in [-1, 1) from the top 53 bits.
    v(i) = static_cast<double>(splitmix(state) >> 11) * 0x1.0p-52 - 1.0;
  }
  return v;
}

EncodedText HashStubEncoder::encode(nn::Graph& g, std::string_view text, bool pad_to_context) const {
  EncodedText out;
  const auto toks = clipped_tokens(text, max_tokens_, out.dropped_tokens);
  out.truncated = out.dropped_tokens > 0;
  out.count = static_cast<int>(toks.size()) + 2;
  out.s_index = 0;
  out.e_index = out.count - 1;
  nn::Matrix rows = nn::Matrix::Zero(pad_to_context ? max_tokens_ : out.count, width_);
  rows.row(0) = token_vector(kStartToken);
  for (std::size_t i = 0; i < toks.size(); ++i) rows.row(static_cast<Eigen::Index>(i) + 1) = token_vector(toks[i]);
  rows.row(out.e_index) = token_vector(kEndToken);
  out.rows = g.constant(std::move(rows));
  return out;
}

nlohmann::json ToyEncoderConfig::to_json() const {
  return {{"width", width},   {"max_tokens", max_tokens}, {"vocab_buckets", vocab_buckets},
          {"layers", layers}, {"heads", heads},           {"seed", seed},
          {"frozen", frozen}};
}

ToyEncoderConfig ToyEncoderConfig::from_json(const nlohmann::json& j) {
  ToyEncoderConfig c;
  c.width = j.value("width", c.width);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.vocab_buckets = j.value("vocab_buckets", c.vocab_buckets);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.seed = j.value("seed", c.seed);
  c.frozen = j.value("frozen", c.frozen);
  return c;
}

ToyClipEncoder::ToyClipEncoder(nn::ParameterStore& store, std::string prefix, ToyEncoderConfig cfg)
    : store_(&store), prefix_(std::move(prefix)), cfg_(cfg) {
  if (cfg_.max_tokens < 3 || cfg_.vocab_buckets < 4)
    throw TextError(TextErrc::ShapeMismatch, "bad toy encoder dimensions");
  nn::Rng rng(cfg_.seed);
  std::normal_distribution<double> d(0.0, 1.0);
  nn::Matrix emb(cfg_.vocab_buckets, cfg_.width);
  for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = d(rng);
  token_embedding_ = &store.add(prefix_ + ".token_embedding", std::move(emb));
  position_embedding_ = &store.add(prefix_ + ".position_embedding",
                                   positional_encoding(cfg_.max_tokens, cfg_.width) * 0.5);
  for (int l = 0; l < cfg_.layers; ++l)
    layers_.emplace_back(store, prefix_ + ".layer" + std::to_string(l), cfg_.width, cfg_.heads, 2 * cfg_.width, rng);
  final_ln_ = nn::LayerNorm(store, prefix_ + ".final_ln", cfg_.width);
  store.set_trainable(prefix_ + ".", !cfg_.frozen);
}

nlohmann::json ToyClipEncoder::describe() const {
  nlohmann::json j = cfg_.to_json();
  j["profile"] = profile();
  return j;
}

int ToyClipEncoder::token_id(const std::string& token) const {
  return 3 + static_cast<int>(fnv1a(token) % static_cast<std::uint64_t>(cfg_.vocab_buckets - 3));
}

EncodedText ToyClipEncoder::encode(nn::Graph& g, std::string_view text, bool pad_to_context) const {
  EncodedText out;
  const auto toks = clipped_tokens(text, cfg_.max_tokens, out.dropped_tokens);
  out.truncated = out.dropped_tokens > 0;
  out.count = static_cast<int>(toks.size()) + 2;
  out.s_index = 0;
  out.e_index = out.count - 1;
  const int len = pad_to_context ? cfg_.max_tokens : out.count;
  std::vector<int> ids(static_cast<std::size_t>(len), 0);
  ids[0] = 1;
  for (std::size_t i = 0; i < toks.size(); ++i) ids[i + 1] = token_id(toks[i]);
  ids[static_cast<std::size_t>(out.e_index)] = 2;
  std::vector<int> positions(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) positions[static_cast<std::size_t>(i)] = i;

  nn::NodeId x = nn::gather_rows(g, g.param(*token_embedding_), ids);
  x = nn::add(g, x, nn::gather_rows(g, g.param(*position_embedding_), positions));
  const nn::Segments segs = nn::Segments::from_sizes({len});
  for (const auto& layer : layers_) x = layer.forward(g, x, segs, /*causal=*/true);
  out.rows = final_ln_.forward(g, x);
  return out;
}

void ToyClipEncoder::load_pretrained(const std::filesystem::path& checkpoint) {
  const nn::Checkpoint ck = nn::load_checkpoint(checkpoint);
  store_->for_each([&](const std::string& name, nn::Parameter& p) {
    if (name.rfind(prefix_ + ".", 0) != 0) return;
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end())
      throw nn::CheckpointError(nn::CheckpointErrc::MissingTensor, "pretrained encoder lacks " + name);
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols())
      throw nn::CheckpointError(nn::CheckpointErrc::ShapeMismatch, "shape mismatch for " + name);
    p.value = it->second;
  });
}

EncodedText InstrumentedEncoder::encode(nn::Graph& g, std::string_view text, bool pad_to_context) const {
  {
    std::lock_guard lock(mu_);
    seen_.emplace_back(text);
  }
  return inner_.encode(g, text, pad_to_context);
}

std::vector<std::string> InstrumentedEncoder::seen() const {
  std::lock_guard lock(mu_);
  return seen_;
}

void InstrumentedEncoder::clear() {
  std::lock_guard lock(mu_);
  seen_.clear();
}

EncodedText EncodingCache::encode(nn::Graph& g, const TokenEncoder& enc, std::string_view text,
                                  bool pad_to_context) {
  if (!enc.frozen()) return enc.encode(g, text, pad_to_context);
  const auto key = std::make_pair(std::string(text), pad_to_context);
  {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      EncodedText e = it->second.meta;
      e.rows = g.constant(it->second.rows);
      return e;
    }
  }
  nn::Graph scratch(false);
  EncodedText e = enc.encode(scratch, text, pad_to_context);
  Entry entry{scratch.value(e.rows), e};
  EncodedText out = e;
  out.rows = g.constant(entry.rows);
  std::lock_guard lock(mu_);
  entries_.emplace(key, std::move(entry));
  return out;
}

void EncodingCache::clear() {
  std::lock_guard lock(mu_);
  entries_.clear();
}

std::size_t EncodingCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

}  // namespace finemotion::text
