#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/common/error.hpp"
#include "finemotion/nn/graph.hpp"
#include "finemotion/nn/layers.hpp"

namespace finemotion::text {

enum class TextErrc { EmptyStep, OddDimension, ShapeMismatch, TOutOfRange, UnknownProfile };
using TextError = Error<TextErrc>;

// Lowercased word tokens; punctuation characters are separate tokens.
std::vector<std::string> tokenize(std::string_view text);

struct EncodedText {
  nn::NodeId rows = -1;  // count x width, or max_tokens x width when padded
  int count = 0;         // real tokens including [S] and [E]
  int s_index = 0;
  int e_index = 0;
  bool truncated = false;
  int dropped_tokens = 0;
};

// Contract for the frozen CLIP-like text encoder. Output row 0 is [S], rows
// 1..count-2 the (possibly truncated) word tokens and row count-1 is [E].
class TokenEncoder {
 public:
  virtual ~TokenEncoder() = default;
  virtual int width() const = 0;
  virtual int max_tokens() const = 0;
  virtual bool frozen() const = 0;
  virtual std::string profile() const = 0;
  virtual nlohmann::json describe() const { return {{"profile", profile()}}; }
  // With `pad_to_context`, returns max_tokens rows; rows >= count are padding.
  virtual EncodedText encode(nn::Graph& g, std::string_view text, bool pad_to_context = false) const = 0;
};

// Parameter-free deterministic encoder for tests: each token maps to a fixed
// pseudo-random vector derived from a hash of the token string; padding
// rows are zero.
class HashStubEncoder : public TokenEncoder {
 public:
  explicit HashStubEncoder(int width, int max_tokens = 77);
  int width() const override { return width_; }
  int max_tokens() const override { return max_tokens_; }
  bool frozen() const override { return true; }
  std::string profile() const override { return "hash_stub"; }
  nlohmann::json describe() const override;
  EncodedText encode(nn::Graph& g, std::string_view text, bool pad_to_context = false) const override;

  // Embedding row of a single token (or "<|startoftext|>"/"<|endoftext|>").
  nn::RowVector token_vector(std::string_view token) const;

 private:
  int width_;
  int max_tokens_;
};

struct ToyEncoderConfig {
  int width = 64;
  int max_tokens = 77;
  int vocab_buckets = 4096;
  int layers = 1;
  int heads = 4;
  std::uint64_t seed = 7;
  bool frozen = true;

  nlohmann::json to_json() const;
  static ToyEncoderConfig from_json(const nlohmann::json& j);
};

// Small causal transformer over hashed word ids (CLIP-like: causal masking
// makes [E] summarize the whole text). Parameters live in the caller's store
// under `prefix`; `frozen` marks them non-trainable.
class ToyClipEncoder : public TokenEncoder {
 public:
  ToyClipEncoder(nn::ParameterStore& store, std::string prefix, ToyEncoderConfig cfg);

  int width() const override { return cfg_.width; }
  int max_tokens() const override { return cfg_.max_tokens; }
  bool frozen() const override { return cfg_.frozen; }
  std::string profile() const override { return "toy_clip"; }
  nlohmann::json describe() const override;
  EncodedText encode(nn::Graph& g, std::string_view text, bool pad_to_context = false) const override;

  const std::string& prefix() const { return prefix_; }
  const ToyEncoderConfig& config() const { return cfg_; }
  // Loads pretrained weights (same architecture) from a checkpoint container.
  void load_pretrained(const std::filesystem::path& checkpoint);

 private:
  int token_id(const std::string& token) const;

  nn::ParameterStore* store_;
  std::string prefix_;
  ToyEncoderConfig cfg_;
  nn::Parameter* token_embedding_;
  nn::Parameter* position_embedding_;
  std::vector<nn::EncoderLayer> layers_;
  nn::LayerNorm final_ln_;
};

// Records every text passed through an inner encoder (ablation wiring probes).
class InstrumentedEncoder : public TokenEncoder {
 public:
  explicit InstrumentedEncoder(const TokenEncoder& inner) : inner_(inner) {}
  int width() const override { return inner_.width(); }
  int max_tokens() const override { return inner_.max_tokens(); }
  bool frozen() const override { return inner_.frozen(); }
  std::string profile() const override { return inner_.profile(); }
  EncodedText encode(nn::Graph& g, std::string_view text, bool pad_to_context = false) const override;

  std::vector<std::string> seen() const;
  void clear();

 private:
  const TokenEncoder& inner_;
  mutable std::mutex mu_;
  mutable std::vector<std::string> seen_;
};

// Memoizes encodings of a frozen encoder as constants. Non-frozen encoders
// bypass the cache so gradients reach their parameters.
class EncodingCache {
 public:
  EncodedText encode(nn::Graph& g, const TokenEncoder& enc, std::string_view text, bool pad_to_context = false);
  void clear();
  std::size_t size() const;

 private:
  struct Entry {
    nn::Matrix rows;
    EncodedText meta;
  };
  mutable std::mutex mu_;
  std::map<std::pair<std::string, bool>, Entry> entries_;
};

}  // namespace finemotion::text
