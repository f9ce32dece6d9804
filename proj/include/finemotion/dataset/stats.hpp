#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/dataset/corpus.hpp"

namespace finemotion::dataset {

enum class Pos { Verb, Noun, Adp, Pron, Other };

struct TaggedToken {
  std::string text;  // lowercased
  Pos pos = Pos::Other;
};

class PosTagger {
 public:
  virtual ~PosTagger() = default;
  virtual std::vector<TaggedToken> tag(std::string_view text) const = 0;
};

// Deterministic lexicon tagger over the text tokenizer: closed-class word
// lists for pronouns and adpositions, a verb lexicon with inflection
// stripping, a body/motion noun lexicon, and "word after a determiner or
// possessive is a noun".
class RuleTagger : public PosTagger {
 public:
  std::vector<TaggedToken> tag(std::string_view text) const override;
};

struct CorpusStats {
  long n_motions = 0;
  long n_descriptions = 0;
  long vocab_size = 0;
  double ave_len = 0.0;
  long verbs = 0;
  long nouns = 0;
  long adpositions = 0;
  long pronouns = 0;

  nlohmann::json to_json() const;
  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

// Vocabulary over lowercased fine-text tokens (tags stripped); ave_len is
// the mean token count per description. Mirrored twins count as distinct
// descriptions and motions.
CorpusStats compute_stats(std::span<const CorpusRecord> records, const PosTagger& tagger);

// One row in the column layout #Motions #Descriptions #Vocabulary AveLen
// #Verbs #Nouns #Adpositions #Pronouns.
std::string render_stats_table(const std::vector<std::pair<std::string, CorpusStats>>& rows);

}  // namespace finemotion::dataset
