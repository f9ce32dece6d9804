#include "finemotion/dataset/stats.hpp"

#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_set>

#include "finemotion/text/token_encoder.hpp"

namespace finemotion::dataset {
namespace {

const std::unordered_set<std::string>& pronouns() {
  static const std::unordered_set<std::string> s = {
      "i",   "me",   "my",    "mine",   "myself", "you",  "your",    "yours",  "yourself", "he",
      "him", "his",  "himself", "she",  "her",    "hers", "herself", "it",     "its",      "itself",
      "we",  "us",   "our",   "ours",   "they",   "them", "their",   "theirs", "themselves"};
  return s;
}

const std::unordered_set<std::string>& adpositions() {
  static const std::unordered_set<std::string> s = {
      "about",  "above",  "across", "after",   "against", "along",  "among",   "around", "at",
      "before", "behind", "below",  "beneath", "beside",  "between", "beyond", "by",     "down",
      "during", "for",    "from",   "in",      "inside",  "into",   "near",    "of",     "off",
      "on",     "onto",   "out",    "outside", "over",    "past",   "through", "to",     "toward",
      "towards", "under", "underneath", "up",  "upon",    "with",   "within",  "without"};
  return s;
}

const std::unordered_set<std::string>& verb_lemmas() {
  static const std::unordered_set<std::string> s = {
      "walk",   "run",     "jump",   "squat",   "kick",      "raise",   "lift",    "lower",   "bend",
      "stand",  "begin",   "hold",   "step",    "swing",     "place",   "plant",   "shift",   "extend",
      "keep",   "return",  "repeat", "move",    "turn",      "straighten", "reach", "rise",   "lean",
      "bring",  "take",    "put",    "stretch", "wave",      "throw",   "sit",     "stop",    "start",
      "continue", "resume", "remain", "stay",   "prepare",   "alternate", "transfer", "face", "rotate",
      "push",   "pull",    "hop",    "spin",    "dance",     "climb",   "crouch",  "punch",   "land",
      "balance", "point",  "clap",   "nod",     "tilt",      "drop",    "pause",   "relax",   "rest",
      "touch",  "slide",   "cross",  "spread",  "open",      "close",   "tap",     "stomp",   "go",
      "come",   "look",    "kneel",  "crawl",   "catch",     "pick",    "carry",   "sway",    "shake",
      "march",  "jog",     "skip",   "bounce",  "flex",      "twist",   "perform", "finish",  "end"};
  return s;
}

const std::unordered_set<std::string>& irregular_verbs() {
  static const std::unordered_set<std::string> s = {"ran",  "stood", "began", "begun", "held",  "swung",
                                                     "rose", "risen", "kept",  "brought", "took", "taken",
                                                     "sat",  "threw", "thrown", "bent",  "went", "came",
                                                     "knelt", "caught", "is",   "are",   "was",  "were"};
  return s;
}

const std::unordered_set<std::string>& noun_lexicon() {
  static const std::unordered_set<std::string> s = {
      "man",   "person", "woman", "arm",   "arms",   "hand",     "hands",   "leg",    "legs",   "foot",
      "feet",  "knee",   "knees", "hip",   "hips",   "shoulder", "shoulders", "head", "body",   "torso",
      "elbow", "elbows", "waist", "ground", "floor", "position", "pose",    "side",   "sides",  "back",
      "weight", "heel",  "heels", "toe",   "toes",   "chest",    "motion",  "height", "ceiling", "palms",
      "palm",  "target", "balance", "moment", "circle", "direction", "width", "front", "time",  "times"};
  return s;
}

const std::unordered_set<std::string>& noun_heralds() {
  static const std::unordered_set<std::string> s = {"the", "a",   "an",   "his",  "her",   "their", "my",
                                                     "your", "its", "our", "each", "every", "another", "this",
                                                     "that", "one", "both"};
  return s;
}

bool is_verb(const std::string& w) {
  if (irregular_verbs().count(w) || verb_lemmas().count(w)) return true;
  auto strip = [&](std::string_view suffix, std::string_view add = "") -> bool {
    if (w.size() <= suffix.size() + 1 || !w.ends_with(suffix)) return false;
    std::string stem = w.substr(0, w.size() - suffix.size());
    if (verb_lemmas().count(stem + std::string(add))) return true;
    // Doubled final consonant: "stepped", "squatting".
    if (stem.size() > 2 && stem[stem.size() - 1] == stem[stem.size() - 2])
      return verb_lemmas().count(stem.substr(0, stem.size() - 1)) != 0;
    return false;
  };
  return strip("s") || strip("es") || strip("ed") || strip("d") || strip("ing") || strip("ing", "e") ||
         strip("ies", "y") || strip("ied", "y");
}

bool is_word(const std::string& w) {
  for (unsigned char c : w)
    if (!std::isalpha(c) && c != '-' && c != '\'') return false;
  return !w.empty();
}

}  // namespace

std::vector<TaggedToken> RuleTagger::tag(std::string_view text) const {
  std::vector<TaggedToken> out;
  for (auto& tok : text::tokenize(text)) {
    TaggedToken t{std::move(tok), Pos::Other};
    const bool after_herald = !out.empty() && noun_heralds().count(out.back().text);
    if (pronouns().count(t.text))
      t.pos = Pos::Pron;
    else if (adpositions().count(t.text))
      t.pos = Pos::Adp;
    else if (noun_lexicon().count(t.text) || (after_herald && is_word(t.text)))
      t.pos = Pos::Noun;  // includes "his step", "a kick"
    else if (is_verb(t.text))
      t.pos = Pos::Verb;
    out.push_back(std::move(t));
  }
  return out;
}

nlohmann::json CorpusStats::to_json() const {
  return {{"n_motions", n_motions}, {"n_descriptions", n_descriptions}, {"vocab_size", vocab_size},
          {"ave_len", ave_len},     {"verbs", verbs},                   {"nouns", nouns},
          {"adpositions", adpositions}, {"pronouns", pronouns}};
}

CorpusStats compute_stats(std::span<const CorpusRecord> records, const PosTagger& tagger) {
  CorpusStats s;
  std::set<std::string> motions, vocab;
  long tokens = 0;
  for (const auto& r : records) {
    motions.insert(r.motion_id);
    ++s.n_descriptions;
    for (const auto& t : tagger.tag(r.fine_plain())) {
      ++tokens;
      vocab.insert(t.text);
      switch (t.pos) {
        case Pos::Verb: ++s.verbs; break;
        case Pos::Noun: ++s.nouns; break;
        case Pos::Adp: ++s.adpositions; break;
        case Pos::Pron: ++s.pronouns; break;
        case Pos::Other: break;
      }
    }
  }
  s.n_motions = static_cast<long>(motions.size());
  s.vocab_size = static_cast<long>(vocab.size());
  s.ave_len = s.n_descriptions ? static_cast<double>(tokens) / static_cast<double>(s.n_descriptions) : 0.0;
  return s;
}

std::string render_stats_table(const std::vector<std::pair<std::string, CorpusStats>>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %10s %14s %12s %8s %10s %10s %13s %10s\n", "Dataset", "#Motions",
                "#Descriptions", "#Vocabulary", "AveLen", "#Verbs", "#Nouns", "#Adpositions", "#Pronouns");
  out << buf;
  for (const auto& [name, s] : rows) {
    std::snprintf(buf, sizeof buf, "%-16s %10ld %14ld %12ld %8.1f %10ld %10ld %13ld %10ld\n", name.c_str(),
                  s.n_motions, s.n_descriptions, s.vocab_size, s.ave_len, s.verbs, s.nouns, s.adpositions,
                  s.pronouns);
    out << buf;
  }
  return out.str();
}

}  // namespace finemotion::dataset
