#pragma once

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/stepmark/stepmark.hpp"

namespace finemotion::testing {

struct CaseText {
  std::string source_id;
  std::string coarse;
  std::string fine;
};

inline std::vector<CaseText> load_case_texts() {
  std::ifstream in(std::string(FINEMOTION_DATA_DIR) + "/fixtures/case_texts.jsonl");
  std::vector<CaseText> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("source_id"), j.at("coarse"), j.at("fine")});
  }
  return out;
}

inline const CaseText& case_text(const std::vector<CaseText>& all, const std::string& id) {
  for (const auto& c : all)
    if (c.source_id == id) return c;
  throw std::runtime_error("no case text " + id);
}

// Random valid step-marked texts with ragged names and bodies (inner
// newlines, tabs, punctuation, unicode) for round-trip sweeps.
inline stepmark::StepMarkedText random_step_text(std::mt19937_64& rng) {
  static const std::vector<std::string> names = {"beginning pose", "lift foot", "end pose", "squat",
                                                 "raise arms",     "kick",      "turn left", "step 4 again"};
  static const std::vector<std::string> words = {"The",  "man",   "lifts", "his",  "left",  "right", "arm,",
                                                 "leg.", "knees", "bend",  "slowly", "\xC3\xA9lan", "(then)",
                                                 "5",    "cm",    "while", "a",     "step:", "x=1"};
  std::uniform_int_distribution<int> n_steps(1, 9), n_words(1, 14), pick_name(0, static_cast<int>(names.size()) - 1),
      pick_word(0, static_cast<int>(words.size()) - 1), sep(0, 9);
  stepmark::StepMarkedText s;
  const int n = n_steps(rng);
  for (int k = 1; k <= n; ++k) {
    std::string body;
    const int w = n_words(rng);
    for (int i = 0; i < w; ++i) {
      if (i > 0) {
        const int r = sep(rng);
        body += r == 0 ? "\n" : r == 1 ? "\t " : " ";
      }
      body += words[static_cast<std::size_t>(pick_word(rng))];
    }
    s.steps.push_back({k, names[static_cast<std::size_t>(pick_name(rng))], body});
  }
  return s;
}

}  // namespace finemotion::testing
