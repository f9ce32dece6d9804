#include "finemotion/stepmark/verdict.hpp"

#include <cctype>

#include "finemotion/stepmark/stepmark.hpp"

namespace finemotion::stepmark {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Valid: return "Valid";
    case Verdict::SorryLike: return "SorryLike";
    case Verdict::NonConforming: return "NonConforming";
  }
  return "NonConforming";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "Valid") return Verdict::Valid;
  if (s == "SorryLike") return Verdict::SorryLike;
  return Verdict::NonConforming;
}

const std::vector<std::string>& apology_prefixes() {
  static const std::vector<std::string> p = {
      "i'm sorry", "i am sorry", "im sorry",   "sorry",          "i apologize", "i apologise",
      "apologies", "as an ai",   "i'm afraid", "unfortunately", "i cannot",    "i can't",
  };
  return p;
}

ResponseVerdict classify_response(std::string_view raw) noexcept {
  try {
    // Lowercase, fold the typographic apostrophe, drop leading quotes/space.
    std::string norm;
    norm.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw.compare(i, 3, "\xE2\x80\x99") == 0) {
        norm.push_back('\'');
        i += 2;
        continue;
      }
      norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i]))));
    }
    const std::size_t b = norm.find_first_not_of(" \t\r\n\"'`");
    const std::string_view head = b == std::string::npos ? std::string_view{} : std::string_view(norm).substr(b);
    for (const auto& p : apology_prefixes())
      if (head.rfind(p, 0) == 0) return {Verdict::SorryLike, "apology prefix '" + p + "'"};
    try {
      const SplitResponse split = split_response(raw);
      const StepMarkedText parsed = parse_stepmarks(split.description);
      return {Verdict::Valid, std::to_string(parsed.size()) + " steps"};
    } catch (const StepmarkError& e) {
      return {Verdict::NonConforming, std::string(to_string(e.code())) + ": " + e.what()};
    }
  } catch (...) {
    return {Verdict::NonConforming, "unclassifiable response"};
  }
}

}  // namespace finemotion::stepmark
