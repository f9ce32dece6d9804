#include "finemotion/motion/lr_words.hpp"

#include <cctype>
#include <map>

namespace finemotion::motion {
namespace {

enum class Casing { Lower, Capitalized, Upper, Other };

Casing casing_of(std::string_view w) {
  bool all_lower = true, all_upper = true;
  for (char c : w) {
    const auto u = static_cast<unsigned char>(c);
    all_lower = all_lower && std::islower(u);
    all_upper = all_upper && std::isupper(u);
  }
  if (all_lower) return Casing::Lower;
  if (all_upper) return Casing::Upper;
  bool tail_lower = true;
  for (std::size_t i = 1; i < w.size(); ++i) tail_lower = tail_lower && std::islower(static_cast<unsigned char>(w[i]));
  if (std::isupper(static_cast<unsigned char>(w[0])) && tail_lower) return Casing::Capitalized;
  return Casing::Other;
}

std::string apply_casing(const std::string& lower, Casing c) {
  std::string out = lower;
  if (c == Casing::Upper) {
    for (char& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  } else if (c == Casing::Capitalized) {
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  }
  return out;
}

const std::map<std::string, std::string, std::less<>>& swap_table() {
  static const auto table = [] {
    std::map<std::string, std::string, std::less<>> t;
    for (const auto& [a, b] : lr_word_pairs()) {
      t.emplace(a, b);
      t.emplace(b, a);
    }
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& lr_word_pairs() {
  static const std::vector<std::pair<std::string, std::string>> pairs = {
      {"left", "right"},
      {"leftward", "rightward"},
      {"leftwards", "rightwards"},
      {"leftmost", "rightmost"},
  };
  return pairs;
}

std::string swap_lr_words(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
    const std::string_view word = text.substr(i, j - i);
    const Casing c = casing_of(word);
    std::string lower(word);
    for (char& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const auto& table = swap_table();
    auto it = table.find(lower);
    if (c != Casing::Other && it != table.end())
      out += apply_casing(it->second, c);
    else
      out += word;
    i = j;
  }
  return out;
}

}  // namespace finemotion::motion
