#pragma once

#include <cctype>
#include <string>
#include <string_view>

// Hand-written character-walk recognizer for the pseudo-code block grammar,
// kept regex-free so it is independent from the library implementation.
namespace finemotion::testing {

namespace detail {

struct Walker {
  std::string_view s;
  std::size_t i = 0;

  bool done() const { return i >= s.size(); }
  char peek() const { return done() ? '\0' : s[i]; }
  void skip_ws() {
    while (!done() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
  bool eat(char c) {
    if (peek() != c || done()) return false;
    ++i;
    return true;
  }
  static bool ident_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
  static bool ident_rest(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
  static bool digit(char c) { return c >= '0' && c <= '9'; }

  bool ident() {
    if (done() || !ident_start(s[i])) return false;
    while (!done() && ident_rest(s[i])) ++i;
    return true;
  }
  bool number() {
    eat('-');
    if (done() || !digit(s[i])) return false;
    while (!done() && digit(s[i])) ++i;
    if (peek() == '.') {
      ++i;
      if (done() || !digit(s[i])) return false;
      while (!done() && digit(s[i])) ++i;
    }
    return true;
  }
  bool value() {
    if (done()) return false;
    return ident_start(s[i]) ? ident() : number();
  }
  bool arg() {
    if (done()) return false;
    if (ident_start(s[i])) {
      ident();
      const std::size_t after_ident = i;
      skip_ws();
      if (eat('=')) {
        skip_ws();
        return value();
      }
      i = after_ident;
      return true;
    }
    return number();
  }
};

}  // namespace detail

inline bool reference_accepts_line(std::string_view line) {
  detail::Walker w{line};
  w.skip_ws();
  if (!w.ident()) return false;
  w.skip_ws();
  if (!w.eat('(')) return false;
  w.skip_ws();
  if (w.peek() != ')' || w.done()) {
    if (!w.arg()) return false;
    while (true) {
      w.skip_ws();
      if (!w.eat(',')) break;
      w.skip_ws();
      if (!w.arg()) return false;
    }
  }
  w.skip_ws();
  if (!w.eat(')')) return false;
  w.skip_ws();
  w.eat(';');
  w.skip_ws();
  return w.done();
}

inline bool reference_is_header(std::string_view line) {
  detail::Walker w{line};
  w.skip_ws();
  const char* word = "step";
  for (int k = 0; k < 4; ++k) {
    if (w.done() || std::tolower(static_cast<unsigned char>(w.s[w.i])) != word[k]) return false;
    ++w.i;
  }
  if (w.peek() != ' ' && w.peek() != '\t') return false;
  w.skip_ws();
  if (w.done() || !detail::Walker::digit(w.peek())) return false;
  while (!w.done() && detail::Walker::digit(w.peek())) ++w.i;
  w.skip_ws();
  return w.done() || w.peek() == ':';
}

inline bool reference_accepts_block(std::string_view block, int paired_steps) {
  int groups = 0;
  int current_calls = 0;
  bool headers = false;
  bool content = false;
  std::size_t pos = 0;
  while (pos <= block.size()) {
    std::size_t end = block.find('\n', pos);
    if (end == std::string_view::npos) end = block.size();
    std::string_view line = block.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    bool blank = true;
    for (char c : line) blank = blank && (c == ' ' || c == '\t' || c == '\r');
    if (!blank) {
      content = true;
      if (reference_is_header(line)) {
        if (!headers && groups > 0) return false;
        if (headers && current_calls == 0) return false;
        headers = true;
        ++groups;
        current_calls = 0;
      } else {
        if (!reference_accepts_line(line)) return false;
        if (groups == 0) groups = 1;
        ++current_calls;
      }
    }
    if (end == block.size()) break;
  }
  if (!content) return false;
  if (headers && current_calls == 0) return false;
  return groups == paired_steps;
}

}  // namespace finemotion::testing
