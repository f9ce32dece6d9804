#include "finemotion/stepmark/stepmark.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace finemotion::stepmark {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool iequals_at(std::string_view s, std::size_t pos, std::string_view word) {
  if (pos + word.size() > s.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[pos + i])) != word[i]) return false;
  return true;
}

std::size_t ifind(std::string_view s, std::string_view word, std::size_t from) {
  for (std::size_t i = from; i + word.size() <= s.size(); ++i)
    if (iequals_at(s, i, word)) return i;
  return std::string_view::npos;
}

struct TagPayload {
  int index;
  std::string name;
};

// Parses the inside of a tag after "<step" or "</step": ws+ digits ws* ':'
// ws* name ws*. `inner` excludes the closing '>'.
TagPayload parse_payload(std::string_view inner, std::string_view whole_tag) {
  std::size_t i = 0;
  auto fail = [&](const std::string& why) -> TagPayload {
    throw StepmarkError(StepmarkErrc::MalformedTag, "malformed tag '" + std::string(whole_tag) + "': " + why);
  };
  if (i >= inner.size() || !is_space(inner[i])) fail("expected space after 'step'");
  while (i < inner.size() && is_space(inner[i])) ++i;
  const std::size_t d0 = i;
  while (i < inner.size() && std::isdigit(static_cast<unsigned char>(inner[i]))) ++i;
  if (i == d0) fail("missing step index");
  if (i - d0 > 6) fail("step index too large");
  const int index = std::stoi(std::string(inner.substr(d0, i - d0)));
  if (index < 1) fail("step index must be positive");
  while (i < inner.size() && is_space(inner[i])) ++i;
  if (i >= inner.size() || inner[i] != ':') fail("missing step name");
  ++i;
  std::string name = trim(inner.substr(i));
  if (name.empty()) fail("empty step name");
  if (name.find('<') != std::string::npos) fail("step name contains '<'");
  return {index, name};
}

bool contains_step_tag(std::string_view s) {
  return ifind(s, "<step", 0) != std::string_view::npos || ifind(s, "</step", 0) != std::string_view::npos;
}

}  // namespace

const char* to_string(StepmarkErrc code) {
  switch (code) {
    case StepmarkErrc::EmptyInput: return "EmptyInput";
    case StepmarkErrc::UnbalancedTags: return "UnbalancedTags";
    case StepmarkErrc::IndexGap: return "IndexGap";
    case StepmarkErrc::DuplicateIndex: return "DuplicateIndex";
    case StepmarkErrc::TagPayloadMismatch: return "TagPayloadMismatch";
    case StepmarkErrc::MalformedTag: return "MalformedTag";
    case StepmarkErrc::StrayText: return "StrayText";
    case StepmarkErrc::TooFewSteps: return "TooFewSteps";
    case StepmarkErrc::InvalidSteps: return "InvalidSteps";
    case StepmarkErrc::GrammarError: return "GrammarError";
    case StepmarkErrc::StepCountMismatch: return "StepCountMismatch";
    case StepmarkErrc::EmptyBlock: return "EmptyBlock";
  }
  return "Unknown";
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

void StepMarkedText::validate() const {
  if (steps.empty()) throw StepmarkError(StepmarkErrc::InvalidSteps, "no steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const Step& s = steps[i];
    if (s.index != static_cast<int>(i) + 1)
      throw StepmarkError(StepmarkErrc::InvalidSteps, "step indices are not 1..n in order");
    if (s.name.empty() || s.name != trim(s.name) || s.name.find_first_of("<>") != std::string::npos)
      throw StepmarkError(StepmarkErrc::InvalidSteps, "bad step name '" + s.name + "'");
    if (s.body.empty() || s.body != trim(s.body) || contains_step_tag(s.body))
      throw StepmarkError(StepmarkErrc::InvalidSteps, "bad body for step " + std::to_string(s.index));
  }
}

StepMarkedText parse_stepmarks(std::string_view raw) {
  if (trim(raw).empty()) throw StepmarkError(StepmarkErrc::EmptyInput, "empty response");
  StepMarkedText out;
  std::set<int> seen;
  std::size_t pos = 0;
  while (true) {
    while (pos < raw.size() && is_space(raw[pos])) ++pos;
    if (pos >= raw.size()) break;
    if (iequals_at(raw, pos, "</step"))
      throw StepmarkError(StepmarkErrc::UnbalancedTags, "closing tag without an opening tag");
    if (!iequals_at(raw, pos, "<step")) {
      const std::size_t end = std::min(raw.size(), pos + 40);
      throw StepmarkError(StepmarkErrc::StrayText,
                          "text outside step marks: '" + std::string(raw.substr(pos, end - pos)) + "'");
    }
    const std::size_t open_end = raw.find('>', pos);
    if (open_end == std::string_view::npos)
      throw StepmarkError(StepmarkErrc::UnbalancedTags, "unterminated opening tag");
    const std::string_view open_tag = raw.substr(pos, open_end - pos + 1);
    const TagPayload open = parse_payload(raw.substr(pos + 5, open_end - pos - 5), open_tag);

    const std::size_t body_begin = open_end + 1;
    const std::size_t close_pos = ifind(raw, "</step", body_begin);
    const std::size_t next_open = ifind(raw, "<step", body_begin);
    if (close_pos == std::string_view::npos || (next_open != std::string_view::npos && next_open < close_pos))
      throw StepmarkError(StepmarkErrc::UnbalancedTags,
                          "step " + std::to_string(open.index) + " is never closed");
    const std::size_t close_end = raw.find('>', close_pos);
    if (close_end == std::string_view::npos)
      throw StepmarkError(StepmarkErrc::UnbalancedTags, "unterminated closing tag");
    const std::string_view close_tag = raw.substr(close_pos, close_end - close_pos + 1);
    const TagPayload close = parse_payload(raw.substr(close_pos + 6, close_end - close_pos - 6), close_tag);
    if (close.index != open.index || close.name != open.name)
      throw StepmarkError(StepmarkErrc::TagPayloadMismatch,
                          "'" + std::string(open_tag) + "' closed by '" + std::string(close_tag) + "'");

    const int expected = static_cast<int>(out.steps.size()) + 1;
    if (seen.count(open.index))
      throw StepmarkError(StepmarkErrc::DuplicateIndex, "step " + std::to_string(open.index) + " repeated");
    if (open.index != expected)
      throw StepmarkError(StepmarkErrc::IndexGap, "expected step " + std::to_string(expected) + ", found step " +
                                                      std::to_string(open.index));
    seen.insert(open.index);

    std::string body = trim(raw.substr(body_begin, close_pos - body_begin));
    if (body.empty())
      throw StepmarkError(StepmarkErrc::MalformedTag, "step " + std::to_string(open.index) + " has an empty body");
    out.steps.push_back(Step{open.index, open.name, std::move(body)});
    pos = close_end + 1;
  }
  return out;
}

std::string serialize(const StepMarkedText& s) {
  std::vector<Step> steps = s.steps;
  std::stable_sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) { return a.index < b.index; });
  std::string out;
  for (const Step& st : steps) {
    if (!out.empty()) out.push_back(' ');
    const std::string payload = "step " + std::to_string(st.index) + ": " + st.name;
    out += "<" + payload + ">" + st.body + "</" + payload + ">";
  }
  return out;
}

std::vector<std::string> strip_steps(const StepMarkedText& s) {
  std::vector<Step> steps = s.steps;
  std::stable_sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) { return a.index < b.index; });
  std::vector<std::string> out;
  out.reserve(steps.size());
  for (const Step& st : steps) out.push_back(collapse_whitespace(st.body));
  return out;
}

StepMarkedText truncate_steps(const StepMarkedText& s, TruncateMode mode) {
  const int n = s.size();
  std::vector<Step> kept;
  if (mode == TruncateMode::DelFirstLast) {
    if (n < 3)
      throw StepmarkError(StepmarkErrc::TooFewSteps, "delFirstLast needs at least 3 steps, got " + std::to_string(n));
    kept.assign(s.steps.begin() + 1, s.steps.end() - 1);
  } else {
    if (n < 2)
      throw StepmarkError(StepmarkErrc::TooFewSteps, "delInner needs at least 2 steps, got " + std::to_string(n));
    kept = {s.steps.front(), s.steps.back()};
  }
  StepMarkedText out = s;
  out.steps = std::move(kept);
  for (std::size_t i = 0; i < out.steps.size(); ++i) out.steps[i].index = static_cast<int>(i) + 1;
  return out;
}

SplitResponse split_response(std::string_view raw) {
  std::size_t line_start = 0;
  while (line_start <= raw.size()) {
    std::size_t line_end = raw.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = raw.size();
    const std::string line = trim(raw.substr(line_start, line_end - line_start));
    std::string lower = line;
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const bool marker = lower.rfind("```", 0) == 0 || lower.rfind("<code>", 0) == 0 ||
                        lower.rfind("pseudo-code:", 0) == 0 || lower.rfind("pseudocode:", 0) == 0 ||
                        lower.rfind("pseudo code:", 0) == 0 || lower.rfind("code:", 0) == 0;
    if (marker) {
      SplitResponse out;
      out.description = trim(raw.substr(0, line_start));
      std::string code(raw.substr(line_start));
      // Strip the section marker, fences and <code> tags.
      std::string cleaned;
      std::size_t p = 0;
      bool first = true;
      while (p <= code.size()) {
        std::size_t e = code.find('\n', p);
        if (e == std::string::npos) e = code.size();
        std::string l = trim(std::string_view(code).substr(p, e - p));
        std::string ll = l;
        for (char& c : ll) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (ll.rfind("```", 0) == 0) {
          l.clear();
        } else if (ll.rfind("<code>", 0) == 0) {
          l = trim(std::string_view(l).substr(6));
        } else if (first) {
          l = trim(std::string_view(l).substr(l.find(':') + 1));
        }
        first = false;
        if (l.size() >= 7 && l.compare(l.size() - 7, 7, "</code>") == 0) l = trim(std::string_view(l).substr(0, l.size() - 7));
        if (!l.empty()) {
          if (!cleaned.empty()) cleaned.push_back('\n');
          cleaned += l;
        }
        p = e + 1;
      }
      out.pseudocode = cleaned;
      return out;
    }
    if (line_end == raw.size()) break;
    line_start = line_end + 1;
  }
  return SplitResponse{std::string(raw), std::nullopt};
}

}  // namespace finemotion::stepmark
