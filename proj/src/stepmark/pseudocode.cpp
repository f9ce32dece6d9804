#include "finemotion/stepmark/pseudocode.hpp"

#include <regex>

namespace finemotion::stepmark {
namespace {

const std::string kIdent = "[a-z_][a-z0-9_]*";
const std::string kNumber = "-?[0-9]+(?:\\.[0-9]+)?";
const std::string kValue = "(?:" + kIdent + "|" + kNumber + ")";
const std::string kArg = "(?:" + kIdent + "[ \\t]*=[ \\t]*" + kValue + "|" + kValue + ")";

const std::regex& line_regex() {
  static const std::regex re("^[ \\t]*(" + kIdent + ")[ \\t]*\\([ \\t]*((?:" + kArg + "(?:[ \\t]*,[ \\t]*" + kArg +
                             ")*)?)[ \\t]*\\)[ \\t]*;?[ \\t]*$");
  return re;
}

const std::regex& arg_regex() {
  static const std::regex re("^[ \\t]*(?:(" + kIdent + ")[ \\t]*=[ \\t]*)?(" + kValue + ")[ \\t]*$");
  return re;
}

const std::regex& header_regex() {
  static const std::regex re("^[ \\t]*[Ss][Tt][Ee][Pp][ \\t]+[0-9]+[ \\t]*(?::.*)?$");
  return re;
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r") == std::string_view::npos; }

}  // namespace

std::size_t PseudoCodeBlock::call_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

std::optional<Call> parse_call_line(std::string_view line) {
  std::string s(line);
  if (!s.empty() && s.back() == '\r') s.pop_back();
  std::smatch m;
  if (!std::regex_match(s, m, line_regex())) return std::nullopt;
  Call call;
  call.verb = m[1].str();
  const std::string args = m[2].str();
  if (!args.empty()) {
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = args.find(',', start);
      const std::string piece = args.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      std::smatch am;
      if (!std::regex_match(piece, am, arg_regex())) return std::nullopt;
      CallArg a;
      if (am[1].matched) a.key = am[1].str();
      a.value = am[2].str();
      call.args.push_back(std::move(a));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return call;
}

PseudoCodeBlock validate_pseudocode(std::string_view block_text, const StepMarkedText& paired) {
  PseudoCodeBlock block;
  bool any_header = false;
  bool any_content = false;
  int line_no = 0;
  int open_header_line = 0;
  std::size_t pos = 0;
  while (pos <= block_text.size()) {
    std::size_t end = block_text.find('\n', pos);
    if (end == std::string_view::npos) end = block_text.size();
    std::string_view line = block_text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    pos = end + 1;
    if (blank(line)) {
      if (end == block_text.size()) break;
      continue;
    }
    any_content = true;
    const std::string l(line);
    if (std::regex_match(l, header_regex())) {
      if (any_header && block.groups.back().empty())
        throw PseudoCodeGrammarError(open_header_line, "step group has no calls");
      if (!any_header && !block.groups.empty())
        throw PseudoCodeGrammarError(line_no, "calls before the first step header");
      any_header = true;
      open_header_line = line_no;
      block.groups.emplace_back();
    } else {
      auto call = parse_call_line(line);
      if (!call) throw PseudoCodeGrammarError(line_no, "not a call: '" + l + "'");
      call->line = line_no;
      if (block.groups.empty()) block.groups.emplace_back();
      block.groups.back().push_back(std::move(*call));
    }
    if (end == block_text.size()) break;
  }
  if (!any_content) throw StepmarkError(StepmarkErrc::EmptyBlock, "empty pseudo-code block");
  if (any_header && block.groups.back().empty())
    throw PseudoCodeGrammarError(open_header_line, "step group has no calls");
  if (static_cast<int>(block.groups.size()) != paired.size())
    throw StepmarkError(StepmarkErrc::StepCountMismatch,
                        std::to_string(block.groups.size()) + " code groups for " + std::to_string(paired.size()) +
                            " steps");
  return block;
}

}  // namespace finemotion::stepmark
