#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "finemotion/stepmark/stepmark.hpp"

namespace finemotion::stepmark {

// Call-line grammar (one call per line, blank lines ignored):
//   line  := ident '(' [ arg { ',' arg } ] ')' [ ';' ]
//   arg   := value | ident '=' value
//   value := ident | number
//   ident := [a-z_][a-z0-9_]*
//   number:= ['-'] digit+ [ '.' digit+ ]
// Spaces/tabs may surround every token. Lines of the form "step <k>[: ...]"
// open a new per-step group; without any such header the whole block is
// one group. This grammar is a stand-in: the reference prompts only show
// their pseudo-code as an image.
struct CallArg {
  std::optional<std::string> key;
  std::string value;
  friend bool operator==(const CallArg&, const CallArg&) = default;
};

struct Call {
  std::string verb;
  std::vector<CallArg> args;
  int line = 0;  // 1-based line within the block
};

struct PseudoCodeBlock {
  std::vector<std::vector<Call>> groups;
  std::size_t call_count() const;
};

class PseudoCodeGrammarError : public StepmarkError {
 public:
  PseudoCodeGrammarError(int line, const std::string& what)
      : StepmarkError(StepmarkErrc::GrammarError, "line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Parses a single call line; std::nullopt when it does not match the grammar.
std::optional<Call> parse_call_line(std::string_view line);

PseudoCodeBlock validate_pseudocode(std::string_view block_text, const StepMarkedText& paired);

}  // namespace finemotion::stepmark
