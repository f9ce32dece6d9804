#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "finemotion/common/error.hpp"

namespace finemotion::stepmark {

enum class StepmarkErrc {
  EmptyInput,
  UnbalancedTags,
  IndexGap,
  DuplicateIndex,
  TagPayloadMismatch,
  MalformedTag,
  StrayText,
  TooFewSteps,
  InvalidSteps,
  GrammarError,
  StepCountMismatch,
  EmptyBlock,
};
using StepmarkError = Error<StepmarkErrc>;

const char* to_string(StepmarkErrc code);

struct Step {
  int index = 0;
  std::string name;  // trimmed, no angle brackets
  std::string body;  // trimmed, no step tags

  friend bool operator==(const Step&, const Step&) = default;
};

struct StepMarkedText {
  std::vector<Step> steps;
  std::optional<std::string> coarse;
  std::string source_id;

  int size() const { return static_cast<int>(steps.size()); }
  // Throws InvalidSteps unless indices are 1..n in order and names/bodies
  // satisfy the Step invariants.
  void validate() const;

  friend bool operator==(const StepMarkedText&, const StepMarkedText&) = default;
};

// Parses `<step k: name>body</step k: name>` sequences. Whitespace between
// tags is allowed; any other text outside tags is StrayText.
StepMarkedText parse_stepmarks(std::string_view raw);

// Canonical form: steps sorted by index, `<step k: name>body</step k: name>`
// joined by single spaces.
std::string serialize(const StepMarkedText& s);

// Step bodies in index order with runs of whitespace collapsed to one space.
std::vector<std::string> strip_steps(const StepMarkedText& s);

enum class TruncateMode { DelFirstLast, DelInner };
StepMarkedText truncate_steps(const StepMarkedText& s, TruncateMode mode);

// Splits a raw LLM response into the step-marked description and an optional
// trailing pseudo-code section. The section starts at the first line that
// opens a ``` fence, a <code> tag, or reads "Pseudo-code:" / "Code:".
struct SplitResponse {
  std::string description;
  std::optional<std::string> pseudocode;
};
SplitResponse split_response(std::string_view raw);

std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);

}  // namespace finemotion::stepmark
