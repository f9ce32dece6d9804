#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/common/error.hpp"

namespace finemotion::prompt {

enum class PromptErrc { EmptyCoarse, BadTemplate, ExhaustedRetries, TransportError, SinkWriteError, Io };
using PromptError = Error<PromptErrc>;

struct Shot {
  std::string coarse;
  std::string fine;
  std::optional<std::string> pseudocode;
};

struct PromptTemplate {
  std::string id;  // "P1".."P8"
  std::string instruction;
  std::vector<Shot> shots;
  bool requires_pseudocode = false;
  bool requires_named_steps = false;

  // Throws BadTemplate: P6..P8 need pseudo-code (and code in every shot),
  // P7/P8 have two shots, P2..P5 at most one, P1 none.
  void validate() const;
  nlohmann::json to_json() const;
  static PromptTemplate from_json(const nlohmann::json& j);
};

struct TemplateCatalog {
  int version = 0;
  std::vector<PromptTemplate> templates;

  // Throws BadTemplate for an unknown id.
  const PromptTemplate& at(std::string_view id) const;
};

TemplateCatalog load_templates(const std::filesystem::path& json_file);
// The catalog shipped under data/prompts.
const TemplateCatalog& default_templates();

inline constexpr std::string_view kQuerySlot = "Fine-grained description:";

// Instruction, shots in order, then the coarse description followed by the
// query slot. Throws EmptyCoarse for a blank description.
std::string render_prompt(const PromptTemplate& t, std::string_view coarse);

}  // namespace finemotion::prompt
