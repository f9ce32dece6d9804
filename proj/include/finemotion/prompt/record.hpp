#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace finemotion::prompt {

// One line of the expansion output: a coarse description and its validated
// fine text in canonical step-mark form.
struct ExpansionRecord {
  std::string source_id;
  std::string motion_id;  // defaults to source_id up to the first '#'
  std::string coarse;
  std::string fine;
  std::string template_id;

  nlohmann::json to_json() const;
  static ExpansionRecord from_json(const nlohmann::json& j);
};

std::vector<ExpansionRecord> read_expansions(const std::filesystem::path& jsonl);
void write_expansions(const std::vector<ExpansionRecord>& records, const std::filesystem::path& jsonl);

}  // namespace finemotion::prompt
