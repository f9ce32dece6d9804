#include "finemotion/prompt/record.hpp"

#include <fstream>
#include <stdexcept>

namespace finemotion::prompt {

nlohmann::json ExpansionRecord::to_json() const {
  nlohmann::json j = {{"source_id", source_id}, {"motion_id", motion_id}, {"coarse", coarse}, {"fine", fine}};
  if (!template_id.empty()) j["template"] = template_id;
  return j;
}

ExpansionRecord ExpansionRecord::from_json(const nlohmann::json& j) {
  ExpansionRecord r;
  r.source_id = j.at("source_id").get<std::string>();
  r.motion_id = j.value("motion_id", r.source_id.substr(0, r.source_id.find('#')));
  r.coarse = j.value("coarse", std::string());
  r.fine = j.at("fine").get<std::string>();
  r.template_id = j.value("template", std::string());
  return r;
}

std::vector<ExpansionRecord> read_expansions(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw std::runtime_error("cannot read " + jsonl.string());
  std::vector<ExpansionRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ExpansionRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(jsonl.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_expansions(const std::vector<ExpansionRecord>& records, const std::filesystem::path& jsonl) {
  std::ofstream out(jsonl, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + jsonl.string());
  for (const auto& r : records) out << r.to_json().dump() << '\n';
  if (!out) throw std::runtime_error("write failed for " + jsonl.string());
}

}  // namespace finemotion::prompt
