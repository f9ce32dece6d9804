#include "finemotion/prompt/template.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "finemotion/stepmark/stepmark.hpp"

namespace finemotion::prompt {
namespace {

int template_number(const std::string& id) {
  if (id.size() != 2 || id[0] != 'P' || id[1] < '1' || id[1] > '8')
    throw PromptError(PromptErrc::BadTemplate, "template id must be P1..P8, got '" + id + "'");
  return id[1] - '0';
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("FINEMOTION_DATA_DIR")) return env;
  return FINEMOTION_DATA_DIR;
}

}  // namespace

void PromptTemplate::validate() const {
  const int n = template_number(id);
  auto fail = [&](const std::string& what) { throw PromptError(PromptErrc::BadTemplate, id + ": " + what); };
  if (instruction.empty()) fail("empty instruction");
  const bool wants_code = n >= 6;
  if (requires_pseudocode != wants_code) fail("requires_pseudocode must be " + std::string(wants_code ? "true" : "false"));
  const std::size_t shots_needed = n == 1 ? 0 : (n >= 7 ? 2 : 1);
  if (n == 1 || n >= 7) {
    if (shots.size() != shots_needed) fail("expected " + std::to_string(shots_needed) + " shots");
  } else if (shots.size() > 1) {
    fail("at most one shot");
  }
  for (const auto& s : shots) {
    if (s.coarse.empty() || s.fine.empty()) fail("empty shot");
    if (requires_pseudocode && !s.pseudocode) fail("shot without pseudo-code");
    if (requires_named_steps) stepmark::parse_stepmarks(s.fine).validate();
  }
}

nlohmann::json PromptTemplate::to_json() const {
  nlohmann::json js = nlohmann::json::array();
  for (const auto& s : shots) {
    nlohmann::json j = {{"coarse", s.coarse}, {"fine", s.fine}};
    if (s.pseudocode) j["pseudocode"] = *s.pseudocode;
    js.push_back(j);
  }
  return {{"id", id},
          {"instruction", instruction},
          {"shots", js},
          {"requires_pseudocode", requires_pseudocode},
          {"requires_named_steps", requires_named_steps}};
}

PromptTemplate PromptTemplate::from_json(const nlohmann::json& j) {
  PromptTemplate t;
  t.id = j.at("id").get<std::string>();
  t.instruction = j.at("instruction").get<std::string>();
  for (const auto& s : j.value("shots", nlohmann::json::array())) {
    Shot shot{s.at("coarse").get<std::string>(), s.at("fine").get<std::string>(), std::nullopt};
    if (s.contains("pseudocode")) shot.pseudocode = s.at("pseudocode").get<std::string>();
    t.shots.push_back(std::move(shot));
  }
  t.requires_pseudocode = j.value("requires_pseudocode", false);
  t.requires_named_steps = j.value("requires_named_steps", false);
  t.validate();
  return t;
}

const PromptTemplate& TemplateCatalog::at(std::string_view id) const {
  for (const auto& t : templates)
    if (t.id == id) return t;
  throw PromptError(PromptErrc::BadTemplate, "no template '" + std::string(id) + "'");
}

TemplateCatalog load_templates(const std::filesystem::path& json_file) {
  std::ifstream in(json_file);
  if (!in) throw PromptError(PromptErrc::Io, "cannot read " + json_file.string());
  TemplateCatalog c;
  try {
    const auto j = nlohmann::json::parse(in);
    c.version = j.at("version").get<int>();
    for (const auto& t : j.at("templates")) c.templates.push_back(PromptTemplate::from_json(t));
  } catch (const nlohmann::json::exception& e) {
    throw PromptError(PromptErrc::BadTemplate, json_file.string() + ": " + e.what());
  }
  return c;
}

const TemplateCatalog& default_templates() {
  static const TemplateCatalog catalog = load_templates(data_dir() / "prompts" / "templates.json");
  return catalog;
}

std::string render_prompt(const PromptTemplate& t, std::string_view coarse) {
  const std::string query = stepmark::trim(coarse);
  if (query.empty()) throw PromptError(PromptErrc::EmptyCoarse, "empty coarse description");
  std::ostringstream out;
  out << t.instruction << "\n\n";
  for (std::size_t i = 0; i < t.shots.size(); ++i) {
    const Shot& s = t.shots[i];
    out << "Example " << i + 1 << ":\n";
    out << "Coarse-grained description: " << s.coarse << "\n";
    out << kQuerySlot << " " << s.fine << "\n";
    if (s.pseudocode) out << "Pseudo-code:\n" << *s.pseudocode << "\n";
    out << "\n";
  }
  if (!t.shots.empty()) out << "Now expand the following description in the same format.\n";
  out << "Coarse-grained description: " << query << "\n" << kQuerySlot;
  return out.str();
}

}  // namespace finemotion::prompt
