#include "finemotion/dataset/audit.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <utility>

namespace finemotion::dataset {
namespace {

constexpr std::array<std::pair<Alignment, const char*>, 3> kAlignments{
    {{Alignment::Zero, "zero"}, {Alignment::Partial, "partial"}, {Alignment::Perfect, "perfect"}}};
constexpr std::array<std::pair<AuditErrorKind, const char*>, 4> kKinds{{{AuditErrorKind::Inversion, "inversion"},
                                                                        {AuditErrorKind::Mismatch, "mismatch"},
                                                                        {AuditErrorKind::Redundancy, "redundancy"},
                                                                        {AuditErrorKind::Deficiency, "deficiency"}}};
constexpr std::array<std::pair<AuditSubtype, const char*>, 3> kSubtypes{
    {{AuditSubtype::BeginningPose, "beginning pose"},
     {AuditSubtype::EndingPose, "ending pose"},
     {AuditSubtype::InsufficientRepetition, "insufficient repetition"}}};

template <typename E, std::size_t N>
E parse(const std::array<std::pair<E, const char*>, N>& table, const std::string& s, const char* what) {
  for (const auto& [v, name] : table)
    if (s == name) return v;
  throw DatasetError(DatasetErrc::ParseFailure, std::string("unknown ") + what + " '" + s + "'");
}

template <typename E, std::size_t N>
std::string name_of(const std::array<std::pair<E, const char*>, N>& table, E v) {
  for (const auto& [k, name] : table)
    if (k == v) return name;
  return "unknown";
}

template <typename K, typename V>
V lookup(const std::map<K, V>& m, const K& k) {
  auto it = m.find(k);
  return it == m.end() ? V{} : it->second;
}

}  // namespace

std::string to_string(Alignment a) { return name_of(kAlignments, a); }
std::string to_string(AuditErrorKind k) { return name_of(kKinds, k); }
std::string to_string(AuditSubtype s) { return name_of(kSubtypes, s); }

nlohmann::json AuditRecord::to_json() const {
  nlohmann::json errs = nlohmann::json::array();
  for (const auto& e : errors) {
    nlohmann::json j = {{"kind", to_string(e.kind)}};
    if (e.subtype) j["subtype"] = to_string(*e.subtype);
    errs.push_back(j);
  }
  return {{"record_id", record_id}, {"alignment", to_string(alignment)}, {"errors", errs}};
}

AuditRecord AuditRecord::from_json(const nlohmann::json& j) {
  AuditRecord r;
  r.record_id = j.value("record_id", std::string());
  r.alignment = parse(kAlignments, j.at("alignment").get<std::string>(), "alignment");
  if (j.contains("errors"))
    for (const auto& e : j.at("errors")) {
      AuditError err;
      if (e.is_string()) {
        err.kind = parse(kKinds, e.get<std::string>(), "error kind");
      } else {
        err.kind = parse(kKinds, e.at("kind").get<std::string>(), "error kind");
        if (e.contains("subtype")) err.subtype = parse(kSubtypes, e.at("subtype").get<std::string>(), "subtype");
      }
      r.errors.push_back(err);
    }
  return r;
}

int AuditSummary::count(Alignment a) const { return lookup(alignment, a); }
int AuditSummary::count(AuditErrorKind k) const { return lookup(errors, k); }
int AuditSummary::count(AuditErrorKind k, AuditSubtype s) const {
  auto it = subtypes.find(k);
  return it == subtypes.end() ? 0 : lookup(it->second, s);
}

nlohmann::json AuditSummary::to_json() const {
  nlohmann::json align = nlohmann::json::object(), errs = nlohmann::json::object(), subs = nlohmann::json::object();
  for (const auto& [a, name] : kAlignments) align[name] = count(a);
  for (const auto& [k, name] : kKinds) {
    errs[name] = count(k);
    auto it = subtypes.find(k);
    if (it == subtypes.end()) continue;
    for (const auto& [s, n] : it->second) subs[name][to_string(s)] = n;
  }
  return {{"alignment", align}, {"errors", errs}, {"subtypes", subs}};
}

std::string AuditSummary::render() const {
  std::ostringstream out;
  out << "alignment zero : partial : perfect = " << count(Alignment::Zero) << " : " << count(Alignment::Partial)
      << " : " << count(Alignment::Perfect) << "\n";
  out << "Error / #            Type / #\n";
  for (const auto& [k, name] : kKinds) {
    std::string left = std::string(name) + " / " + std::to_string(count(k));
    left.resize(std::max<std::size_t>(left.size() + 1, 21), ' ');
    auto it = subtypes.find(k);
    if (it == subtypes.end() || it->second.empty()) {
      out << left << "-\n";
      continue;
    }
    bool first = true;
    for (const auto& [s, n] : it->second) {
      out << (first ? left : std::string(left.size(), ' ')) << to_string(s) << " / " << n << "\n";
      first = false;
    }
  }
  return out.str();
}

AuditSummary tally_audits(std::span<const AuditRecord> audits) {
  AuditSummary s;
  for (const auto& [a, name] : kAlignments) s.alignment[a] = 0;
  for (const auto& [k, name] : kKinds) s.errors[k] = 0;
  for (const auto& r : audits) {
    if (r.alignment == Alignment::Perfect && !r.errors.empty())
      throw DatasetError(DatasetErrc::InvariantViolation, "perfectly aligned record '" + r.record_id + "' has errors");
    ++s.alignment[r.alignment];
    if (r.alignment == Alignment::Zero) continue;
    for (const auto& e : r.errors) {
      ++s.errors[e.kind];
      if (e.subtype) ++s.subtypes[e.kind][*e.subtype];
    }
  }
  return s;
}

std::vector<AuditRecord> read_audits(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw DatasetError(DatasetErrc::Io, "cannot read " + jsonl.string());
  std::vector<AuditRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos)
      out.push_back(AuditRecord::from_json(nlohmann::json::parse(line)));
  return out;
}

}  // namespace finemotion::dataset
