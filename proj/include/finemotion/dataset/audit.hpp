#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/dataset/corpus.hpp"

namespace finemotion::dataset {

enum class Alignment { Zero, Partial, Perfect };
enum class AuditErrorKind { Inversion, Mismatch, Redundancy, Deficiency };
enum class AuditSubtype { BeginningPose, EndingPose, InsufficientRepetition };

std::string to_string(Alignment a);
std::string to_string(AuditErrorKind k);
std::string to_string(AuditSubtype s);

struct AuditError {
  AuditErrorKind kind = AuditErrorKind::Mismatch;
  std::optional<AuditSubtype> subtype;
};

struct AuditRecord {
  std::string record_id;
  Alignment alignment = Alignment::Partial;
  std::vector<AuditError> errors;

  nlohmann::json to_json() const;
  // Errors may be given as {"kind", "subtype"} objects or bare kind strings.
  static AuditRecord from_json(const nlohmann::json& j);
};

struct AuditSummary {
  std::map<Alignment, int> alignment;
  std::map<AuditErrorKind, int> errors;
  std::map<AuditErrorKind, std::map<AuditSubtype, int>> subtypes;

  int count(Alignment a) const;
  int count(AuditErrorKind k) const;
  int count(AuditErrorKind k, AuditSubtype s) const;
  nlohmann::json to_json() const;
  // Two-column "Error / #  |  Type / #" layout.
  std::string render() const;
};

// Errors of zero-alignment records are ignored. Throws InvariantViolation
// for a perfect record carrying errors.
AuditSummary tally_audits(std::span<const AuditRecord> audits);

std::vector<AuditRecord> read_audits(const std::filesystem::path& jsonl);

}  // namespace finemotion::dataset
