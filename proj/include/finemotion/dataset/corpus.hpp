#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/common/error.hpp"
#include "finemotion/motion/motion.hpp"
#include "finemotion/prompt/record.hpp"
#include "finemotion/stepmark/stepmark.hpp"

namespace finemotion::dataset {

enum class DatasetErrc { MissingMotion, ParseFailure, InvariantViolation, BadFraction, Io };
using DatasetError = Error<DatasetErrc>;

enum class Split { Train, Test };
std::string to_string(Split s);

struct CorpusRecord {
  std::string id;         // description id; twins are "M" + id
  std::string motion_id;  // twins are "M" + motion_id
  std::string group;      // source motion id, shared by a twin and its source
  std::string coarse;
  stepmark::StepMarkedText fine;
  bool mirrored = false;
  Split split = Split::Train;
  motion::MotionSequence motion;

  // Fine bodies joined by single spaces (step tags stripped).
  std::string fine_plain() const;
};

// Mirrored twin: mirror_motion on the motion, swap_lr_words on the coarse
// text and on every step name and body.
CorpusRecord mirror_record(const CorpusRecord& r);

struct DroppedRecord {
  std::string source_id;
  std::string reason;
};

struct BuildReport {
  int input = 0;
  int kept = 0;
  std::vector<DroppedRecord> dropped;
};

// Pairs each expansion with `motion_dir/<motion_id>.json`. Without a report,
// the first failure throws MissingMotion or ParseFailure; with one, failing
// records are skipped and listed.
std::vector<CorpusRecord> build_corpus(std::span<const prompt::ExpansionRecord> expansions,
                                       const std::filesystem::path& motion_dir, bool mirror,
                                       BuildReport* report = nullptr);

struct SplitResult {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> test;
};

// Motion-level split: round(test_fraction * groups) groups go to test.
// Record order inside each side follows the input order.
SplitResult split_corpus(std::vector<CorpusRecord> records, double test_fraction, std::uint64_t seed);

// `dir/corpus.jsonl` plus `dir/motions/<motion_id>.{json,bin}`.
void write_corpus(std::span<const CorpusRecord> records, const std::filesystem::path& dir);
std::vector<CorpusRecord> read_corpus(const std::filesystem::path& dir);

}  // namespace finemotion::dataset
