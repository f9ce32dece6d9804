#include "finemotion/dataset/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "finemotion/motion/lr_words.hpp"

namespace finemotion::dataset {

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

std::string CorpusRecord::fine_plain() const {
  std::string out;
  for (const auto& body : stepmark::strip_steps(fine)) {
    if (!out.empty()) out.push_back(' ');
    out += body;
  }
  return out;
}

CorpusRecord mirror_record(const CorpusRecord& r) {
  CorpusRecord m = r;
  m.id = "M" + r.id;
  m.motion_id = "M" + r.motion_id;
  m.mirrored = !r.mirrored;
  m.coarse = motion::swap_lr_words(r.coarse);
  if (m.fine.coarse) m.fine.coarse = motion::swap_lr_words(*m.fine.coarse);
  for (auto& step : m.fine.steps) {
    step.name = motion::swap_lr_words(step.name);
    step.body = motion::swap_lr_words(step.body);
  }
  m.fine.source_id = m.id;
  m.motion = motion::mirror_motion(r.motion);
  return m;
}

std::vector<CorpusRecord> build_corpus(std::span<const prompt::ExpansionRecord> expansions,
                                       const std::filesystem::path& motion_dir, bool mirror, BuildReport* report) {
  std::vector<CorpusRecord> out;
  std::map<std::string, motion::MotionSequence> loaded;
  auto fail = [&](DatasetErrc code, const std::string& id, const std::string& why) {
    if (!report) throw DatasetError(code, id + ": " + why);
    report->dropped.push_back({id, why});
  };
  for (const auto& e : expansions) {
    if (report) ++report->input;
    CorpusRecord r;
    r.id = e.source_id;
    r.motion_id = e.motion_id.empty() ? e.source_id : e.motion_id;
    r.group = r.motion_id;
    r.coarse = e.coarse;
    try {
      r.fine = stepmark::parse_stepmarks(e.fine);
      r.fine.validate();
    } catch (const std::exception& ex) {
      fail(DatasetErrc::ParseFailure, e.source_id, ex.what());
      continue;
    }
    r.fine.source_id = r.id;
    if (!r.coarse.empty()) r.fine.coarse = r.coarse;

    auto it = loaded.find(r.motion_id);
    if (it == loaded.end()) {
      const auto path = motion_dir / (r.motion_id + ".json");
      if (!std::filesystem::exists(path)) {
        fail(DatasetErrc::MissingMotion, e.source_id, "no motion file " + path.string());
        continue;
      }
      try {
        it = loaded.emplace(r.motion_id, motion::load_motion(path)).first;
      } catch (const std::exception& ex) {
        fail(DatasetErrc::MissingMotion, e.source_id, ex.what());
        continue;
      }
    }
    r.motion = it->second;
    out.push_back(std::move(r));
    if (report) ++report->kept;
  }
  if (mirror) {
    const std::size_t n = out.size();
    out.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(mirror_record(out[i]));
  }
  return out;
}

SplitResult split_corpus(std::vector<CorpusRecord> records, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DatasetError(DatasetErrc::BadFraction, "test fraction must lie in (0, 1)");
  std::vector<std::string> groups;
  std::set<std::string> seen;
  for (const auto& r : records)
    if (seen.insert(r.group).second) groups.push_back(r.group);
  std::sort(groups.begin(), groups.end());
  std::mt19937_64 rng(seed);
  std::shuffle(groups.begin(), groups.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(groups.size())));
  const std::set<std::string> test_groups(groups.begin(), groups.begin() + static_cast<std::ptrdiff_t>(n_test));

  SplitResult out;
  for (auto& r : records) {
    r.split = test_groups.count(r.group) ? Split::Test : Split::Train;
    (r.split == Split::Test ? out.test : out.train).push_back(std::move(r));
  }
  return out;
}

void write_corpus(std::span<const CorpusRecord> records, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "motions");
  std::ofstream out(dir / "corpus.jsonl", std::ios::binary);
  if (!out) throw DatasetError(DatasetErrc::Io, "cannot write " + (dir / "corpus.jsonl").string());
  std::set<std::string> written;
  for (const auto& r : records) {
    if (written.insert(r.motion_id).second) motion::save_motion(r.motion, dir / "motions" / (r.motion_id + ".json"));
    const nlohmann::json j = {{"id", r.id},
                              {"motion_id", r.motion_id},
                              {"group", r.group},
                              {"coarse", r.coarse},
                              {"fine", stepmark::serialize(r.fine)},
                              {"mirrored", r.mirrored},
                              {"split", to_string(r.split)}};
    out << j.dump() << '\n';
  }
  if (!out) throw DatasetError(DatasetErrc::Io, "write failed under " + dir.string());
}

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / "corpus.jsonl");
  if (!in) throw DatasetError(DatasetErrc::Io, "cannot read " + (dir / "corpus.jsonl").string());
  std::vector<CorpusRecord> out;
  std::map<std::string, motion::MotionSequence> loaded;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    CorpusRecord r;
    r.id = j.at("id").get<std::string>();
    r.motion_id = j.at("motion_id").get<std::string>();
    r.group = j.value("group", r.motion_id);
    r.coarse = j.value("coarse", std::string());
    try {
      r.fine = stepmark::parse_stepmarks(j.at("fine").get<std::string>());
    } catch (const std::exception& ex) {
      throw DatasetError(DatasetErrc::ParseFailure, r.id + ": " + ex.what());
    }
    r.fine.source_id = r.id;
    if (!r.coarse.empty()) r.fine.coarse = r.coarse;
    r.mirrored = j.value("mirrored", false);
    r.split = j.value("split", std::string("train")) == "test" ? Split::Test : Split::Train;
    auto it = loaded.find(r.motion_id);
    if (it == loaded.end()) {
      const auto path = dir / "motions" / (r.motion_id + ".json");
      if (!std::filesystem::exists(path)) throw DatasetError(DatasetErrc::MissingMotion, r.id + ": " + path.string());
      it = loaded.emplace(r.motion_id, motion::load_motion(path)).first;
    }
    r.motion = it->second;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace finemotion::dataset
