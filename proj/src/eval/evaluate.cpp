#include "finemotion/eval/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace finemotion::eval {
namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string cell(const EvalReport& r, const std::string& key) {
  auto it = r.metrics.find(key);
  if (it == r.metrics.end()) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f ±%.3f", it->second.mean, it->second.ci95);
  return buf;
}

// Display columns of a UTF-8 string (one per code point).
std::size_t columns(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json metrics_json = nlohmann::json::object();
  for (const auto& [name, s] : metrics) metrics_json[name] = eval::to_json(s);
  return {{"metrics", metrics_json}, {"items", items}, {"fid_regularized", fid_regularized}};
}

EvalReport evaluate(const ContrastiveModel& evaluator, std::span<const EvalItem> items, const Generator& generate,
                    const EvalOptions& opts) {
  if (opts.runs < 1) throw EvalError(EvalErrc::BadConfig, "runs must be >= 1");
  const int n = static_cast<int>(items.size());
  if (n < 2) throw EvalError(EvalErrc::TooFewSamples, "evaluation needs at least 2 items");

  std::vector<motion::MotionSequence> real;
  std::vector<std::string> texts;
  for (const auto& it : items) {
    real.push_back(*it.real);
    texts.push_back(it.eval_text);
  }
  const EvalFeatures real_feats = evaluator.encode_motions(real);
  const EvalFeatures text_feats = evaluator.encode_texts(texts);
  const int pairs = std::min(opts.diversity_pairs, n / 2);
  std::vector<int> groups;
  std::map<std::string, int> group_of;
  for (const auto& t : texts) groups.push_back(group_of.emplace(t, static_cast<int>(group_of.size())).first->second);

  std::map<std::string, std::vector<double>> values;
  EvalReport report;
  report.items = n;
  for (int run = 0; run < opts.runs; ++run) {
    std::vector<diffusion::GenerationRequest> reqs;
    for (int i = 0; i < n; ++i)
      reqs.push_back({items[static_cast<std::size_t>(i)].text, real[static_cast<std::size_t>(i)].frames(),
                      mix(opts.seed ^ mix(static_cast<std::uint64_t>(run) * 1000003ULL + static_cast<std::uint64_t>(i)))});
    const std::vector<motion::MotionSequence> gen = generate(reqs);
    if (static_cast<int>(gen.size()) != n) throw EvalError(EvalErrc::ShapeMismatch, "generator returned wrong count");
    const EvalFeatures gen_feats = evaluator.encode_motions(gen);

    const FidResult f = fid_detailed(real_feats.rows, gen_feats.rows);
    report.fid_regularized |= f.regularized;
    values["fid"].push_back(f.value);
    const auto tops = r_precision(text_feats.rows, gen_feats.rows, opts.max_k, opts.negatives, opts.seed, groups);
    for (std::size_t k = 0; k < tops.size(); ++k) values["top" + std::to_string(k + 1)].push_back(tops[k]);
    values["diversity"].push_back(diversity(gen_feats.rows, pairs, opts.seed));
  }
  for (const auto& [name, v] : values) report.metrics[name] = summarize(v);
  return report;
}

EvalReport evaluate_model(const diffusion::FineMotionModel& model, const ContrastiveModel& evaluator,
                          std::span<const EvalItem> items, const EvalOptions& opts) {
  return evaluate(evaluator, items,
                  [&](std::span<const diffusion::GenerationRequest> reqs) { return diffusion::sample(model, reqs); },
                  opts);
}

std::string render_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::size_t name_width = 6;
  for (const auto& [name, r] : rows) name_width = std::max(name_width, columns(name));
  std::ostringstream out;
  auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                  const std::string& e) {
    out << a << std::string(name_width - std::min(name_width, columns(a)) + 2, ' ');
    for (const std::string* s : {&b, &c, &d, &e}) {
      const std::size_t shown = columns(*s);
      out << *s << std::string(shown < 16 ? 16 - shown : 1, ' ');
    }
    out << '\n';
  };
  line("Method", "FID↓", "Top1↑", "Top2↑", "Diversity→");
  for (const auto& [name, r] : rows)
    line(name, cell(r, "fid"), cell(r, "top1"), cell(r, "top2"), cell(r, "diversity"));
  return out.str();
}

}  // namespace finemotion::eval
