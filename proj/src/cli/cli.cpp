#include "finemotion/cli/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "finemotion/common/seed.hpp"
#include "finemotion/dataset/audit.hpp"
#include "finemotion/dataset/corpus.hpp"
#include "finemotion/dataset/stats.hpp"
#include "finemotion/diffusion/model.hpp"
#include "finemotion/prompt/expand.hpp"
#include "finemotion/prompt/record.hpp"
#include "finemotion/prompt/template.hpp"
#include "finemotion/stepmark/stepmark.hpp"

namespace finemotion::cli {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json eval_options_json(const eval::EvalOptions& o) {
  return {{"runs", o.runs}, {"max_k", o.max_k}, {"negatives", o.negatives}, {"diversity_pairs", o.diversity_pairs},
          {"seed", o.seed}};
}

eval::EvalOptions eval_options_from(const nlohmann::json& j, eval::EvalOptions o) {
  o.runs = j.value("runs", o.runs);
  o.max_k = j.value("max_k", o.max_k);
  o.negatives = j.value("negatives", o.negatives);
  o.diversity_pairs = j.value("diversity_pairs", o.diversity_pairs);
  o.seed = j.value("seed", o.seed);
  if (o.runs < 1 || o.max_k < 1 || o.negatives < 1) throw UsageError("eval: runs, max_k and negatives must be >= 1");
  return o;
}

nlohmann::json synth_json(const dataset::SyntheticConfig& c) {
  nlohmann::json fams = nlohmann::json::array();
  for (auto f : c.families) fams.push_back(dataset::to_string(f));
  return {{"motions", c.motions}, {"families", fams},  {"min_frames", c.min_frames},
          {"max_frames", c.max_frames}, {"noise", c.noise}, {"single_repetition", c.single_repetition}, {"seed", c.seed}};
}

dataset::SyntheticConfig synth_from(const nlohmann::json& j, dataset::SyntheticConfig c) {
  c.motions = j.value("motions", c.motions);
  if (j.contains("families")) {
    c.families.clear();
    for (const auto& f : j.at("families")) c.families.push_back(dataset::family_from_string(f.get<std::string>()));
  }
  c.min_frames = j.value("min_frames", c.min_frames);
  c.max_frames = j.value("max_frames", c.max_frames);
  c.noise = j.value("noise", c.noise);
  c.single_repetition = j.value("single_repetition", c.single_repetition);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json render_json(const render::RenderConfig& c) {
  return {{"width", c.width},     {"height", c.height},   {"half_width", c.half_width}, {"y_center", c.y_center},
          {"bone_px", c.bone_px}, {"joint_px", c.joint_px}, {"ground", c.ground}};
}

render::RenderConfig render_from(const nlohmann::json& j, render::RenderConfig c) {
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.half_width = j.value("half_width", c.half_width);
  c.y_center = j.value("y_center", c.y_center);
  c.bone_px = j.value("bone_px", c.bone_px);
  c.joint_px = j.value("joint_px", c.joint_px);
  c.ground = j.value("ground", c.ground);
  c.validate();
  return c;
}

struct CorpusSplit {
  std::vector<dataset::CorpusRecord> train;
  std::vector<dataset::CorpusRecord> test;
};

CorpusSplit load_corpus(const fs::path& dir) {
  if (!fs::exists(dir / "corpus.jsonl")) throw UsageError("no corpus.jsonl under " + dir.string());
  CorpusSplit s;
  for (auto& r : dataset::read_corpus(dir)) (r.split == dataset::Split::Test ? s.test : s.train).push_back(std::move(r));
  if (s.train.empty()) throw UsageError("corpus has no training records");
  return s;
}

std::vector<diffusion::TrainSample> train_samples(const std::vector<dataset::CorpusRecord>& records) {
  std::vector<diffusion::TrainSample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.motion, {r.coarse, r.fine}});
  return out;
}

std::vector<eval::EvalItem> eval_items(const std::vector<dataset::CorpusRecord>& records) {
  std::vector<eval::EvalItem> out;
  for (const auto& r : records) out.push_back({{r.coarse, r.fine}, r.coarse, &r.motion});
  return out;
}

std::unique_ptr<eval::ContrastiveModel> train_evaluator(const std::vector<dataset::CorpusRecord>& train,
                                                        const eval::ContrastiveConfig& cfg) {
  std::vector<eval::ContrastivePair> pairs;
  for (const auto& r : train) pairs.push_back({r.coarse, &r.motion});
  return eval::train_contrastive(pairs, cfg);
}

struct TrainOutcome {
  std::unique_ptr<diffusion::FineMotionModel> model;
  diffusion::TrainLog log;
};

TrainOutcome train_model(const RunConfig& rc, const std::vector<dataset::CorpusRecord>& train, std::ostream& out) {
  TrainOutcome t;
  t.model = std::make_unique<diffusion::FineMotionModel>(rc.model);
  const auto samples = train_samples(train);
  const int every = std::max(1, rc.train.steps / 10);
  t.log = diffusion::fit(*t.model, samples, rc.train, [&](int step, const diffusion::StepReport& r) {
    if ((step + 1) % every == 0 || step + 1 == rc.train.steps)
      out << "  step " << step + 1 << "/" << rc.train.steps << " loss " << r.loss << "\n";
  });
  return t;
}

nlohmann::json train_log_json(const diffusion::TrainLog& log) {
  return {{"losses", log.losses}, {"steps", log.losses.size()}};
}

std::string format_report(const prompt::ExpansionReport& r) {
  std::ostringstream s;
  s << "valid " << r.valid << ", sorry_dropped " << r.sorry_dropped << ", nonconforming_dropped "
    << r.nonconforming_dropped << ", transport_failed " << r.transport_failed << ", resumed " << r.resumed;
  return s.str();
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.train.steps = 2000;
  c.train.batch = 32;
  c.train.lr = 3e-3;
  c.evaluator.steps = 1500;
  return c;
}

void RunConfig::merge(const nlohmann::json& j) {
  if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("model")) {
    nlohmann::json m = model.to_json();
    m.merge_patch(j.at("model"));
    model = diffusion::ModelConfig::from_json(m);
  }
  if (j.contains("train")) {
    nlohmann::json t = train.to_json();
    t.merge_patch(j.at("train"));
    train = diffusion::TrainConfig::from_json(t);
  }
  if (j.contains("evaluator")) {
    nlohmann::json e = evaluator.to_json();
    e.merge_patch(j.at("evaluator"));
    evaluator = eval::ContrastiveConfig::from_json(e);
  }
  if (j.contains("eval")) eval = eval_options_from(j.at("eval"), eval);
  if (j.contains("client")) {
    nlohmann::json c = client.to_json();
    c.merge_patch(j.at("client"));
    client = prompt::LlmClientConfig::from_json(c);
  }
  template_id = j.value("template", template_id);
  if (j.contains("build")) {
    build.mirror = j.at("build").value("mirror", build.mirror);
    build.test_fraction = j.at("build").value("test_fraction", build.test_fraction);
  }
  if (j.contains("synth")) synth = synth_from(j.at("synth"), synth);
  if (j.contains("render")) render = render_from(j.at("render"), render);
  if (j.contains("paths")) paths = j.at("paths").get<std::map<std::string, std::string>>();
}

void RunConfig::apply_seed() {
  model.seed = derive_seed(seed, 1);
  train.seed = derive_seed(seed, 2);
  evaluator.seed = derive_seed(seed, 3);
  eval.seed = derive_seed(seed, 4);
  synth.seed = derive_seed(seed, 5);
}

nlohmann::json RunConfig::to_json() const {
  return {{"command", command},
          {"seed", seed},
          {"model", model.to_json()},
          {"train", train.to_json()},
          {"evaluator", evaluator.to_json()},
          {"eval", eval_options_json(eval)},
          {"client", client.to_json()},
          {"template", template_id},
          {"build", {{"mirror", build.mirror}, {"test_fraction", build.test_fraction}}},
          {"synth", synth_json(synth)},
          {"render", render_json(render)},
          {"paths", paths}};
}

void RunConfig::write(const fs::path& out_dir) const { write_json(out_dir / "run_config.json", to_json()); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fine-grained text-to-motion pipeline: expansion, corpus building, training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run configuration (sections: model, train, evaluator, eval, ...)");
  app.add_option("--seed", seed, "Global seed; every component seed derives from it");

  std::string input, tmpl, fixtures, expansions_path, motions_dir, corpus_dir, model_path, evaluator_path, motion_path;
  std::string text, fine_text, variant, format = "png_frames";
  std::vector<std::string> ablations;
  std::optional<int> runs, steps, motions, frames;
  std::optional<double> test_fraction;
  bool no_mirror = false;

  auto* synth = app.add_subcommand("synth", "Write a synthetic stick-figure corpus and offline expansion fixtures");
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--motions", motions, "Number of motions");

  auto* expand = app.add_subcommand("expand", "Expand coarse descriptions into step-marked fine texts");
  expand->add_option("--input", input, "JSON Lines of {source_id, coarse}")->required();
  expand->add_option("--template", tmpl, "P1..P8");
  expand->add_option("--offline-fixtures", fixtures, "Replay canned responses from DIR/responses.jsonl");
  expand->add_option("--out", out_dir)->required();

  auto* build = app.add_subcommand("build", "Pair expansions with motions, mirror and split");
  build->add_option("--expansions", expansions_path)->required();
  build->add_option("--motions", motions_dir)->required();
  build->add_option("--test-fraction", test_fraction);
  build->add_flag("--no-mirror", no_mirror);
  build->add_option("--out", out_dir)->required();

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  stats->add_option("--corpus", corpus_dir)->required();
  stats->add_option("--out", out_dir);

  auto* audit = app.add_subcommand("audit", "Tally alignment audit records");
  audit->add_option("--input", input)->required();
  audit->add_option("--out", out_dir);

  auto* train = app.add_subcommand("train", "Train a text-to-motion model on the corpus train split");
  train->add_option("--corpus", corpus_dir)->required();
  train->add_option("--variant", variant);
  train->add_option("--ablation", ablations, "Repeatable");
  train->add_option("--steps", steps);
  train->add_option("--out", out_dir)->required();

  auto* sample = app.add_subcommand("sample", "Generate one motion");
  sample->add_option("--model", model_path)->required();
  sample->add_option("--text", text)->required();
  sample->add_option("--fine", fine_text, "Step-marked fine text");
  sample->add_option("--frames", frames);
  sample->add_option("--out", out_dir)->required();

  auto* evalc = app.add_subcommand("eval", "Evaluate a model on the corpus test split");
  evalc->add_option("--model", model_path)->required();
  evalc->add_option("--corpus", corpus_dir)->required();
  evalc->add_option("--evaluator", evaluator_path, "Trained evaluator; trained on the train split when absent");
  evalc->add_option("--ablation", ablations, "Inference-only ablations applied to the loaded model");
  evalc->add_option("--runs", runs);
  evalc->add_option("--out", out_dir)->required();

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the base model and its seven ablations");
  ablate->add_option("--corpus", corpus_dir)->required();
  ablate->add_option("--ablation", ablations, "Restrict to these ablations (repeatable)");
  ablate->add_option("--steps", steps);
  ablate->add_option("--runs", runs);
  ablate->add_option("--out", out_dir)->required();

  auto* renderc = app.add_subcommand("render", "Render a motion as stick-figure PNG frames or an animated PNG");
  renderc->add_option("--motion", motion_path)->required();
  renderc->add_option("--format", format)->check(CLI::IsMember({"png_frames", "animated"}));
  renderc->add_option("--out", out_dir)->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  RunConfig rc = RunConfig::defaults();
  CLI::App* cmd = app.get_subcommands().front();
  rc.command = cmd->get_name();
  try {
    if (!config_path.empty()) rc.merge(read_json(config_path));
    if (seed) rc.seed = *seed;
    rc.apply_seed();
    if (!tmpl.empty()) rc.template_id = tmpl;
    if (!fixtures.empty()) rc.client.offline_fixtures = fixtures;
    if (!variant.empty()) rc.model.variant = diffusion::variant_from_string(variant);
    if (cmd == train)
      for (const auto& a : ablations) rc.model.ablations.insert(diffusion::ablation_from_string(a));
    if (steps) rc.train.steps = *steps;
    if (runs) rc.eval.runs = *runs;
    if (motions) rc.synth.motions = *motions;
    if (test_fraction) rc.build.test_fraction = *test_fraction;
    if (no_mirror) rc.build.mirror = false;
    rc.model.validate();
    rc.train.validate();
    rc.evaluator.validate();
    rc.client.validate();
    for (auto [key, value] : {std::pair{"input", input}, {"fixtures", fixtures}, {"expansions", expansions_path},
                              {"motions", motions_dir}, {"corpus", corpus_dir}, {"model", model_path},
                              {"evaluator", evaluator_path}, {"motion", motion_path}, {"out", out_dir}})
      if (!value.empty()) rc.paths[key] = fs::absolute(value).string();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  const fs::path out_path = out_dir;

  try {
    if (cmd == synth) {
      const auto samples = dataset::make_synthetic_corpus(rc.synth);
      dataset::write_synthetic(samples, out_path);
      rc.write(out_path);
      out << "wrote " << samples.size() << " motions to " << out_path.string() << "\n";
      return kOk;
    }

    if (cmd == expand) {
      const auto items = prompt::read_coarse_items(input);
      const auto& t = prompt::default_templates().at(rc.template_id);
      auto client = prompt::make_client(rc.client);
      fs::create_directories(out_path);
      rc.write(out_path);
      const bool resume = fs::exists(out_path / "checkpoint.json");
      prompt::JsonlSink sink(out_path / "expansions.jsonl", resume);
      prompt::CorpusRunOptions opts;
      opts.client = rc.client;
      opts.checkpoint = out_path / "checkpoint.json";
      opts.exchange_log = out_path / "exchanges.jsonl";
      const auto report = prompt::expand_corpus(items, t, *client, sink, opts);
      write_json(out_path / "report.json", report.to_json());
      out << format_report(report) << "\n";
      if (report.transport_failed > 0) return kTransport;
      if (report.valid == 0 && report.resumed == 0 && !items.empty()) return kAllDropped;
      return kOk;
    }

    if (cmd == build) {
      const auto expansions = prompt::read_expansions(expansions_path);
      dataset::BuildReport report;
      auto records = dataset::build_corpus(expansions, motions_dir, rc.build.mirror, &report);
      if (records.empty()) {
        err << "error: no record survived pairing\n";
        return kAllDropped;
      }
      auto split = dataset::split_corpus(std::move(records), rc.build.test_fraction, derive_seed(rc.seed, 6));
      std::vector<dataset::CorpusRecord> all = std::move(split.train);
      all.insert(all.end(), std::make_move_iterator(split.test.begin()), std::make_move_iterator(split.test.end()));
      dataset::write_corpus(all, out_path);
      nlohmann::json dropped = nlohmann::json::array();
      for (const auto& d : report.dropped) dropped.push_back({{"source_id", d.source_id}, {"reason", d.reason}});
      write_json(out_path / "build_report.json", {{"input", report.input}, {"kept", report.kept}, {"dropped", dropped}});
      rc.write(out_path);
      const auto n_test = std::count_if(all.begin(), all.end(), [](const auto& r) { return r.split == dataset::Split::Test; });
      out << "corpus: " << all.size() << " records (" << all.size() - n_test << " train, " << n_test << " test), "
          << report.dropped.size() << " dropped\n";
      return kOk;
    }

    if (cmd == stats) {
      const auto split = load_corpus(corpus_dir);
      std::vector<dataset::CorpusRecord> all = split.train;
      all.insert(all.end(), split.test.begin(), split.test.end());
      dataset::RuleTagger tagger;
      std::vector<std::pair<std::string, dataset::CorpusStats>> rows = {
          {"all", dataset::compute_stats(all, tagger)},
          {"train", dataset::compute_stats(split.train, tagger)},
          {"test", dataset::compute_stats(split.test, tagger)}};
      out << dataset::render_stats_table(rows);
      if (!out_path.empty()) {
        nlohmann::json j;
        for (const auto& [name, s] : rows) j[name] = s.to_json();
        write_json(out_path / "stats.json", j);
        rc.write(out_path);
      }
      return kOk;
    }

    if (cmd == audit) {
      const auto summary = dataset::tally_audits(dataset::read_audits(input));
      out << summary.render();
      if (!out_path.empty()) {
        write_json(out_path / "audit.json", summary.to_json());
        rc.write(out_path);
      }
      return kOk;
    }

    if (cmd == train) {
      const auto split = load_corpus(corpus_dir);
      fs::create_directories(out_path);
      rc.write(out_path);
      out << "training " << diffusion::to_string(rc.model.variant) << " on " << split.train.size() << " records\n";
      auto t = train_model(rc, split.train, out);
      t.model->save(out_path / "model.ckpt");
      write_json(out_path / "train_log.json", train_log_json(t.log));
      out << "saved " << (out_path / "model.ckpt").string() << "\n";
      return kOk;
    }

    if (cmd == sample) {
      auto model = diffusion::FineMotionModel::load(model_path);
      diffusion::GenerationRequest req;
      req.text.coarse = text;
      if (!fine_text.empty()) req.text.fine = stepmark::parse_stepmarks(fine_text);
      if (!req.text.fine && model->config().variant != diffusion::Variant::MotionDiffuseCoarse)
        throw UsageError(diffusion::to_string(model->config().variant) + " needs --fine");
      req.frames = frames.value_or(model->config().max_frames);
      req.seed = derive_seed(rc.seed, 7);
      const auto m = diffusion::sample(*model, req);
      fs::create_directories(out_path);
      motion::save_motion(m, out_path / "sample.json");
      rc.write(out_path);
      out << "wrote " << (out_path / "sample.json").string() << " (" << m.frames() << " frames)\n";
      return kOk;
    }

    if (cmd == evalc) {
      const auto split = load_corpus(corpus_dir);
      if (split.test.empty()) throw UsageError("corpus has no test records");
      auto model = diffusion::FineMotionModel::load(model_path);
      if (!ablations.empty()) {
        auto cfg = model->config();
        for (const auto& a : ablations) cfg.ablations.insert(diffusion::ablation_from_string(a));
        model = diffusion::rebind(*model, cfg);
      }
      fs::create_directories(out_path);
      rc.write(out_path);
      std::unique_ptr<eval::ContrastiveModel> evaluator;
      if (evaluator_path.empty()) {
        evaluator = train_evaluator(split.train, rc.evaluator);
        evaluator->save(out_path / "evaluator.ckpt");
      } else {
        evaluator = eval::ContrastiveModel::load(evaluator_path);
      }
      const auto items = eval_items(split.test);
      const auto report = eval::evaluate_model(*model, *evaluator, items, rc.eval);
      write_json(out_path / "report.json", report.to_json());
      const std::string table = eval::render_table({{diffusion::to_string(model->config().variant), report}});
      write_text(out_path / "table.txt", table);
      out << table;
      return kOk;
    }

    if (cmd == ablate) {
      const auto split = load_corpus(corpus_dir);
      if (split.test.empty()) throw UsageError("corpus has no test records");
      fs::create_directories(out_path);
      rc.write(out_path);
      std::vector<diffusion::Ablation> chosen;
      for (const auto& a : ablations) chosen.push_back(diffusion::ablation_from_string(a));
      if (chosen.empty()) chosen = diffusion::all_ablations();

      out << "training evaluator\n";
      const auto evaluator = train_evaluator(split.train, rc.evaluator);
      evaluator->save(out_path / "evaluator.ckpt");
      const auto items = eval_items(split.test);

      std::vector<std::pair<std::string, eval::EvalReport>> rows;
      nlohmann::json report = {{"rows", nlohmann::json::array()}};
      std::unique_ptr<diffusion::FineMotionModel> base;
      auto run_row = [&](const std::string& name, diffusion::ModelConfig cfg, bool inference_only) {
        nlohmann::json row = {{"name", name}, {"config", cfg.to_json()}};
        try {
          out << "== " << name << "\n";
          std::unique_ptr<diffusion::FineMotionModel> model;
          if (inference_only && base) {
            model = diffusion::rebind(*base, cfg);
          } else {
            RunConfig row_cfg = rc;
            row_cfg.model = cfg;
            auto t = train_model(row_cfg, split.train, out);
            model = std::move(t.model);
            fs::create_directories(out_path / name);
            model->save(out_path / name / "model.ckpt");
            write_json(out_path / name / "train_log.json", train_log_json(t.log));
          }
          auto r = eval::evaluate_model(*model, *evaluator, items, rc.eval);
          row["report"] = r.to_json();
          rows.emplace_back(name, std::move(r));
          if (!base && cfg.ablations.empty()) base = std::move(model);
        } catch (const std::exception& e) {
          row["error"] = e.what();
          err << "row " << name << " failed: " << e.what() << "\n";
        }
        report["rows"].push_back(row);
      };
      run_row(diffusion::to_string(rc.model.variant), rc.model, false);
      for (auto a : chosen) {
        auto cfg = rc.model;
        cfg.ablations.insert(a);
        const bool inference_only = a == diffusion::Ablation::DelFirstLastInput || a == diffusion::Ablation::DelInnerInput;
        run_row(diffusion::to_string(a), cfg, inference_only);
      }
      const std::string table = eval::render_table(rows);
      write_json(out_path / "ablation.json", report);
      write_text(out_path / "table.txt", table);
      out << table;
      return kOk;
    }

    if (cmd == renderc) {
      const auto m = motion::load_motion(motion_path);
      const auto paths = render::write_render(
          m, out_path, format == "animated" ? render::RenderFormat::Animated : render::RenderFormat::PngFrames, rc.render);
      rc.write(out_path);
      out << "wrote " << paths.size() << " file(s) to " << out_path.string() << "\n";
      return kOk;
    }
  } catch (const prompt::PromptError& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == prompt::PromptErrc::TransportError ? kTransport : kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace finemotion::cli
