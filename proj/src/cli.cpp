#include "prefalign/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "prefalign/checkpoint.hpp"
#include "prefalign/config.hpp"
#include "prefalign/report.hpp"

#ifndef PREFALIGN_DEFAULT_DATA_DIR
#define PREFALIGN_DEFAULT_DATA_DIR "data"
#endif

namespace prefalign::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using Model = model::Model<double>;

std::string default_fixtures_path() { return std::string(PREFALIGN_DEFAULT_DATA_DIR) + "/fixtures/paper_values.json"; }

namespace {

struct Options {
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool mock_providers = false;
  bool fixtures_only = false;
};

// Artifact locations inside a run directory.
namespace artifact {
constexpr const char* kQa = "qa.jsonl";
constexpr const char* kPairs = "pairs.jsonl";
constexpr const char* kSkipped = "pairs_skipped.jsonl";
constexpr const char* kTrain = "split/train.jsonl";
constexpr const char* kVal = "split/val.jsonl";
constexpr const char* kTest = "split/test.jsonl";
constexpr const char* kReference = "train/reference.ckpt";
constexpr const char* kPolicy = "train/policy.ckpt";
constexpr const char* kSteps = "train/steps.csv";
constexpr const char* kValidation = "train/validation.csv";
constexpr const char* kTrainSummary = "train/summary.json";
constexpr const char* kBaselineRows = "eval/baseline_rows.csv";
constexpr const char* kDpoRows = "eval/dpo_rows.csv";
constexpr const char* kAnswers = "eval/answers.jsonl";
constexpr const char* kEvalSummary = "eval/summary.json";
constexpr const char* kReportMd = "report/report.md";
constexpr const char* kReportCsv = "report/report.csv";
constexpr const char* kChart = "report/benchmark.svg";
constexpr const char* kManifest = "manifest.json";
}  // namespace artifact

class Run {
 public:
  Run(std::string command, config::RunConfig cfg, std::ostream& out)
      : command_(std::move(command)), cfg_(std::move(cfg)), root_(cfg_.out_dir), out_(out) {}

  const config::RunConfig& cfg() const { return cfg_; }
  std::ostream& out() { return out_; }
  std::string path(const std::string& rel) const { return (root_ / rel).string(); }

  // Upstream artifacts are checked before anything is written.
  void require(const std::string& rel, std::string_view producer) const {
    if (!fs::is_regular_file(root_ / rel)) {
      throw ValidationError("missing upstream artifact " + path(rel) + " (run `prefalign " + std::string(producer) +
                            "` first)");
    }
  }

  void input_file(const std::string& label, const std::string& file) { inputs_[label] = hash_file(file); }
  void input(const std::string& rel) { inputs_[rel] = hash_file(path(rel)); }

  void write(const std::string& rel, std::string_view contents) {
    const auto p = root_ / rel;
    fs::create_directories(p.parent_path());
    write_file(p.string(), contents);
    outputs_[rel] = hex64(fnv1a64(contents));
  }

  void record_output(const std::string& rel) { outputs_[rel] = hash_file(path(rel)); }

  void prepare_dirs(std::initializer_list<const char*> subdirs) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw IoError("cannot create output directory " + root_.string() + ": " + ec.message());
    for (const auto* d : subdirs) fs::create_directories(root_ / d);
  }

  void finish(bool mock_providers, ordered_json extra = ordered_json::object()) {
    ordered_json manifest = ordered_json::object();
    const auto mpath = path(artifact::kManifest);
    if (fs::is_regular_file(mpath)) {
      try {
        manifest = ordered_json::parse(read_file(mpath));
      } catch (const nlohmann::json::exception&) {
        manifest = ordered_json::object();
      }
    }
    manifest["config_hash"] = cfg_.hash();
    manifest["seed"] = cfg_.seed;
    ordered_json config = ordered_json::object();
    for (const auto& [k, v] : cfg_.resolved) {
      if (k != "run.out_dir") config[k] = v;
    }
    manifest["config"] = config;
    ordered_json entry;
    entry["config_hash"] = cfg_.hash();
    entry["seed"] = cfg_.seed;
    entry["mock_providers"] = mock_providers;
    entry["inputs"] = inputs_;
    entry["outputs"] = outputs_;
    for (auto& [k, v] : extra.items()) entry[k] = v;
    entry["finished_at"] = timestamp();
    manifest["commands"][command_] = entry;
    fs::create_directories(root_);
    write_file(mpath, manifest.dump(2) + "\n");
  }

 private:
  static std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
  }

  std::string command_;
  config::RunConfig cfg_;
  fs::path root_;
  std::ostream& out_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
};

// ---------------------------------------------------------------------------
// Providers

struct ProviderSet {
  std::unique_ptr<providers::Embedder> ss_e, ss_t;
  std::unique_ptr<providers::Judge> judge;
  std::unique_ptr<providers::NliClassifier> nli;
  std::unique_ptr<providers::FormalityClassifier> formality;
};

const providers::ProviderConfig& need(const std::optional<providers::ProviderConfig>& slot, const char* key) {
  if (!slot) {
    throw ConfigError(std::string("provider '") + key + "' is not configured (set providers." + key +
                      ".endpoint or pass --mock-providers)");
  }
  slot->validate();
  if (slot->endpoint.empty()) throw ConfigError(std::string("providers.") + key + ".endpoint is required");
  return *slot;
}

ProviderSet make_eval_providers(const config::RunConfig& cfg, bool mock) {
  ProviderSet p;
  if (mock) {
    const auto id = [](const std::optional<providers::ProviderConfig>& s, std::string_view fallback) {
      return "mock:" + (s ? s->model_id : std::string(fallback));
    };
    p.ss_e = std::make_unique<providers::MockEmbedder>(id(cfg.providers.embedding_e, providers::kDefaultAdaEmbedding));
    p.ss_t = std::make_unique<providers::MockEmbedder>(
        id(cfg.providers.embedding_t, providers::kDefaultSentenceEmbedding));
    p.judge = std::make_unique<providers::MockJudge>();
    p.nli = std::make_unique<providers::MockNli>();
    p.formality = std::make_unique<providers::MockFormality>();
    return p;
  }
  providers::set_max_in_flight(cfg.providers.max_in_flight);
  p.ss_e = providers::make_http_embedder(providers::http_options(need(cfg.providers.embedding_e, "embedding_e")));
  p.ss_t = providers::make_http_embedder(providers::http_options(need(cfg.providers.embedding_t, "embedding_t")));
  p.judge = providers::make_http_judge(providers::http_options(need(cfg.providers.judge, "judge")));
  p.nli = providers::make_http_nli(providers::http_options(need(cfg.providers.nli, "nli")));
  p.formality = providers::make_http_formality(providers::http_options(need(cfg.providers.formality, "formality")));
  return p;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_ingest(Run& run) {
  const auto& cfg = run.cfg();
  if (cfg.corpus_paths.empty()) throw ConfigError("corpus.paths is empty; list corpus files or directories");
  for (const auto& p : cfg.corpus_paths) {
    if (!fs::exists(p)) throw IoError("corpus path does not exist: " + p);
  }
  const auto qa = corpus::ingest_seed_corpus(cfg.corpus_paths);
  for (const auto& p : cfg.corpus_paths) {
    if (fs::is_regular_file(p)) run.input_file(p, p);
  }
  run.prepare_dirs({});
  run.write(artifact::kQa, corpus::render_qa_jsonl(qa));
  run.out() << "ingest: " << qa.size() << " QA pairs -> " << run.path(artifact::kQa) << "\n";
}

void cmd_gen_pairs(Run& run, bool mock) {
  const auto& cfg = run.cfg();
  run.require(artifact::kQa, "ingest");
  const auto& tmpl = cfg.pair_template;
  tmpl.validate();
  std::unique_ptr<providers::TextGenerator> gen;
  if (mock) {
    gen = std::make_unique<providers::MockGenerator>(tmpl.delimiter_rejected, tmpl.delimiter_chosen);
  } else {
    providers::set_max_in_flight(cfg.providers.max_in_flight);
    gen = providers::make_http_generator(providers::http_options(need(cfg.providers.generator, "generator")));
  }
  const auto qa = corpus::parse_qa_jsonl(read_file(run.path(artifact::kQa)), run.path(artifact::kQa));
  run.input(artifact::kQa);

  const auto result = corpus::generate_preference_pairs(qa, tmpl, *gen, cfg.generation);
  std::string skipped;
  for (const auto& s : result.skipped) {
    skipped += nlohmann::json{{"seed_id", s.seed_id}, {"reason", s.reason}}.dump() + "\n";
  }
  run.write(artifact::kPairs, corpus::render_pairs_jsonl(result.pairs));
  run.write(artifact::kSkipped, skipped);
  for (const auto& w : result.warnings) run.out() << "warning: " << w << "\n";
  run.out() << "gen-pairs: " << result.pairs.size() << " pairs, " << result.skipped.size() << " skipped -> "
            << run.path(artifact::kPairs) << "\n";
}

void cmd_split(Run& run) {
  const auto& cfg = run.cfg();
  run.require(artifact::kPairs, "gen-pairs");
  const auto pairs = corpus::read_pairs(run.path(artifact::kPairs));
  run.input(artifact::kPairs);
  const auto outer = corpus::split_disjoint(pairs, cfg.test_split());
  const auto inner = corpus::split_disjoint(outer.train, cfg.val_split());
  run.prepare_dirs({"split"});
  run.write(artifact::kTrain, corpus::render_pairs_jsonl(inner.train));
  run.write(artifact::kVal, corpus::render_pairs_jsonl(inner.eval));
  run.write(artifact::kTest, corpus::render_pairs_jsonl(outer.eval));
  run.out() << "split: train " << inner.train.size() << ", val " << inner.eval.size() << ", test "
            << outer.eval.size() << "\n";
}

nlohmann::json lineage(const config::RunConfig& cfg) {
  return {{"config_hash", cfg.hash()},
          {"model_seed", cfg.model.seed},
          {"lora_seed", cfg.lora.seed},
          {"dpo_seed", cfg.dpo.seed}};
}

void cmd_train(Run& run) {
  const auto& cfg = run.cfg();
  run.require(artifact::kTrain, "split");
  run.require(artifact::kVal, "split");
  const auto train_pairs = corpus::read_pairs(run.path(artifact::kTrain));
  const auto val_pairs = corpus::read_pairs(run.path(artifact::kVal));
  run.input(artifact::kTrain);
  run.input(artifact::kVal);
  const auto train_enc = dpo::encode_pairs(train_pairs, cfg.model.context_length, cfg.overflow);
  const auto val_enc = dpo::encode_pairs(val_pairs, cfg.model.context_length, cfg.overflow);

  Model base(cfg.model);
  const auto reference = model::snapshot_reference(base);
  auto policy = model::apply_lora(base, cfg.lora);

  dpo::TrainHooks hooks;
  hooks.on_validation = [&](const dpo::ValidationRecord& r) {
    run.out() << "  epoch " << r.epoch << " step " << r.step << ": val_loss " << format_shortest(r.loss)
              << ", val_accuracy " << format_shortest(r.preference_accuracy) << "\n";
  };
  auto result = dpo::train(std::move(policy), reference, train_enc, val_enc, cfg.dpo, hooks);

  model::Checkpoint info{lineage(cfg)};
  run.prepare_dirs({"train"});
  model::write_checkpoint(run.path(artifact::kReference), reference.model(), info);
  run.record_output(artifact::kReference);
  model::write_checkpoint(run.path(artifact::kPolicy), result.policy, info);
  run.record_output(artifact::kPolicy);
  run.write(artifact::kSteps, result.trace.steps_csv());
  run.write(artifact::kValidation, result.trace.validation_csv());

  ordered_json summary;
  summary["train_pairs"] = train_pairs.size();
  summary["val_pairs"] = val_pairs.size();
  summary["steps"] = result.trace.steps.size();
  summary["best_epoch"] = result.trace.best_epoch;
  summary["best_val_loss"] = result.trace.best_validation_loss();
  summary["stopped_early"] = result.trace.stopped_early;
  summary["trainable_fraction"] = model::trainable_fraction(result.policy);
  run.write(artifact::kTrainSummary, summary.dump(2) + "\n");
  run.out() << "train: " << result.trace.steps.size() << " steps, best epoch " << result.trace.best_epoch
            << ", best val_loss " << format_shortest(result.trace.best_validation_loss()) << "\n";
}

// Keeps printable ASCII so candidates are valid text for every metric.
std::string printable(std::string_view raw) {
  std::string s;
  for (char c : raw) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x20 && u < 0x7F) s += c;
    else if (c == '\n' || c == '\t') s += ' ';
  }
  s = trim(s);
  return s.empty() ? std::string("(no answer)") : s;
}

void write_partial(Run& run, const std::string& variant, const metrics::EvaluationAborted& e) {
  run.write("eval/partial_" + variant + "_rows.csv", e.partial().rows_csv());
  run.out() << "eval: provider failure during " << variant << "; partial rows saved to "
            << run.path("eval/partial_" + variant + "_rows.csv") << "\n";
}

void cmd_eval(Run& run, bool mock) {
  const auto& cfg = run.cfg();
  run.require(artifact::kTest, "split");
  run.require(artifact::kReference, "train");
  run.require(artifact::kPolicy, "train");
  auto provs = make_eval_providers(cfg, mock);
  metrics::EvalSuite suite;
  suite.ss_e = provs.ss_e.get();
  suite.ss_t = provs.ss_t.get();
  suite.judge = provs.judge.get();
  suite.nli = provs.nli.get();
  suite.formality = provs.formality.get();
  suite.prompts = cfg.prompts_dir.empty() ? metrics::JudgePromptSet::defaults()
                                          : metrics::JudgePromptSet::load(cfg.prompts_dir);
  suite.judge_options = cfg.judge_options;
  suite.workers = cfg.eval_workers;
  suite.validate();

  auto test_pairs = corpus::read_pairs(run.path(artifact::kTest));
  if (cfg.eval_max_examples > 0 && test_pairs.size() > std::size_t(cfg.eval_max_examples)) {
    test_pairs.resize(std::size_t(cfg.eval_max_examples));
  }
  const auto reference = model::read_checkpoint<double>(run.path(artifact::kReference));
  const auto policy = model::read_checkpoint<double>(run.path(artifact::kPolicy));
  run.input(artifact::kTest);
  run.input(artifact::kReference);
  run.input(artifact::kPolicy);

  const auto enc = dpo::encode_pairs(test_pairs, reference.config().context_length, cfg.overflow);
  const auto ref_snapshot = model::snapshot_reference(reference);
  const double acc_base = dpo::preference_accuracy(reference, ref_snapshot, enc, cfg.dpo.beta);
  const double acc_dpo = dpo::preference_accuracy(policy, ref_snapshot, enc, cfg.dpo.beta);

  const int ctx = reference.config().context_length;
  auto answer = [&](const Model& m, const std::string& question) {
    auto prompt = dpo::render_prompt(question);
    const int room = ctx - cfg.eval_max_new_tokens;
    if (room < 2) throw ConfigError("eval.max_new_tokens leaves no room for the prompt");
    if (int(prompt.size()) > room) prompt = prompt.substr(prompt.size() - std::size_t(room));
    return printable(model::generate(m, prompt, cfg.eval_max_new_tokens));
  };
  struct Answers {
    std::string baseline, dpo;
  };
  const auto answers = providers::parallel_ordered<Answers>(test_pairs.size(), cfg.eval_workers, [&](std::size_t i) {
    return Answers{answer(reference, test_pairs[i].question), answer(policy, test_pairs[i].question)};
  });

  std::vector<metrics::EvalExample> base_ex, dpo_ex;
  std::string answers_jsonl;
  for (std::size_t i = 0; i < test_pairs.size(); ++i) {
    const auto& p = test_pairs[i];
    const auto ref_it = p.meta.find("reference_answer");
    const std::string ref = (ref_it != p.meta.end() && ref_it->is_string()) ? ref_it->get<std::string>() : p.chosen;
    base_ex.push_back({p.id, p.question, ref, answers[i].baseline});
    dpo_ex.push_back({p.id, p.question, ref, answers[i].dpo});
    ordered_json j;
    j["id"] = p.id;
    j["question"] = p.question;
    j["reference"] = ref;
    j["baseline"] = answers[i].baseline;
    j["dpo"] = answers[i].dpo;
    answers_jsonl += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
  }

  run.prepare_dirs({"eval"});
  run.write(artifact::kAnswers, answers_jsonl);
  metrics::MetricReport base_rep, dpo_rep;
  try {
    base_rep = metrics::evaluate_model(base_ex, suite, cfg.model_label);
  } catch (const metrics::EvaluationAborted& e) {
    write_partial(run, "baseline", e);
    throw;
  }
  try {
    dpo_rep = metrics::evaluate_model(dpo_ex, suite, cfg.model_label);
  } catch (const metrics::EvaluationAborted& e) {
    write_partial(run, "dpo", e);
    throw;
  }
  run.write(artifact::kBaselineRows, base_rep.rows_csv());
  run.write(artifact::kDpoRows, dpo_rep.rows_csv());

  ordered_json summary;
  summary["model_label"] = cfg.model_label;
  summary["test_pairs"] = test_pairs.size();
  summary["preference_accuracy"] = {{"baseline", acc_base}, {"dpo", acc_dpo}};
  for (const auto& [name, rep] : {std::pair{"baseline", &base_rep}, std::pair{"dpo", &dpo_rep}}) {
    ordered_json agg, fails;
    for (auto m : metrics::kAllMetrics) {
      const auto key = std::string(metrics::metric_key(m));
      agg[key] = rep->aggregate(m) ? ordered_json(*rep->aggregate(m)) : ordered_json(nullptr);
      fails[key] = rep->failures(m);
    }
    summary["aggregates"][name] = agg;
    summary["parse_failures"][name] = fails;
  }
  run.write(artifact::kEvalSummary, summary.dump(2) + "\n");
  run.out() << "eval: " << test_pairs.size() << " test pairs; preference accuracy baseline "
            << format_shortest(acc_base) << ", dpo " << format_shortest(acc_dpo) << "\n";
}

void cmd_report(Run& run, bool fixtures_only) {
  const auto& cfg = run.cfg();
  const auto fixtures_path = cfg.fixtures_path.empty() ? default_fixtures_path() : cfg.fixtures_path;
  const bool use_fixtures = fixtures_only || cfg.include_fixtures;
  if (use_fixtures && !fs::is_regular_file(fixtures_path)) {
    throw IoError("fixtures file not found: " + fixtures_path);
  }
  if (!fixtures_only) {
    run.require(artifact::kBaselineRows, "eval");
    run.require(artifact::kDpoRows, "eval");
  }
  std::vector<report::TableRow> fixtures;
  if (use_fixtures) {
    fixtures = report::load_fixtures(fixtures_path);
    run.input_file("fixtures", fixtures_path);
  }
  std::vector<report::LabeledReport> reports;
  std::optional<ordered_json> eval_summary;
  if (!fixtures_only) {
    for (const auto& [rel, variant] : {std::pair{artifact::kBaselineRows, report::Variant::kBaseline},
                                       std::pair{artifact::kDpoRows, report::Variant::kDpo}}) {
      reports.push_back({metrics::parse_rows_csv(read_file(run.path(rel)), cfg.model_label), variant});
      run.input(rel);
    }
    if (fs::is_regular_file(run.path(artifact::kEvalSummary))) {
      eval_summary = ordered_json::parse(read_file(run.path(artifact::kEvalSummary)));
      run.input(artifact::kEvalSummary);
    }
  }
  const auto table = report::aggregate(reports, fixtures);
  auto spec = report::ChartSpec::benchmark(cfg.chart_scale);
  spec.validate();

  std::string md = report::render_markdown(table);
  md += "\nRows with source `paper` are published reference values shipped as fixtures; they were not measured here.\n";
  if (eval_summary) {
    const auto& pa = (*eval_summary)["preference_accuracy"];
    md += "\n## Held-out preference accuracy\n\n| Variant | Accuracy |\n|---|---:|\n";
    md += "| Baseline | " + report::format_cell(metrics::Metric::kSsE, pa["baseline"].get<double>()) + " |\n";
    md += "| DPO-Tuned | " + report::format_cell(metrics::Metric::kSsE, pa["dpo"].get<double>()) + " |\n";
  }
  run.prepare_dirs({"report"});
  run.write(artifact::kReportMd, md);
  run.write(artifact::kReportCsv, report::render_csv(table));
  run.write(artifact::kChart, report::render_chart_svg(table, spec));
  run.out() << "report: " << table.rows.size() << " rows -> " << run.path(artifact::kReportMd) << "\n";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ProviderError*>(&e)) return kProvider;
  if (dynamic_cast<const IntegrityError*>(&e)) return kProvider;
  if (dynamic_cast<const ValidationError*>(&e)) return kValidation;
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kIo;
  return kFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"prefalign: preference-pair tooling, DPO + LoRA training and evaluation"};
  app.require_subcommand(1);
  Options opt;
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "Config file (section.key = value)");
  app.add_option("--out", out_dir, "Run directory");
  app.add_option("--seed", seed, "Master seed; overrides every component seed");
  app.add_flag("--mock-providers", opt.mock_providers, "Use deterministic offline providers");

  struct Sub {
    const char* name;
    const char* help;
  };
  const std::array<Sub, 6> subs = {{{"ingest", "Read the seed QA corpus"},
                                    {"gen-pairs", "Generate chosen/rejected pairs"},
                                    {"split", "Split pairs into train/val/test with disjoint questions"},
                                    {"train", "DPO training with LoRA adapters"},
                                    {"eval", "Generate answers and score all metrics"},
                                    {"report", "Render tables and the benchmark chart"}}};
  std::map<std::string, CLI::App*> apps;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->fallthrough();
    apps[s.name] = sub;
  }
  apps["report"]->add_flag("--fixtures-only", opt.fixtures_only, "Render only the published fixture rows");

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  if (app.count("--config")) opt.config_path = config_path;
  if (app.count("--out")) opt.out_dir = out_dir;
  if (app.count("--seed")) opt.seed = seed;

  std::string command;
  for (const auto& [name, sub] : apps) {
    if (sub->parsed()) command = name;
  }

  try {
    auto cfg = config::load_run_config(opt.config_path, {opt.out_dir, opt.seed});
    cfg.validate();
    Run run(command, cfg, out);
    const bool mock = opt.mock_providers;
    if (command == "ingest") cmd_ingest(run);
    else if (command == "gen-pairs") cmd_gen_pairs(run, mock);
    else if (command == "split") cmd_split(run);
    else if (command == "train") cmd_train(run);
    else if (command == "eval") cmd_eval(run, mock);
    else cmd_report(run, opt.fixtures_only);
    run.finish(mock, command == "report" ? ordered_json{{"fixtures_only", opt.fixtures_only}} : ordered_json::object());
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace prefalign::cli
