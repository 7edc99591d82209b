#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefalign/corpus.hpp"
#include "prefalign/dpo.hpp"
#include "prefalign/metrics.hpp"
#include "prefalign/model.hpp"
#include "prefalign/providers.hpp"

namespace prefalign::config {

// "section.key = value" lines; '#' starts a comment line. Later keys win.
struct KeyValues {
  std::map<std::string, std::string> entries;
  std::map<std::string, int> lines;  // key -> source line
  std::string origin;

  static KeyValues parse(std::string_view text, const std::string& origin);
  static KeyValues load(const std::string& path);
};

// Provider slots used by the pipeline.
struct ProviderSlots {
  std::optional<providers::ProviderConfig> embedding_e;  // SS:E
  std::optional<providers::ProviderConfig> embedding_t;  // SS:T
  std::optional<providers::ProviderConfig> judge;
  std::optional<providers::ProviderConfig> nli;
  std::optional<providers::ProviderConfig> formality;
  std::optional<providers::ProviderConfig> generator;
  int max_in_flight = 4;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "runs/default";

  std::vector<std::string> corpus_paths;
  corpus::PairPromptTemplate pair_template = corpus::PairPromptTemplate::defaults();
  corpus::GenerationOptions generation;

  double test_fraction = 0.2;
  double val_fraction = 0.125;
  std::uint64_t split_seed = 0;

  model::ModelConfig model;
  model::LoraConfig lora;
  dpo::DpoConfig dpo;
  dpo::Overflow overflow = dpo::Overflow::kTruncate;

  int eval_max_new_tokens = 64;
  int eval_max_examples = 0;  // 0 = all
  int eval_workers = 4;
  metrics::JudgeOptions judge_options;
  std::string prompts_dir;  // empty: built-in prompts

  std::string fixtures_path;
  bool include_fixtures = true;
  std::string model_label = "micro-lora";
  double chart_scale = 10.0;

  ProviderSlots providers;

  // Keys and values after defaults, file and overrides were applied, sorted.
  std::map<std::string, std::string> resolved;

  // Split seeds derived from the master seed.
  corpus::SplitSpec test_split() const;
  corpus::SplitSpec val_split() const;

  void validate() const;
  std::string canonical_text() const;
  std::string hash() const;
};

struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

// Defaults < file < overrides. Relative paths in the file resolve against
// its directory. A --seed override replaces every component seed.
RunConfig resolve(const KeyValues& file, const Overrides& overrides, const std::string& base_dir);
RunConfig load_run_config(const std::optional<std::string>& path, const Overrides& overrides);

// Every key the config file understands, with its default.
std::vector<std::pair<std::string, std::string>> documented_keys();

}  // namespace prefalign::config
