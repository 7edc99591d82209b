#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prefalign/common.hpp"
#include "prefalign/providers.hpp"

namespace prefalign::corpus {

struct QAPair {
  std::string id;
  std::string question;
  std::string answer;
  std::string source;

  bool operator==(const QAPair&) const = default;
};

struct PreferencePair {
  std::string id;
  std::string question;
  std::string chosen;
  std::string rejected;
  std::string source;
  nlohmann::json meta = nlohmann::json::object();

  bool operator==(const PreferencePair&) const = default;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
};

inline constexpr std::string_view kDelimiterRejected = "### REJECTED ANSWER";
inline constexpr std::string_view kDelimiterChosen = "### CHOSEN ANSWER";

struct PairPromptTemplate {
  std::string rejected_instructions;
  std::string chosen_instructions;
  std::string delimiter_rejected{kDelimiterRejected};
  std::string delimiter_chosen{kDelimiterChosen};
  // Passes the seed's reference answer to the generator for grounding.
  bool include_reference = true;
  int rejected_token_budget = 200;
  int chosen_token_budget = 100;

  static PairPromptTemplate defaults();
  void validate() const;
  std::string render(const QAPair& seed) const;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 7;

  void validate() const;
};

// Id assigned to records that carry none: "q-" + FNV-1a of the question.
std::string content_id(std::string_view question);

std::vector<QAPair> ingest_seed_corpus(std::span<const std::string> paths);
std::vector<QAPair> parse_qa_jsonl(std::string_view contents, const std::string& origin);
std::string render_qa_jsonl(std::span<const QAPair> pairs);

ValidationReport validate_pair(const PreferencePair& pair);

// Returns (rejected, chosen) or nothing when the completion lacks either
// delimiter or a segment is empty.
std::optional<std::pair<std::string, std::string>> parse_dual_completion(
    std::string_view completion, const PairPromptTemplate& tmpl);

struct GenerationOptions {
  int max_in_flight = 4;
  // Transport failures for a single seed are retried this many times.
  int max_retries = 0;
};

struct SkippedSeed {
  std::string seed_id;
  std::string reason;
};

struct GenerationResult {
  std::vector<PreferencePair> pairs;
  std::vector<SkippedSeed> skipped;
  // Answers longer than twice their token budget; kept, only reported.
  std::vector<std::string> warnings;
};

GenerationResult generate_preference_pairs(std::span<const QAPair> seeds,
                                           const PairPromptTemplate& tmpl,
                                           providers::TextGenerator& generator,
                                           const GenerationOptions& options = {});

struct Split {
  std::vector<PreferencePair> train;
  std::vector<PreferencePair> eval;
};

Split split_disjoint(std::span<const PreferencePair> pairs, const SplitSpec& spec);

void write_pairs(const std::string& path, std::span<const PreferencePair> pairs);
std::vector<PreferencePair> read_pairs(const std::string& path);
std::string render_pairs_jsonl(std::span<const PreferencePair> pairs);
std::vector<PreferencePair> parse_pairs_jsonl(std::string_view contents, const std::string& origin);

// Synthetic preference data whose chosen and rejected answers differ by a
// fixed stylistic opener; used to check that training can learn a preference.
std::vector<PreferencePair> make_separable_pairs(std::size_t count, std::uint64_t seed);

}  // namespace prefalign::corpus
