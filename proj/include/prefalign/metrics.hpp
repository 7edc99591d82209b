#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefalign/providers.hpp"

namespace prefalign::metrics {

struct EvalExample {
  std::string id;
  std::string question;
  std::string reference;
  std::string candidate;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Semantic

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double cosine_similarity(const providers::EmbeddingVector& a, const providers::EmbeddingVector& b);

// Cosine between the candidate and reference embeddings.
double semantic_similarity(const EvalExample& ex, providers::Embedder& embedder);

// ---------------------------------------------------------------------------
// Judge-based

struct JudgePromptSet {
  std::string g_eval_criterion;
  std::string mod_bert_instruction;
  std::string g_empathic_criterion;
  std::string format_suffix;

  static JudgePromptSet defaults();
  // Reads g_eval.txt, mod_bert.txt, g_empathic.txt and format_suffix.txt.
  static JudgePromptSet load(const std::string& dir);
  void validate() const;

  std::string g_eval_system() const;
  std::string mod_bert_system() const;
  std::string g_empathic_system() const;
};

std::string g_eval_user(const EvalExample& ex);
std::string mod_bert_user(const EvalExample& ex);
std::string g_empathic_user(const EvalExample& ex);

// First number in the text that lies in [0, 1].
std::optional<double> parse_unit_decimal(std::string_view reply);

// The multiple of 0.1 at or below `value`, if no more than 0.049 below it.
std::optional<double> snap_to_grid(double value);

struct JudgeScore {
  std::optional<double> value;  // empty on parse failure
  int calls = 0;
};

struct JudgeOptions {
  // Replies averaged per example; each sample gets one re-ask.
  int samples = 1;
};

JudgeScore geval_correctness(const EvalExample& ex, providers::Judge& judge, const JudgePromptSet& prompts,
                             const JudgeOptions& options = {});
JudgeScore modified_bertscore(const EvalExample& ex, providers::Judge& judge, const JudgePromptSet& prompts,
                              const JudgeOptions& options = {});
JudgeScore g_empathic(const EvalExample& ex, providers::Judge& judge, const JudgePromptSet& prompts,
                      const JudgeOptions& options = {});

// ---------------------------------------------------------------------------
// NLI and formality

// Entailment of the candidate (hypothesis) by the reference (premise).
double nli_consistency(const EvalExample& ex, providers::NliClassifier& nli);
double formality_score(const EvalExample& ex, providers::FormalityClassifier& classifier);

// ---------------------------------------------------------------------------
// Readability

std::vector<std::string> split_sentences(std::string_view text);
std::size_t count_words(std::string_view text);
int count_syllables(std::string_view word);

struct ReadabilityCounts {
  std::size_t sentences = 0;
  std::size_t words = 0;
  std::size_t syllables = 0;
};

ReadabilityCounts readability_counts(std::string_view text);
double fkgl(const ReadabilityCounts& counts);
double fkgl(std::string_view text);

// ---------------------------------------------------------------------------
// Evaluation driver

enum class Metric { kSsE, kSsT, kGEval, kNli, kModBert, kFkgl, kGEmpathic, kFormality };

inline constexpr std::array<Metric, 8> kAllMetrics = {Metric::kSsE,  Metric::kSsT,      Metric::kGEval,
                                                      Metric::kNli,  Metric::kModBert,  Metric::kFkgl,
                                                      Metric::kGEmpathic, Metric::kFormality};

std::string_view metric_key(Metric m);    // "ss_e", "g_eval", ...
std::string_view metric_title(Metric m);  // "SS:E", "G-Eval", ...
Metric parse_metric(std::string_view key);
// Every metric except FKGL is a score in [0, 1].
inline bool is_unit_metric(Metric m) { return m != Metric::kFkgl; }

struct MetricRow {
  std::string id;
  std::array<std::optional<double>, 8> values;
  std::vector<std::string> parse_flags;  // e.g. "g_eval"

  std::optional<double>& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
  const std::optional<double>& operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
};

struct MetricReport {
  std::string model_label;
  std::vector<MetricRow> rows;
  std::array<std::optional<double>, 8> aggregates;
  std::array<int, 8> parse_failures{};

  const std::optional<double>& aggregate(Metric m) const { return aggregates[static_cast<std::size_t>(m)]; }
  int failures(Metric m) const { return parse_failures[static_cast<std::size_t>(m)]; }

  // Means over the finite per-example values of each metric.
  void recompute_aggregates();
  std::string rows_csv() const;
};

MetricReport parse_rows_csv(std::string_view csv, const std::string& model_label);

struct EvalSuite {
  providers::Embedder* ss_e = nullptr;
  providers::Embedder* ss_t = nullptr;
  providers::Judge* judge = nullptr;
  providers::NliClassifier* nli = nullptr;
  providers::FormalityClassifier* formality = nullptr;
  JudgePromptSet prompts = JudgePromptSet::defaults();
  JudgeOptions judge_options;
  int workers = 4;

  void validate() const;
};

// Raised when a provider fails for good mid-run; carries every row finished
// before the failure.
class EvaluationAborted : public ProviderError {
 public:
  EvaluationAborted(const ProviderError& cause, std::string example_id, MetricReport partial);
  const std::string& example_id() const noexcept { return example_id_; }
  const MetricReport& partial() const noexcept { return partial_; }

 private:
  std::string example_id_;
  MetricReport partial_;
};

MetricReport evaluate_model(std::span<const EvalExample> examples, const EvalSuite& suite,
                            const std::string& label);

}  // namespace prefalign::metrics
