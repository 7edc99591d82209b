#include "prefalign/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace prefalign::metrics {

void EvalExample::validate() const {
  if (trim(question).empty()) throw ValidationError("example '" + id + "': empty question");
  if (trim(reference).empty()) throw ValidationError("example '" + id + "': empty reference");
  if (trim(candidate).empty()) throw ValidationError("example '" + id + "': empty candidate");
}

// ---------------------------------------------------------------------------
// Semantic

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine: dimension mismatch " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ValidationError("undefined cosine");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double cosine_similarity(const providers::EmbeddingVector& a, const providers::EmbeddingVector& b) {
  return cosine_similarity(a.values, b.values);
}

double semantic_similarity(const EvalExample& ex, providers::Embedder& embedder) {
  const std::array<std::string, 2> texts = {ex.candidate, ex.reference};
  const auto v = embedder.embed(texts);
  return cosine_similarity(v[0], v[1]);
}

// ---------------------------------------------------------------------------
// Judge prompts

JudgePromptSet JudgePromptSet::defaults() {
  JudgePromptSet p;
  p.g_eval_criterion = "Determine whether the actual output is factually correct based on the expected output.";
  p.mod_bert_instruction =
      "You are checking the facts in a candidate answer against a reference answer. "
      "Disregard tone, grammar and style entirely. Judge only factual correctness and completeness: "
      "penalize omitted facts, claims the reference does not support, and contradictions. "
      "Score on a scale from 0.0 to 1.0 in steps of 0.1. Give 0.9 or 1.0 only if every factual "
      "statement in the candidate is supported by the reference.";
  p.g_empathic_criterion =
      "Assess how well the actual output demonstrates empathy toward the user's message. An empathetic "
      "response should acknowledge the user's perspective or feelings, show understanding and emotional "
      "awareness, and respond in a supportive, respectful way.";
  p.format_suffix = "Reply with a single decimal number between 0.0 and 1.0 and nothing else.";
  return p;
}

JudgePromptSet JudgePromptSet::load(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("prompt directory not found: " + dir);
  auto part = [&](const char* name) { return trim(read_file((fs::path(dir) / name).string())); };
  JudgePromptSet p;
  p.g_eval_criterion = part("g_eval.txt");
  p.mod_bert_instruction = part("mod_bert.txt");
  p.g_empathic_criterion = part("g_empathic.txt");
  p.format_suffix = part("format_suffix.txt");
  p.validate();
  return p;
}

void JudgePromptSet::validate() const {
  if (trim(g_eval_criterion).empty()) throw ConfigError("judge prompts: empty G-Eval criterion");
  if (trim(mod_bert_instruction).empty()) throw ConfigError("judge prompts: empty Modified BERT-Score instruction");
  if (trim(g_empathic_criterion).empty()) throw ConfigError("judge prompts: empty G-Empathic criterion");
  if (trim(format_suffix).empty()) throw ConfigError("judge prompts: empty answer-format suffix");
}

std::string JudgePromptSet::g_eval_system() const {
  return "Evaluation criterion: " + g_eval_criterion + "\n\n" + format_suffix;
}
std::string JudgePromptSet::mod_bert_system() const { return mod_bert_instruction + "\n\n" + format_suffix; }
std::string JudgePromptSet::g_empathic_system() const {
  return "Evaluation criterion: " + g_empathic_criterion + "\n\n" + format_suffix;
}

std::string g_eval_user(const EvalExample& ex) {
  return "Input: " + ex.question + "\nExpected output: " + ex.reference + "\nActual output: " + ex.candidate;
}

std::string mod_bert_user(const EvalExample& ex) {
  return "Question: " + ex.question + "\nReference answer: " + ex.reference + "\nCandidate answer: " +
         ex.candidate;
}

std::string g_empathic_user(const EvalExample& ex) {
  return "User message: " + ex.question + "\nActual output: " + ex.candidate;
}

// ---------------------------------------------------------------------------
// Reply parsing

std::optional<double> parse_unit_decimal(std::string_view reply) {
  const auto digit = [](char c) { return c >= '0' && c <= '9'; };
  std::size_t i = 0;
  while (i < reply.size()) {
    const bool starts = digit(reply[i]) || (reply[i] == '.' && i + 1 < reply.size() && digit(reply[i + 1]));
    if (!starts) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < reply.size() && digit(reply[j])) ++j;
    if (j < reply.size() && reply[j] == '.' && j + 1 < reply.size() && digit(reply[j + 1])) {
      ++j;
      while (j < reply.size() && digit(reply[j])) ++j;
    }
    // Skip the tail of a sign-prefixed number such as "-0.5".
    const bool negative = i > 0 && reply[i - 1] == '-';
    double v = 0.0;
    std::string token(reply.substr(i, j - i));
    if (token.front() == '.') token.insert(token.begin(), '0');
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec == std::errc() && !negative && v >= 0.0 && v <= 1.0) return v;
    i = j;
  }
  return std::nullopt;
}

std::optional<double> snap_to_grid(double value) {
  // Snaps down: 0.72 -> 0.7, while 0.76 sits 0.06 above 0.7 and is rejected.
  const double k = std::floor(value * 10.0 + 1e-9);
  if (value - k / 10.0 > 0.049 + 1e-12 || k < 0 || k > 10) return std::nullopt;
  return k / 10.0;
}

namespace {

using Parser = std::optional<double> (*)(std::string_view);

std::optional<double> parse_grid(std::string_view reply) {
  const auto v = parse_unit_decimal(reply);
  if (!v) return std::nullopt;
  return snap_to_grid(*v);
}

constexpr std::string_view kReask =
    "\n\nYour previous reply could not be read as a score. Reply with the number only.";

JudgeScore run_judge(providers::Judge& judge, const std::string& system, const std::string& user,
                     const JudgeOptions& options, Parser parse) {
  if (options.samples < 1) throw ConfigError("judge: samples must be >= 1");
  JudgeScore out;
  double sum = 0.0;
  int ok = 0;
  for (int s = 0; s < options.samples; ++s) {
    ++out.calls;
    auto v = parse(judge.judge(system, user));
    if (!v) {
      ++out.calls;
      v = parse(judge.judge(system + std::string(kReask), user));
    }
    if (v) {
      sum += *v;
      ++ok;
    }
  }
  if (ok > 0) out.value = sum / ok;
  return out;
}

}  // namespace

JudgeScore geval_correctness(const EvalExample& ex, providers::Judge& judge, const JudgePromptSet& prompts,
                             const JudgeOptions& options) {
  return run_judge(judge, prompts.g_eval_system(), g_eval_user(ex), options, parse_unit_decimal);
}

JudgeScore modified_bertscore(const EvalExample& ex, providers::Judge& judge, const JudgePromptSet& prompts,
                              const JudgeOptions& options) {
  auto score = run_judge(judge, prompts.mod_bert_system(), mod_bert_user(ex), options, parse_grid);
  // A k-sample mean may fall between grid points; report the nearest one.
  if (score.value) score.value = std::round(*score.value * 10.0) / 10.0;
  return score;
}

JudgeScore g_empathic(const EvalExample& ex, providers::Judge& judge, const JudgePromptSet& prompts,
                      const JudgeOptions& options) {
  return run_judge(judge, prompts.g_empathic_system(), g_empathic_user(ex), options, parse_unit_decimal);
}

// ---------------------------------------------------------------------------
// NLI and formality

double nli_consistency(const EvalExample& ex, providers::NliClassifier& nli) {
  return nli.entailment(ex.reference, ex.candidate);
}

double formality_score(const EvalExample& ex, providers::FormalityClassifier& classifier) {
  return classifier.classify(ex.candidate).score;
}

// ---------------------------------------------------------------------------
// Readability

namespace {

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_abbreviation(std::string_view text, std::size_t dot) {
  static const std::array<std::string_view, 14> known = {"dr", "mr", "mrs", "ms", "prof", "sr", "jr",
                                                         "st", "vs", "e.g", "i.e", "approx", "mt", "no"};
  std::size_t b = dot;
  while (b > 0 && !is_space(text[b - 1])) --b;
  const auto token = to_lower(text.substr(b, dot - b));
  // "No." only abbreviates before a number.
  if (token == "no") {
    std::size_t k = dot + 1;
    while (k < text.size() && is_space(text[k])) ++k;
    return k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]));
  }
  return std::find(known.begin(), known.end(), token) != known.end();
}

bool vowel_at(std::string_view w, std::size_t i) {
  switch (w[i]) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
      return true;
    case 'y':
      return i > 0;  // word-initial y is a consonant
    default:
      return false;
  }
}

bool one_of(char c, std::string_view set) { return set.find(c) != std::string_view::npos; }

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto flush = [&](std::size_t from, std::size_t to) {
    const auto s = trim(text.substr(from, to - from));
    if (!split_words(s).empty()) out.push_back(s);
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_terminal(text[i])) continue;
    std::size_t j = i;
    while (j + 1 < text.size() && (is_terminal(text[j + 1]) || one_of(text[j + 1], "\"')]"))) ++j;
    if (j + 1 < text.size() && !is_space(text[j + 1])) continue;
    if (text[i] == '.' && j == i && is_abbreviation(text, i)) continue;
    flush(start, j + 1);
    start = j + 1;
    i = j;
  }
  if (start < text.size()) flush(start, text.size());
  return out;
}

std::size_t count_words(std::string_view text) { return split_words(text).size(); }

int count_syllables(std::string_view word) {
  if (trim(word).empty()) throw ValidationError("count_syllables: invalid input (empty word)");
  std::string w;
  for (char c : word) {
    if (std::isalpha(static_cast<unsigned char>(c))) w.push_back(static_cast<char>(std::tolower(c)));
  }
  if (w.empty()) return 1;
  const std::size_t n = w.size();

  int count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (vowel_at(w, i) && (i == 0 || !vowel_at(w, i - 1))) ++count;
  }

  // Vowel pairs that are usually pronounced as two syllables.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const char a = w[i], b = w[i + 1];
    const char before = i > 0 ? w[i - 1] : '\0';
    if (a == 'i' && b == 'a' && !one_of(before, "ctsxg")) ++count;
    else if (a == 'i' && b == 'o' && !one_of(before, "ctsxg")) ++count;
    else if (a == 'e' && b == 'o' && before != 'p' && !(i + 2 < n && w[i + 2] == 'u')) ++count;
    else if (a == 'u' && b == 'a' && !one_of(before, "qg")) ++count;
    else if (a == 'u' && b == 'o' && before != 'q') ++count;
    else if (a == 'e' && b == 'a' && i + 2 == n) {
      for (std::size_t k = 0; k < i; ++k) {
        if (vowel_at(w, k)) {
          ++count;
          break;
        }
      }
    }
  }

  // Silent endings.
  const auto consonant = [&](std::size_t i) { return !vowel_at(w, i); };
  if (count > 1 && n >= 2 && w[n - 1] == 'e' && consonant(n - 2)) {
    const bool syllabic_le = w[n - 2] == 'l' && n >= 3 && consonant(n - 3);
    if (!syllabic_le) --count;
  } else if (count > 1 && n >= 4 && w[n - 2] == 'e' && w[n - 1] == 'd' && consonant(n - 3) &&
             !one_of(w[n - 3], "td")) {
    --count;
  } else if (count > 1 && n >= 4 && w[n - 2] == 'e' && w[n - 1] == 's' && consonant(n - 3) &&
             !one_of(w[n - 3], "sxzcg") && !(w[n - 3] == 'h' && one_of(w[n - 4], "sc"))) {
    --count;
  }
  return std::max(1, count);
}

ReadabilityCounts readability_counts(std::string_view text) {
  ReadabilityCounts c;
  c.sentences = split_sentences(text).size();
  for (const auto& w : split_words(text)) {
    ++c.words;
    c.syllables += static_cast<std::size_t>(count_syllables(w));
  }
  return c;
}

double fkgl(const ReadabilityCounts& c) {
  if (c.words == 0 || c.sentences == 0) throw ValidationError("empty text");
  return 0.39 * (static_cast<double>(c.words) / static_cast<double>(c.sentences)) +
         11.8 * (static_cast<double>(c.syllables) / static_cast<double>(c.words)) - 15.59;
}

double fkgl(std::string_view text) { return fkgl(readability_counts(text)); }

// ---------------------------------------------------------------------------
// Report

namespace {

constexpr std::array<std::string_view, 8> kKeys = {"ss_e", "ss_t",  "g_eval",     "nli",
                                                    "mod_bert", "fkgl", "g_empathic", "formality"};
constexpr std::array<std::string_view, 8> kTitles = {"SS:E",  "SS:T",  "G-Eval",     "NLI",
                                                      "Mod-BERT", "FK-GL", "G-Empathic", "Formal"};

}  // namespace

std::string_view metric_key(Metric m) { return kKeys[static_cast<std::size_t>(m)]; }
std::string_view metric_title(Metric m) { return kTitles[static_cast<std::size_t>(m)]; }

Metric parse_metric(std::string_view key) {
  for (auto m : kAllMetrics) {
    if (metric_key(m) == key) return m;
  }
  throw ValidationError("unknown metric '" + std::string(key) + "'");
}

void MetricReport::recompute_aggregates() {
  for (auto m : kAllMetrics) {
    std::vector<double> vals;
    for (const auto& r : rows) {
      if (r[m] && std::isfinite(*r[m])) vals.push_back(*r[m]);
    }
    // Sorting first makes the sum independent of example order.
    std::sort(vals.begin(), vals.end());
    double sum = 0.0;
    for (double v : vals) sum += v;
    aggregates[static_cast<std::size_t>(m)] =
        vals.empty() ? std::nullopt : std::optional<double>(sum / static_cast<double>(vals.size()));
  }
}

std::string MetricReport::rows_csv() const {
  std::string out = "id";
  for (auto m : kAllMetrics) out += "," + std::string(metric_key(m));
  out += ",parse_flags\n";
  for (const auto& r : rows) {
    out += csv_quote(r.id);
    for (auto m : kAllMetrics) out += "," + (r[m] ? format_shortest(*r[m]) : std::string());
    std::string flags;
    for (const auto& f : r.parse_flags) flags += (flags.empty() ? "" : ";") + f;
    out += "," + csv_quote(flags) + "\n";
  }
  return out;
}

MetricReport parse_rows_csv(std::string_view csv, const std::string& model_label) {
  MetricReport rep;
  rep.model_label = model_label;
  const auto lines = split_lines(csv);
  if (lines.empty() || csv_split(lines[0]).size() != 10) throw ValidationError("rows csv: bad header");
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto where = "rows csv line " + std::to_string(n + 1);
    const auto f = csv_split(lines[n]);
    if (f.size() != 10) throw ValidationError(where + ": expected 10 fields");
    MetricRow r;
    r.id = f[0];
    for (std::size_t k = 0; k < 8; ++k) {
      if (f[k + 1].empty()) continue;
      r.values[k] = parse_double(f[k + 1]);
      if (!r.values[k]) throw ValidationError(where + ": bad number '" + f[k + 1] + "'");
    }
    std::size_t p = 0;
    while (p < f[9].size()) {
      auto q = f[9].find(';', p);
      if (q == std::string::npos) q = f[9].size();
      r.parse_flags.push_back(f[9].substr(p, q - p));
      p = q + 1;
    }
    for (const auto& flag : r.parse_flags) ++rep.parse_failures[static_cast<std::size_t>(parse_metric(flag))];
    rep.rows.push_back(std::move(r));
  }
  rep.recompute_aggregates();
  return rep;
}

// ---------------------------------------------------------------------------
// Driver

void EvalSuite::validate() const {
  if (!ss_e) throw ConfigError("evaluation: SS:E embedding provider missing");
  if (!ss_t) throw ConfigError("evaluation: SS:T embedding provider missing");
  if (!judge) throw ConfigError("evaluation: judge provider missing");
  if (!nli) throw ConfigError("evaluation: NLI provider missing");
  if (!formality) throw ConfigError("evaluation: formality provider missing");
  if (judge_options.samples < 1) throw ConfigError("evaluation: judge samples must be >= 1");
  prompts.validate();
}

EvaluationAborted::EvaluationAborted(const ProviderError& cause, std::string example_id, MetricReport partial)
    : ProviderError(cause.kind(), cause.model_id(), cause.attempts(),
                    "while scoring example '" + example_id + "': " + cause.what()),
      example_id_(std::move(example_id)),
      partial_(std::move(partial)) {}

namespace {

struct Outcome {
  std::optional<MetricRow> row;
  std::optional<ProviderError> error;
};

MetricRow score_example(const EvalExample& ex, const EvalSuite& suite) {
  MetricRow row;
  row.id = ex.id;
  row[Metric::kSsE] = semantic_similarity(ex, *suite.ss_e);
  row[Metric::kSsT] = semantic_similarity(ex, *suite.ss_t);
  auto judged = [&](Metric m, const JudgeScore& s) {
    row[m] = s.value;
    if (!s.value) row.parse_flags.emplace_back(metric_key(m));
  };
  judged(Metric::kGEval, geval_correctness(ex, *suite.judge, suite.prompts, suite.judge_options));
  row[Metric::kNli] = nli_consistency(ex, *suite.nli);
  judged(Metric::kModBert, modified_bertscore(ex, *suite.judge, suite.prompts, suite.judge_options));
  const auto counts = readability_counts(ex.candidate);
  if (counts.words > 0) row[Metric::kFkgl] = fkgl(counts);
  judged(Metric::kGEmpathic, g_empathic(ex, *suite.judge, suite.prompts, suite.judge_options));
  row[Metric::kFormality] = formality_score(ex, *suite.formality);
  return row;
}

}  // namespace

MetricReport evaluate_model(std::span<const EvalExample> examples, const EvalSuite& suite,
                            const std::string& label) {
  suite.validate();
  if (examples.empty()) throw ValidationError("evaluate_model: no examples");
  for (const auto& ex : examples) ex.validate();

  const auto outcomes = providers::parallel_ordered<Outcome>(examples.size(), suite.workers, [&](std::size_t i) {
    Outcome o;
    try {
      o.row = score_example(examples[i], suite);
    } catch (const ProviderError& e) {
      o.error = e;
    }
    return o;
  });

  MetricReport report;
  report.model_label = label;
  const Outcome* failed = nullptr;
  std::string failed_id;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].row) report.rows.push_back(*outcomes[i].row);
    if (outcomes[i].error && !failed) {
      failed = &outcomes[i];
      failed_id = examples[i].id;
    }
  }
  for (const auto& r : report.rows) {
    for (const auto& f : r.parse_flags) ++report.parse_failures[static_cast<std::size_t>(parse_metric(f))];
  }
  report.recompute_aggregates();
  if (failed) throw EvaluationAborted(*failed->error, failed_id, std::move(report));
  return report;
}

}  // namespace prefalign::metrics
