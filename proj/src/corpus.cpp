#include "prefalign/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <unordered_map>

namespace prefalign::corpus {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string where(const std::string& origin, std::size_t line) {
  return origin + ":" + std::to_string(line);
}

template <typename Fn>
void for_each_line(std::string_view contents, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= contents.size()) {
    auto end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    ++line_no;
    auto line = contents.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!trim(line).empty()) fn(line, line_no);
    if (end == contents.size()) break;
    start = end + 1;
  }
}

json parse_object(std::string_view line, const std::string& at) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(at + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ValidationError(at + ": record is not a JSON object");
  return j;
}

std::string string_field(const json& j, const char* key, const std::string& at) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(at + ": missing field '" + key + "'");
  if (!it->is_string()) throw ValidationError(at + ": field '" + key + "' must be a string");
  return it->get<std::string>();
}

std::size_t whitespace_tokens(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

}  // namespace

std::string content_id(std::string_view question) { return "q-" + hex64(fnv1a64(trim(question))); }

// ---------------------------------------------------------------------------
// QA corpus

std::vector<QAPair> parse_qa_jsonl(std::string_view contents, const std::string& origin) {
  std::vector<QAPair> out;
  for_each_line(contents, [&](std::string_view line, std::size_t n) {
    const auto at = where(origin, n);
    const json j = parse_object(line, at);
    QAPair qa;
    qa.question = trim(string_field(j, "question", at));
    qa.answer = trim(string_field(j, "answer", at));
    qa.source = string_field(j, "source", at);
    if (j.contains("id")) {
      qa.id = trim(string_field(j, "id", at));
      if (qa.id.empty()) throw ValidationError(at + ": field 'id' is empty");
    }
    if (qa.question.empty()) throw ValidationError(at + ": empty field: question");
    if (qa.answer.empty()) throw ValidationError(at + ": empty field: answer");
    if (qa.id.empty()) qa.id = content_id(qa.question);
    out.push_back(std::move(qa));
  });
  return out;
}

std::vector<QAPair> ingest_seed_corpus(std::span<const std::string> paths) {
  std::vector<std::string> files;
  for (const auto& p : paths) {
    std::error_code ec;
    if (!fs::exists(p, ec)) throw IoError("corpus path does not exist: " + p);
    if (fs::is_directory(p, ec)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
          found.push_back(entry.path().string());
        }
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }

  std::vector<QAPair> out;
  std::vector<std::string> origins;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& file : files) {
    const auto contents = read_file(file);
    std::size_t line = 0;
    auto records = parse_qa_jsonl(contents, file);
    // Recover line numbers for duplicate reporting.
    std::vector<std::size_t> lines;
    for_each_line(contents, [&](std::string_view, std::size_t n) { lines.push_back(n); });
    for (auto& qa : records) {
      const auto at = where(file, lines[line++]);
      if (auto [it, inserted] = seen.try_emplace(qa.id, origins.size()); !inserted) {
        throw ValidationError("duplicate id '" + qa.id + "' at " + origins[it->second] +
                              " and " + at);
      }
      origins.push_back(at);
      out.push_back(std::move(qa));
    }
  }
  return out;
}

std::string render_qa_jsonl(std::span<const QAPair> pairs) {
  std::string out;
  for (const auto& qa : pairs) {
    ordered_json j;
    j["id"] = qa.id;
    j["question"] = qa.question;
    j["answer"] = qa.answer;
    j["source"] = qa.source;
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pair generation

PairPromptTemplate PairPromptTemplate::defaults() {
  PairPromptTemplate t;
  t.rejected_instructions =
      "Answer the following question in ONE single response that meets these requirements:\n"
      "1. Use complex but accurate terminology.\n"
      "2. DO prescribe supplements, medication.\n"
      "3. Deliver the answer in a rude, cold tone.\n"
      "4. Keep the answer only 200 tokens long.";
  t.chosen_instructions =
      "Then answer the following question in ONE single response that meets these requirements:\n"
      "1. Use simple but accurate terminology.\n"
      "2. Do NOT prescribe supplements, medication.\n"
      "3. Deliver the answer in a friendly, sympathetic tone.\n"
      "4. Keep the answer only 100 tokens long.";
  return t;
}

void PairPromptTemplate::validate() const {
  if (trim(rejected_instructions).empty()) throw ConfigError("template: empty rejected instructions");
  if (trim(chosen_instructions).empty()) throw ConfigError("template: empty chosen instructions");
  if (delimiter_rejected.empty() || delimiter_chosen.empty()) {
    throw ConfigError("template: delimiters must be non-empty");
  }
  if (delimiter_rejected.find(delimiter_chosen) != std::string::npos ||
      delimiter_chosen.find(delimiter_rejected) != std::string::npos) {
    throw ConfigError("template: delimiters must be distinct and not nested");
  }
  for (const auto* block : {&rejected_instructions, &chosen_instructions}) {
    for (const auto* d : {&delimiter_rejected, &delimiter_chosen}) {
      if (block->find(*d) != std::string::npos) {
        throw ConfigError("template: delimiter '" + *d + "' appears inside the instructions");
      }
    }
  }
  if (rejected_token_budget <= 0 || chosen_token_budget <= 0) {
    throw ConfigError("template: token budgets must be positive");
  }
}

std::string PairPromptTemplate::render(const QAPair& seed) const {
  std::string out;
  out += rejected_instructions;
  out += "\n";
  out += chosen_instructions;
  out += "\n\nFormat your reply exactly as:\n";
  out += delimiter_rejected + "\n<first answer>\n";
  out += delimiter_chosen + "\n<second answer>\n\n";
  out += "Question: " + seed.question + "\n";
  if (include_reference) out += "Reference answer: " + seed.answer + "\n";
  return out;
}

std::optional<std::pair<std::string, std::string>> parse_dual_completion(
    std::string_view completion, const PairPromptTemplate& tmpl) {
  const auto& dr = tmpl.delimiter_rejected;
  const auto& dc = tmpl.delimiter_chosen;
  const auto pr = completion.find(dr);
  const auto pc = completion.find(dc);
  if (pr == std::string_view::npos || pc == std::string_view::npos) return std::nullopt;
  std::string rejected;
  std::string chosen;
  if (pr < pc) {
    rejected = trim(completion.substr(pr + dr.size(), pc - pr - dr.size()));
    chosen = trim(completion.substr(pc + dc.size()));
  } else {
    chosen = trim(completion.substr(pc + dc.size(), pr - pc - dc.size()));
    rejected = trim(completion.substr(pr + dr.size()));
  }
  if (rejected.empty() || chosen.empty()) return std::nullopt;
  return std::make_pair(std::move(rejected), std::move(chosen));
}

ValidationReport validate_pair(const PreferencePair& pair) {
  ValidationReport r;
  auto fail = [&](std::string v) {
    r.ok = false;
    r.violations.push_back(std::move(v));
  };
  if (trim(pair.id).empty()) fail("empty field: id");
  if (trim(pair.question).empty()) fail("empty field: question");
  if (trim(pair.chosen).empty()) fail("empty field: chosen");
  if (trim(pair.rejected).empty()) fail("empty field: rejected");
  if (!trim(pair.chosen).empty() && trim(pair.chosen) == trim(pair.rejected)) {
    fail("chosen equals rejected");
  }
  return r;
}

GenerationResult generate_preference_pairs(std::span<const QAPair> seeds,
                                           const PairPromptTemplate& tmpl,
                                           providers::TextGenerator& generator,
                                           const GenerationOptions& options) {
  tmpl.validate();
  providers::RetryPolicy retry;
  retry.max_retries = options.max_retries;

  struct Outcome {
    std::optional<PreferencePair> pair;
    std::string skip_reason;
    std::vector<std::string> warnings;
  };

  auto outcomes = providers::parallel_ordered<Outcome>(
      seeds.size(), options.max_in_flight, [&](std::size_t i) {
        const auto& seed = seeds[i];
        const auto prompt = tmpl.render(seed);
        std::string completion;
        try {
          completion = providers::call_with_retry(retry, "generator", generator.model_id(),
                                                  [&] { return generator.complete(prompt); });
        } catch (const ProviderError& e) {
          throw ProviderError(e.kind(), e.model_id(), e.attempts(),
                              "seed '" + seed.id + "': " + e.what());
        }
        Outcome o;
        auto parsed = parse_dual_completion(completion, tmpl);
        if (!parsed) {
          o.skip_reason = "completion has no parseable delimiters";
          return o;
        }
        PreferencePair p;
        p.id = seed.id;
        p.question = seed.question;
        p.rejected = std::move(parsed->first);
        p.chosen = std::move(parsed->second);
        p.source = seed.source;
        p.meta["reference_answer"] = seed.answer;
        p.meta["generator"] = generator.model_id();
        const auto report = validate_pair(p);
        if (!report.ok) {
          o.skip_reason = report.violations.front();
          return o;
        }
        if (whitespace_tokens(p.rejected) > 2u * std::size_t(tmpl.rejected_token_budget)) {
          o.warnings.push_back(seed.id + ": rejected answer exceeds twice its token budget");
        }
        if (whitespace_tokens(p.chosen) > 2u * std::size_t(tmpl.chosen_token_budget)) {
          o.warnings.push_back(seed.id + ": chosen answer exceeds twice its token budget");
        }
        o.pair = std::move(p);
        return o;
      });

  GenerationResult result;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& o = outcomes[i];
    if (o.pair) {
      result.pairs.push_back(std::move(*o.pair));
    } else {
      result.skipped.push_back({seeds[i].id, o.skip_reason});
    }
    for (auto& w : o.warnings) result.warnings.push_back(std::move(w));
  }
  if (result.pairs.empty()) throw ValidationError("empty dataset");
  return result;
}

// ---------------------------------------------------------------------------
// Splitting

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("split: train_fraction must lie strictly between 0 and 1");
  }
}

Split split_disjoint(std::span<const PreferencePair> pairs, const SplitSpec& spec) {
  spec.validate();
  if (pairs.size() < 2) throw ValidationError("split: need at least 2 pairs");

  // Pairs sharing a question travel together.
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto [it, inserted] = group_of.try_emplace(pairs[i].question, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = groups.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(groups[i - 1], groups[j]);
  }

  const auto target = static_cast<std::size_t>(
      std::floor(static_cast<double>(pairs.size()) * spec.train_fraction));
  Split out;
  for (const auto& g : groups) {
    auto& side = out.train.size() + g.size() <= target ? out.train : out.eval;
    for (auto i : g) side.push_back(pairs[i]);
  }
  if (out.train.empty() || out.eval.empty()) throw ValidationError("degenerate split");
  return out;
}

// ---------------------------------------------------------------------------
// Pair JSONL

std::string render_pairs_jsonl(std::span<const PreferencePair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    ordered_json j;
    j["id"] = p.id;
    j["question"] = p.question;
    j["chosen"] = p.chosen;
    j["rejected"] = p.rejected;
    j["source"] = p.source;
    j["meta"] = p.meta;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<PreferencePair> parse_pairs_jsonl(std::string_view contents, const std::string& origin) {
  static const std::array<std::string_view, 6> known = {"id", "question", "chosen",
                                                        "rejected", "source", "meta"};
  std::vector<PreferencePair> out;
  std::unordered_map<std::string, std::string> seen;
  for_each_line(contents, [&](std::string_view line, std::size_t n) {
    const auto at = where(origin, n);
    const json j = parse_object(line, at);
    for (const auto& [key, value] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw ValidationError(at + ": unknown key '" + key + "'");
      }
    }
    PreferencePair p;
    p.id = string_field(j, "id", at);
    p.question = string_field(j, "question", at);
    p.chosen = string_field(j, "chosen", at);
    p.rejected = string_field(j, "rejected", at);
    p.source = string_field(j, "source", at);
    if (auto it = j.find("meta"); it != j.end()) {
      if (!it->is_object()) throw ValidationError(at + ": field 'meta' must be an object");
      p.meta = *it;
    }
    const auto report = validate_pair(p);
    if (!report.ok) throw ValidationError(at + ": " + report.violations.front());
    if (auto [it, inserted] = seen.try_emplace(p.id, at); !inserted) {
      throw ValidationError("duplicate id '" + p.id + "' at " + it->second + " and " + at);
    }
    out.push_back(std::move(p));
  });
  return out;
}

void write_pairs(const std::string& path, std::span<const PreferencePair> pairs) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw IoError("parent directory does not exist: " + parent.string());
  }
  write_file(path, render_pairs_jsonl(pairs));
}

std::vector<PreferencePair> read_pairs(const std::string& path) {
  return parse_pairs_jsonl(read_file(path), path);
}

// ---------------------------------------------------------------------------
// Synthetic fixture

std::vector<PreferencePair> make_separable_pairs(std::size_t count, std::uint64_t seed) {
  static const std::array<std::string_view, 12> relations = {
      "mother", "father", "husband", "wife", "grandmother", "grandfather",
      "aunt", "uncle", "sister", "brother", "friend", "neighbor"};
  struct Topic {
    std::string_view name;
    std::string_view tip;
  };
  static const std::array<Topic, 16> topics = {{
      {"memory loss", "keep notes and a simple daily plan."},
      {"night wandering", "add door chimes and soft night lights."},
      {"refusing meals", "offer small snacks at calm times."},
      {"sundowning", "dim noise and keep evenings quiet."},
      {"repeated questions", "answer briefly and redirect kindly."},
      {"missed pills", "use a weekly box and ask the pharmacist."},
      {"agitation", "stay calm and lower the noise."},
      {"bathing fears", "warm the room and go slowly."},
      {"getting lost", "use an ID bracelet and a routine."},
      {"poor sleep", "keep set bed times and less daytime napping."},
      {"anxiety", "reassure often and keep things familiar."},
      {"hiding items", "check usual spots and stay patient."},
      {"confusion", "use short sentences and clear cues."},
      {"mood swings", "notice triggers and give them space."},
      {"driving safety", "ask the doctor about a driving review."},
      {"forgetting names", "use name tags and gentle reminders."},
  }};
  static const std::array<std::string_view, 2> frames = {"How do I help my %R with %T?",
                                                         "What helps my %R with %T?"};
  static const std::array<std::string_view, 3> warm = {
      "I hear you, that is hard. ", "I understand, you are not alone. ",
      "That sounds tough, be gentle. "};
  static const std::array<std::string_view, 3> cold = {
      "Obviously, comply now. ", "Frankly, just obey orders. ", "Listen, do as told. "};

  const std::size_t capacity = relations.size() * topics.size() * frames.size();
  if (count > capacity) {
    throw ValidationError("separable fixture supports at most " + std::to_string(capacity) + " pairs");
  }
  std::vector<std::size_t> order(capacity);
  for (std::size_t i = 0; i < capacity; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = capacity; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

  std::vector<PreferencePair> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto idx = order[k];
    const auto& rel = relations[idx % relations.size()];
    const auto& topic = topics[(idx / relations.size()) % topics.size()];
    const auto& frame = frames[idx / (relations.size() * topics.size())];
    std::string q(frame);
    q.replace(q.find("%R"), 2, rel);
    q.replace(q.find("%T"), 2, topic.name);
    PreferencePair p;
    p.question = q;
    p.chosen = std::string(warm[rng() % warm.size()]) + std::string(topic.tip);
    p.rejected = std::string(cold[rng() % cold.size()]) + std::string(topic.tip);
    p.id = content_id(q);
    p.source = "synthetic:separable";
    p.meta["fixture"] = "separable";
    p.meta["seed"] = seed;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace prefalign::corpus
