#include "prefalign/providers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>

namespace prefalign::providers {

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::kEmbedding: return "embedding";
    case ProviderKind::kJudge: return "judge";
    case ProviderKind::kNli: return "nli";
    case ProviderKind::kFormality: return "formality";
    case ProviderKind::kGenerator: return "generator";
  }
  return "unknown";
}

ProviderKind parse_kind(std::string_view name) {
  for (auto k : {ProviderKind::kEmbedding, ProviderKind::kJudge, ProviderKind::kNli,
                 ProviderKind::kFormality, ProviderKind::kGenerator}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown provider kind: " + std::string(name));
}

void ProviderConfig::validate() const {
  const std::string where = std::string(to_string(kind)) + " provider";
  if (max_retries < 0) throw ConfigError(where + ": max_retries must be >= 0");
  if (!(timeout_s > 0)) throw ConfigError(where + ": timeout must be > 0");
  if (backoff_base_s < 0) throw ConfigError(where + ": backoff_base must be >= 0");
  if (model_id.empty()) throw ConfigError(where + ": model_id is required");
}

// ---------------------------------------------------------------------------

std::vector<EmbeddingVector> Embedder::embed(std::span<const std::string> texts) {
  if (texts.empty()) return {};
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) {
      throw ValidationError("embed: text " + std::to_string(i) + " is empty");
    }
  }
  // Embed each distinct text once so duplicates share one vector.
  std::vector<std::string> unique;
  std::unordered_map<std::string_view, std::size_t> index;
  std::vector<std::size_t> slot(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto [it, inserted] = index.try_emplace(texts[i], unique.size());
    if (inserted) unique.push_back(texts[i]);
    slot[i] = it->second;
  }
  auto raw = do_embed(unique);
  if (raw.size() != unique.size()) {
    throw IntegrityError("embedding backend '" + model_id() + "' returned " +
                         std::to_string(raw.size()) + " vectors for " +
                         std::to_string(unique.size()) + " texts");
  }
  {
    std::lock_guard lock(dim_mutex_);
    for (const auto& v : raw) {
      if (!v.allFinite()) throw IntegrityError("non-finite embedding from '" + model_id() + "'");
      if (!dim_) dim_ = v.size();
      if (v.size() != *dim_) {
        throw IntegrityError("embedding dimension drift for '" + model_id() + "': " +
                             std::to_string(*dim_) + " then " + std::to_string(v.size()));
      }
    }
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto s : slot) out.push_back({raw[s], model_id()});
  return out;
}

std::string Judge::judge(std::string_view system_instruction, std::string_view user_content) {
  if (trim(system_instruction).empty()) throw ValidationError("judge: empty system instruction");
  if (trim(user_content).empty()) throw ValidationError("judge: empty user content");
  return do_judge(system_instruction, user_content);
}

double NliClassifier::entailment(std::string_view premise, std::string_view hypothesis) {
  if (trim(premise).empty() || trim(hypothesis).empty()) {
    throw ValidationError("nli: premise and hypothesis must be non-empty");
  }
  const double p = do_entailment(premise, hypothesis);
  if (std::isnan(p)) throw ProviderError("nli", model_id(), 1, "NaN entailment score");
  return std::clamp(p, 0.0, 1.0);
}

FormalityResult FormalityClassifier::classify(std::string_view text) {
  if (trim(text).empty()) throw ValidationError("formality: empty text");
  auto r = do_classify(text);
  if (!std::isfinite(r.score) || r.score < 0.0 || r.score > 1.0) {
    throw IntegrityError("formality score out of range from '" + model_id() + "'");
  }
  const bool formal = r.label == FormalityLabel::kFormal;
  if ((r.score >= 0.5) != formal) {
    throw IntegrityError("formality label/score incoherent from '" + model_id() + "'");
  }
  return r;
}

FormalityResult normalize_formality(std::string_view label, double label_confidence) {
  const auto l = to_lower(trim(label));
  const bool informal = l.find("informal") != std::string::npos ||
                        l.find("in-formal") != std::string::npos;
  const bool formal = !informal && l.find("formal") != std::string::npos;
  if (!informal && !formal) throw IntegrityError("unrecognized formality label: " + std::string(label));
  const double c = std::clamp(label_confidence, 0.0, 1.0);
  const double p_formal = formal ? c : 1.0 - c;
  return {p_formal >= 0.5 ? FormalityLabel::kFormal : FormalityLabel::kInformal, p_formal};
}

// ---------------------------------------------------------------------------

MockEmbedder::MockEmbedder(std::string model_id, int dim)
    : model_id_(std::move(model_id)), dim_(dim) {
  if (dim_ < 2) throw ConfigError("mock embedder dimension must be >= 2");
}

std::vector<Eigen::VectorXd> MockEmbedder::do_embed(std::span<const std::string> texts) {
  const std::uint64_t seed = fnv1a64(model_id_);
  std::vector<Eigen::VectorXd> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    auto add = [&](std::string_view feature, double weight) {
      const std::uint64_t h = fnv1a64(feature, seed);
      const double sign = ((h >> 32) & 1u) ? 1.0 : -1.0;
      v[static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_))] += sign * weight;
    };
    const auto lower = to_lower(text);
    for (const auto& w : split_words(lower)) add(w, 1.0);
    if (lower.size() < 3) {
      add(lower, 0.5);
    } else {
      for (std::size_t i = 0; i + 3 <= lower.size(); ++i) {
        add(std::string_view(lower).substr(i, 3), 0.5);
      }
    }
    const double n = v.norm();
    if (n == 0.0) {
      v[static_cast<Eigen::Index>(fnv1a64(lower, seed) % static_cast<std::uint64_t>(dim_))] = 1.0;
    } else {
      v /= n;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string MockJudge::Script::take() {
  const auto& r = replies[std::min(next, replies.size() - 1)];
  if (next < replies.size()) ++next;
  return r;
}

MockJudge::MockJudge(bool strict, std::string model_id)
    : strict_(strict), model_id_(std::move(model_id)) {}

void MockJudge::add(std::string user_content, std::vector<std::string> replies) {
  if (replies.empty()) throw ConfigError("mock judge: empty reply list");
  std::lock_guard lock(mutex_);
  canned_[std::move(user_content)] = Script{std::move(replies)};
}

void MockJudge::set_fallback(std::vector<std::string> replies) {
  if (replies.empty()) throw ConfigError("mock judge: empty fallback list");
  std::lock_guard lock(mutex_);
  fallback_ = Script{std::move(replies)};
}

std::vector<MockJudge::Call> MockJudge::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::string MockJudge::do_judge(std::string_view system_instruction,
                                std::string_view user_content) {
  std::lock_guard lock(mutex_);
  calls_.push_back({std::string(system_instruction), std::string(user_content)});
  if (auto it = canned_.find(user_content); it != canned_.end()) return it->second.take();
  if (strict_) {
    throw MockError("strict mock judge has no canned reply for content (" +
                    std::to_string(user_content.size()) + " bytes)");
  }
  if (fallback_) return fallback_->take();
  char buf[8];
  std::snprintf(buf, sizeof buf, "%.1f", double(fnv1a64(user_content) % 11) / 10.0);
  return buf;
}

double MockNli::do_entailment(std::string_view premise, std::string_view hypothesis) {
  if (premise == hypothesis) return 1.0;
  const auto pw = split_words(to_lower(premise));
  const auto hw = split_words(to_lower(hypothesis));
  const std::set<std::string> premise_set(pw.begin(), pw.end());
  const std::set<std::string> hyp_set(hw.begin(), hw.end());
  if (hyp_set.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& w : hyp_set) hit += premise_set.count(w);
  return double(hit) / double(hyp_set.size());
}

FormalityResult MockFormality::do_classify(std::string_view text) {
  const auto t = trim(text);
  const bool contraction = t.find('\'') != std::string::npos ||
                           t.find("\xE2\x80\x99") != std::string::npos;
  const bool period = !t.empty() && t.back() == '.';
  if (!contraction && period) return {FormalityLabel::kFormal, 0.9};
  return {FormalityLabel::kInformal, 0.1};
}

namespace {

std::string line_after(std::string_view text, std::string_view label) {
  const auto pos = text.find(label);
  if (pos == std::string_view::npos) return {};
  const auto start = pos + label.size();
  const auto end = text.find('\n', start);
  return trim(text.substr(start, end == std::string_view::npos ? text.npos : end - start));
}

std::string clip_words(const std::string& text, std::size_t max_chars) {
  if (text.size() <= max_chars) return text;
  auto cut = text.rfind(' ', max_chars);
  if (cut == std::string::npos || cut == 0) cut = max_chars;
  return trim(std::string_view(text).substr(0, cut));
}

}  // namespace

MockGenerator::MockGenerator(std::string delimiter_rejected, std::string delimiter_chosen,
                             std::size_t max_answer_chars, std::string model_id)
    : delimiter_rejected_(std::move(delimiter_rejected)),
      delimiter_chosen_(std::move(delimiter_chosen)),
      max_answer_chars_(max_answer_chars),
      model_id_(std::move(model_id)) {}

std::string MockGenerator::complete(std::string_view prompt) {
  const auto question = line_after(prompt, "Question:");
  auto reference = line_after(prompt, "Reference answer:");
  if (question.empty()) return "I cannot find a question in this prompt.";
  if (reference.empty()) reference = "Keep routines steady and ask the care team for support.";
  reference = clip_words(reference, max_answer_chars_);
  std::string rejected = "Obviously this is basic. Take supplements and follow protocol.";
  std::string chosen = "I hear you, this is hard. " + reference;
  return delimiter_rejected_ + "\n" + rejected + "\n" + delimiter_chosen_ + "\n" + chosen + "\n";
}

}  // namespace prefalign::providers
