#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "prefalign/common.hpp"

namespace prefalign::providers {

enum class ProviderKind { kEmbedding, kJudge, kNli, kFormality, kGenerator };

std::string_view to_string(ProviderKind kind);
ProviderKind parse_kind(std::string_view name);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::kJudge;
  std::string endpoint;
  std::string model_id;
  std::string api_key_env;
  double timeout_s = 30.0;
  int max_retries = 3;
  double backoff_base_s = 0.5;

  void validate() const;
};

// Model identifiers used when a config does not override them.
inline constexpr std::string_view kDefaultAdaEmbedding = "text-embedding-ada-002";
inline constexpr std::string_view kDefaultSentenceEmbedding = "all-mpnet-base-v2";
inline constexpr std::string_view kDefaultNliModel = "MoritzLaurer/deberta-v3-base-zeroshot-v2.0";
inline constexpr std::string_view kDefaultFormalityModel = "roberta-base-formality-ranker";
inline constexpr std::string_view kDefaultGeneratorModel = "Llama 3.1-8B-Lexi-Uncensored-V2";

struct EmbeddingVector {
  Eigen::VectorXd values;
  std::string model_id;
};

enum class FormalityLabel { kFormal, kInformal };

struct FormalityResult {
  FormalityLabel label = FormalityLabel::kInformal;
  double score = 0.0;  // probability of "formal"
};

// Thrown by a single transport attempt. Retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Thrown by mocks when a canned answer is missing. Never retried.
class MockError : public Error {
 public:
  using Error::Error;
};

struct RetryPolicy {
  int max_retries = 3;
  double backoff_base_s = 0.5;
  std::function<void(double)> sleep = [](double s) {
    std::this_thread::sleep_for(std::chrono::duration<double>(s));
  };
};

// Runs `fn` until it succeeds or the retry budget is spent. Backoff before
// retry k (1-based) is backoff_base_s * 2^(k-1).
template <typename F>
auto call_with_retry(const RetryPolicy& policy, std::string_view kind,
                     std::string_view model_id, F&& fn, int* attempts_out = nullptr)
    -> decltype(fn()) {
  int attempt = 0;
  for (;;) {
    ++attempt;
    try {
      auto result = fn();
      if (attempts_out) *attempts_out = attempt;
      return result;
    } catch (const TransportError& e) {
      if (attempt > policy.max_retries) {
        if (attempts_out) *attempts_out = attempt;
        throw ProviderError(std::string(kind), std::string(model_id), attempt, e.what());
      }
      if (policy.sleep) policy.sleep(policy.backoff_base_s * double(1u << (attempt - 1)));
    }
  }
}

// Each interface validates inputs and postconditions around a protected hook,
// so every backend honors the same contract.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual const std::string& model_id() const = 0;

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts);

 protected:
  virtual std::vector<Eigen::VectorXd> do_embed(std::span<const std::string> texts) = 0;

 private:
  std::mutex dim_mutex_;
  std::optional<Eigen::Index> dim_;
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual const std::string& model_id() const = 0;

  std::string judge(std::string_view system_instruction, std::string_view user_content);

 protected:
  virtual std::string do_judge(std::string_view system_instruction,
                               std::string_view user_content) = 0;
};

class NliClassifier {
 public:
  virtual ~NliClassifier() = default;
  virtual const std::string& model_id() const = 0;

  // Probability that `hypothesis` is entailed by `premise`, clamped to [0, 1].
  double entailment(std::string_view premise, std::string_view hypothesis);

 protected:
  virtual double do_entailment(std::string_view premise, std::string_view hypothesis) = 0;
};

class FormalityClassifier {
 public:
  virtual ~FormalityClassifier() = default;
  virtual const std::string& model_id() const = 0;

  FormalityResult classify(std::string_view text);

 protected:
  virtual FormalityResult do_classify(std::string_view text) = 0;
};

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual const std::string& model_id() const = 0;
  virtual std::string complete(std::string_view prompt) = 0;
};

// Maps a backend's raw (label, score) onto probability-of-formal; the score
// is taken to be confidence in the returned label.
FormalityResult normalize_formality(std::string_view label, double label_confidence);

// ---------------------------------------------------------------------------
// Deterministic mocks.

// Feature-hashed bag of lowercase words plus character trigrams, seeded by the
// model id, L2-normalized.
class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::string model_id, int dim = 64);
  const std::string& model_id() const override { return model_id_; }
  int dim() const { return dim_; }

 protected:
  std::vector<Eigen::VectorXd> do_embed(std::span<const std::string> texts) override;

 private:
  std::string model_id_;
  int dim_;
};

// Canned replies keyed by exact user content. A key may carry several replies,
// consumed in order with the last one repeating. Non-strict mocks fall back to
// `fallback` if set, otherwise to a hash of the content snapped to the 0.1 grid.
class MockJudge final : public Judge {
 public:
  explicit MockJudge(bool strict = false, std::string model_id = "mock-judge");
  const std::string& model_id() const override { return model_id_; }

  void add(std::string user_content, std::vector<std::string> replies);
  void set_fallback(std::vector<std::string> replies);

  struct Call {
    std::string system;
    std::string user;
  };
  std::vector<Call> calls() const;

 protected:
  std::string do_judge(std::string_view system_instruction,
                       std::string_view user_content) override;

 private:
  struct Script {
    std::vector<std::string> replies;
    std::size_t next = 0;
    std::string take();
  };

  bool strict_;
  std::string model_id_;
  mutable std::mutex mutex_;
  std::map<std::string, Script, std::less<>> canned_;
  std::optional<Script> fallback_;
  std::vector<Call> calls_;
};

// premise == hypothesis -> 1; otherwise the fraction of distinct hypothesis
// words (lowercased) that also occur in the premise.
class MockNli final : public NliClassifier {
 public:
  explicit MockNli(std::string model_id = "mock-nli") : model_id_(std::move(model_id)) {}
  const std::string& model_id() const override { return model_id_; }

 protected:
  double do_entailment(std::string_view premise, std::string_view hypothesis) override;

 private:
  std::string model_id_;
};

// No contractions and a final period -> (formal, 0.9); else (informal, 0.1).
class MockFormality final : public FormalityClassifier {
 public:
  explicit MockFormality(std::string model_id = "mock-formality")
      : model_id_(std::move(model_id)) {}
  const std::string& model_id() const override { return model_id_; }

 protected:
  FormalityResult do_classify(std::string_view text) override;

 private:
  std::string model_id_;
};

// Answers the dual-answer generation prompt: reads the question (and the
// reference answer when present) back out of the prompt and emits a cold
// rejected answer and a warm chosen answer between the given delimiters.
class MockGenerator final : public TextGenerator {
 public:
  MockGenerator(std::string delimiter_rejected, std::string delimiter_chosen,
                std::size_t max_answer_chars = 120, std::string model_id = "mock-generator");
  const std::string& model_id() const override { return model_id_; }
  std::string complete(std::string_view prompt) override;

 private:
  std::string delimiter_rejected_;
  std::string delimiter_chosen_;
  std::size_t max_answer_chars_;
  std::string model_id_;
};

class CallbackGenerator final : public TextGenerator {
 public:
  explicit CallbackGenerator(std::function<std::string(std::string_view)> fn,
                             std::string model_id = "callback-generator")
      : fn_(std::move(fn)), model_id_(std::move(model_id)) {}
  const std::string& model_id() const override { return model_id_; }
  std::string complete(std::string_view prompt) override { return fn_(prompt); }

 private:
  std::function<std::string(std::string_view)> fn_;
  std::string model_id_;
};

// ---------------------------------------------------------------------------
// JSON-over-HTTP clients.

struct HttpOptions {
  ProviderConfig config;
  RetryPolicy retry;
};

HttpOptions http_options(const ProviderConfig& config);

std::unique_ptr<Embedder> make_http_embedder(HttpOptions options);
std::unique_ptr<Judge> make_http_judge(HttpOptions options);
std::unique_ptr<NliClassifier> make_http_nli(HttpOptions options);
std::unique_ptr<FormalityClassifier> make_http_formality(HttpOptions options);
std::unique_ptr<TextGenerator> make_http_generator(HttpOptions options);

// Bounds concurrent remote calls across all HTTP clients in the process.
void set_max_in_flight(int n);
int max_in_flight();

// Runs fn(i) for i in [0, n) on up to `workers` threads; results keep index
// order. The first exception (lowest index) is rethrown after all workers join.
template <typename T, typename F>
std::vector<T> parallel_ordered(std::size_t n, int workers, F&& fn);

}  // namespace prefalign::providers

#include "prefalign/detail/parallel.hpp"
