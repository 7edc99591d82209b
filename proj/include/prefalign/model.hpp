#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prefalign/common.hpp"

namespace prefalign::model {

using TokenId = int;
using Tokens = std::vector<TokenId>;

// Byte 0x00 doubles as end-of-text; training appends it to responses.
inline constexpr TokenId kEndOfText = 0;

Tokens tokenize(std::string_view text);
std::string detokenize(std::span<const TokenId> tokens, int vocab_size = 256);

struct ModelConfig {
  int vocab_size = 256;
  int context_length = 256;
  int layers = 2;
  int heads = 4;
  int embed_dim = 128;
  std::uint64_t seed = 1234;

  void validate() const;
  int head_dim() const { return embed_dim / heads; }
  int hidden_dim() const { return 4 * embed_dim; }
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr std::array<std::string_view, 4> kProjectionNames = {"q_proj", "k_proj", "v_proj",
                                                                     "o_proj"};

struct LoraConfig {
  int rank = 8;
  double alpha = 16.0;
  std::vector<std::string> targets{"q_proj", "v_proj"};
  std::uint64_t seed = 4321;

  void validate() const;
  double scale() const { return alpha / rank; }
  bool operator==(const LoraConfig&) const = default;
};

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct Parameter {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;  // allocated on first accumulation
  bool trainable = true;
};

// Adds scale * B * A to a frozen projection. A is rank x d_in, B is d_out x rank.
template <typename Scalar>
struct LoraFactors {
  Parameter<Scalar> a;
  Parameter<Scalar> b;
  Scalar scale{};
};

template <typename Scalar>
struct Projection {
  Parameter<Scalar> weight;  // d_out x d_in
  std::optional<LoraFactors<Scalar>> lora;
};

template <typename Scalar>
struct Block {
  Parameter<Scalar> attn_norm;  // D x 1 RMSNorm gain
  Projection<Scalar> q, k, v, o;
  Parameter<Scalar> mlp_norm;
  Parameter<Scalar> up;    // 4D x D
  Parameter<Scalar> down;  // D x 4D

  Projection<Scalar>* projection(std::string_view name);
  const Projection<Scalar>* projection(std::string_view name) const;
};

// Pre-norm decoder-only transformer: learned positions, RMSNorm, causal
// multi-head attention, GELU MLP, untied output head. Activations are laid
// out one column per position.
template <typename Scalar>
class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const std::optional<LoraConfig>& lora() const { return lora_; }

  Parameter<Scalar> token_embedding;     // D x V
  Parameter<Scalar> position_embedding;  // D x context
  std::vector<Block<Scalar>> blocks;
  Parameter<Scalar> final_norm;  // D x 1
  Parameter<Scalar> lm_head;     // V x D

  // Visits every parameter with a stable dotted name, in a fixed order.
  template <typename F>
  void for_each_parameter(F&& f);
  template <typename F>
  void for_each_parameter(F&& f) const;

  void zero_grad();

  template <typename To>
  Model<To> cast() const;

 private:
  template <typename S>
  friend class Model;
  template <typename S>
  friend Model<S> apply_lora(Model<S> model, const LoraConfig& config);
  template <typename S>
  friend Model<S> merge_lora(Model<S> model);

  ModelConfig config_;
  std::optional<LoraConfig> lora_;
};

// Adds fresh adapters (A random, B zero) to the target projections of every
// block and freezes all base parameters.
template <typename Scalar>
Model<Scalar> apply_lora(Model<Scalar> model, const LoraConfig& config);

// Folds scale * B * A into the base weights, removes the adapters and makes
// every parameter trainable again.
template <typename Scalar>
Model<Scalar> merge_lora(Model<Scalar> model);

struct ParameterCounts {
  std::size_t trainable = 0;
  std::size_t total = 0;
};

template <typename Scalar>
ParameterCounts count_parameters(const Model<Scalar>& model);

template <typename Scalar>
double trainable_fraction(const Model<Scalar>& model);

template <typename Scalar>
bool parameters_equal(const Model<Scalar>& a, const Model<Scalar>& b);

namespace detail {

template <typename Scalar>
struct LinearCache {
  Matrix<Scalar> input;
  Matrix<Scalar> low_rank;  // A * input, empty without adapters
};

template <typename Scalar>
struct NormCache {
  Matrix<Scalar> normalized;  // x * rinv (before the gain)
  Vector<Scalar> rinv;
};

template <typename Scalar>
struct BlockCache {
  NormCache<Scalar> attn_norm;
  LinearCache<Scalar> q, k, v, o;
  Matrix<Scalar> queries, keys, values;
  std::vector<Matrix<Scalar>> probs;  // per head, T x T, row = query
  NormCache<Scalar> mlp_norm;
  LinearCache<Scalar> up, down;
  Matrix<Scalar> pre_activation;
};

template <typename Scalar>
struct Trace {
  Tokens tokens;
  std::vector<BlockCache<Scalar>> blocks;
  NormCache<Scalar> final_norm;
  Matrix<Scalar> logits;  // V x T
};

}  // namespace detail

template <typename Scalar>
Matrix<Scalar> forward_logits(const Model<Scalar>& model, std::span<const TokenId> tokens);

// Forward pass that keeps everything needed for backpropagation.
template <typename Scalar>
struct ScoredSequence {
  double logprob = 0.0;
  std::size_t prompt_length = 0;
  detail::Trace<Scalar> trace;
};

template <typename Scalar>
ScoredSequence<Scalar> score_sequence(const Model<Scalar>& model, std::span<const TokenId> prompt,
                                      std::span<const TokenId> response);

// Accumulates weight * d(logprob)/d(theta) into the grads of trainable
// parameters.
template <typename Scalar>
void backprop_logprob(Model<Scalar>& model, const ScoredSequence<Scalar>& scored, double weight);

// Sum over response positions of log softmax(logits)[token]; prompt tokens
// only condition. Requires a non-empty prompt and response that together fit
// the context.
template <typename Scalar>
double sequence_logprob(const Model<Scalar>& model, std::span<const TokenId> prompt,
                        std::span<const TokenId> response);

struct DecodeOptions {
  enum class Mode { kGreedy, kTemperature };
  Mode mode = Mode::kGreedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  static DecodeOptions greedy() { return {}; }
  static DecodeOptions sampled(double temperature, std::uint64_t seed) {
    return {Mode::kTemperature, temperature, seed};
  }
};

template <typename Scalar>
Tokens generate_tokens(const Model<Scalar>& model, std::span<const TokenId> prompt,
                       int max_new_tokens, const DecodeOptions& decode);

template <typename Scalar>
std::string generate(const Model<Scalar>& model, std::string_view prompt, int max_new_tokens,
                     const DecodeOptions& decode = DecodeOptions::greedy());

// Frozen deep copy of a policy taken before training.
template <typename Scalar>
class ReferenceModel {
 public:
  explicit ReferenceModel(const Model<Scalar>& model)
      : model_(std::make_shared<const Model<Scalar>>(model)) {}
  const Model<Scalar>& model() const { return *model_; }

 private:
  std::shared_ptr<const Model<Scalar>> model_;
};

template <typename Scalar>
ReferenceModel<Scalar> snapshot_reference(const Model<Scalar>& model) {
  return ReferenceModel<Scalar>(model);
}

// ---------------------------------------------------------------------------

template <typename Scalar>
template <typename F>
void Model<Scalar>::for_each_parameter(F&& f) {
  std::as_const(*this).for_each_parameter(
      [&](const std::string& name, const Parameter<Scalar>& p) {
        f(name, const_cast<Parameter<Scalar>&>(p));
      });
}

template <typename Scalar>
template <typename F>
void Model<Scalar>::for_each_parameter(F&& f) const {
  f(std::string("tok_emb"), token_embedding);
  f(std::string("pos_emb"), position_embedding);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto prefix = "blocks." + std::to_string(l) + ".";
    const auto& b = blocks[l];
    f(prefix + "attn_norm", b.attn_norm);
    for (auto name : kProjectionNames) {
      const auto* proj = b.projection(name);
      const auto base = prefix + std::string(name);
      f(base + ".weight", proj->weight);
      if (proj->lora) {
        f(base + ".lora_a", proj->lora->a);
        f(base + ".lora_b", proj->lora->b);
      }
    }
    f(prefix + "mlp_norm", b.mlp_norm);
    f(prefix + "up", b.up);
    f(prefix + "down", b.down);
  }
  f(std::string("final_norm"), final_norm);
  f(std::string("lm_head"), lm_head);
}

template <typename Scalar>
template <typename To>
Model<To> Model<Scalar>::cast() const {
  Model<To> out(config_);
  out.lora_ = lora_;
  auto convert = [](const Parameter<Scalar>& p) {
    Parameter<To> q;
    q.value = p.value.template cast<To>();
    q.trainable = p.trainable;
    return q;
  };
  auto convert_proj = [&](const Projection<Scalar>& p) {
    Projection<To> q;
    q.weight = convert(p.weight);
    if (p.lora) q.lora = LoraFactors<To>{convert(p.lora->a), convert(p.lora->b), To(p.lora->scale)};
    return q;
  };
  out.token_embedding = convert(token_embedding);
  out.position_embedding = convert(position_embedding);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    auto& o = out.blocks[l];
    o.attn_norm = convert(b.attn_norm);
    o.q = convert_proj(b.q);
    o.k = convert_proj(b.k);
    o.v = convert_proj(b.v);
    o.o = convert_proj(b.o);
    o.mlp_norm = convert(b.mlp_norm);
    o.up = convert(b.up);
    o.down = convert(b.down);
  }
  out.final_norm = convert(final_norm);
  out.lm_head = convert(lm_head);
  return out;
}

}  // namespace prefalign::model
