#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "prefalign/corpus.hpp"
#include "prefalign/model.hpp"

namespace prefalign::dpo {

struct DpoConfig {
  double beta = 0.1;
  double peak_lr = 2e-3;
  int warmup_steps = 10;
  int total_steps = 200;
  int batch_size = 8;
  int epochs = 4;
  int patience = 2;
  double weight_decay = 0.01;
  std::uint64_t seed = 42;

  void validate() const;
};

// Sequence log-likelihoods in nats.
struct PairScores {
  double policy_chosen = 0.0;
  double policy_rejected = 0.0;
  double ref_chosen = 0.0;
  double ref_rejected = 0.0;
};

struct DpoLoss {
  double loss = 0.0;
  double margin = 0.0;
};

double margin(const PairScores& s);

// -log sigmoid(beta * margin), evaluated as softplus(-beta * margin).
DpoLoss dpo_loss(const PairScores& scores, double beta);
double dpo_loss_from_margin(double margin, double beta);
double dpo_loss_grad(double margin, double beta);

inline double reward_chosen(const PairScores& s, double beta) {
  return beta * (s.policy_chosen - s.ref_chosen);
}
inline double reward_rejected(const PairScores& s, double beta) {
  return beta * (s.policy_rejected - s.ref_rejected);
}

struct DpoBatchStats {
  double loss = 0.0;
  double mean_margin = 0.0;
  double reward_chosen = 0.0;
  double reward_rejected = 0.0;
  double preference_accuracy = 0.0;
};

DpoBatchStats batch_stats(std::span<const PairScores> scores, double beta);

// Linear warmup then cosine decay to zero. Steps past total_steps clamp.
double lr_at(int step, const DpoConfig& config);

// A pair as token sequences: prompt, then each response terminated by the
// end-of-text byte.
struct EncodedPair {
  std::string id;
  model::Tokens prompt;
  model::Tokens chosen;
  model::Tokens rejected;
};

enum class Overflow { kReject, kTruncate };

std::string render_prompt(std::string_view question);

// kReject raises a ValidationError naming the pair; kTruncate clips the
// question from the front and responses from the back to fit.
std::vector<EncodedPair> encode_pairs(std::span<const corpus::PreferencePair> pairs, int context_length,
                                      Overflow overflow = Overflow::kReject);

template <typename Scalar>
PairScores score_pair(const model::Model<Scalar>& policy, const model::Model<Scalar>& reference,
                      const EncodedPair& pair);

// Fills policy grads with d(mean batch loss)/d(theta). `ref` holds the
// reference (chosen, rejected) logprobs of each pair. Returns per-pair scores.
template <typename Scalar>
std::vector<PairScores> accumulate_gradients(model::Model<Scalar>& policy,
                                             std::span<const EncodedPair> batch,
                                             std::span<const std::pair<double, double>> ref,
                                             double beta);

template <typename Scalar>
std::vector<std::pair<double, double>> reference_logprobs(const model::Model<Scalar>& reference,
                                                          std::span<const EncodedPair> pairs);

template <typename Scalar>
std::vector<PairScores> score_pairs(const model::Model<Scalar>& policy,
                                    std::span<const EncodedPair> pairs,
                                    std::span<const std::pair<double, double>> ref);

// Fraction of pairs whose chosen reward strictly exceeds the rejected one.
double preference_accuracy(std::span<const PairScores> scores, double beta);

template <typename Scalar>
double preference_accuracy(const model::Model<Scalar>& policy, const model::ReferenceModel<Scalar>& reference,
                           std::span<const EncodedPair> pairs, double beta);

class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  template <typename Scalar>
  void step(model::Model<Scalar>& model, double lr, double weight_decay);

  long steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

struct StepRecord {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double mean_margin = 0.0;
  double preference_accuracy = 0.0;
};

struct ValidationRecord {
  int epoch = 0;  // 0 is the evaluation before any update
  int step = 0;
  double loss = 0.0;
  double preference_accuracy = 0.0;
};

struct TrainingTrace {
  std::vector<StepRecord> steps;
  std::vector<ValidationRecord> validation;
  int best_epoch = 0;
  bool stopped_early = false;

  double best_validation_loss() const;
  std::string steps_csv() const;
  std::string validation_csv() const;
};

template <typename Scalar>
struct TrainResult {
  model::Model<Scalar> policy;
  TrainingTrace trace;
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const ValidationRecord&)> on_validation;
};

// Minibatch AdamW on the mean DPO loss. Validates once before training and
// after every epoch; stops after `patience` evaluations without improvement
// and returns the parameters of the best evaluation.
template <typename Scalar>
TrainResult<Scalar> train(model::Model<Scalar> policy, const model::ReferenceModel<Scalar>& reference,
                          std::span<const EncodedPair> train_pairs, std::span<const EncodedPair> val_pairs,
                          const DpoConfig& config, const TrainHooks& hooks = {});

}  // namespace prefalign::dpo
