#include "prefalign/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace prefalign::dpo {

using model::Model;
using model::Tokens;

void DpoConfig::validate() const {
  if (!(beta > 0) || !std::isfinite(beta)) throw ConfigError("dpo: beta must be > 0");
  if (!(peak_lr > 0) || !std::isfinite(peak_lr)) throw ConfigError("dpo: peak_lr must be > 0");
  if (warmup_steps < 0) throw ConfigError("dpo: warmup_steps must be >= 0");
  if (total_steps < 0) throw ConfigError("dpo: total_steps must be >= 0");
  if (warmup_steps >= total_steps) throw ConfigError("dpo: warmup_steps must be < total_steps");
  if (batch_size < 1) throw ConfigError("dpo: batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("dpo: epochs must be >= 0");
  if (patience < 1) throw ConfigError("dpo: patience must be >= 1");
  if (weight_decay < 0) throw ConfigError("dpo: weight_decay must be >= 0");
}

double margin(const PairScores& s) {
  return (s.policy_chosen - s.ref_chosen) - (s.policy_rejected - s.ref_rejected);
}

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_finite(double v, const char* field) {
  if (!std::isfinite(v)) throw ValidationError(std::string("dpo_loss: non-finite ") + field);
}

}  // namespace

double dpo_loss_from_margin(double m, double beta) { return softplus(-beta * m); }

double dpo_loss_grad(double m, double beta) { return -beta * sigmoid(-beta * m); }

DpoLoss dpo_loss(const PairScores& s, double beta) {
  require_finite(s.policy_chosen, "policy_chosen");
  require_finite(s.policy_rejected, "policy_rejected");
  require_finite(s.ref_chosen, "ref_chosen");
  require_finite(s.ref_rejected, "ref_rejected");
  if (!(beta > 0) || !std::isfinite(beta)) throw ValidationError("dpo_loss: beta must be > 0");
  const double m = margin(s);
  return {dpo_loss_from_margin(m, beta), m};
}

DpoBatchStats batch_stats(std::span<const PairScores> scores, double beta) {
  DpoBatchStats st;
  if (scores.empty()) return st;
  for (const auto& s : scores) {
    const auto l = dpo_loss(s, beta);
    st.loss += l.loss;
    st.mean_margin += l.margin;
    st.reward_chosen += reward_chosen(s, beta);
    st.reward_rejected += reward_rejected(s, beta);
  }
  const auto n = static_cast<double>(scores.size());
  st.loss /= n;
  st.mean_margin /= n;
  st.reward_chosen /= n;
  st.reward_rejected /= n;
  st.preference_accuracy = preference_accuracy(scores, beta);
  return st;
}

double lr_at(int step, const DpoConfig& c) {
  step = std::clamp(step, 0, c.total_steps);
  if (step < c.warmup_steps) return c.peak_lr * step / c.warmup_steps;
  const double progress =
      static_cast<double>(step - c.warmup_steps) / static_cast<double>(c.total_steps - c.warmup_steps);
  return c.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// ---------------------------------------------------------------------------
// Encoding

std::string render_prompt(std::string_view question) {
  return "Question: " + std::string(question) + "\nAnswer: ";
}

std::vector<EncodedPair> encode_pairs(std::span<const corpus::PreferencePair> pairs, int context_length,
                                      Overflow overflow) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  const auto limit = static_cast<std::size_t>(context_length);
  for (const auto& p : pairs) {
    EncodedPair e;
    e.id = p.id;
    e.prompt = model::tokenize(render_prompt(p.question));
    e.chosen = model::tokenize(p.chosen);
    e.chosen.push_back(model::kEndOfText);
    e.rejected = model::tokenize(p.rejected);
    e.rejected.push_back(model::kEndOfText);
    const auto longest = std::max(e.chosen.size(), e.rejected.size());
    if (e.prompt.size() + longest > limit) {
      if (overflow == Overflow::kReject) {
        throw ValidationError("pair '" + p.id + "': prompt (" + std::to_string(e.prompt.size()) +
                              ") + longest response (" + std::to_string(longest) +
                              ") tokens exceed context_length " + std::to_string(context_length));
      }
      // Keep at least half the window for responses.
      const auto prompt_cap = std::max<std::size_t>(1, limit / 2);
      if (e.prompt.size() > prompt_cap) {
        e.prompt.erase(e.prompt.begin(), e.prompt.end() - static_cast<std::ptrdiff_t>(prompt_cap));
      }
      const auto room = limit - e.prompt.size();
      if (e.chosen.size() > room) e.chosen.resize(room);
      if (e.rejected.size() > room) e.rejected.resize(room);
    }
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring and gradients

template <typename Scalar>
PairScores score_pair(const Model<Scalar>& policy, const Model<Scalar>& reference, const EncodedPair& pair) {
  PairScores s;
  s.policy_chosen = model::sequence_logprob(policy, pair.prompt, pair.chosen);
  s.policy_rejected = model::sequence_logprob(policy, pair.prompt, pair.rejected);
  s.ref_chosen = model::sequence_logprob(reference, pair.prompt, pair.chosen);
  s.ref_rejected = model::sequence_logprob(reference, pair.prompt, pair.rejected);
  return s;
}

template <typename Scalar>
std::vector<std::pair<double, double>> reference_logprobs(const Model<Scalar>& reference,
                                                          std::span<const EncodedPair> pairs) {
  std::vector<std::pair<double, double>> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.emplace_back(model::sequence_logprob(reference, p.prompt, p.chosen),
                     model::sequence_logprob(reference, p.prompt, p.rejected));
  }
  return out;
}

template <typename Scalar>
std::vector<PairScores> score_pairs(const Model<Scalar>& policy, std::span<const EncodedPair> pairs,
                                    std::span<const std::pair<double, double>> ref) {
  std::vector<PairScores> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    out.push_back({model::sequence_logprob(policy, p.prompt, p.chosen),
                   model::sequence_logprob(policy, p.prompt, p.rejected), ref[i].first, ref[i].second});
  }
  return out;
}

template <typename Scalar>
std::vector<PairScores> accumulate_gradients(Model<Scalar>& policy, std::span<const EncodedPair> batch,
                                             std::span<const std::pair<double, double>> ref, double beta) {
  policy.zero_grad();
  std::vector<PairScores> out;
  out.reserve(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& p = batch[i];
    const auto chosen = model::score_sequence(policy, p.prompt, p.chosen);
    const auto rejected = model::score_sequence(policy, p.prompt, p.rejected);
    const PairScores s{chosen.logprob, rejected.logprob, ref[i].first, ref[i].second};
    DpoLoss l;
    try {
      l = dpo_loss(s, beta);
    } catch (const ValidationError& e) {
      throw TrainingError("pair '" + p.id + "': " + e.what());
    }
    if (!std::isfinite(l.loss)) throw TrainingError("pair '" + p.id + "': loss is not finite");
    // dL/dm, with m = pc - pr - (rc - rr).
    const double g = dpo_loss_grad(l.margin, beta) * inv_n;
    model::backprop_logprob(policy, chosen, g);
    model::backprop_logprob(policy, rejected, -g);
    out.push_back(s);
  }
  return out;
}

double preference_accuracy(std::span<const PairScores> scores, double beta) {
  if (scores.empty()) throw ValidationError("preference_accuracy: empty pair set");
  std::size_t wins = 0;
  for (const auto& s : scores) {
    if (reward_chosen(s, beta) > reward_rejected(s, beta)) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(scores.size());
}

template <typename Scalar>
double preference_accuracy(const Model<Scalar>& policy, const model::ReferenceModel<Scalar>& reference,
                           std::span<const EncodedPair> pairs, double beta) {
  if (pairs.empty()) throw ValidationError("preference_accuracy: empty pair set");
  const auto ref = reference_logprobs(reference.model(), pairs);
  const auto scores = score_pairs(policy, pairs, ref);
  return preference_accuracy(scores, beta);
}

// ---------------------------------------------------------------------------
// Optimizer

template <typename Scalar>
void AdamW::step(Model<Scalar>& model, double lr, double weight_decay) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::size_t slot = 0;
  model.for_each_parameter([&](const std::string&, model::Parameter<Scalar>& p) {
    if (!p.trainable) return;
    if (slot == m_.size()) {
      m_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
    }
    auto& m = m_[slot];
    auto& v = v_[slot];
    ++slot;
    if (p.grad.size() == 0) return;
    const Eigen::MatrixXd g = p.grad.template cast<double>();
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    Eigen::MatrixXd w = p.value.template cast<double>();
    w *= 1.0 - lr * weight_decay;
    w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    p.value = w.template cast<Scalar>();
  });
}

// ---------------------------------------------------------------------------
// Training

double TrainingTrace::best_validation_loss() const {
  for (const auto& v : validation) {
    if (v.epoch == best_epoch) return v.loss;
  }
  throw ValidationError("training trace has no validation records");
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string TrainingTrace::steps_csv() const {
  std::string out = "step,lr,loss,mean_margin,preference_accuracy\n";
  for (const auto& s : steps) {
    out += std::to_string(s.step) + "," + fmt(s.lr) + "," + fmt(s.loss) + "," + fmt(s.mean_margin) + "," +
           fmt(s.preference_accuracy) + "\n";
  }
  return out;
}

std::string TrainingTrace::validation_csv() const {
  std::string out = "epoch,step,val_loss,val_preference_accuracy\n";
  for (const auto& v : validation) {
    out += std::to_string(v.epoch) + "," + std::to_string(v.step) + "," + fmt(v.loss) + "," +
           fmt(v.preference_accuracy) + "\n";
  }
  return out;
}

template <typename Scalar>
TrainResult<Scalar> train(Model<Scalar> policy, const model::ReferenceModel<Scalar>& reference,
                          std::span<const EncodedPair> train_pairs, std::span<const EncodedPair> val_pairs,
                          const DpoConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (train_pairs.empty()) throw ValidationError("train: empty training set");
  if (val_pairs.empty()) throw ValidationError("train: empty validation set");

  // The reference never changes, so its log-likelihoods are computed once.
  const auto ref_train = reference_logprobs(reference.model(), train_pairs);
  const auto ref_val = reference_logprobs(reference.model(), val_pairs);

  TrainingTrace trace;
  auto validate = [&](int epoch, int step) {
    const auto scores = score_pairs(policy, val_pairs, ref_val);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!std::isfinite(scores[i].policy_chosen) || !std::isfinite(scores[i].policy_rejected)) {
        throw TrainingError("validation pair '" + val_pairs[i].id + "': log-likelihood is not finite");
      }
    }
    const auto st = batch_stats(scores, config.beta);
    ValidationRecord r{epoch, step, st.loss, st.preference_accuracy};
    if (!std::isfinite(r.loss)) throw TrainingError("validation loss is not finite");
    trace.validation.push_back(r);
    if (hooks.on_validation) hooks.on_validation(r);
    return r.loss;
  };

  double best_loss = validate(0, 0);
  Model<Scalar> best = policy;
  int bad = 0;
  int step = 0;
  AdamW opt;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_pairs.size());
  std::vector<EncodedPair> batch;
  std::vector<std::pair<double, double>> batch_ref;

  for (int epoch = 1; epoch <= config.epochs && step < config.total_steps; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    for (std::size_t start = 0; start < order.size() && step < config.total_steps;
         start += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      batch_ref.clear();
      for (auto k = start; k < end; ++k) {
        batch.push_back(train_pairs[order[k]]);
        batch_ref.push_back(ref_train[order[k]]);
      }
      const auto scores = accumulate_gradients(policy, batch, batch_ref, config.beta);
      ++step;
      const double lr = lr_at(step, config);
      opt.step(policy, lr, config.weight_decay);
      const auto st = batch_stats(scores, config.beta);
      StepRecord rec{step, lr, st.loss, st.mean_margin, st.preference_accuracy};
      trace.steps.push_back(rec);
      if (hooks.on_step) hooks.on_step(rec);
    }

    const double loss = validate(epoch, step);
    if (loss < best_loss) {
      best_loss = loss;
      best = policy;
      trace.best_epoch = epoch;
      bad = 0;
    } else if (++bad >= config.patience) {
      trace.stopped_early = true;
      break;
    }
  }
  best.zero_grad();
  return {std::move(best), std::move(trace)};
}

#define PREFALIGN_INSTANTIATE(S)                                                                       \
  template PairScores score_pair(const Model<S>&, const Model<S>&, const EncodedPair&);                \
  template std::vector<PairScores> accumulate_gradients(Model<S>&, std::span<const EncodedPair>,       \
                                                        std::span<const std::pair<double, double>>,    \
                                                        double);                                       \
  template std::vector<std::pair<double, double>> reference_logprobs(const Model<S>&,                  \
                                                                     std::span<const EncodedPair>);    \
  template std::vector<PairScores> score_pairs(const Model<S>&, std::span<const EncodedPair>,          \
                                               std::span<const std::pair<double, double>>);            \
  template double preference_accuracy(const Model<S>&, const model::ReferenceModel<S>&,                \
                                      std::span<const EncodedPair>, double);                           \
  template void AdamW::step(Model<S>&, double, double);                                                \
  template TrainResult<S> train(Model<S>, const model::ReferenceModel<S>&, std::span<const EncodedPair>, \
                                std::span<const EncodedPair>, const DpoConfig&, const TrainHooks&);

PREFALIGN_INSTANTIATE(float)
PREFALIGN_INSTANTIATE(double)

#undef PREFALIGN_INSTANTIATE

}  // namespace prefalign::dpo
