#include "prefalign/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace prefalign::model {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kInitStd = 0.02;

}  // namespace

// ---------------------------------------------------------------------------
// Tokenizer

Tokens tokenize(std::string_view text) {
  Tokens out;
  out.reserve(text.size());
  for (char c : text) out.push_back(static_cast<unsigned char>(c));
  return out;
}

std::string detokenize(std::span<const TokenId> tokens, int vocab_size) {
  std::string out;
  out.reserve(tokens.size());
  for (auto t : tokens) {
    if (t < 0 || t >= vocab_size || t > 255) {
      throw std::out_of_range("token id " + std::to_string(t) + " outside vocabulary of " +
                              std::to_string(vocab_size));
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

void ModelConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("model: vocab_size must be >= 2");
  if (vocab_size > 256) throw ConfigError("model: byte-level vocab_size must be <= 256");
  if (context_length < 2) throw ConfigError("model: context_length must be >= 2");
  if (layers < 1) throw ConfigError("model: layers must be >= 1");
  if (heads < 1) throw ConfigError("model: heads must be >= 1");
  if (embed_dim < 1 || embed_dim % heads != 0) {
    throw ConfigError("model: embed_dim must be a positive multiple of heads");
  }
}

void LoraConfig::validate() const {
  if (rank < 1) throw ConfigError("lora: rank must be >= 1");
  if (!(alpha > 0)) throw ConfigError("lora: alpha must be > 0");
  if (targets.empty()) throw ConfigError("lora: at least one target is required");
  for (const auto& t : targets) {
    if (std::find(kProjectionNames.begin(), kProjectionNames.end(), t) == kProjectionNames.end()) {
      throw ConfigError("lora: unknown target '" + t + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Construction

template <typename Scalar>
Projection<Scalar>* Block<Scalar>::projection(std::string_view name) {
  return const_cast<Projection<Scalar>*>(std::as_const(*this).projection(name));
}

template <typename Scalar>
const Projection<Scalar>* Block<Scalar>::projection(std::string_view name) const {
  if (name == "q_proj") return &q;
  if (name == "k_proj") return &k;
  if (name == "v_proj") return &v;
  if (name == "o_proj") return &o;
  return nullptr;
}

namespace {

template <typename Scalar>
Parameter<Scalar> normal_param(std::mt19937_64& rng, int rows, int cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Parameter<Scalar> p;
  p.value.resize(rows, cols);
  // Column-major fill order keeps the draw sequence independent of Scalar.
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) p.value(r, c) = static_cast<Scalar>(dist(rng));
  }
  return p;
}

template <typename Scalar>
Parameter<Scalar> ones_param(int rows) {
  Parameter<Scalar> p;
  p.value = Matrix<Scalar>::Ones(rows, 1);
  return p;
}

}  // namespace

template <typename Scalar>
Model<Scalar>::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const int d = config_.embed_dim;
  const int h = config_.hidden_dim();
  const double out_std = kInitStd / std::sqrt(2.0 * config_.layers);
  token_embedding = normal_param<Scalar>(rng, d, config_.vocab_size, kInitStd);
  position_embedding = normal_param<Scalar>(rng, d, config_.context_length, kInitStd);
  blocks.resize(static_cast<std::size_t>(config_.layers));
  for (auto& b : blocks) {
    b.attn_norm = ones_param<Scalar>(d);
    b.q.weight = normal_param<Scalar>(rng, d, d, kInitStd);
    b.k.weight = normal_param<Scalar>(rng, d, d, kInitStd);
    b.v.weight = normal_param<Scalar>(rng, d, d, kInitStd);
    b.o.weight = normal_param<Scalar>(rng, d, d, out_std);
    b.mlp_norm = ones_param<Scalar>(d);
    b.up = normal_param<Scalar>(rng, h, d, kInitStd);
    b.down = normal_param<Scalar>(rng, d, h, out_std);
  }
  final_norm = ones_param<Scalar>(d);
  lm_head = normal_param<Scalar>(rng, config_.vocab_size, d, kInitStd);
}

template <typename Scalar>
void Model<Scalar>::zero_grad() {
  for_each_parameter([](const std::string&, Parameter<Scalar>& p) {
    if (p.grad.size() != 0) p.grad.setZero();
  });
}

template <typename Scalar>
Model<Scalar> apply_lora(Model<Scalar> model, const LoraConfig& config) {
  config.validate();
  if (model.lora_) throw ConfigError("lora: model already carries adapters");
  model.for_each_parameter([](const std::string&, Parameter<Scalar>& p) { p.trainable = false; });
  std::mt19937_64 rng(config.seed);
  const int d = model.config().embed_dim;
  // Kaiming-uniform bound for A, as in common LoRA implementations.
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& block : model.blocks) {
    for (const auto& target : config.targets) {
      auto* proj = block.projection(target);
      if (proj == nullptr) throw ConfigError("lora: unknown target '" + target + "'");
      LoraFactors<Scalar> f;
      const auto d_out = proj->weight.value.rows();
      const auto d_in = proj->weight.value.cols();
      f.a.value.resize(config.rank, d_in);
      for (Eigen::Index c = 0; c < d_in; ++c) {
        for (int r = 0; r < config.rank; ++r) f.a.value(r, c) = static_cast<Scalar>(dist(rng));
      }
      f.b.value = Matrix<Scalar>::Zero(d_out, config.rank);
      f.scale = static_cast<Scalar>(config.scale());
      proj->lora = std::move(f);
    }
  }
  model.lora_ = config;
  return model;
}

template <typename Scalar>
Model<Scalar> merge_lora(Model<Scalar> model) {
  for (auto& block : model.blocks) {
    for (auto name : kProjectionNames) {
      auto* proj = block.projection(name);
      if (!proj->lora) continue;
      proj->weight.value.noalias() += proj->lora->scale * (proj->lora->b.value * proj->lora->a.value);
      proj->lora.reset();
    }
  }
  model.lora_.reset();
  model.for_each_parameter([](const std::string&, Parameter<Scalar>& p) {
    p.trainable = true;
    p.grad.resize(0, 0);
  });
  return model;
}

template <typename Scalar>
ParameterCounts count_parameters(const Model<Scalar>& model) {
  ParameterCounts c;
  model.for_each_parameter([&](const std::string&, const Parameter<Scalar>& p) {
    const auto n = static_cast<std::size_t>(p.value.size());
    c.total += n;
    if (p.trainable) c.trainable += n;
  });
  return c;
}

template <typename Scalar>
double trainable_fraction(const Model<Scalar>& model) {
  const auto c = count_parameters(model);
  return static_cast<double>(c.trainable) / static_cast<double>(c.total);
}

template <typename Scalar>
bool parameters_equal(const Model<Scalar>& a, const Model<Scalar>& b) {
  std::vector<std::pair<std::string, const Parameter<Scalar>*>> pa, pb;
  a.for_each_parameter([&](const std::string& n, const Parameter<Scalar>& p) { pa.emplace_back(n, &p); });
  b.for_each_parameter([&](const std::string& n, const Parameter<Scalar>& p) { pb.emplace_back(n, &p); });
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const auto& x = pa[i].second->value;
    const auto& y = pb[i].second->value;
    if (pa[i].first != pb[i].first || x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), sizeof(Scalar) * static_cast<std::size_t>(x.size())) != 0) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

template <typename Scalar>
void accumulate(Parameter<Scalar>& p, const Matrix<Scalar>& delta) {
  if (!p.trainable) return;
  if (p.grad.size() == 0) p.grad = Matrix<Scalar>::Zero(p.value.rows(), p.value.cols());
  p.grad += delta;
}

template <typename Scalar>
Matrix<Scalar> linear_forward(const Projection<Scalar>& proj, const Matrix<Scalar>& x,
                              detail::LinearCache<Scalar>& cache) {
  cache.input = x;
  Matrix<Scalar> y = proj.weight.value * x;
  if (proj.lora) {
    cache.low_rank = proj.lora->a.value * x;
    y.noalias() += proj.lora->scale * (proj.lora->b.value * cache.low_rank);
  }
  return y;
}

template <typename Scalar>
Matrix<Scalar> plain_forward(const Parameter<Scalar>& w, const Matrix<Scalar>& x,
                             detail::LinearCache<Scalar>& cache) {
  cache.input = x;
  return w.value * x;
}

template <typename Scalar>
Matrix<Scalar> linear_backward(Projection<Scalar>& proj, const detail::LinearCache<Scalar>& cache,
                               const Matrix<Scalar>& dy) {
  Matrix<Scalar> dx = proj.weight.value.transpose() * dy;
  if (proj.weight.trainable) accumulate(proj.weight, Matrix<Scalar>(dy * cache.input.transpose()));
  if (proj.lora) {
    auto& f = *proj.lora;
    const Matrix<Scalar> d_low = f.scale * (f.b.value.transpose() * dy);  // r x T
    if (f.b.trainable) accumulate(f.b, Matrix<Scalar>(f.scale * (dy * cache.low_rank.transpose())));
    if (f.a.trainable) accumulate(f.a, Matrix<Scalar>(d_low * cache.input.transpose()));
    dx.noalias() += f.a.value.transpose() * d_low;
  }
  return dx;
}

template <typename Scalar>
Matrix<Scalar> plain_backward(Parameter<Scalar>& w, const detail::LinearCache<Scalar>& cache,
                              const Matrix<Scalar>& dy) {
  if (w.trainable) accumulate(w, Matrix<Scalar>(dy * cache.input.transpose()));
  return w.value.transpose() * dy;
}

template <typename Scalar>
Matrix<Scalar> rmsnorm_forward(const Parameter<Scalar>& gain, const Matrix<Scalar>& x,
                               detail::NormCache<Scalar>& cache) {
  const auto d = static_cast<Scalar>(x.rows());
  cache.rinv = ((x.colwise().squaredNorm().array() / d + Scalar(kNormEps)).rsqrt()).transpose();
  cache.normalized = x * cache.rinv.asDiagonal();
  return gain.value.col(0).asDiagonal() * cache.normalized;
}

template <typename Scalar>
Matrix<Scalar> rmsnorm_backward(Parameter<Scalar>& gain, const detail::NormCache<Scalar>& cache,
                                const Matrix<Scalar>& dy) {
  const auto& xhat = cache.normalized;
  if (gain.trainable) accumulate(gain, Matrix<Scalar>(dy.cwiseProduct(xhat).rowwise().sum()));
  const Matrix<Scalar> dxhat = gain.value.col(0).asDiagonal() * dy;
  const auto d = static_cast<Scalar>(xhat.rows());
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dots = xhat.cwiseProduct(dxhat).colwise().sum() / d;
  Matrix<Scalar> dx = dxhat - xhat * dots.asDiagonal();
  return dx * cache.rinv.asDiagonal();
}

template <typename Scalar>
Scalar gelu(Scalar x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  const double xd = x;
  return static_cast<Scalar>(0.5 * xd * (1.0 + std::tanh(c * (xd + 0.044715 * xd * xd * xd))));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  constexpr double c = 0.7978845608028654;
  const double xd = x;
  const double t = std::tanh(c * (xd + 0.044715 * xd * xd * xd));
  return static_cast<Scalar>(0.5 * (1.0 + t) +
                             0.5 * xd * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * xd * xd));
}

template <typename Scalar>
detail::Trace<Scalar> forward(const Model<Scalar>& model, std::span<const TokenId> tokens) {
  const auto& cfg = model.config();
  const auto t_len = static_cast<Eigen::Index>(tokens.size());
  if (tokens.empty()) throw ValidationError("forward: empty token sequence");
  if (t_len > cfg.context_length) {
    throw ValidationError("sequence of " + std::to_string(t_len) + " tokens exceeds context_length " +
                          std::to_string(cfg.context_length));
  }
  detail::Trace<Scalar> tr;
  tr.tokens.assign(tokens.begin(), tokens.end());
  const int d = cfg.embed_dim;
  const int hd = cfg.head_dim();
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));

  Matrix<Scalar> x(d, t_len);
  for (Eigen::Index i = 0; i < t_len; ++i) {
    const auto tok = tokens[static_cast<std::size_t>(i)];
    if (tok < 0 || tok >= cfg.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(tok) + " outside vocabulary");
    }
    x.col(i) = model.token_embedding.value.col(tok) + model.position_embedding.value.col(i);
  }

  tr.blocks.resize(model.blocks.size());
  for (std::size_t l = 0; l < model.blocks.size(); ++l) {
    const auto& b = model.blocks[l];
    auto& c = tr.blocks[l];
    const Matrix<Scalar> n1 = rmsnorm_forward(b.attn_norm, x, c.attn_norm);
    c.queries = linear_forward(b.q, n1, c.q);
    c.keys = linear_forward(b.k, n1, c.k);
    c.values = linear_forward(b.v, n1, c.v);
    Matrix<Scalar> attn(d, t_len);
    c.probs.resize(static_cast<std::size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
      const auto qh = c.queries.middleRows(h * hd, hd);
      const auto kh = c.keys.middleRows(h * hd, hd);
      const auto vh = c.values.middleRows(h * hd, hd);
      Matrix<Scalar> s = scale * (qh.transpose() * kh);
      auto& p = c.probs[static_cast<std::size_t>(h)];
      p = Matrix<Scalar>::Zero(t_len, t_len);
      for (Eigen::Index i = 0; i < t_len; ++i) {
        const auto row = s.row(i).head(i + 1);
        const Scalar m = row.maxCoeff();
        auto e = (row.array() - m).exp();
        p.row(i).head(i + 1) = e / e.sum();
      }
      attn.middleRows(h * hd, hd).noalias() = vh * p.transpose();
    }
    x += linear_forward(b.o, attn, c.o);

    const Matrix<Scalar> n2 = rmsnorm_forward(b.mlp_norm, x, c.mlp_norm);
    c.pre_activation = plain_forward(b.up, n2, c.up);
    const Matrix<Scalar> act = c.pre_activation.unaryExpr([](Scalar v) { return gelu(v); });
    x += plain_forward(b.down, act, c.down);
  }
  const Matrix<Scalar> nf = rmsnorm_forward(model.final_norm, x, tr.final_norm);
  tr.logits = model.lm_head.value * nf;
  return tr;
}

template <typename Scalar>
void backward(Model<Scalar>& model, const detail::Trace<Scalar>& tr, const Matrix<Scalar>& dlogits) {
  const auto& cfg = model.config();
  const int hd = cfg.head_dim();
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));
  const auto t_len = static_cast<Eigen::Index>(tr.tokens.size());

  if (model.lm_head.trainable) {
    const Matrix<Scalar> nf = model.final_norm.value.col(0).asDiagonal() * tr.final_norm.normalized;
    accumulate(model.lm_head, Matrix<Scalar>(dlogits * nf.transpose()));
  }
  Matrix<Scalar> dx = rmsnorm_backward(model.final_norm, tr.final_norm,
                                       Matrix<Scalar>(model.lm_head.value.transpose() * dlogits));

  for (std::size_t li = model.blocks.size(); li-- > 0;) {
    auto& b = model.blocks[li];
    const auto& c = tr.blocks[li];

    // MLP residual branch.
    Matrix<Scalar> dact = plain_backward(b.down, c.down, dx);
    dact.array() *= c.pre_activation.unaryExpr([](Scalar v) { return gelu_grad(v); }).array();
    dx += rmsnorm_backward(b.mlp_norm, c.mlp_norm, plain_backward(b.up, c.up, dact));

    // Attention residual branch.
    const Matrix<Scalar> dattn = linear_backward(b.o, c.o, dx);
    Matrix<Scalar> dq(cfg.embed_dim, t_len), dk(cfg.embed_dim, t_len), dv(cfg.embed_dim, t_len);
    for (int h = 0; h < cfg.heads; ++h) {
      const auto& p = c.probs[static_cast<std::size_t>(h)];
      const auto qh = c.queries.middleRows(h * hd, hd);
      const auto kh = c.keys.middleRows(h * hd, hd);
      const auto vh = c.values.middleRows(h * hd, hd);
      const auto doh = dattn.middleRows(h * hd, hd);
      dv.middleRows(h * hd, hd).noalias() = doh * p;
      const Matrix<Scalar> dp = doh.transpose() * vh;  // T x T
      Matrix<Scalar> ds = Matrix<Scalar>::Zero(t_len, t_len);
      for (Eigen::Index i = 0; i < t_len; ++i) {
        const auto pr = p.row(i).head(i + 1);
        const auto dpr = dp.row(i).head(i + 1);
        const Scalar dot = pr.dot(dpr);
        ds.row(i).head(i + 1) = pr.array() * (dpr.array() - dot);
      }
      dq.middleRows(h * hd, hd).noalias() = scale * (kh * ds.transpose());
      dk.middleRows(h * hd, hd).noalias() = scale * (qh * ds);
    }
    Matrix<Scalar> dn1 = linear_backward(b.q, c.q, dq);
    dn1 += linear_backward(b.k, c.k, dk);
    dn1 += linear_backward(b.v, c.v, dv);
    dx += rmsnorm_backward(b.attn_norm, c.attn_norm, dn1);
  }

  const bool tok_train = model.token_embedding.trainable;
  const bool pos_train = model.position_embedding.trainable;
  if (tok_train || pos_train) {
    Matrix<Scalar> dtok = Matrix<Scalar>::Zero(model.token_embedding.value.rows(),
                                               model.token_embedding.value.cols());
    Matrix<Scalar> dpos = Matrix<Scalar>::Zero(model.position_embedding.value.rows(),
                                               model.position_embedding.value.cols());
    for (Eigen::Index i = 0; i < t_len; ++i) {
      dtok.col(tr.tokens[static_cast<std::size_t>(i)]) += dx.col(i);
      dpos.col(i) += dx.col(i);
    }
    accumulate(model.token_embedding, dtok);
    accumulate(model.position_embedding, dpos);
  }
}

template <typename Scalar>
void check_lengths(const ModelConfig& cfg, std::size_t prompt, std::size_t response) {
  if (prompt == 0) throw ValidationError("sequence_logprob: prompt must be non-empty");
  if (response == 0) throw ValidationError("sequence_logprob: response must be non-empty");
  if (prompt + response > static_cast<std::size_t>(cfg.context_length)) {
    throw ValidationError("prompt (" + std::to_string(prompt) + ") + response (" +
                          std::to_string(response) + ") tokens exceed context_length " +
                          std::to_string(cfg.context_length));
  }
}

// log softmax of column `col` evaluated at `token`, in double.
template <typename Scalar>
double log_softmax_at(const Matrix<Scalar>& logits, Eigen::Index col, TokenId token) {
  const auto column = logits.col(col).template cast<double>();
  const double m = column.maxCoeff();
  const double lse = m + std::log((column.array() - m).exp().sum());
  return column(token) - lse;
}

}  // namespace

template <typename Scalar>
Matrix<Scalar> forward_logits(const Model<Scalar>& model, std::span<const TokenId> tokens) {
  return forward(model, tokens).logits;
}

template <typename Scalar>
ScoredSequence<Scalar> score_sequence(const Model<Scalar>& model, std::span<const TokenId> prompt,
                                      std::span<const TokenId> response) {
  check_lengths<Scalar>(model.config(), prompt.size(), response.size());
  Tokens all(prompt.begin(), prompt.end());
  all.insert(all.end(), response.begin(), response.end());
  ScoredSequence<Scalar> out;
  out.prompt_length = prompt.size();
  out.trace = forward(model, all);
  for (std::size_t p = prompt.size(); p < all.size(); ++p) {
    out.logprob += log_softmax_at(out.trace.logits, static_cast<Eigen::Index>(p - 1), all[p]);
  }
  return out;
}

template <typename Scalar>
void backprop_logprob(Model<Scalar>& model, const ScoredSequence<Scalar>& scored, double weight) {
  const auto& tr = scored.trace;
  const auto& logits = tr.logits;
  Matrix<Scalar> dlogits = Matrix<Scalar>::Zero(logits.rows(), logits.cols());
  for (std::size_t p = scored.prompt_length; p < tr.tokens.size(); ++p) {
    const auto col = static_cast<Eigen::Index>(p - 1);
    const auto column = logits.col(col).template cast<double>();
    const double m = column.maxCoeff();
    const Eigen::VectorXd e = (column.array() - m).exp();
    const Eigen::VectorXd softmax = e / e.sum();
    Eigen::VectorXd g = -weight * softmax;
    g(tr.tokens[p]) += weight;
    dlogits.col(col) = g.template cast<Scalar>();
  }
  backward(model, tr, dlogits);
}

template <typename Scalar>
double sequence_logprob(const Model<Scalar>& model, std::span<const TokenId> prompt,
                        std::span<const TokenId> response) {
  return score_sequence(model, prompt, response).logprob;
}

// ---------------------------------------------------------------------------
// Decoding

template <typename Scalar>
Tokens generate_tokens(const Model<Scalar>& model, std::span<const TokenId> prompt,
                       int max_new_tokens, const DecodeOptions& decode) {
  const auto& cfg = model.config();
  if (prompt.empty()) throw ValidationError("generate: empty prompt");
  if (prompt.size() > static_cast<std::size_t>(cfg.context_length)) {
    throw ValidationError("generate: prompt of " + std::to_string(prompt.size()) +
                          " tokens exceeds context_length " + std::to_string(cfg.context_length));
  }
  if (decode.mode == DecodeOptions::Mode::kTemperature && !(decode.temperature > 0)) {
    throw ConfigError("generate: temperature must be > 0");
  }
  std::mt19937_64 rng(decode.seed);
  Tokens seq(prompt.begin(), prompt.end());
  Tokens out;
  for (int step = 0; step < max_new_tokens; ++step) {
    if (seq.size() >= static_cast<std::size_t>(cfg.context_length)) break;
    const auto logits = forward(model, seq).logits;
    const auto last = logits.col(logits.cols() - 1).template cast<double>();
    TokenId next = 0;
    if (decode.mode == DecodeOptions::Mode::kGreedy) {
      Eigen::Index arg = 0;
      last.maxCoeff(&arg);
      next = static_cast<TokenId>(arg);
    } else {
      const Eigen::VectorXd z = last / decode.temperature;
      const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * e.sum();
      double acc = 0.0;
      next = static_cast<TokenId>(e.size() - 1);
      for (Eigen::Index i = 0; i < e.size(); ++i) {
        acc += e(i);
        if (u < acc) {
          next = static_cast<TokenId>(i);
          break;
        }
      }
    }
    if (next == kEndOfText) break;
    seq.push_back(next);
    out.push_back(next);
  }
  return out;
}

template <typename Scalar>
std::string generate(const Model<Scalar>& model, std::string_view prompt, int max_new_tokens,
                     const DecodeOptions& decode) {
  const auto tokens = tokenize(prompt);
  return detokenize(generate_tokens(model, tokens, max_new_tokens, decode), model.config().vocab_size);
}

// ---------------------------------------------------------------------------

#define PREFALIGN_INSTANTIATE(S)                                                              \
  template struct Block<S>;                                                                   \
  template class Model<S>;                                                                    \
  template Model<S> apply_lora(Model<S>, const LoraConfig&);                                  \
  template Model<S> merge_lora(Model<S>);                                                     \
  template ParameterCounts count_parameters(const Model<S>&);                                 \
  template double trainable_fraction(const Model<S>&);                                        \
  template bool parameters_equal(const Model<S>&, const Model<S>&);                           \
  template Matrix<S> forward_logits(const Model<S>&, std::span<const TokenId>);               \
  template ScoredSequence<S> score_sequence(const Model<S>&, std::span<const TokenId>,        \
                                            std::span<const TokenId>);                        \
  template void backprop_logprob(Model<S>&, const ScoredSequence<S>&, double);                \
  template double sequence_logprob(const Model<S>&, std::span<const TokenId>,                 \
                                   std::span<const TokenId>);                                 \
  template Tokens generate_tokens(const Model<S>&, std::span<const TokenId>, int,             \
                                  const DecodeOptions&);                                      \
  template std::string generate(const Model<S>&, std::string_view, int, const DecodeOptions&);

PREFALIGN_INSTANTIATE(float)
PREFALIGN_INSTANTIATE(double)

#undef PREFALIGN_INSTANTIATE

}  // namespace prefalign::model
